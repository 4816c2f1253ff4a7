use std::io::Write;

use crate::energy::EnergyModel;
use crate::error::Result;
use crate::features::{descriptor, Histogram};
use crate::learner::LearnReport;
use crate::sampler::ChainTrace;

/// Columns `descriptor_id, bin_label, mass, lambda`; `lambda` is blank for
/// descriptors the model has not selected (or when no model is given).
pub fn write_histograms_csv<W: Write>(out: W, hists: &[Histogram], model: Option<&EnergyModel>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["descriptor_id", "bin_label", "mass", "lambda"])?;
    for h in hists {
        let d = descriptor(h.descriptor)?;
        let lambda = model.and_then(|m| m.lambda(h.descriptor));
        for (i, label) in d.labels.iter().enumerate() {
            let l = lambda.map_or(String::new(), |l| l[i].to_string());
            w.write_record([h.descriptor.to_string(), label.clone(), h.mass[i].to_string(), l])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `step, kind, dE, accepted, energy, temperature`.
pub fn write_trace_csv<W: Write>(out: W, trace: &ChainTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "kind", "dE", "accepted", "energy", "temperature"])?;
    for r in &trace.records {
        w.write_record([
            r.step.to_string(),
            r.kind.as_str().to_string(),
            r.delta.to_string(),
            r.accepted.to_string(),
            r.energy.to_string(),
            r.temperature.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (selected descriptor, iteration): columns `order,
/// descriptor_id, descriptor, iteration, discrepancy, converged`. Iteration 0
/// is the discrepancy at selection time.
pub fn write_learn_report_csv<W: Write>(out: W, report: &LearnReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["order", "descriptor_id", "descriptor", "iteration", "discrepancy", "converged"])?;
    for (order, f) in report.features.iter().enumerate() {
        let name = descriptor(f.descriptor)?.name;
        for (it, d) in f.discrepancies.iter().enumerate() {
            w.write_record([
                (order + 1).to_string(),
                f.descriptor.to_string(),
                name.to_string(),
                it.to_string(),
                d.to_string(),
                f.converged.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DescriptorId;
    use crate::sampler::{MoveKind, TraceRecord};

    #[test]
    fn trace_csv_layout() {
        let trace = ChainTrace {
            records: vec![TraceRecord {
                step: 1,
                kind: MoveKind::SetAttr,
                delta: -0.5,
                accepted: true,
                energy: 1.25,
                temperature: 0.1,
            }],
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "step,kind,dE,accepted,energy,temperature\n1,set_attr,-0.5,true,1.25,0.1\n"
        );
    }

    #[test]
    fn histogram_csv_has_blank_lambda_without_model() {
        let h = Histogram::from_counts(DescriptorId::CONTOUR, &[1, 1, 2]);
        let mut buf = Vec::new();
        write_histograms_csv(&mut buf, &[h], None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(3), Some("10,up,0.5,"));
    }
}
