use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use musicaog::io::{
    export_midi, load_model, load_pg, read_dataset, save_model, save_pg, write_histograms_csv,
    write_learn_report_csv, write_trace_csv, ModelMetadata,
};
use musicaog::{
    features, init_sample, learn, run_chain, ChainMode, ChainTrace, DescriptorId, EnergyModel, Error, LearnConfig, MoveSet,
    ParseGraph, Skeleton, SkeletonConfig, TemperatureMap,
};

#[derive(Parser)]
#[command(name = "musicaog", version, about = "Learn, sample and amend music parse graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check parse-graph documents and list every violation.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Learn a model from a directory of parse-graph documents.
    Learn(LearnArgs),
    /// Sample a new parse graph from a model.
    Sample(SampleArgs),
    /// Amend an existing parse graph under per-node temperatures.
    Amend(AmendArgs),
    /// Write the pooled descriptor histograms of a dataset.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 150)]
    chain_steps: u64,
    /// Synthesized population size; defaults to the number of documents.
    #[arg(long)]
    nsyn: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated descriptor ids to consider; the whole bank by default.
    #[arg(long, value_delimiter = ',')]
    descriptors: Option<Vec<u8>>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 150)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skeleton settings (JSON) or a parse-graph document whose radicals are discarded.
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

#[derive(Args)]
struct AmendArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Temperature for every radical; all other nodes are frozen.
    #[arg(long, conflicts_with = "temp_file")]
    temp: Option<f64>,
    /// JSON object mapping node ids to temperatures; unlisted nodes are frozen.
    #[arg(long)]
    temp_file: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    steps: u64,
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure of a command, with its exit status.
#[derive(Debug)]
enum Failure {
    /// Invalid data or an algorithm that cannot proceed.
    Domain(String),
    /// Unreadable input, malformed text or an unwritable output.
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Parse { .. } | Error::SchemaVersion { .. } | Error::Csv(_) => {
                Failure::Usage(e.to_string())
            }
            Error::Validation(report) => Failure::Domain(format!("invalid parse graph:\n{report}")),
            e => Failure::Domain(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Usage(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> musicaog::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { files } => return validate(&files),
        Command::Learn(a) => cmd_learn(&a),
        Command::Sample(a) => cmd_sample(&a),
        Command::Amend(a) => cmd_amend(&a),
        Command::Stats { data, out } => cmd_stats(&data, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn validate(files: &[PathBuf]) -> ExitCode {
    let mut status = 0u8;
    for path in files {
        let outcome = read(path).and_then(|text| load_pg(&text).map_err(Failure::from));
        match outcome {
            Ok(_) => println!("{}: ok", path.display()),
            Err(Failure::Domain(m)) => {
                println!("{}: {m}", path.display());
                status = status.max(1);
            }
            Err(Failure::Usage(m)) => {
                println!("{}: {m}", path.display());
                status = 2;
            }
        }
    }
    ExitCode::from(status)
}

fn cmd_learn(a: &LearnArgs) -> Result<(), Failure> {
    let docs = read_dataset(&a.data).map_err(|e| match e {
        Error::Io(e) => Failure::Usage(format!("{}: {e}", a.data.display())),
        e => Failure::from(e),
    })?;
    let pgs: Vec<ParseGraph> = docs.into_iter().map(|(_, g)| g).collect();
    let cfg = LearnConfig {
        eta: a.eta,
        max_iters: a.max_iters,
        epsilon: a.epsilon,
        chain_steps: a.chain_steps,
        n_syn: a.nsyn,
        seed: a.seed,
        bank: a.descriptors.as_ref().map(|v| v.iter().map(|&d| DescriptorId(d)).collect()),
        ..LearnConfig::default()
    };
    let (model, report) = learn(&pgs, &cfg)?;
    let meta = ModelMetadata {
        learn_config: Some(cfg),
        dataset_sha256: Some(musicaog::io::dataset_hash(&pgs)),
        dataset_size: pgs.len(),
        parameter_count: model.parameter_count(),
    };
    write(&a.out, save_model(&model, &meta))?;
    write(&with_suffix(&a.out, ".report.csv"), csv_bytes(|w| write_learn_report_csv(w, &report))?)?;
    write(
        &with_suffix(&a.out, ".obs.csv"),
        csv_bytes(|w| write_histograms_csv(w, &report.observed, Some(&model)))?,
    )?;
    write(
        &with_suffix(&a.out, ".syn.csv"),
        csv_bytes(|w| write_histograms_csv(w, &report.synthesized, Some(&model)))?,
    )?;
    for f in &report.features {
        println!(
            "descriptor {:>2}: {} updates, discrepancy {:.4} -> {:.4}{}",
            f.descriptor,
            f.updates,
            f.selection_discrepancy(),
            f.final_discrepancy(),
            if f.converged { "" } else { " (not converged)" }
        );
    }
    println!("{} parameters", report.parameter_count);
    Ok(())
}

fn read_model(path: &Path) -> Result<EnergyModel, Failure> {
    Ok(load_model(&read(path)?)?.0)
}

fn write_outputs(prefix: &Path, pg: &ParseGraph, trace: &ChainTrace) -> Result<(), Failure> {
    write(&with_suffix(prefix, ".pg.json"), save_pg(pg))?;
    write(&with_suffix(prefix, ".mid"), export_midi(pg)?)?;
    write(&with_suffix(prefix, ".trace.csv"), csv_bytes(|w| write_trace_csv(w, trace))?)
}

fn cmd_sample(a: &SampleArgs) -> Result<(), Failure> {
    let model = read_model(&a.model)?;
    let skeleton = match &a.skeleton {
        None => SkeletonConfig::default().build()?,
        Some(path) => read_skeleton(path)?,
    };
    let init = init_sample(&model, &skeleton, a.seed)?;
    let (pg, trace) = run_chain(&model, &init, ChainMode::Generate, MoveSet::ALL, a.seed, a.steps)?;
    write_outputs(&a.out, &pg, &trace)?;
    println!(
        "{} radicals, energy {}, acceptance {:.3}",
        pg.radicals().count(),
        musicaog::energy(&model, &pg),
        trace.acceptance_rate()
    );
    Ok(())
}

fn read_skeleton(path: &Path) -> Result<Skeleton, Failure> {
    let text = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    if value.get("format").is_some() {
        return Ok(Skeleton::from_graph(&load_pg(&text)?));
    }
    let cfg: SkeletonConfig =
        serde_json::from_value(value).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(cfg.build()?)
}

fn cmd_amend(a: &AmendArgs) -> Result<(), Failure> {
    let model = read_model(&a.model)?;
    let mut pg = load_pg(&read(&a.input)?)?;
    let temps = match (a.temp, &a.temp_file) {
        (Some(t), _) => Some(TemperatureMap::radicals(&pg, t)),
        (None, Some(path)) => Some(
            serde_json::from_str::<TemperatureMap>(&read(path)?)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
        ),
        (None, None) => None,
    };
    if let Some(temps) = temps {
        temps.assign(&mut pg)?;
    }
    let (out, trace) = run_chain(&model, &pg, ChainMode::amend(a.t0), MoveSet::ALL, a.seed, a.steps)?;
    write_outputs(&a.out, &out, &trace)?;
    let changed = out
        .radicals()
        .filter(|r| pg.node(r.id) != Some(r))
        .count();
    println!(
        "{changed} of {} radicals changed, energy {}, acceptance {:.3}",
        out.radicals().count(),
        musicaog::energy(&model, &out),
        trace.acceptance_rate()
    );
    Ok(())
}

fn cmd_stats(data: &Path, out: &Path) -> Result<(), Failure> {
    let pgs: Vec<ParseGraph> = read_dataset(data)?.into_iter().map(|(_, g)| g).collect();
    let counts = features::pooled_counts(&pgs);
    let hists: Vec<_> = features::list_bank()
        .iter()
        .map(|d| musicaog::Histogram::from_counts(d.id, counts.bins(d.id)))
        .collect();
    write(out, csv_bytes(|w| write_histograms_csv(w, &hists, None))?)
}
