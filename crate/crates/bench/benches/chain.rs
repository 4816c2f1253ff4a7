use criterion::{criterion_group, criterion_main, Criterion};

use musicaog::features::FeatureCounts;
use musicaog::fixtures::chorales;
use musicaog::{
    deduce_relations, energy, energy_delta, Chain, ChainMode, DescriptorId, EnergyModel, MoveSet, PitchVector,
    Proposal,
};

fn model() -> EnergyModel {
    let mut m = EnergyModel::fit(&chorales(), 1e-4);
    for d in [DescriptorId::PITCH_CLASS, DescriptorId::MELODIC_INTERVAL, DescriptorId::DIAD_CLASS] {
        m.select(d).unwrap();
    }
    m
}

fn benches(c: &mut Criterion) {
    let g = chorales().remove(0);
    let m = model();
    let counts = FeatureCounts::of(&g);
    let target = g.radicals().nth(10).unwrap().id;
    let proposal = Proposal::SetPitches {
        node: target,
        pitches: vec![PitchVector::from_midi(67)],
    };

    c.bench_function("deduce_relations", |b| b.iter(|| deduce_relations(&g).unwrap()));
    c.bench_function("energy/full", |b| {
        b.iter(|| {
            let mut next = g.clone();
            proposal.apply(&mut next).unwrap();
            energy(&m, &deduce_relations(&next).unwrap())
        })
    });
    c.bench_function("energy/delta", |b| b.iter(|| energy_delta(&m, &g, &counts, &proposal).unwrap().delta));
    c.bench_function("mh_step", |b| {
        let mut chain = Chain::new(&g, ChainMode::Generate, MoveSet::ALL, 0).unwrap();
        b.iter(|| chain.step(&m).unwrap().accepted)
    });
}

criterion_group!(chain, benches);
criterion_main!(chain);
