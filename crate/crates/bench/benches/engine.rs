use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use alliance_core::generate::{random_instance, Deadlines, GenParams};
use alliance_core::oracles::{schedule_energy_general, EnergyJob};
use alliance_core::stability::justified_objection_search;
use alliance_core::{GameCache, GameConfig, Instance, Job, Objective, OracleConfig, Organization};

fn unit_orgs(n: usize, jobs: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Instance {
        objective: Objective::SumEnergy,
        alpha: Some(2.5),
        organizations: (0..n)
            .map(|k| Organization {
                id: format!("O{}", k + 1),
                machines: rng.gen_range(1..=4),
                jobs: vec![Job::unit_with_deadline(2.0); jobs],
            })
            .collect(),
    }
}

fn detect(c: &mut Criterion) {
    let mut group = c.benchmark_group("detect_alliance");
    for n in [4usize, 10, 20, 40] {
        let inst = unit_orgs(n, 50, n as u64);
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| {
                let g = GameCache::new(inst, GameConfig::default());
                black_box(g.detect_alliance(inst.grand_coalition()).unwrap())
            })
        });
    }
    group.finish();
}

fn convex(c: &mut Criterion) {
    let mut group = c.benchmark_group("convex_energy");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [4usize, 8, 16] {
        let jobs: Vec<EnergyJob> = (0..n)
            .map(|_| EnergyJob {
                volume: f64::from(rng.gen_range(1..=8u32)) * 0.25,
                deadline: f64::from(rng.gen_range(1..=8u32)) * 0.5,
            })
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &jobs, |b, jobs| {
            b.iter(|| schedule_energy_general(jobs, 3, 2.5, &OracleConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn search(c: &mut Criterion) {
    let mut group = c.benchmark_group("objection_search");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in [4usize, 6, 8] {
        let inst = random_instance(
            &mut rng,
            &GenParams {
                objective: Objective::SumCompletion,
                orgs: (n, n),
                jobs: (1, 5),
                deadlines: Deadlines::Common(1.0),
                ..GenParams::default()
            },
        );
        let s = inst.grand_coalition();
        let x = vec![0.0; n];
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| {
                let g = GameCache::new(inst, GameConfig::default());
                black_box(justified_objection_search(&g, s, &x, 1e-2).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, detect, convex, search);
criterion_main!(benches);
