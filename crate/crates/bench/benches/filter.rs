use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use safeland_bench::contested_tick;
use safeland_core::scenarios::{scenario_one, scenario_two};
use safeland_core::{assemble_constraints, filter, run_scenario, solve_qp, Fidelity};

fn filter_step(c: &mut Criterion) {
    let f = contested_tick();
    let none = BTreeSet::new();
    let cs = assemble_constraints(&f.states, &f.targets, &f.lcbf, &f.radii, &f.cfg, &none).unwrap();

    let mut g = c.benchmark_group("filter_n3");
    g.bench_function("assemble", |b| {
        b.iter(|| assemble_constraints(black_box(&f.states), &f.targets, &f.lcbf, &f.radii, &f.cfg, &none))
    });
    g.bench_function("solve_qp", |b| b.iter(|| solve_qp(black_box(&f.u_nom), &cs, &f.cfg)));
    g.bench_function("filter", |b| {
        b.iter(|| {
            filter(
                black_box(&f.u_nom),
                &f.states,
                &f.targets,
                &f.lcbf,
                &f.radii,
                &f.cfg,
                &none,
            )
        })
    });
    g.finish();
}

fn scenarios(c: &mut Criterion) {
    let mut g = c.benchmark_group("scenario");
    g.sample_size(10);
    for (name, cfg) in [
        ("one_kinematic", scenario_one(Fidelity::Kinematic)),
        ("two_kinematic", scenario_two(Fidelity::Kinematic)),
        ("one_full", scenario_one(Fidelity::FullDynamics)),
    ] {
        g.bench_function(name, |b| b.iter(|| run_scenario(black_box(&cfg))));
    }
    g.finish();
}

criterion_group!(benches, filter_step, scenarios);
criterion_main!(benches);
