//! Parallel against sequential execution of the same workloads.

use std::time::Duration;

use alfeld_core::geometry::{AlfeldSplit, Tetrahedron};
use alfeld_core::linalg::{par, Fp0};
use alfeld_core::spaces::Forge;
use alfeld_core::verify::{check_exactness, check_supersmoothness, sequence};
use criterion::{criterion_group, criterion_main, Criterion};

fn forge() -> Forge<Fp0> {
    Forge::from_split(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap()
}

fn exactness(c: &mut Criterion) {
    let mut g = c.benchmark_group("exactness-V-r4");
    g.sample_size(10).measurement_time(Duration::from_secs(10));
    for (name, on) in [("parallel", true), ("sequential", false)] {
        g.bench_function(name, |b| {
            par::set_enabled(on);
            b.iter(|| {
                let f = forge();
                let spec = sequence(&f, "V", 4).unwrap();
                assert!(check_exactness(&f, &spec).unwrap().passed());
            })
        });
    }
    par::set_enabled(true);
    g.finish();
}

fn supersmooth(c: &mut Criterion) {
    let mut g = c.benchmark_group("supersmooth-r3");
    g.sample_size(10).measurement_time(Duration::from_secs(10));
    for (name, on) in [("parallel", true), ("sequential", false)] {
        g.bench_function(name, |b| {
            par::set_enabled(on);
            b.iter(|| {
                let f = forge();
                assert!(check_supersmoothness(&f, 3).unwrap().iter().all(|r| r.passed()));
            })
        });
    }
    par::set_enabled(true);
    g.finish();
}

criterion_group!(benches, exactness, supersmooth);
criterion_main!(benches);
