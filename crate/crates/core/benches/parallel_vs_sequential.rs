use criterion::{criterion_group, criterion_main, Criterion};

use iglab::completeness::hopf_rinow_report;
use iglab::forms::random_identity_suite;
use iglab::gallery::run_gallery;
use iglab::metric::SigmaChoice;
use iglab::registry::lookup;
use iglab::{Budget, Execution};

const MODES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn identity_suite(c: &mut Criterion) {
    let mut group = c.benchmark_group("identity_suite");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| random_identity_suite(3, 256, 24, exec)));
    }
    group.finish();
}

fn hopf_rinow(c: &mut Criterion) {
    let fam = lookup("ex5.2").unwrap().build(&Default::default()).unwrap();
    let windows = [64, 128, 256, 512];
    let mut group = c.benchmark_group("hopf_rinow");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| hopf_rinow_report(&fam, SigmaChoice::Sigma0, &windows, exec).unwrap())
        });
    }
    group.finish();
}

fn gallery(c: &mut Criterion) {
    let mut group = c.benchmark_group("gallery_quick");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| run_gallery(&[], Budget::Quick, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, identity_suite, hopf_rinow, gallery);
criterion_main!(benches);
