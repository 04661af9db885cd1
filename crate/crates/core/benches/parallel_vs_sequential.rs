use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fplm::bayes::{select_semimetric, McmcConfig, Priors};
use fplm::par;
use fplm::regress::{FnpData, SmootherPair};
use fplm::semimetric::SemiMetricSpec;
use fplm::sim::simulate_smooth;

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", false), ("sequential", true)]
}

fn distances_and_weights(c: &mut Criterion) {
    let draw = simulate_smooth(200, 1).unwrap();
    let mut group = c.benchmark_group("pairwise_and_smoother");
    for (label, seq) in modes() {
        group.bench_function(BenchmarkId::new("deriv2_n200", label), |b| {
            par::set_sequential(seq);
            b.iter(|| {
                let metric = SemiMetricSpec::derivative(2).train(&draw.x).unwrap();
                let d = metric.pairwise();
                SmootherPair::new(&d.values, 0.3 * d.values.max()).unwrap()
            });
        });
    }
    par::set_sequential(false);
    group.finish();
}

fn semimetric_selection(c: &mut Criterion) {
    let draw = simulate_smooth(60, 2).unwrap();
    let candidates = [
        SemiMetricSpec::derivative(1),
        SemiMetricSpec::derivative(2),
        SemiMetricSpec::fpca(3),
    ];
    let cfg = McmcConfig {
        burn_in: 50,
        iterations: 200,
        ..Default::default()
    };
    let mut group = c.benchmark_group("select_semimetric");
    group.sample_size(10);
    for (label, seq) in modes() {
        group.bench_function(BenchmarkId::new("fnp_3_candidates", label), |b| {
            par::set_sequential(seq);
            b.iter(|| {
                select_semimetric(
                    &candidates,
                    |s| FnpData::new(&draw.x, draw.g.clone(), *s),
                    &cfg,
                    &Priors::default(),
                )
                .unwrap()
            });
        });
    }
    par::set_sequential(false);
    group.finish();
}

criterion_group!(benches, distances_and_weights, semimetric_selection);
criterion_main!(benches);
