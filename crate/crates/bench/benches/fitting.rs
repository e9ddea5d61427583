use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cv_arbiter_core::estimators::spline::{fit_smoothing_spline, LambdaGrid};
use cv_arbiter_core::{run_selection, ProcedureSpec, Scenario, Scheme, SplitSchedule, Stream};

fn spline_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("spline_fit");
    let sc = Scenario::case(3).unwrap();
    for n in [100, 400, 1600] {
        let sample = sc.gen_sample(n, &mut Stream::new(1)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &sample, |b, s| {
            b.iter(|| fit_smoothing_spline(s, &LambdaGrid::Default).unwrap())
        });
    }
    group.finish();
}

fn polynomial_fit(c: &mut Criterion) {
    let sample = Scenario::case(2).unwrap().gen_sample(400, &mut Stream::new(2)).unwrap();
    let quad = ProcedureSpec::polynomial(2);
    c.bench_function("poly2_fit_400", |b| b.iter(|| quad.fit(&sample).unwrap()));
}

fn selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("selection");
    group.sample_size(10);
    let procs = ProcedureSpec::default_trio();
    let sample = Scenario::case(1).unwrap().gen_sample(400, &mut Stream::new(3)).unwrap();
    for scheme in [Scheme::SINGLE, Scheme::rlt(100), Scheme::rsv(100)] {
        group.bench_function(scheme.id(), |b| {
            b.iter(|| {
                let mut stream = Stream::new(4);
                run_selection(&procs, &sample, SplitSchedule::ratio(5, 5), scheme, &mut stream).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, spline_fit, polynomial_fit, selection);
criterion_main!(benches);
