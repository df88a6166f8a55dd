use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_bigint::BigInt;
use num_rational::BigRational;
use paramodular::averages::twisted_average;
use paramodular::coeffstore::gritsenko_table;
use paramodular::lseries::{self, builtin_curve, curve_lseries};
use paramodular::quadforms::{self, genus_character};
use paramodular::{afe, arith, CompletedL, JacobiTable};

fn point_counting(c: &mut Criterion) {
    let curve = builtin_curve("F249").unwrap();
    let mut g = c.benchmark_group("point_counting");
    for p in [1_009u64, 10_007, 99_991] {
        g.bench_with_input(BenchmarkId::new("count_points", p), &p, |b, &p| {
            b.iter(|| lseries::count_points(&curve, black_box(p), 1).unwrap())
        });
    }
    for p in [101u64, 317] {
        g.bench_with_input(BenchmarkId::new("good_euler_factor", p), &p, |b, &p| {
            b.iter(|| lseries::good_euler_factor(&curve, black_box(p)).unwrap())
        });
    }
    g.finish();
}

fn classes(c: &mut Criterion) {
    let mut g = c.benchmark_group("classes");
    g.bench_function("class_data_to_1e4", |b| {
        let discs = arith::fundamental_discriminants(-9_999, -1);
        b.iter(|| discs.iter().map(|&d| arith::class_data(d).unwrap().h).sum::<u64>())
    });
    for (level, d) in [(3i64, -1_151i64), (249, -1_151), (587, -1_004)] {
        g.bench_with_input(BenchmarkId::new("enumerate_classes", format!("N{level}_D{d}")), &(level, d), |b, &(n, d)| {
            b.iter(|| quadforms::enumerate_classes(n, black_box(d), None).unwrap().len())
        });
    }
    let reps = quadforms::enumerate_classes(249, 5 * -1_119, None).unwrap().reps;
    g.bench_function("genus_character_N249", |b| {
        b.iter(|| reps.iter().map(|t| genus_character(t, 5).unwrap()).sum::<i32>())
    });
    g.finish();
}

fn averages(c: &mut Criterion) {
    let mut j = JacobiTable::new(6, 2);
    for d in arith::fundamental_discriminants(-2_000, -1) {
        for rho in quadforms::residues(6, d) {
            j.set(d, rho, BigRational::from_integer(BigInt::from(d.abs() % 11 + 1))).unwrap();
        }
    }
    let table = gritsenko_table(&j, &[(2, 1), (3, 1)], "bench").unwrap();
    c.bench_function("twisted_average_N6_l5_D-307", |b| b.iter(|| twisted_average(&table, 5, black_box(-307)).unwrap()));
}

fn central_values(c: &mut Criterion) {
    let curve = builtin_curve("F249").unwrap();
    let mut g = c.benchmark_group("central_value");
    g.sample_size(10);
    for d in [-4i64, -71] {
        let probe = lseries::twist(&curve_lseries(&curve, 10).unwrap(), d).unwrap();
        let (m, _) = afe::required_terms(&probe, 1e-8, 0).unwrap();
        let cl = CompletedL::new(lseries::twist(&curve_lseries(&curve, m).unwrap(), d).unwrap());
        g.bench_with_input(BenchmarkId::new("afe_sum", d), &cl, |b, cl| b.iter(|| afe::central_value(cl, 1e-8).unwrap()));
    }
    g.bench_function("required_terms", |b| {
        let probe = lseries::twist(&curve_lseries(&curve, 10).unwrap(), -71).unwrap();
        b.iter(|| afe::required_terms(&probe, 1e-8, 0).unwrap())
    });
    g.finish();
}

criterion_group!(benches, point_counting, classes, averages, central_values);
criterion_main!(benches);
