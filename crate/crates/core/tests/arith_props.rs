mod common;

use paramodular::arith::{self, kronecker};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn kronecker_multiplicative_in_top(a in -500i64..500, b in -500i64..500, n in -500i64..500) {
        prop_assume!(n != 0);
        prop_assert_eq!(kronecker(a * b, n), kronecker(a, n) * kronecker(b, n));
    }

    #[test]
    fn kronecker_multiplicative_in_bottom(a in -500i64..500, m in -500i64..500, n in -500i64..500) {
        prop_assume!(m != 0 && n != 0);
        prop_assert_eq!(kronecker(a, m * n), kronecker(a, m) * kronecker(a, n));
    }
}

proptest! {
    #[test]
    fn quadratic_reciprocity(m in 0i64..5000, n in 0i64..5000) {
        let (m, n) = (2 * m + 1, 2 * n + 1);
        prop_assume!(arith::gcd(m, n) == 1);
        let sign = if ((m - 1) / 2 * ((n - 1) / 2)) % 2 == 0 { 1 } else { -1 };
        prop_assert_eq!(kronecker(m, n) * kronecker(n, m), sign);
    }

    #[test]
    fn factorization_multiplies_back(n in 1u64..1_000_000_000_000) {
        let f = arith::factor(n);
        prop_assert_eq!(f.iter().map(|&(p, e)| p.pow(e)).product::<u64>(), n);
        prop_assert!(f.iter().all(|&(p, _)| arith::is_prime(p)));
    }
}

#[test]
fn kronecker_negative_one_is_sign() {
    assert_eq!(kronecker(-5, -1), -1);
    assert_eq!(kronecker(5, -1), 1);
    // χ_{−4} is odd.
    assert_eq!(kronecker(-4, -1), -1);
}

#[test]
fn class_numbers_against_two_oracles() {
    for d in arith::fundamental_discriminants(-3000, -1) {
        let h = arith::class_data(d).unwrap().h;
        assert_eq!(h, common::brute_class_number(d), "D = {d}");
        assert_eq!(h, common::analytic_class_number(d), "D = {d}");
    }
}

#[test]
fn special_value_at_one_by_abel_summation() {
    for d in [-3i64, -4, -7, -8, -15] {
        let (l0, l1) = arith::dirichlet_special_values(d).unwrap();
        // Mean of the partial sums over one period past 10⁶ terms.
        let m = 1_000_000i64;
        let q = d.abs();
        let mut partial: f64 = (1..=m).map(|n| kronecker(d, n) as f64 / n as f64).sum();
        let mut mean = 0.0;
        for n in m + 1..=m + q {
            partial += kronecker(d, n) as f64 / n as f64;
            mean += partial / q as f64;
        }
        assert!((mean - l1).abs() < 1e-6, "D = {d}: {mean} vs {l1}");
        let h = arith::class_data(d).unwrap();
        assert_eq!(*l0.numer() * h.w as i64, 2 * h.h as i64 * *l0.denom());
    }
}
