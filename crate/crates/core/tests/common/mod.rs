#![allow(dead_code)]

use std::collections::HashMap;

use paramodular::arith;
use paramodular::quadforms::{self, ClassList};
use paramodular::{Mat2, QuadForm};
use rand::Rng;

/// `h(D)` by counting reduced primitive triples directly.
pub fn brute_class_number(d: i64) -> u64 {
    let mut h = 0;
    let mut a = 1;
    while 3 * a * a <= -d {
        for b in -a..=a {
            if (b * b - d) % (4 * a) != 0 {
                continue;
            }
            let c = (b * b - d) / (4 * a);
            if c < a || (b < 0 && (b == -a || a == c)) {
                continue;
            }
            if arith::gcd_all(&[a, b, c]) == 1 {
                h += 1;
            }
        }
        a += 1;
    }
    h
}

/// `h(D) = −(w / 2|D|) Σ_{n<|D|} χ_D(n) n`.
pub fn analytic_class_number(d: i64) -> u64 {
    let m = -d;
    let s: i64 = (1..m).map(|n| arith::kronecker(d, n) as i64 * n).sum();
    let w = arith::unit_count(d) as i64;
    let num = -w * s;
    assert_eq!(num % (2 * m), 0, "class number formula not integral at {d}");
    (num / (2 * m)) as u64
}

/// A word in `±I`, `(1 k; 0 1)` and `(1 0; Nk 1)`, then multiplied by a random
/// Bézout element with bottom-left entry in `NZ`. The word stops growing once an
/// entry passes `10⁴`, which keeps transformed forms within `i64`.
pub fn random_gamma0<R: Rng>(rng: &mut R, level: i64) -> Mat2 {
    let mut u = Mat2::IDENTITY;
    for _ in 0..rng.gen_range(1..=4) {
        let k = rng.gen_range(-2..=2);
        let g = if rng.gen_bool(0.5) { Mat2::new(1, k, 0, 1) } else { Mat2::new(1, 0, level * k, 1) };
        let next = u.mul(&g);
        if [next.a, next.b, next.c, next.d].iter().any(|e| e.abs() > 10_000) {
            break;
        }
        u = next;
    }
    if rng.gen_bool(0.5) {
        u = u.mul(&Mat2::new(-1, 0, 0, -1));
    }
    loop {
        let c = level * rng.gen_range(-3..=3);
        let d: i64 = rng.gen_range(-7..=7);
        if arith::gcd(c, d) != 1 {
            continue;
        }
        let (g, x, y) = ext_gcd(d, c);
        debug_assert_eq!(g.abs(), 1);
        // a d − b c = 1 with a = x/g, b = −y/g.
        let (a, b) = (x * g, -y * g);
        let k = rng.gen_range(-2..=2);
        let m = Mat2::new(a + k * c, b + k * d, c, d);
        assert!(m.in_gamma0(level));
        return u.mul(&m);
    }
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// Classes of discriminant `Δ`, cached.
#[derive(Default)]
pub struct ClassCache(HashMap<(i64, i64), ClassList>);

impl ClassCache {
    pub fn get(&mut self, level: i64, delta: i64) -> &ClassList {
        self.0
            .entry((level, delta))
            .or_insert_with(|| quadforms::enumerate_classes(level, delta, None).expect("valid discriminant"))
    }
}

/// A class representative of discriminant `ℓD` for a random fundamental `D`
/// with `ℓD < 0` and `|ℓD| ≤ bound`, primitive at `ℓ`.
pub fn random_form<R: Rng>(rng: &mut R, cache: &mut ClassCache, level: i64, ell: i64, bound: i64) -> QuadForm {
    let ds: Vec<i64> = if ell > 0 {
        arith::fundamental_discriminants(-bound / ell, -1)
    } else {
        arith::fundamental_discriminants(1, bound / -ell)
    };
    loop {
        let d = ds[rng.gen_range(0..ds.len())];
        let cl = cache.get(level, ell * d);
        if cl.is_empty() {
            continue;
        }
        let t = cl.reps[rng.gen_range(0..cl.len())];
        if arith::gcd_all(&[t.a, t.b, t.c, ell]) == 1 {
            return t;
        }
    }
}
