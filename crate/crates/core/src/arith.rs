//! Exact integer number theory.
//!
//! Kronecker symbols, factorization of machine-size integers, fundamental
//! discriminants, class numbers of imaginary quadratic orders and the special
//! values `L(0, χ_D)` and `L(1, χ_D)`.
//!
//! Every routine here is a pure function; inputs are assumed to fit in `i64`.

use num_integer::Integer;
use num_rational::Ratio;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Greatest common divisor of two signed integers, always non-negative.
pub fn gcd(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

pub fn gcd_all(values: &[i64]) -> i64 {
    values.iter().fold(0, |g, &v| gcd(g, v))
}

/// `a * b mod m` without overflow.
#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: i64, m: i64) -> Option<i64> {
    let m = m.abs();
    if m == 1 {
        return Some(0);
    }
    let e = a.rem_euclid(m).extended_gcd(&m);
    if e.gcd != 1 {
        return None;
    }
    Some(e.x.rem_euclid(m))
}

/// Deterministic Miller-Rabin for all `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pollard_rho(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    // Brent's variant; the increment is varied until a proper factor appears.
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        let mut q = 1u64;
        let mut ys = 2u64;
        let mut r = 1u64;
        while d == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && d == 1 {
                ys = y;
                for _ in 0..r.min(128) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                d = q.gcd(&n);
                k += 128;
            }
            r *= 2;
        }
        if d == n {
            loop {
                ys = f(ys);
                d = x.abs_diff(ys).gcd(&n);
                if d > 1 {
                    break;
                }
            }
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

/// Prime factorization `n = Π p^e` with primes in increasing order.
pub fn factor(n: u64) -> Vec<(u64, u32)> {
    let mut out: Vec<(u64, u32)> = Vec::new();
    if n <= 1 {
        return out;
    }
    let mut m = n;
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47] {
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
    }
    let mut stack = vec![m];
    let mut primes = Vec::new();
    while let Some(k) = stack.pop() {
        if k == 1 {
            continue;
        }
        if is_prime(k) {
            primes.push(k);
            continue;
        }
        let d = pollard_rho(k);
        stack.push(d);
        stack.push(k / d);
    }
    primes.sort_unstable();
    for p in primes {
        match out.last_mut() {
            Some((q, e)) if *q == p => *e += 1,
            _ => out.push((p, 1)),
        }
    }
    out
}

/// Distinct prime divisors of `|n|`.
pub fn prime_divisors(n: i64) -> Vec<u64> {
    factor(n.unsigned_abs()).into_iter().map(|(p, _)| p).collect()
}

pub fn is_squarefree(n: i64) -> bool {
    n != 0 && factor(n.unsigned_abs()).iter().all(|&(_, e)| e == 1)
}

/// Primes up to and including `limit` (sieve of Eratosthenes).
pub fn primes_up_to(limit: usize) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Smallest-prime-factor table for `0..=limit` (`spf[0] = spf[1] = 0`).
pub fn smallest_prime_factors(limit: usize) -> Vec<u32> {
    let mut spf = vec![0u32; limit + 1];
    for i in 2..=limit {
        if spf[i] == 0 {
            let mut j = i;
            while j <= limit {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}

/// Jacobi symbol `(a/n)` for odd positive `n`.
fn jacobi(a: i64, n: i64) -> i32 {
    debug_assert!(n > 0 && n % 2 == 1);
    let mut a = a.rem_euclid(n);
    let mut n = n;
    let mut result = 1;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            let r = n % 8;
            if r == 3 || r == 5 {
                result = -result;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            result = -result;
        }
        a %= n;
    }
    if n == 1 {
        result
    } else {
        0
    }
}

/// The Kronecker symbol `(a/n)` for arbitrary integers.
///
/// Uses `(a/-1) = sign(a)` and `(a/2) = 0, 1, -1` for `a` even, `a ≡ ±1`,
/// `a ≡ ±3 (mod 8)`, so `n ↦ (D/n)` is the real character `χ_D` of conductor
/// `|D|` for every fundamental discriminant `D`.
pub fn kronecker(a: i64, n: i64) -> i32 {
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    let mut result = 1;
    let mut n = n;
    if n < 0 {
        n = -n;
        if a < 0 {
            result = -result;
        }
    }
    let twos = n.trailing_zeros();
    if twos > 0 {
        if a % 2 == 0 {
            return 0;
        }
        if twos % 2 == 1 {
            let r = a.rem_euclid(8);
            if r == 3 || r == 5 {
                result = -result;
            }
        }
        n >>= twos;
    }
    result * jacobi(a, n)
}

/// A nonzero discriminant `value = fundamental_part · conductor²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub struct Discriminant {
    pub value: i64,
    pub fundamental_part: i64,
    pub conductor: i64,
}

impl Discriminant {
    pub fn new(value: i64) -> Result<Self> {
        fundamental_decomposition(value)
    }

    pub fn is_fundamental(&self) -> bool {
        self.conductor == 1
    }
}

/// True when `d` is a fundamental discriminant (1 counts as fundamental).
pub fn is_fundamental(d: i64) -> bool {
    if d == 1 {
        return true;
    }
    if d == 0 {
        return false;
    }
    match d.rem_euclid(4) {
        1 => is_squarefree(d),
        0 => {
            let m = d / 4;
            matches!(m.rem_euclid(4), 2 | 3) && is_squarefree(m)
        }
        _ => false,
    }
}

/// Write `Δ = Δ₀ f²` with `Δ₀` fundamental.
pub fn fundamental_decomposition(delta: i64) -> Result<Discriminant> {
    if delta == 0 || !matches!(delta.rem_euclid(4), 0 | 1) {
        return Err(Error::NotADiscriminant(delta));
    }
    let mut core: i64 = delta.signum();
    let mut f: i64 = 1;
    for (p, e) in factor(delta.unsigned_abs()) {
        let p = p as i64;
        f *= p.pow(e / 2);
        if e % 2 == 1 {
            core *= p;
        }
    }
    // `core` is the squarefree part; push a factor 2 back if needed.
    let (fund, cond) = if core.rem_euclid(4) == 1 {
        (core, f)
    } else {
        debug_assert!(f % 2 == 0);
        (4 * core, f / 2)
    };
    debug_assert!(is_fundamental(fund));
    Ok(Discriminant {
        value: delta,
        fundamental_part: fund,
        conductor: cond,
    })
}

/// Fundamental discriminants `d` with `lo <= d <= hi`, in increasing order.
pub fn fundamental_discriminants(lo: i64, hi: i64) -> Vec<i64> {
    (lo..=hi).filter(|&d| is_fundamental(d)).collect()
}

/// Reduced positive definite forms `[a, b, c]` of discriminant `disc < 0`:
/// `|b| <= a <= c`, with `b >= 0` whenever `|b| = a` or `a = c`.
pub fn reduced_forms(disc: i64, primitive_only: bool) -> Vec<(i64, i64, i64)> {
    assert!(disc < 0, "reduced_forms needs a negative discriminant");
    let n = -disc;
    let mut out = Vec::new();
    let mut a = 1i64;
    while 3 * a * a <= n {
        for b in -a..=a {
            let num = b * b - disc;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            if c < a {
                continue;
            }
            if b < 0 && (-b == a || a == c) {
                continue;
            }
            if primitive_only && gcd_all(&[a, b, c]) != 1 {
                continue;
            }
            out.push((a, b, c));
        }
        a += 1;
    }
    out
}

/// Class number and unit count of an imaginary quadratic field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ClassData {
    pub disc: Discriminant,
    pub h: u64,
    pub w: u64,
}

/// Number of roots of unity in the order of discriminant `d < 0`.
pub fn unit_count(d: i64) -> u64 {
    match d {
        -3 => 6,
        -4 => 4,
        _ => 2,
    }
}

/// `h(D)` and `w_D` for a negative fundamental discriminant, by counting
/// reduced primitive forms.
pub fn class_data(d: i64) -> Result<ClassData> {
    if d >= 0 || !is_fundamental(d) {
        return Err(Error::Precondition(format!(
            "class_data needs a negative fundamental discriminant, got {d}"
        )));
    }
    let h = reduced_forms(d, true).len() as u64;
    Ok(ClassData {
        disc: fundamental_decomposition(d)?,
        h,
        w: unit_count(d),
    })
}

/// `(L(0, χ_D), L(1, χ_D))` for a negative fundamental discriminant `D`,
/// from the class number formula: `L(0) = 2h/w` and `L(1) = 2πh / (w√|D|)`.
pub fn dirichlet_special_values(d: i64) -> Result<(Ratio<i64>, f64)> {
    let cd = class_data(d)?;
    let at_zero = Ratio::new(2 * cd.h as i64, cd.w as i64);
    let at_one = 2.0 * PI * cd.h as f64 / (cd.w as f64 * (d.unsigned_abs() as f64).sqrt());
    Ok((at_zero, at_one))
}
