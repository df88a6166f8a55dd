//! Dirichlet series data for spin L-functions: from genus-2 curves by point
//! counting, from Hecke eigenvalues, and from the lift factorization
//! `ζ(s+½)ζ(s−½)L(f,s)`; quadratic twists, conductors and root numbers.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::arith::{self, gcd, kronecker};
use crate::error::{Error, Result};

/// `y² + h(x)y = f(x)`; coefficient lists start with the constant term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Curve {
    pub label: String,
    pub f: Vec<i64>,
    pub h: Vec<i64>,
    pub conductor: u64,
    pub torsion: Option<u32>,
}

fn trim(mut v: Vec<i64>) -> Vec<i64> {
    while v.len() > 1 && *v.last().unwrap() == 0 {
        v.pop();
    }
    if v.is_empty() {
        v.push(0);
    }
    v
}

fn poly_mul(a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut out = vec![0i64; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Product of integer polynomials, lowest degree first.
pub fn poly_product(a: &[i64], b: &[i64]) -> Vec<i64> {
    trim(poly_mul(a, b))
}

impl Curve {
    pub fn new(label: &str, f: Vec<i64>, h: Vec<i64>, conductor: u64, torsion: Option<u32>) -> Result<Self> {
        let c = Curve { label: label.to_string(), f: trim(f), h: trim(h), conductor, torsion };
        let deg = c.degree();
        if !(3..=6).contains(&deg) {
            return Err(Error::Precondition(format!("4f + h² has degree {deg}, expected 3 to 6")));
        }
        if c.h.len() > c.genus() + 2 {
            return Err(Error::Precondition("h has too large a degree".into()));
        }
        if conductor == 0 || !arith::is_squarefree(conductor as i64) {
            return Err(Error::Precondition(format!("conductor {conductor} is not squarefree")));
        }
        if !c.is_separable() {
            return Err(Error::Precondition("4f + h² is not squarefree".into()));
        }
        Ok(c)
    }

    /// The elliptic curve `[a1, a2, a3, a4, a6]` written as `y² + (a1 x + a3) y = x³ + a2 x² + a4 x + a6`.
    pub fn elliptic(label: &str, a: [i64; 5], conductor: u64) -> Result<Self> {
        Curve::new(label, vec![a[4], a[3], a[1], 1], vec![a[2], a[0]], conductor, None)
    }

    /// `4f + h²`.
    pub fn big_f(&self) -> Vec<i64> {
        let mut out = poly_mul(&self.h, &self.h);
        if out.len() < self.f.len() {
            out.resize(self.f.len(), 0);
        }
        for (i, c) in self.f.iter().enumerate() {
            out[i] += 4 * c;
        }
        trim(out)
    }

    pub fn degree(&self) -> usize {
        self.big_f().len() - 1
    }

    pub fn genus(&self) -> usize {
        (self.degree() - 1) / 2
    }

    /// Degree of the spin (or Hasse–Weil) L-function, `2g`.
    pub fn lfunction_degree(&self) -> usize {
        2 * self.genus()
    }

    pub fn is_good(&self, p: u64) -> bool {
        self.conductor % p != 0
    }

    fn is_separable(&self) -> bool {
        let big_f = self.big_f();
        for p in arith::primes_up_to(2000).into_iter().skip(1) {
            if self.conductor % p == 0 {
                continue;
            }
            let fp: Vec<u64> = big_f.iter().map(|&c| c.rem_euclid(p as i64) as u64).collect();
            if *fp.last().unwrap() == 0 {
                continue;
            }
            return poly_squarefree_mod(&fp, p);
        }
        false
    }

    /// Parses `CURVE label=<s> conductor=<N> f=<c0,c1,...> h=<c0,...> torsion=<T>`.
    pub fn parse(line: &str) -> Result<Self> {
        let err = |m: &str| Error::Parse { line: 1, msg: m.to_string() };
        let mut parts = line.split_whitespace();
        if parts.next() != Some("CURVE") {
            return Err(err("expected CURVE"));
        }
        let mut fields: HashMap<&str, &str> = HashMap::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| err(&format!("bad field {p}")))?;
            fields.insert(k, v);
        }
        let list = |key: &str| -> Result<Vec<i64>> {
            fields
                .get(key)
                .ok_or_else(|| err(&format!("missing {key}")))?
                .split(',')
                .map(|s| s.trim().parse::<i64>().map_err(|_| err(&format!("bad coefficient in {key}"))))
                .collect()
        };
        let f = list("f")?;
        let h = if fields.contains_key("h") { list("h")? } else { vec![0] };
        let conductor: u64 = fields
            .get("conductor")
            .ok_or_else(|| err("missing conductor"))?
            .parse()
            .map_err(|_| err("bad conductor"))?;
        let torsion = match fields.get("torsion") {
            Some(t) => Some(t.parse::<u32>().map_err(|_| err("bad torsion"))?),
            None => None,
        };
        let label = fields.get("label").copied().unwrap_or("curve");
        Curve::new(label, f, h, conductor, torsion)
    }

    pub fn to_line(&self) -> String {
        let j = |v: &[i64]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        let mut s = format!("CURVE label={} conductor={} f={} h={}", self.label, self.conductor, j(&self.f), j(&self.h));
        if let Some(t) = self.torsion {
            s.push_str(&format!(" torsion={t}"));
        }
        s
    }
}

impl fmt::Display for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

/// The six curves attached to the paramodular forms, and an elliptic curve of
/// conductor 8569 = 11·19·41 used for lift checks.
pub fn builtin_curves() -> Vec<Curve> {
    let c = |l: &str, f: Vec<i64>, h: Vec<i64>, n: u64, t: u32| Curve::new(l, f, h, n, Some(t)).expect("builtin");
    vec![
        c("F249", vec![0, 1, 1], vec![1, 0, 0, 1], 249, 14),
        c("F277", vec![0, -1, 2, -2, 0, 1], vec![1], 277, 15),
        c("F295", vec![0, 0, 0, -1, -1], vec![1, 0, 0, 1], 295, 14),
        c("F587-", vec![0, 0, -1, -1], vec![1, 1, 0, 1], 587, 1),
        c("F713+", vec![0, 0, 0, 0, -1], vec![1, 1, 0, 1], 713, 9),
        c("F713-", vec![0, 0, 0, -1, 0, 1], vec![1, 1, 0, 1], 713, 1),
        Curve::elliptic("E8569", [1, 1, 1, -11, 10], 8569).expect("builtin"),
    ]
}

pub fn builtin_curve(label: &str) -> Result<Curve> {
    builtin_curves()
        .into_iter()
        .find(|c| c.label == label)
        .ok_or_else(|| Error::UnknownCurve(label.to_string()))
}

fn poly_rem_mod(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let inv = arith::inv_mod(b[db] as i64, p as i64).unwrap() as u64;
    while r.len() > db && !r.is_empty() {
        let lead = *r.last().unwrap();
        if lead != 0 {
            let q = lead * inv % p;
            let shift = r.len() - 1 - db;
            for (i, &c) in b.iter().enumerate() {
                r[shift + i] = (r[shift + i] + p - q * c % p) % p;
            }
        }
        r.pop();
    }
    while r.last() == Some(&0) {
        r.pop();
    }
    r
}

fn poly_squarefree_mod(f: &[u64], p: u64) -> bool {
    let df: Vec<u64> = f.iter().enumerate().skip(1).map(|(i, &c)| c * (i as u64 % p) % p).collect();
    let mut a = f.to_vec();
    let mut b = df;
    while b.last() == Some(&0) {
        b.pop();
    }
    if b.is_empty() {
        return false;
    }
    while !b.is_empty() {
        let r = poly_rem_mod(&a, &b, p);
        a = b;
        b = r;
    }
    a.len() == 1
}

/// Quadratic residues mod `p` as a bitset, with 0 included.
struct Residues {
    bits: Vec<u64>,
}

impl Residues {
    fn new(p: u64) -> Self {
        let mut bits = vec![0u64; (p as usize >> 6) + 1];
        bits[0] = 1;
        let mut sq = 0u64;
        for x in 1..=(p - 1) / 2 {
            sq += 2 * x - 1;
            if sq >= p {
                sq -= p;
                if sq >= p {
                    sq -= p;
                }
            }
            bits[sq as usize >> 6] |= 1 << (sq & 63);
        }
        Residues { bits }
    }

    #[inline]
    fn bit(&self, n: usize) -> u64 {
        (self.bits[n >> 6] >> (n & 63)) & 1
    }

    fn chi(&self, n: u64) -> i64 {
        if n == 0 {
            0
        } else {
            2 * self.bit(n as usize) as i64 - 1
        }
    }
}

const LANES: usize = 8;

/// Runs `LANES` forward-difference chains side by side; lane `j` covers
/// `x ∈ [j·len, (j+1)·len)`. Returns (residue-or-zero hits, zero hits).
fn char_sum_lanes<const D: usize>(init: &[[u32; LANES]; 7], len: u64, p: u64, res: &Residues) -> (u64, u64) {
    let p32 = p as u32;
    let mut diffs = *init;
    let (mut set, mut zeros) = (0u64, 0u64);
    for _ in 0..len {
        for &v0 in &diffs[0] {
            set += res.bit(v0 as usize);
            zeros += (v0 == 0) as u64;
        }
        for i in 0..D {
            for j in 0..LANES {
                let v = diffs[i][j] + diffs[i + 1][j];
                diffs[i][j] = if v >= p32 { v - p32 } else { v };
            }
        }
    }
    (set, zeros)
}

fn char_sum_fixed<const D: usize>(fp: &[u64], p: u64, res: &Residues) -> i64 {
    let len = p / LANES as u64;
    let mut init = [[0u32; LANES]; 7];
    for j in 0..LANES {
        let d = initial_differences(fp, p, j as u64 * len);
        for i in 0..=D {
            init[i][j] = d[i] as u32;
        }
    }
    let (mut set, mut zeros) = char_sum_lanes::<D>(&init, len, p, res);
    for x in LANES as u64 * len..p {
        let v = eval_mod(fp, p, x);
        set += res.bit(v as usize);
        zeros += (v == 0) as u64;
    }
    2 * set as i64 - zeros as i64 - p as i64
}

fn eval_mod(fp: &[u64], p: u64, x: u64) -> u64 {
    fp.iter().rev().fold(0u64, |acc, &c| (acc * x + c) % p)
}

/// `[F(x₀), ΔF(x₀), Δ²F(x₀), ...]` mod `p`.
fn initial_differences(fp: &[u64], p: u64, x0: u64) -> Vec<u64> {
    let d = fp.len() - 1;
    let mut diffs: Vec<u64> = (0..=d as u64).map(|i| eval_mod(fp, p, (x0 + i) % p)).collect();
    for j in 1..=d {
        for i in (j..=d).rev() {
            diffs[i] = (diffs[i] + p - diffs[i - 1]) % p;
        }
    }
    diffs
}

/// `Σ_x χ(F(x))` over `F_p`, by forward differences.
fn char_sum_fp(fp: &[u64], p: u64, res: &Residues) -> i64 {
    match fp.len() - 1 {
        0 => res.chi(fp[0]) * p as i64,
        1 => char_sum_fixed::<1>(fp, p, res),
        2 => char_sum_fixed::<2>(fp, p, res),
        3 => char_sum_fixed::<3>(fp, p, res),
        4 => char_sum_fixed::<4>(fp, p, res),
        5 => char_sum_fixed::<5>(fp, p, res),
        _ => char_sum_fixed::<6>(fp, p, res),
    }
}

/// `Σ_x χ(F(x))` over `F_{p²} = F_p(√n)`.
fn char_sum_fp2(fp: &[u64], p: u64, res: &Residues) -> i64 {
    let n = (2..p).find(|&n| res.chi(n) == -1).unwrap();
    let mut total = 0i64;
    for u in 0..p {
        for v in 0..p {
            let (mut a, mut b) = (0u64, 0u64);
            for &c in fp.iter().rev() {
                let na = (a * u + n * (b * v % p) + c) % p;
                let nb = (a * v + b * u) % p;
                a = na;
                b = nb;
            }
            let norm = (a * a % p + p - n * (b * b % p) % p) % p;
            total += res.chi(norm);
        }
    }
    total
}

fn gf4_mul(x: u8, y: u8) -> u8 {
    let (a0, a1, b0, b1) = (x & 1, x >> 1, y & 1, y >> 1);
    let c0 = (a0 & b0) ^ (a1 & b1);
    let c1 = (a0 & b1) ^ (a1 & b0) ^ (a1 & b1);
    c0 | (c1 << 1)
}

fn gf_eval(coeffs: &[i64], x: u8, r: u32) -> u8 {
    coeffs.iter().rev().fold(0u8, |acc, &c| {
        let m = if r == 1 { acc & x } else { gf4_mul(acc, x) };
        m ^ (c.rem_euclid(2) as u8)
    })
}

fn count_char2(curve: &Curve, r: u32) -> u64 {
    let q = 1u8 << r;
    let mul = |a: u8, b: u8| if r == 1 { a & b } else { gf4_mul(a, b) };
    let mut n = 0u64;
    for x in 0..q {
        let hx = gf_eval(&curve.h, x, r);
        let fx = gf_eval(&curve.f, x, r);
        for y in 0..q {
            if mul(y, y) ^ mul(hx, y) ^ fx == 0 {
                n += 1;
            }
        }
    }
    let g = curve.genus();
    let h_top = curve.h.get(g + 1).copied().unwrap_or(0).rem_euclid(2) as u8;
    let f_top = curve.f.get(2 * g + 2).copied().unwrap_or(0).rem_euclid(2) as u8;
    for v in 0..q {
        if mul(v, v) ^ mul(h_top, v) ^ f_top == 0 {
            n += 1;
        }
    }
    n
}

/// Points of the weighted projective model over `F_{p^r}`, no goodness check.
fn count_model(curve: &Curve, p: u64, r: u32) -> u64 {
    if p == 2 {
        return count_char2(curve, r);
    }
    let g = curve.genus();
    let big_f = curve.big_f();
    let fp: Vec<u64> = big_f.iter().map(|&c| c.rem_euclid(p as i64) as u64).collect();
    let mut fp = fp;
    while fp.len() > 1 && *fp.last().unwrap() == 0 {
        fp.pop();
    }
    let res = Residues::new(p);
    let top = big_f.get(2 * g + 2).copied().unwrap_or(0).rem_euclid(p as i64) as u64;
    let q = p.pow(r);
    let (sum, inf) = if r == 1 {
        (char_sum_fp(&fp, p, &res), 1 + res.chi(top))
    } else {
        (char_sum_fp2(&fp, p, &res), if top == 0 { 1 } else { 2 })
    };
    (q as i64 + sum + inf) as u64
}

/// `#C(F_{p^r})` for a good prime `p` and `r ∈ {1, 2}`.
pub fn count_points(curve: &Curve, p: u64, r: u32) -> Result<u64> {
    if !arith::is_prime(p) || !(1..=2).contains(&r) {
        return Err(Error::Precondition(format!("need p prime and r in {{1, 2}}, got p = {p}, r = {r}")));
    }
    if !curve.is_good(p) {
        return Err(Error::BadPrime(p));
    }
    Ok(count_model(curve, p, r))
}

/// Local factor at a good prime, `1 − e₁X + e₂X² − pe₁X³ + p²X⁴` in genus 2 and
/// `1 − aX + pX²` in genus 1; lowest degree first.
pub fn good_euler_factor(curve: &Curve, p: u64) -> Result<Vec<i64>> {
    let p_i = p as i64;
    let s1 = p_i + 1 - count_points(curve, p, 1)? as i64;
    if curve.genus() == 1 {
        return Ok(vec![1, -s1, p_i]);
    }
    let s2 = p_i * p_i + 1 - count_points(curve, p, 2)? as i64;
    let e2 = (s1 * s1 - s2) / 2;
    Ok(vec![1, -s1, e2, -p_i * s1, p_i * p_i])
}

/// Local factor and sign `ε_p` at a prime `p ∥ N`.
///
/// The reduction has toric rank one, so `L_p(X) = (1 − sX)(1 − aX + pX²)` in
/// genus 2 and `1 − sX` in genus 1, with `ε_p = −s`. The traces on `F_p` and
/// `F_{p²}` of the singular model are `a + s` and `a² − 2p + 1`.
pub fn bad_euler_factor(curve: &Curve, p: u64) -> Result<(Vec<i64>, i32)> {
    if curve.is_good(p) {
        return Err(Error::Precondition(format!("{p} does not divide the conductor")));
    }
    if curve.conductor % (p * p) == 0 {
        return Err(Error::Precondition(format!("{p}² divides the conductor")));
    }
    let p_i = p as i64;
    let t1 = p_i + 1 - count_model(curve, p, 1) as i64;
    let t2 = p_i * p_i + 1 - count_model(curve, p, 2) as i64;
    let fits: Vec<(i64, i64)> = [1i64, -1]
        .into_iter()
        .filter_map(|s| {
            if curve.genus() == 1 {
                (t1 == s && t2 == 1).then_some((s, 0))
            } else {
                let a = t1 - s;
                (a * a <= 4 * p_i && t2 == a * a - 2 * p_i + 1).then_some((s, a))
            }
        })
        .collect();
    match fits.as_slice() {
        [(s, a)] => {
            let poly = if curve.genus() == 1 { vec![1, -s] } else { poly_mul(&[1, -s], &[1, -a, p_i]) };
            Ok((poly, -*s as i32))
        }
        _ => Err(Error::Inconsistent(format!(
            "point counts at p = {p} do not determine the local factor ({} fits)",
            fits.len()
        ))),
    }
}

/// The spin quartic `1 − λX + (λ² − λ₂ − q^{2k−4})X² − λq^{2k−3}X³ + q^{4k−6}X⁴`.
pub fn spin_euler_factor(lambda_q: i64, lambda_q2: i64, k: u32, q: u64) -> Vec<i64> {
    let q = q as i128;
    let (l1, l2) = (lambda_q as i128, lambda_q2 as i128);
    let c = [
        1,
        -l1,
        l1 * l1 - l2 - q.pow(2 * k - 4),
        -l1 * q.pow(2 * k - 3),
        q.pow(4 * k - 6),
    ];
    c.iter().map(|&v| i64::try_from(v).expect("spin factor fits in i64")).collect()
}

/// `γ(s) = Π Γ_R(s + μ_j) Π Γ_C(s + ν_j)` with `Γ_R(s) = π^{−s/2}Γ(s/2)` and
/// `Γ_C(s) = 2(2π)^{−s}Γ(s)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaFactor {
    pub real_shifts: Vec<f64>,
    pub complex_shifts: Vec<f64>,
}

impl GammaFactor {
    /// `Γ_C(s + ½)²`, i.e. `Γ(s + ½)²` up to `(4π²)^{−s}`.
    pub fn spin() -> Self {
        GammaFactor { real_shifts: vec![], complex_shifts: vec![0.5, 0.5] }
    }

    /// `Γ_C(s + ½)`, the factor of a weight-2 newform.
    pub fn weight_two() -> Self {
        GammaFactor { real_shifts: vec![], complex_shifts: vec![0.5] }
    }

    pub fn degree(&self) -> usize {
        self.real_shifts.len() + 2 * self.complex_shifts.len()
    }

    pub fn key(&self) -> String {
        format!("R{:?}C{:?}", self.real_shifts, self.complex_shifts)
    }

    fn concat(&self, o: &GammaFactor) -> GammaFactor {
        let mut r = self.clone();
        r.real_shifts.extend(&o.real_shifts);
        r.complex_shifts.extend(&o.complex_shifts);
        r
    }
}

/// Dirichlet series with Euler product and functional equation
/// `Λ(s) = N^{s/2} γ(s) L(s) = ε Λ(1 − s)`.
///
/// Coefficients are kept in arithmetic normalization as integers; the analytic
/// coefficient is `a_n / n^{w/2}` with `w` the motivic weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LSeriesData {
    pub label: String,
    pub degree: usize,
    pub conductor: u64,
    pub gamma: GammaFactor,
    pub motivic_weight: u32,
    /// Local polynomials, lowest degree first. Factors at `p` with `p² > M`
    /// may be truncated after the linear term.
    pub euler_factors: BTreeMap<u64, Vec<i64>>,
    /// `a_0, a_1, ..., a_M` with `a_0 = 0`.
    pub coefficients: Vec<i64>,
    pub root_number: Option<i32>,
    pub local_signs: BTreeMap<u64, i32>,
    pub eps_inf: i32,
    /// Pole at `s = 3/2` (lift with `D = 1`).
    pub pole: bool,
    /// Forced zero at the center from a trivial zero of a factor (lift with `D > 1`).
    pub forced_central_zero: bool,
    /// `θ` in the bound `|a_n / n^{w/2}| ≤ d_degree(n) n^θ`.
    pub coefficient_exponent: f64,
    pub twist: i64,
}

impl LSeriesData {
    pub fn available(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    /// Analytic coefficient `a_n / n^{w/2}`.
    pub fn analytic(&self, n: usize) -> f64 {
        self.coefficients[n] as f64 / (n as f64).powf(self.motivic_weight as f64 / 2.0)
    }

    /// The constant series `1`, of degree 0.
    pub fn unit(m: usize) -> Self {
        let mut coefficients = vec![0i64; m + 1];
        if m >= 1 {
            coefficients[1] = 1;
        }
        LSeriesData {
            label: "1".into(),
            degree: 0,
            conductor: 1,
            gamma: GammaFactor { real_shifts: vec![], complex_shifts: vec![] },
            motivic_weight: 0,
            euler_factors: arith::primes_up_to(m).into_iter().map(|p| (p, vec![1])).collect(),
            coefficients,
            root_number: Some(1),
            local_signs: BTreeMap::new(),
            eps_inf: 1,
            pole: false,
            forced_central_zero: false,
            coefficient_exponent: 0.0,
            twist: 1,
        }
    }

    /// Assembles data from local factors at all primes up to `m`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_euler_factors(
        label: &str,
        degree: usize,
        conductor: u64,
        gamma: GammaFactor,
        motivic_weight: u32,
        euler_factors: BTreeMap<u64, Vec<i64>>,
        local_signs: BTreeMap<u64, i32>,
        eps_inf: i32,
        m: usize,
    ) -> Result<Self> {
        let coefficients = expand_euler_product(&euler_factors, m)?;
        let root_number = Some(eps_inf * local_signs.values().product::<i32>());
        Ok(LSeriesData {
            label: label.to_string(),
            degree,
            conductor,
            gamma,
            motivic_weight,
            euler_factors,
            coefficients,
            root_number,
            local_signs,
            eps_inf,
            pole: false,
            forced_central_zero: false,
            coefficient_exponent: 0.0,
            twist: 1,
        })
    }
}

/// `a_1, ..., a_M` of `Π_p L_p(p^{−s})^{−1}`, with index 0 holding 0.
pub fn expand_euler_product(factors: &BTreeMap<u64, Vec<i64>>, m: usize) -> Result<Vec<i64>> {
    let mut a = vec![0i64; m + 1];
    if m == 0 {
        return Ok(a);
    }
    a[1] = 1;
    let spf = arith::smallest_prime_factors(m);
    let mut prime_coeff = vec![0i64; m + 1];
    let mut powers: HashMap<u64, Vec<i64>> = HashMap::new();
    for p in arith::primes_up_to(m) {
        let c = factors.get(&p).ok_or(Error::MissingEulerFactor(p))?;
        let mut seq = vec![1i64];
        let mut pk = p as usize;
        let mut k = 1;
        while pk <= m {
            let v: i64 = -(1..c.len()).filter(|&j| j <= k).map(|j| c[j] * seq[k - j]).sum::<i64>();
            seq.push(v);
            k += 1;
            pk = match pk.checked_mul(p as usize) {
                Some(x) => x,
                None => break,
            };
        }
        prime_coeff[p as usize] = seq[1];
        if seq.len() > 2 {
            powers.insert(p, seq);
        }
    }
    for n in 2..=m {
        let p = spf[n] as usize;
        let mut rest = n / p;
        if rest % p != 0 {
            a[n] = prime_coeff[p] * a[rest];
            continue;
        }
        let mut e = 1;
        while rest % p == 0 {
            rest /= p;
            e += 1;
        }
        a[n] = powers[&(p as u64)][e] * a[rest];
    }
    Ok(a)
}

/// `a_n` for all `n ≤ M`, recomputed from the stored Euler factors.
pub fn dirichlet_coefficients(lsd: &LSeriesData, m: usize) -> Result<Vec<i64>> {
    for (&p, c) in &lsd.euler_factors {
        if p as usize <= m && (p as usize).saturating_mul(p as usize) <= m && c.len() < 2 && lsd.degree > 0 {
            return Err(Error::MissingEulerFactor(p));
        }
    }
    expand_euler_product(&lsd.euler_factors, m)
}

/// `ε(L ⊗ χ_D) = ε · χ_D(N₀) · Π_{p | gcd(D, N)} ε_p` with `N₀ = N / gcd(N, D)`.
pub fn root_number_twist(eps_inf: i32, local_signs: &BTreeMap<u64, i32>, level: u64, d: i64) -> i32 {
    let eps = eps_inf * local_signs.values().product::<i32>();
    let g = gcd(level as i64, d) as u64;
    let n0 = level / g;
    let shared: i32 = local_signs.iter().filter(|(p, _)| g % **p == 0).map(|(_, s)| *s).product();
    eps * kronecker(d, n0 as i64) * shared
}

/// Conductor `N·D⁴/gcd(N, D)` of a degree-4 twist; `N·D²` in degree 2.
pub fn twisted_conductor(level: u64, degree: usize, d: i64) -> u64 {
    let g = gcd(level as i64, d) as u64;
    let da = d.unsigned_abs();
    level * da.pow(degree as u32) / g
}

fn chi_table(d: i64) -> Vec<i32> {
    let m = d.unsigned_abs().max(1) as i64;
    (0..m).map(|n| kronecker(d, n)).collect()
}

/// `Σ χ_D(n) a_n n^{−s}`: coefficients and local factors twisted literally.
pub fn twist(lsd: &LSeriesData, d: i64) -> Result<LSeriesData> {
    if !arith::is_fundamental(d) {
        return Err(Error::Precondition(format!("{d} is not a fundamental discriminant")));
    }
    if d == 1 {
        return Ok(lsd.clone());
    }
    if lsd.twist != 1 {
        return Err(Error::Precondition("series is already twisted".into()));
    }
    let chi = chi_table(d);
    let m = chi.len();
    let mut out = lsd.clone();
    for (n, a) in out.coefficients.iter_mut().enumerate().skip(1) {
        *a *= chi[n % m] as i64;
    }
    for (&p, c) in out.euler_factors.iter_mut() {
        let x = chi[(p as usize) % m] as i64;
        let mut pw = 1i64;
        for v in c.iter_mut() {
            *v *= pw;
            pw *= x;
        }
        *c = trim(std::mem::take(c));
    }
    let level = lsd.conductor;
    out.conductor = twisted_conductor(level, lsd.degree, d);
    out.root_number = match (lsd.degree, lsd.root_number) {
        (_, None) => None,
        (4, Some(_)) => Some(root_number_twist(lsd.eps_inf, &lsd.local_signs, level, d)),
        (2, Some(e)) => {
            if gcd(level as i64, d) != 1 {
                return Err(Error::Precondition("degree-2 twist needs gcd(N, D) = 1".into()));
            }
            Some(e * kronecker(d, -(level as i64)))
        }
        _ => None,
    };
    out.twist = d;
    out.label = format!("{}⊗χ{}", lsd.label, d);
    Ok(out)
}

/// `L(s + ½, χ_D) L(s − ½, χ_D) L(f, s, χ_D)` for `f` of weight `2k − 2`
/// (motivic weight `2k − 3`), assembled from local factors
/// `(1 − χ(p)p^{k−2}X)(1 − χ(p)p^{k−1}X)·L_p(f ⊗ χ_D, X)`.
pub fn lift_lseries(f: &LSeriesData, k: u32, d: i64) -> Result<LSeriesData> {
    if !arith::is_fundamental(d) {
        return Err(Error::Precondition(format!("{d} is not a fundamental discriminant")));
    }
    if k < 2 {
        return Err(Error::Precondition("k must be at least 2".into()));
    }
    if f.degree > 0 && f.motivic_weight != 2 * k - 3 {
        return Err(Error::Precondition("f has the wrong weight for this k".into()));
    }
    let m = f.available();
    let chi = chi_table(d);
    let cm = chi.len();
    let mut factors = BTreeMap::new();
    for p in arith::primes_up_to(m) {
        let fp = f.euler_factors.get(&p).ok_or(Error::MissingEulerFactor(p))?;
        let x = chi[(p as usize) % cm] as i64;
        let mut twisted_f = fp.clone();
        let mut pw = 1i64;
        for v in twisted_f.iter_mut() {
            *v *= pw;
            pw *= x;
        }
        let pk2 = (p as i64).pow(k - 2);
        let pk1 = (p as i64).pow(k - 1);
        let zeta = poly_mul(&[1, -x * pk2], &[1, -x * pk1]);
        factors.insert(p, trim(poly_mul(&zeta, &twisted_f)));
    }
    let coefficients = expand_euler_product(&factors, m)?;
    let da = d.unsigned_abs();
    if f.degree > 0 && gcd(f.conductor as i64, d) != 1 {
        return Err(Error::Precondition("lift twist needs gcd(N_f, D) = 1".into()));
    }
    let conductor = f.conductor * da.pow(f.degree as u32) * da * da;
    let pair = if d < 0 {
        GammaFactor { real_shifts: vec![], complex_shifts: vec![k as f64 - 1.5] }
    } else {
        GammaFactor { real_shifts: vec![k as f64 - 1.5, k as f64 - 2.5], complex_shifts: vec![] }
    };
    let eps_f = f.root_number.ok_or(Error::UnknownRootNumber)?;
    let root_number = if d == 1 || f.degree == 0 { eps_f } else { eps_f * kronecker(d, -(f.conductor as i64)) };
    Ok(LSeriesData {
        label: format!("lift({})⊗χ{d}", f.label),
        degree: f.degree + 2,
        conductor,
        gamma: f.gamma.concat(&pair),
        motivic_weight: 2 * k - 3,
        euler_factors: factors,
        coefficients,
        root_number: Some(root_number),
        local_signs: BTreeMap::new(),
        eps_inf: 1,
        pole: d == 1,
        forced_central_zero: d > 1,
        coefficient_exponent: (k as f64) - 1.5,
        twist: d,
    })
}

struct CurveCache {
    limit: usize,
    factors: BTreeMap<u64, Vec<i64>>,
    local_signs: BTreeMap<u64, i32>,
    coefficients: Arc<Vec<i64>>,
}

fn cache() -> &'static Mutex<HashMap<String, CurveCache>> {
    static CACHE: OnceLock<Mutex<HashMap<String, CurveCache>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn extend_cache(curve: &Curve, entry: &mut CurveCache, m: usize) -> Result<()> {
    if m <= entry.limit {
        return Ok(());
    }
    let genus2 = curve.genus() == 2;
    for p in arith::primes_up_to(m) {
        let pu = p as usize;
        let needs_full = genus2 && pu * pu <= m;
        match entry.factors.get(&p) {
            Some(c) if !needs_full || c.len() > 2 || !curve.is_good(p) => continue,
            _ => {}
        }
        if !curve.is_good(p) {
            let (poly, sign) = bad_euler_factor(curve, p)?;
            entry.factors.insert(p, poly);
            entry.local_signs.insert(p, sign);
        } else if needs_full || !genus2 {
            entry.factors.insert(p, good_euler_factor(curve, p)?);
        } else {
            let e1 = p as i64 + 1 - count_points(curve, p, 1)? as i64;
            entry.factors.insert(p, vec![1, -e1]);
        }
    }
    for p in arith::prime_divisors(curve.conductor as i64) {
        if let std::collections::btree_map::Entry::Vacant(v) = entry.local_signs.entry(p) {
            let (poly, sign) = bad_euler_factor(curve, p)?;
            v.insert(sign);
            entry.factors.insert(p, poly);
        }
    }
    entry.coefficients = Arc::new(expand_euler_product(&entry.factors, m)?);
    entry.limit = m;
    Ok(())
}

/// L-series data of `curve` with coefficients up to `m`; point counts are cached
/// per curve and extended on demand.
pub fn curve_lseries(curve: &Curve, m: usize) -> Result<LSeriesData> {
    let mut guard = cache().lock().unwrap_or_else(|e| e.into_inner());
    let entry = guard.entry(curve.to_line()).or_insert_with(|| CurveCache {
        limit: 0,
        factors: BTreeMap::new(),
        local_signs: BTreeMap::new(),
        coefficients: Arc::new(vec![0]),
    });
    extend_cache(curve, entry, m.max(1))?;
    let genus2 = curve.genus() == 2;
    let eps_inf = if genus2 { 1 } else { -1 };
    let euler_factors: BTreeMap<u64, Vec<i64>> =
        entry.factors.range(..=(m.max(2) as u64)).map(|(p, c)| (*p, c.clone())).collect();
    let coefficients = entry.coefficients[..=m].to_vec();
    let root_number = Some(eps_inf * entry.local_signs.values().product::<i32>());
    Ok(LSeriesData {
        label: curve.label.clone(),
        degree: curve.lfunction_degree(),
        conductor: curve.conductor,
        gamma: if genus2 { GammaFactor::spin() } else { GammaFactor::weight_two() },
        motivic_weight: 1,
        euler_factors,
        coefficients,
        root_number,
        local_signs: entry.local_signs.clone(),
        eps_inf,
        pole: false,
        forced_central_zero: false,
        coefficient_exponent: 0.0,
        twist: 1,
    })
}

/// Local signs `ε_p` for `p | N`, from the bad local factors.
pub fn local_signs(curve: &Curve) -> Result<BTreeMap<u64, i32>> {
    arith::prime_divisors(curve.conductor as i64)
        .into_iter()
        .map(|p| bad_euler_factor(curve, p).map(|(_, s)| (p, s)))
        .collect()
}
