//! Smoothed approximate functional equation for `Λ(s) = N^{s/2} γ(s) L(s)`.
//!
//! The cutoff kernels
//! `F_s^{(j)}(y) = (1/2πi) ∫_{(c)} γ(s+w)/γ(s) · y^{−w} dw/w^{j+1}`
//! are computed by trapezoidal integration along a vertical line and cached on
//! a geometric grid.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::Serialize;

use crate::arith;
use crate::error::{Error, Result};
use crate::lseries::{expand_euler_product, GammaFactor, LSeriesData};

const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

fn ln_sin_pi(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    let two_i = Complex64::new(0.0, 2.0);
    if z.im >= 0.0 {
        -i * PI * z + ((2.0 * PI * i * z).exp() - 1.0).ln() - two_i.ln()
    } else {
        i * PI * z + (1.0 - (-2.0 * PI * i * z).exp()).ln() - two_i.ln()
    }
}

/// `log Γ(z)` up to a multiple of `2πi`.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        return Complex64::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma(1.0 - z);
    }
    let mut z = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while z.re < 15.0 {
        shift += z.ln();
        z += 1.0;
    }
    let zi = 1.0 / z;
    let zi2 = zi * zi;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = zi;
    for (k, b) in BERNOULLI.iter().enumerate() {
        let n = 2.0 * (k as f64 + 1.0);
        series += pow * (b / (n * (n - 1.0)));
        pow *= zi2;
    }
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series - shift
}

/// `ψ(x)` for real `x > 0`.
pub fn digamma(x: f64) -> f64 {
    assert!(x > 0.0, "digamma needs a positive argument");
    let mut x = x;
    let mut shift = 0.0;
    while x < 15.0 {
        shift += 1.0 / x;
        x += 1.0;
    }
    let xi2 = 1.0 / (x * x);
    let mut series = 0.0;
    let mut pow = xi2;
    for (k, b) in BERNOULLI.iter().enumerate() {
        let n = 2.0 * (k as f64 + 1.0);
        series += b / n * pow;
        pow *= xi2;
    }
    x.ln() - 0.5 / x - series - shift
}

/// `log γ(s)` for complex `s`.
pub fn ln_gamma_factor(g: &GammaFactor, s: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &mu in &g.real_shifts {
        let z = (s + mu) / 2.0;
        acc += -z * PI.ln() + ln_gamma(z);
    }
    for &nu in &g.complex_shifts {
        let z = s + nu;
        acc += Complex64::new(2f64.ln(), 0.0) - z * (2.0 * PI).ln() + ln_gamma(z);
    }
    acc
}

/// `γ'(s)/γ(s)` for real `s`.
pub fn dlog_gamma_factor(g: &GammaFactor, s: f64) -> f64 {
    let mut acc = 0.0;
    for &mu in &g.real_shifts {
        acc += -0.5 * PI.ln() + 0.5 * digamma((s + mu) / 2.0);
    }
    for &nu in &g.complex_shifts {
        acc += -(2.0 * PI).ln() + digamma(s + nu);
    }
    acc
}

fn rightmost_pole(g: &GammaFactor, s: f64) -> f64 {
    g.real_shifts.iter().chain(&g.complex_shifts).map(|&m| -s - m).fold(f64::NEG_INFINITY, f64::max)
}

const STEP: f64 = 0.05;

fn best_abscissa(g: &GammaFactor, s: f64, j: u32, y: f64) -> f64 {
    let base = ln_gamma_factor(g, Complex64::new(s, 0.0)).re;
    let phi = |c: f64| ln_gamma_factor(g, Complex64::new(s + c, 0.0)).re - base - c * y.ln() - (j + 1) as f64 * c.ln();
    let mut best = (0.5, phi(0.5));
    let mut c = 0.5;
    while c < 2000.0 {
        c *= 1.05;
        let v = phi(c);
        if v < best.1 {
            best = (c, v);
        }
    }
    best.0
}

/// `F_s^{(j)}(y)` by direct contour integration, at abscissa `c` if given.
///
/// Without `c`, small `y` use a line left of `w = 0` plus the residue there,
/// and larger `y` the line through the saddle of the integrand.
pub fn kernel_direct(g: &GammaFactor, s: f64, j: u32, y: f64, c: Option<f64>) -> f64 {
    assert!(j <= 1, "only j = 0, 1 are supported");
    let p0 = rightmost_pole(g, s);
    assert!(p0 < 0.0, "gamma factor has a pole at or right of s");
    let c = c.unwrap_or_else(|| if y < 1.0 { p0 / 2.0 } else { best_abscissa(g, s, j, y) });
    let base = ln_gamma_factor(g, Complex64::new(s, 0.0));
    let ly = y.ln();
    let f = |t: f64| -> Complex64 {
        let w = Complex64::new(c, t);
        let e = ln_gamma_factor(g, w + s) - base - w * ly;
        e.exp() / w.powu(j + 1)
    };
    let mut sum = 0.5 * f(0.0);
    let mut maxabs = sum.norm() * 2.0;
    let mut k = 1;
    let mut falling = 0;
    let mut last = maxabs;
    loop {
        let v = f(k as f64 * STEP);
        let a = v.norm();
        sum += v;
        maxabs = maxabs.max(a);
        falling = if a < last { falling + 1 } else { 0 };
        last = a;
        if (falling > 5 && a < 1e-18 * maxabs) || k as f64 * STEP > 3000.0 {
            break;
        }
        k += 1;
    }
    let integral = STEP / PI * sum.re;
    if c < 0.0 {
        let residue = if j == 0 { 1.0 } else { dlog_gamma_factor(g, s) - ly };
        integral + residue
    } else {
        integral
    }
}

/// `G(x) = (1/2πi) ∫ Γ(w+1)² x^{−w} dw/w`, the spin cutoff at the center.
pub fn cutoff_kernel(x: f64) -> f64 {
    kernel_direct(&GammaFactor::spin(), 0.5, 0, x / (4.0 * PI * PI), None)
}

/// `G(x)` on a fixed contour `Re w = c > 0`.
pub fn cutoff_kernel_at(x: f64, c: f64) -> f64 {
    kernel_direct(&GammaFactor::spin(), 0.5, 0, x / (4.0 * PI * PI), Some(c))
}

const GRID_Y0: f64 = 1e-9;
const GRID_STEP: f64 = 1.0 / 256.0;

/// `ln F` on the grid `ln y = ln y₀ + i·h`, up to where `F` underflows.
#[derive(Debug)]
pub struct KernelTable {
    gamma: GammaFactor,
    s: f64,
    j: u32,
    ln_values: Vec<f64>,
}

impl KernelTable {
    fn build(g: &GammaFactor, s: f64, j: u32) -> Self {
        let u0 = GRID_Y0.ln();
        let mut ln_values = Vec::new();
        loop {
            let y = (u0 + ln_values.len() as f64 * GRID_STEP).exp();
            let v = kernel_direct(g, s, j, y, None);
            if !(v > 0.0) || v.ln() < -700.0 {
                break;
            }
            ln_values.push(v.ln());
        }
        KernelTable { gamma: g.clone(), s, j, ln_values }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let u = (y.ln() - GRID_Y0.ln()) / GRID_STEP;
        if u < 1.0 {
            return kernel_direct(&self.gamma, self.s, self.j, y, None);
        }
        let i = u.floor() as usize;
        if i + 2 >= self.ln_values.len() {
            return 0.0;
        }
        let t = u - i as f64;
        let v = &self.ln_values[i - 1..=i + 2];
        let l = -t * (t - 1.0) * (t - 2.0) / 6.0 * v[0] + (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0 * v[1]
            - (t + 1.0) * t * (t - 2.0) / 2.0 * v[2]
            + (t + 1.0) * t * (t - 1.0) / 6.0 * v[3];
        l.exp()
    }

    /// Largest tabulated `y`; the kernel is below `e^{−700}` beyond it.
    pub fn y_max(&self) -> f64 {
        (GRID_Y0.ln() + (self.ln_values.len() as f64 - 3.0) * GRID_STEP).exp()
    }
}

/// Shared cached table for `F_s^{(j)}` with the given gamma factor.
pub fn kernel_table(g: &GammaFactor, s: f64, j: u32) -> Arc<KernelTable> {
    static CACHE: OnceLock<Mutex<HashMap<(String, u64, u32), Arc<KernelTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (g.key(), s.to_bits(), j);
    if let Some(t) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return t.clone();
    }
    let t = Arc::new(KernelTable::build(g, s, j));
    cache.lock().unwrap_or_else(|e| e.into_inner()).insert(key, t.clone());
    t
}

/// `Λ(s) = Q^s γ(s) L(s)` with `Q = √N/(2π)^{d/2}` reported for reference.
#[derive(Debug, Clone, Serialize)]
pub struct CompletedL {
    pub lsd: LSeriesData,
    pub q: f64,
    pub pole: bool,
}

impl CompletedL {
    pub fn new(lsd: LSeriesData) -> Self {
        let q = (lsd.conductor as f64).sqrt() / (2.0 * PI).powf(lsd.gamma.degree() as f64 / 2.0);
        let pole = lsd.pole;
        CompletedL { lsd, q, pole }
    }
}

fn divisor_counts(k: usize, limit: usize) -> Vec<u32> {
    let spf = arith::smallest_prime_factors(limit);
    let mut d = vec![1u32; limit + 1];
    let mut exp = vec![0u32; limit + 1];
    let mut rest = vec![1usize; limit + 1];
    let binom = |e: u32| -> u32 {
        let mut r = 1u64;
        for i in 1..k as u64 {
            r = r * (e as u64 + i) / i;
        }
        r as u32
    };
    for n in 2..=limit {
        let p = spf[n] as usize;
        let m = n / p;
        if m > 1 && spf[m] as usize == p {
            exp[n] = exp[m] + 1;
            rest[n] = rest[m];
        } else {
            exp[n] = 1;
            rest[n] = m;
        }
        d[n] = binom(exp[n]) * d[rest[n]];
    }
    d
}

/// Terms needed for the central sum, and the rigorous tail bound at that length.
///
/// The bound uses `|a_n| ≤ d_deg(n) n^θ` (analytic normalization) up to a cutoff
/// `K`, and `d_deg(n) ≤ (2√n)^{deg−1}` with an upper Riemann sum beyond it.
pub fn required_terms(lsd: &LSeriesData, tol: f64, j: u32) -> Result<(usize, f64)> {
    if lsd.degree == 0 {
        return Ok((1, 0.0));
    }
    let table = kernel_table(&lsd.gamma, 0.5, j);
    let sqrt_n = (lsd.conductor as f64).sqrt();
    let k = lsd.degree;
    let theta = lsd.coefficient_exponent;
    let crude = |x: f64| 2.0 * (2.0 * x.sqrt()).powi(k as i32 - 1) * x.powf(theta - 0.5) * table.eval(x / sqrt_n);
    let crude_tail = |start: f64| -> f64 {
        let mut x = start;
        let mut prev = crude(x);
        let mut acc = 0.0;
        loop {
            let nx = x * 1.01;
            acc += prev * (nx - x);
            let v = crude(nx);
            if v > prev {
                return f64::INFINITY;
            }
            if v == 0.0 || v * nx < 1e-300 {
                return acc;
            }
            x = nx;
            prev = v;
        }
    };
    let mut cutoff = sqrt_n.max(10.0);
    while crude_tail(cutoff) > tol * 1e-3 {
        cutoff *= 1.25;
        if cutoff > 1e8 {
            return Err(Error::Precondition("conductor too large for the truncation bound".into()));
        }
    }
    let kmax = cutoff.ceil() as usize;
    let d = divisor_counts(k, kmax);
    let mut tail = crude_tail(cutoff);
    let target = tol / 2.0;
    for n in (1..=kmax).rev() {
        let nf = n as f64;
        let term = 2.0 * d[n] as f64 * nf.powf(theta - 0.5) * table.eval(nf / sqrt_n);
        if tail + term > target {
            return Ok((n, tail));
        }
        tail += term;
    }
    Ok((1, tail))
}

/// `L(1/2)` and an error bound, from `(1 + ε) Σ a_n n^{−1/2} F(n/√N)`.
pub fn central_value(cl: &CompletedL, tol: f64) -> Result<(f64, f64)> {
    let lsd = &cl.lsd;
    if cl.pole {
        return Err(Error::Precondition("L-function has a pole; no central value".into()));
    }
    if lsd.forced_central_zero {
        return Ok((0.0, 0.0));
    }
    let eps = lsd.root_number.ok_or(Error::UnknownRootNumber)?;
    if eps == -1 {
        return Ok((0.0, 0.0));
    }
    let (m, tail) = required_terms(lsd, tol, 0)?;
    if m > lsd.available() {
        return Err(Error::InsufficientCoefficients { required: m, available: lsd.available() });
    }
    let (sum, abs) = smoothed_sum(lsd, m, 0);
    Ok((2.0 * sum, tail + 2e-12 * abs + 1e-15))
}

/// Like [`central_value`] with an explicit number of terms.
pub fn central_value_with_terms(cl: &CompletedL, m: usize) -> Result<f64> {
    let eps = cl.lsd.root_number.ok_or(Error::UnknownRootNumber)?;
    if eps == -1 || cl.lsd.forced_central_zero {
        return Ok(0.0);
    }
    if m > cl.lsd.available() {
        return Err(Error::InsufficientCoefficients { required: m, available: cl.lsd.available() });
    }
    Ok(2.0 * smoothed_sum(&cl.lsd, m, 0).0)
}

fn smoothed_sum(lsd: &LSeriesData, m: usize, j: u32) -> (f64, f64) {
    let table = kernel_table(&lsd.gamma, 0.5, j);
    let sqrt_n = (lsd.conductor as f64).sqrt();
    let half_w = (lsd.motivic_weight as f64 + 1.0) / 2.0;
    let mut sum = 0.0;
    let mut abs = 0.0;
    for n in 1..=m {
        let a = lsd.coefficients[n];
        if a == 0 {
            continue;
        }
        let nf = n as f64;
        let t = a as f64 * nf.powf(-half_w) * table.eval(nf / sqrt_n);
        sum += t;
        abs += t.abs();
    }
    (sum, abs)
}

/// `L'(1/2)` and an error bound.
///
/// For `ε = −1` this is `2 Σ a_n n^{−1/2} F^{(1)}(n/√N)`; for `ε = +1` it is
/// `−L(1/2)(½ log N + γ'/γ(1/2))`.
pub fn central_derivative(cl: &CompletedL, tol: f64) -> Result<(f64, f64)> {
    let lsd = &cl.lsd;
    if cl.pole {
        return Err(Error::Precondition("L-function has a pole".into()));
    }
    let eps = lsd.root_number.ok_or(Error::UnknownRootNumber)?;
    if eps == 1 {
        let (v, e) = central_value(cl, tol)?;
        let f = 0.5 * (lsd.conductor as f64).ln() + dlog_gamma_factor(&lsd.gamma, 0.5);
        return Ok((-v * f, e * f.abs()));
    }
    let (m, tail) = required_terms(lsd, tol, 1)?;
    if m > lsd.available() {
        return Err(Error::InsufficientCoefficients { required: m, available: lsd.available() });
    }
    let (sum, abs) = smoothed_sum(lsd, m, 1);
    Ok((2.0 * sum, tail + 2e-12 * abs + 1e-15))
}

/// `Λ(s)` for real `s` from the two-sided smoothed sum with parameter `t`:
/// `N^{s/2}γ(s) Σ a_n n^{−s} F_s(n/(√N t)) + ε N^{(1−s)/2}γ(1−s) Σ a_n n^{s−1} F_{1−s}(nt/√N)`.
pub fn lambda(lsd: &LSeriesData, eps: i32, s: f64, t: f64, m: usize) -> Result<f64> {
    if m > lsd.available() {
        return Err(Error::InsufficientCoefficients { required: m, available: lsd.available() });
    }
    let sqrt_n = (lsd.conductor as f64).sqrt();
    let half_w = lsd.motivic_weight as f64 / 2.0;
    let k1 = kernel_table(&lsd.gamma, s, 0);
    let k2 = kernel_table(&lsd.gamma, 1.0 - s, 0);
    let (mut s1, mut s2) = (0.0, 0.0);
    for n in 1..=m {
        let a = lsd.coefficients[n];
        if a == 0 {
            continue;
        }
        let nf = n as f64;
        let an = a as f64 * nf.powf(-half_w);
        s1 += an * nf.powf(-s) * k1.eval(nf / (sqrt_n * t));
        s2 += an * nf.powf(s - 1.0) * k2.eval(nf * t / sqrt_n);
    }
    let ln_n = (lsd.conductor as f64).ln();
    let g1 = (0.5 * s * ln_n + ln_gamma_factor(&lsd.gamma, Complex64::new(s, 0.0)).re).exp();
    let g2 = (0.5 * (1.0 - s) * ln_n + ln_gamma_factor(&lsd.gamma, Complex64::new(1.0 - s, 0.0)).re).exp();
    Ok(g1 * s1 + eps as f64 * g2 * s2)
}

/// Terms used by [`fe_residual`].
pub fn residual_terms(lsd: &LSeriesData) -> Result<usize> {
    let (m, _) = required_terms(lsd, 1e-12, 0)?;
    Ok((m as f64 * 1.3).ceil() as usize)
}

const RESIDUAL_T: f64 = 1.25;

/// Relative functional-equation mismatch
/// `Σ_{s₀ ∈ {0.6, 0.75}} |Λ(s₀) − εΛ(1 − s₀)| / (|Λ(s₀)| + |Λ(1 − s₀)|)`
/// with both sides evaluated at `t = 1.25`, after replacing the local factors
/// listed in `bad_factors`.
pub fn fe_residual(lsd: &LSeriesData, candidate_eps: i32, bad_factors: &BTreeMap<u64, Vec<i64>>) -> Result<f64> {
    let m = residual_terms(lsd)?;
    if m > lsd.available() {
        return Err(Error::InsufficientCoefficients { required: m, available: lsd.available() });
    }
    let replaced;
    let data = if bad_factors.is_empty() {
        lsd
    } else {
        let mut l = lsd.clone();
        for (p, c) in bad_factors {
            l.euler_factors.insert(*p, c.clone());
        }
        let keep = l.coefficients.len() - 1;
        l.coefficients = expand_euler_product(&l.euler_factors, keep)?;
        replaced = l;
        &replaced
    };
    let mut total = 0.0;
    for s0 in [0.6, 0.75] {
        let a = lambda(data, candidate_eps, s0, RESIDUAL_T, m)?;
        let b = lambda(data, candidate_eps, 1.0 - s0, RESIDUAL_T, m)?;
        total += (a - candidate_eps as f64 * b).abs() / (a.abs() + b.abs()).max(1e-300);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bessel_k1(z: f64) -> f64 {
        let h: f64 = 1e-3;
        let mut s = 0.5 * (-z).exp();
        let mut t: f64 = h;
        loop {
            let v = (-z * t.cosh()).exp() * t.cosh();
            s += v;
            if v < 1e-30 {
                break;
            }
            t += h;
        }
        s * h
    }

    #[test]
    fn ln_gamma_values() {
        let v = ln_gamma(Complex64::new(0.5, 0.0));
        assert!((v.re - 0.5 * PI.ln()).abs() < 1e-13);
        let v = ln_gamma(Complex64::new(10.0, 0.0));
        assert!((v.re - 362880f64.ln()).abs() < 1e-12);
        let z = Complex64::new(0.3, 2.0);
        let lhs = ln_gamma(z + 1.0) - ln_gamma(z);
        assert!(((lhs.exp()) - z).norm() < 1e-12);
        let z = Complex64::new(-1.3, 4.0);
        let lhs = ln_gamma(z + 1.0) - ln_gamma(z);
        assert!(((lhs.exp()) - z).norm() < 1e-10);
        assert!((digamma(1.0) + 0.5772156649015329).abs() < 1e-13);
    }

    #[test]
    fn cutoff_matches_bessel_form() {
        for x in [0.05, 0.1, 1.0, 3.0, 10.0, 50.0] {
            let z = 2.0 * f64::sqrt(x);
            let exact = z * bessel_k1(z);
            let g = cutoff_kernel(x);
            assert!((g - exact).abs() < 1e-11 * exact.max(1e-3), "x = {x}: {g} vs {exact}");
        }
    }

    #[test]
    fn cutoff_abscissa_independence() {
        for x in [0.1, 1.0, 10.0] {
            let a = cutoff_kernel_at(x, 1.0);
            let b = cutoff_kernel_at(x, 2.0);
            assert!((a - b).abs() < 1e-10, "x = {x}");
        }
        // G(10) = 2√10 K₁(2√10) ≈ 6.0e-3.
        assert!((cutoff_kernel(10.0) - 6.0e-3).abs() < 1e-4);
        assert!(cutoff_kernel(1.0) > cutoff_kernel(2.0));
        assert!((cutoff_kernel(1e-8) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degree_two_kernel_is_incomplete_gamma() {
        // Γ_C(s + 1/2) at s = 1/2: F(y) = e^{−2πy}.
        let g = GammaFactor::weight_two();
        for y in [0.01, 0.3, 2.0] {
            let f = kernel_direct(&g, 0.5, 0, y, None);
            assert!((f - (-2.0 * PI * y).exp()).abs() < 1e-12);
        }
        let table = kernel_table(&g, 0.5, 0);
        for y in [0.001, 0.123, 1.7, 5.5] {
            let f = table.eval(y);
            assert!((f - (-2.0 * PI * y).exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn derivative_kernel_integral_form() {
        // F^{(1)}(y) = ∫_y^∞ F(t) dt / t.
        let g = GammaFactor::weight_two();
        let y = 0.2;
        let f1 = kernel_direct(&g, 0.5, 1, y, None);
        let mut acc = 0.0;
        let h = 1e-4;
        let mut u = y.ln();
        while u < 3.0 {
            let t = u.exp();
            acc += (-2.0 * PI * t).exp() * h;
            u += h;
        }
        acc -= 0.5 * (-2.0 * PI * y).exp() * h;
        assert!((f1 - acc).abs() < 1e-7, "{f1} vs {acc}");
    }

    #[test]
    fn divisor_count_values() {
        let d = divisor_counts(4, 100);
        assert_eq!(d[1], 1);
        assert_eq!(d[2], 4);
        assert_eq!(d[4], 10);
        assert_eq!(d[12], 40);
        let d2 = divisor_counts(2, 100);
        assert_eq!(d2[60], 12);
    }
}
