//! Binary quadratic forms `[Na, b, c]` at level `N` and their `Γ₀(N)`-classes.
//!
//! A class of positive definite forms of discriminant `D` is described by the
//! `SL₂(ℤ)`-reduced form `R` it contains together with an orbit of points of
//! `P¹(ℤ/N)` under `Aut(R)`: if `T = R[M]` then the coset `M·Γ₀(N)` is the
//! point `(α : γ)` given by the first column of `M`, and `N | R(α, γ)`.

use std::collections::BTreeSet;
use std::fmt;

use num_integer::Integer;
use serde::Serialize;

use crate::arith::{self, gcd, gcd_all, kronecker, prime_divisors};
use crate::error::{Error, Result};

/// 2×2 integer matrix `(a b; c d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Mat2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1, b: 0, c: 0, d: 1 };

    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// Inverse of a determinant-one matrix.
    pub fn inverse_sl2(&self) -> Mat2 {
        debug_assert_eq!(self.det(), 1);
        Mat2 { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn in_gamma0(&self, level: i64) -> bool {
        self.det() == 1 && self.c % level == 0
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {}; {} {})", self.a, self.b, self.c, self.d)
    }
}

/// Coefficients `(A, B, C)` of `A x² + B xy + C y²` acted on by `U`: `T[U] = Uᵗ T U`.
fn act_raw(q: (i64, i64, i64), u: &Mat2) -> (i64, i64, i64) {
    let (a, b, c) = (q.0 as i128, q.1 as i128, q.2 as i128);
    let (al, be, ga, de) = (u.a as i128, u.b as i128, u.c as i128, u.d as i128);
    let na = a * al * al + b * al * ga + c * ga * ga;
    let nb = 2 * a * al * be + b * (al * de + be * ga) + 2 * c * ga * de;
    let nc = a * be * be + b * be * de + c * de * de;
    let conv = |v: i128| i64::try_from(v).expect("form coefficient overflow");
    (conv(na), conv(nb), conv(nc))
}

/// The form `[N a, b, c]`, i.e. `Q(x, y) = N a x² + b x y + c y²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct QuadForm {
    pub level: i64,
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl QuadForm {
    pub fn new(level: i64, a: i64, b: i64, c: i64) -> Self {
        assert!(level >= 1, "level must be positive");
        QuadForm { level, a, b, c }
    }

    /// Builds a form from its full first coefficient `A = N a`.
    pub fn from_full(level: i64, big_a: i64, b: i64, c: i64) -> Result<Self> {
        if big_a % level != 0 {
            return Err(Error::Precondition(format!(
                "first coefficient {big_a} not divisible by level {level}"
            )));
        }
        Ok(QuadForm { level, a: big_a / level, b, c })
    }

    /// The full first coefficient `N a`.
    pub fn big_a(&self) -> i64 {
        self.level * self.a
    }

    pub fn coeffs(&self) -> (i64, i64, i64) {
        (self.big_a(), self.b, self.c)
    }

    pub fn disc(&self) -> i64 {
        let (a, b, c) = (self.big_a() as i128, self.b as i128, self.c as i128);
        i64::try_from(b * b - 4 * a * c).expect("discriminant fits in i64")
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a > 0 && self.c > 0 && self.disc() < 0
    }

    pub fn content(&self) -> i64 {
        gcd_all(&[self.a, self.b, self.c])
    }

    pub fn eval(&self, x: i64, y: i64) -> i64 {
        form_value(self.coeffs(), x, y).expect("form value fits in i64")
    }

    /// `T[U]`; panics if `U` does not preserve the level structure.
    pub fn act(&self, u: &Mat2) -> QuadForm {
        let (a, b, c) = act_raw(self.coeffs(), u);
        QuadForm::from_full(self.level, a, b, c).expect("transformation leaves Q_N")
    }

    /// `T[diag(1, -1)] = [Na, -b, c]`.
    pub fn mirror(&self) -> QuadForm {
        QuadForm { b: -self.b, ..*self }
    }

    /// Residue of `b` modulo `2N`, in `[0, 2N)`.
    pub fn residue(&self) -> i64 {
        self.b.rem_euclid(2 * self.level)
    }
}

impl fmt::Display for QuadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}]", self.big_a(), self.b, self.c)
    }
}

/// `SL₂(ℤ)`-reduction of a positive definite form: returns `(R, U)` with
/// `Q[U] = R` and `R` reduced.
pub fn reduce(q: (i64, i64, i64)) -> ((i64, i64, i64), Mat2) {
    let (mut a, mut b, mut c) = q;
    assert!(a > 0 && b * b - 4 * a * c < 0, "reduce needs a positive definite form");
    let mut u = Mat2::IDENTITY;
    loop {
        // Bring b into (-a, a].
        let k = (a - b).div_euclid(2 * a);
        if k != 0 {
            let t = Mat2::new(1, k, 0, 1);
            let (na, nb, nc) = act_raw((a, b, c), &t);
            a = na;
            b = nb;
            c = nc;
            u = u.mul(&t);
        }
        if a > c || (a == c && b < 0) {
            let s = Mat2::new(0, -1, 1, 0);
            let (na, nb, nc) = act_raw((a, b, c), &s);
            a = na;
            b = nb;
            c = nc;
            u = u.mul(&s);
            continue;
        }
        return ((a, b, c), u);
    }
}

/// Determinant-one automorphisms of a reduced positive definite form.
pub fn automorphisms(r: (i64, i64, i64)) -> Vec<Mat2> {
    // For reduced forms every automorph has entries in {-1, 0, 1}.
    let mut out = Vec::new();
    for a in -1..=1 {
        for b in -1..=1 {
            for c in -1..=1 {
                for d in -1..=1 {
                    let m = Mat2::new(a, b, c, d);
                    if m.det() == 1 && act_raw(r, &m) == r {
                        out.push(m);
                    }
                }
            }
        }
    }
    out
}

/// Point of `P¹(ℤ/N)` for squarefree `N`, stored prime by prime: for each
/// `p | N` the value `t` encodes `(1 : t)` for `t < p` and `(0 : 1)` for `t = p`.
pub type P1Point = Vec<u32>;

fn normalize_local(x: i64, y: i64, p: i64) -> u32 {
    let (x, y) = (x.rem_euclid(p), y.rem_euclid(p));
    if x != 0 {
        let inv = arith::inv_mod(x, p).expect("p prime");
        ((y * inv) % p) as u32
    } else {
        debug_assert!(y != 0, "not a point of P1");
        p as u32
    }
}

fn local_coords(t: u32, p: i64) -> (i64, i64) {
    if t as i64 == p {
        (0, 1)
    } else {
        (1, t as i64)
    }
}

/// Normalized point of `(x : y)`; `None` if `(x, y)` is not primitive modulo some `p`.
pub fn p1_point(x: i64, y: i64, primes: &[i64]) -> Option<P1Point> {
    let mut out = Vec::with_capacity(primes.len());
    for &p in primes {
        if x.rem_euclid(p) == 0 && y.rem_euclid(p) == 0 {
            return None;
        }
        out.push(normalize_local(x, y, p));
    }
    Some(out)
}

fn p1_act(m: &Mat2, pt: &P1Point, primes: &[i64]) -> P1Point {
    pt.iter()
        .zip(primes)
        .map(|(&t, &p)| {
            let (x, y) = local_coords(t, p);
            normalize_local(m.a * x + m.b * y, m.c * x + m.d * y, p)
        })
        .collect()
}

/// Identifies a `Γ₀(N)`-class: its reduced form and the minimal point of the
/// corresponding `Aut(R)`-orbit in `P¹(ℤ/N)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ClassKey {
    pub reduced: (i64, i64, i64),
    pub point: P1Point,
}

fn level_primes(level: i64) -> Result<Vec<i64>> {
    if !arith::is_squarefree(level) {
        return Err(Error::Precondition(format!("level {level} is not squarefree")));
    }
    Ok(prime_divisors(level).into_iter().map(|p| p as i64).collect())
}

fn orbit(r: (i64, i64, i64), pt: &P1Point, primes: &[i64]) -> (Vec<P1Point>, usize) {
    let auts = automorphisms(r);
    let mut seen: Vec<P1Point> = Vec::new();
    let mut stab = 0;
    for m in &auts {
        let img = p1_act(m, pt, primes);
        if &img == pt {
            stab += 1;
        }
        if !seen.contains(&img) {
            seen.push(img);
        }
    }
    seen.sort();
    (seen, stab)
}

/// The class key of a positive definite form at squarefree level.
pub fn class_key(t: &QuadForm) -> Result<ClassKey> {
    let primes = level_primes(t.level)?;
    Ok(class_key_with(t, &primes))
}

fn class_key_with(t: &QuadForm, primes: &[i64]) -> ClassKey {
    let (r, u) = reduce(t.coeffs());
    // t = R[U⁻¹]; the first column of U⁻¹ is (d, -c).
    let pt = p1_point(u.d, -u.c, primes).expect("SL2 column is primitive");
    let (orb, _) = orbit(r, &pt, primes);
    ClassKey { reduced: r, point: orb[0].clone() }
}

/// `ε(T) = #{U ∈ Γ₀(N) : T[U] = T}`.
pub fn automorphism_count(t: &QuadForm) -> Result<usize> {
    if !t.is_positive_definite() {
        return Err(Error::Precondition(format!("{t} is not positive definite")));
    }
    let (r, u) = reduce(t.coeffs());
    let inv = u.inverse_sl2();
    let m = |a: &Mat2| inv.mul(a).mul(&u);
    Ok(automorphisms(r).iter().filter(|a| m(a).c % t.level == 0).count())
}

/// Some `U ∈ Γ₀(N)` with `T1[U] = T2`, if the forms are equivalent.
pub fn gamma0_equivalent(t1: &QuadForm, t2: &QuadForm) -> Option<Mat2> {
    if t1.level != t2.level || t1.disc() != t2.disc() {
        return None;
    }
    if !t1.is_positive_definite() || !t2.is_positive_definite() {
        return None;
    }
    let (r1, u1) = reduce(t1.coeffs());
    let (r2, u2) = reduce(t2.coeffs());
    if r1 != r2 {
        return None;
    }
    let u2inv = u2.inverse_sl2();
    automorphisms(r1)
        .iter()
        .map(|a| u1.mul(a).mul(&u2inv))
        .find(|m| m.c % t1.level == 0)
}

/// `R_D = {ρ mod 2N : ρ² ≡ D (mod 4N)}`, sorted.
pub fn residues(level: i64, d: i64) -> Vec<i64> {
    let m = 4 * level;
    (0..2 * level).filter(|&r| (r * r - d).rem_euclid(m) == 0).collect()
}

fn local_roots(r: (i64, i64, i64), p: i64) -> Vec<u32> {
    let (a, b, c) = (r.0.rem_euclid(p), r.1.rem_euclid(p), r.2.rem_euclid(p));
    let mut out = Vec::new();
    for t in 0..p {
        if (a + t * (b + c * t % p)) % p == 0 {
            out.push(t as u32);
        }
    }
    if c == 0 {
        out.push(p as u32);
    }
    out
}

/// Smallest eigenvalue of the Gram matrix of a positive definite form.
fn min_eigen(r: (i64, i64, i64)) -> f64 {
    let (a, b, c) = (r.0 as f64, r.1 as f64, r.2 as f64);
    ((a + c) - ((a - c) * (a - c) + b * b).sqrt()) / 2.0
}

/// Canonical representative of a class: the form `R[M]` in the class with the
/// smallest first coefficient, then smallest `|b|`, preferring `b > 0`.
fn canonical_rep(level: i64, r: (i64, i64, i64), orb: &[P1Point], primes: &[i64]) -> QuadForm {
    let lam = min_eigen(r);
    let mut bound = level.max(r.0);
    loop {
        let ymax = ((bound as f64 / lam).sqrt() + 1.0) as i64;
        let mut best: Option<(i64, i64, i64)> = None;
        for y in 0..=ymax {
            for x in -ymax..=ymax {
                if y == 0 && x <= 0 {
                    continue;
                }
                if gcd(x, y) != 1 {
                    continue;
                }
                let val = r.0 * x * x + r.1 * x * y + r.2 * y * y;
                if val > bound || val % level != 0 {
                    continue;
                }
                if let Some(b) = best {
                    if val > b.0 {
                        continue;
                    }
                }
                let pt = p1_point(x, y, primes).expect("primitive");
                if !orb.contains(&pt) {
                    continue;
                }
                // Complete (x, y) to an SL2 matrix and reduce b modulo 2·val.
                let e = x.extended_gcd(&y);
                let m = Mat2::new(x, -e.y, y, e.x);
                debug_assert_eq!(m.det(), 1);
                let (fa, fb, _) = act_raw(r, &m);
                let mut nb = fb.rem_euclid(2 * fa);
                if nb > fa {
                    nb -= 2 * fa;
                }
                if nb == -fa {
                    nb = fa;
                }
                let key_cand = (fa, nb.abs(), if nb < 0 { 1 } else { 0 });
                let better = match best {
                    None => true,
                    Some((ba, bb, _)) => {
                        let key_best = (ba, bb.abs(), if bb < 0 { 1 } else { 0 });
                        key_cand < key_best
                    }
                };
                if better {
                    let disc = r.1 * r.1 - 4 * r.0 * r.2;
                    let nc = (nb * nb - disc) / (4 * fa);
                    best = Some((fa, nb, nc));
                }
            }
        }
        if let Some((fa, fb, fc)) = best {
            return QuadForm::from_full(level, fa, fb, fc).expect("divisible by level");
        }
        bound *= 2;
    }
}

/// One representative per `Γ₀(N)`-class of a given discriminant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassList {
    pub level: i64,
    pub disc: i64,
    pub reps: Vec<QuadForm>,
    pub stabilizer_orders: Vec<usize>,
    pub keys: Vec<ClassKey>,
}

impl ClassList {
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    /// Classes whose `b` lies in the residue class `ρ mod 2N`.
    pub fn with_residue(&self, rho: i64) -> ClassList {
        let rho = rho.rem_euclid(2 * self.level);
        let mut out = ClassList {
            level: self.level,
            disc: self.disc,
            reps: Vec::new(),
            stabilizer_orders: Vec::new(),
            keys: Vec::new(),
        };
        for i in 0..self.reps.len() {
            if self.reps[i].residue() == rho {
                out.reps.push(self.reps[i]);
                out.stabilizer_orders.push(self.stabilizer_orders[i]);
                out.keys.push(self.keys[i].clone());
            }
        }
        out
    }
}

/// All `Γ₀(N)`-classes of positive definite forms `[Na, b, c]` of discriminant
/// `d < 0`, optionally restricted to `b ≡ ρ (mod 2N)`.
pub fn enumerate_classes(level: i64, d: i64, rho: Option<i64>) -> Result<ClassList> {
    if d >= 0 {
        return Err(Error::Precondition(format!("{d} is not negative")));
    }
    let primes = level_primes(level)?;
    let mut found: Vec<(QuadForm, usize, ClassKey)> = Vec::new();
    if !residues(level, d).is_empty() {
        for r in arith::reduced_forms(d, false) {
            let local: Vec<Vec<u32>> = primes.iter().map(|&p| local_roots(r, p)).collect();
            let mut done: BTreeSet<P1Point> = BTreeSet::new();
            let mut points: Vec<P1Point> = vec![Vec::new()];
            for roots in &local {
                points = points
                    .iter()
                    .flat_map(|pt| {
                        roots.iter().map(move |&t| {
                            let mut v = pt.clone();
                            v.push(t);
                            v
                        })
                    })
                    .collect();
            }
            for pt in points {
                if done.contains(&pt) {
                    continue;
                }
                let (orb, stab) = orbit(r, &pt, &primes);
                for o in &orb {
                    done.insert(o.clone());
                }
                let rep = canonical_rep(level, r, &orb, &primes);
                let key = ClassKey { reduced: r, point: orb[0].clone() };
                found.push((rep, stab, key));
            }
        }
    }
    if let Some(rho) = rho {
        let rho = rho.rem_euclid(2 * level);
        found.retain(|(t, _, _)| t.residue() == rho);
    }
    found.sort_by(|x, y| (x.0.a, x.0.b, x.0.c).cmp(&(y.0.a, y.0.b, y.0.c)));
    Ok(ClassList {
        level,
        disc: d,
        reps: found.iter().map(|f| f.0).collect(),
        stabilizer_orders: found.iter().map(|f| f.1).collect(),
        keys: found.into_iter().map(|f| f.2).collect(),
    })
}

/// Canonical representative of the class of `t`.
pub fn canonical_form(t: &QuadForm) -> Result<QuadForm> {
    let primes = level_primes(t.level)?;
    let (r, u) = reduce(t.coeffs());
    let pt = p1_point(u.d, -u.c, &primes).expect("primitive");
    let (orb, _) = orbit(r, &pt, &primes);
    Ok(canonical_rep(t.level, r, &orb, &primes))
}

/// The Atkin–Lehner involution `W_{N'}` on classes, for `N' ∥ N`.
///
/// With `N = N'N''` and `N'αδ − N''βγ = 1`, the matrix `(N'α β; Nγ N'δ)` has
/// determinant `N'` and `T[W]/N'` again lies in `Q_N`.
pub fn atkin_lehner(t: &QuadForm, nprime: i64) -> Result<QuadForm> {
    let n = t.level;
    if nprime <= 0 || n % nprime != 0 || gcd(nprime, n / nprime) != 1 {
        return Err(Error::NotExactDivisor { nprime, level: n });
    }
    if !t.is_positive_definite() {
        return Err(Error::Precondition(format!("{t} is not positive definite")));
    }
    let n2 = n / nprime;
    let (alpha, gamma) = (1i64, 1i64);
    // N' δ − N'' β = 1.
    let e = nprime.extended_gcd(&n2);
    let (delta, beta) = (e.x, -e.y);
    debug_assert_eq!(nprime * alpha * delta - n2 * beta * gamma, 1);
    let (a, b, c) = (t.a as i128, t.b as i128, t.c as i128);
    let (np, nn, n2w) = (nprime as i128, n as i128, n2 as i128);
    let (al, be, ga, de) = (alpha as i128, beta as i128, gamma as i128, delta as i128);
    let new_a = a * np * al * al + b * al * ga + c * n2w * ga * ga;
    let new_b = 2 * a * nn * al * be + b * (np * al * de + n2w * be * ga) + 2 * c * nn * ga * de;
    let new_c = a * n2w * be * be + b * be * de + c * np * de * de;
    let w = QuadForm::new(
        n,
        i64::try_from(new_a).expect("overflow"),
        i64::try_from(new_b).expect("overflow"),
        i64::try_from(new_c).expect("overflow"),
    );
    debug_assert_eq!(w.disc(), t.disc());
    if arith::is_squarefree(n) {
        canonical_form(&w)
    } else {
        Ok(w)
    }
}

/// The generalized genus character `χ_ℓ(T)` on forms of discriminant `ℓD`.
pub fn genus_character(t: &QuadForm, ell: i64) -> Result<i32> {
    genus_character_with_value(t, ell, None)
}

/// Represented values of `T̃` coprime to `ℓ`, scanning `|x|, |y| <= 30`.
pub fn twisted_represented_values(t: &QuadForm, ell: i64, limit: usize) -> Result<Vec<i64>> {
    let tt = twisted_form(t, ell)?.0;
    let mut out = Vec::new();
    for s in 1..=30i64 {
        for x in -s..=s {
            for y in -s..=s {
                if x.abs().max(y.abs()) != s {
                    continue;
                }
                let Some(v) = form_value(tt, x, y) else { continue };
                if gcd(v, ell) == 1 && !out.contains(&v) {
                    out.push(v);
                    if out.len() >= limit {
                        return Ok(out);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `(T̃, g)` with `g = gcd(N, b, c, ℓ)` and `T̃ = [Na/g, b, cg]`.
fn twisted_form(t: &QuadForm, ell: i64) -> Result<((i64, i64, i64), i64)> {
    if !arith::is_fundamental(ell) {
        return Err(Error::Precondition(format!("{ell} is not a fundamental discriminant")));
    }
    let disc = t.disc();
    if disc % ell != 0 || !matches!((disc / ell).rem_euclid(4), 0 | 1) {
        return Err(Error::Precondition(format!(
            "disc {disc} of {t} is not ℓ·D for a discriminant D (ℓ = {ell})"
        )));
    }
    if gcd_all(&[t.a, t.b, t.c, ell]) != 1 {
        return Err(Error::Precondition(format!("gcd(a, b, c, ℓ) ≠ 1 for {t}, ℓ = {ell}")));
    }
    let g = gcd_all(&[t.level, t.b, t.c, ell]);
    if ell % 2 != 0 {
        assert!(g % 2 == 1, "g must be odd when ℓ is odd");
    }
    let cg = t.c.checked_mul(g).ok_or_else(|| Error::Precondition(format!("coefficients of {t} too large")))?;
    Ok(((t.big_a() / g, t.b, cg), g))
}

/// `A x² + b x y + c y²`, or `None` outside the `i64` range.
fn form_value(q: (i64, i64, i64), x: i64, y: i64) -> Option<i64> {
    let (a, b, c, x, y) = (q.0 as i128, q.1 as i128, q.2 as i128, x as i128, y as i128);
    i64::try_from(a * x * x + b * x * y + c * y * y).ok()
}

/// Genus character computed from a chosen represented value `n` of `T̃`
/// (`None`: the first one found by the scan).
pub fn genus_character_with_value(t: &QuadForm, ell: i64, n: Option<i64>) -> Result<i32> {
    let (tt, g) = twisted_form(t, ell)?;
    let n = match n {
        Some(n) => n,
        None => {
            let mut found = None;
            'scan: for s in 0..=30i64 {
                for x in -s..=s {
                    for y in -s..=s {
                        if x.abs().max(y.abs()) != s {
                            continue;
                        }
                        let Some(v) = form_value(tt, x, y) else { continue };
                        if gcd(v, ell) == 1 {
                            found = Some(v);
                            break 'scan;
                        }
                    }
                }
            }
            found.expect("T̃ represents a value coprime to ℓ")
        }
    };
    let mut chi = kronecker(ell, n);
    for p in prime_divisors(g) {
        let p = p as i64;
        let s = if p == 2 {
            let mut t_odd = ell;
            while t_odd % 2 == 0 {
                t_odd /= 2;
            }
            kronecker(2, t_odd)
        } else {
            kronecker(-ell / p, p)
        };
        chi *= s;
    }
    debug_assert!(chi == 1 || chi == -1);
    Ok(chi)
}
