//! Class averages of Fourier coefficients: `A(D)`, `B(D, ρ)`, `B(D)`,
//! the twisted `B_ℓ(D)`, and the local factor `α_Δ`.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::arith::{self, gcd_all};
use crate::coeffstore::{CoeffTable, CoefficientSource};
use crate::error::{Error, Result};
use crate::quadforms::{self, ClassList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageStatus {
    Exact,
    EmptySum,
    MissingData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageResult {
    /// `None` exactly when the status is `MissingData`.
    #[serde(serialize_with = "ser_opt_rational")]
    pub value: Option<BigRational>,
    pub status: AverageStatus,
    pub class_count: usize,
    /// Classes skipped because `gcd(a, b, c, ℓ) > 1`, where `χ_ℓ` is taken to be 0.
    pub imprimitive_classes: usize,
}

fn ser_opt_rational<S: serde::Serializer>(v: &Option<BigRational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_str(&v.to_string()),
        None => s.serialize_none(),
    }
}

impl AverageResult {
    fn empty() -> Self {
        AverageResult {
            value: Some(BigRational::zero()),
            status: AverageStatus::EmptySum,
            class_count: 0,
            imprimitive_classes: 0,
        }
    }

    fn missing(class_count: usize) -> Self {
        AverageResult { value: None, status: AverageStatus::MissingData, class_count, imprimitive_classes: 0 }
    }

    pub fn is_missing(&self) -> bool {
        self.status == AverageStatus::MissingData
    }

    /// The value as an integer, if it is one.
    pub fn as_integer(&self) -> Option<BigInt> {
        self.value.as_ref().filter(|v| v.is_integer()).map(|v| v.to_integer())
    }
}

fn half() -> BigRational {
    BigRational::new(1.into(), 2.into())
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `α_Δ = Π_{p | N} (1 + (Δ₀/p))`.
pub fn alpha(delta: i64, level: i64) -> Result<u64> {
    let d = arith::fundamental_decomposition(delta)?;
    Ok(arith::prime_divisors(level)
        .into_iter()
        .map(|p| (1 + arith::kronecker(d.fundamental_part, p as i64)) as u64)
        .product())
}

/// `Σ χ(T) a(T)/ε(T)` over the given classes, with `χ ≡ 1` when `ell` is `None`.
fn weighted_sum<S: CoefficientSource + ?Sized>(
    source: &S,
    classes: &ClassList,
    ell: Option<i64>,
) -> Result<AverageResult> {
    if classes.is_empty() {
        return Ok(AverageResult::empty());
    }
    let mut acc = BigRational::zero();
    let mut imprimitive = 0;
    for (t, &eps) in classes.reps.iter().zip(&classes.stabilizer_orders) {
        let chi = match ell {
            Some(l) if l != 1 => {
                if gcd_all(&[t.a, t.b, t.c, l]) != 1 {
                    imprimitive += 1;
                    continue;
                }
                quadforms::genus_character(t, l)?
            }
            _ => 1,
        };
        let a = match source.coefficient(t) {
            Ok(a) => a,
            Err(Error::MissingCoefficient { .. }) => return Ok(AverageResult::missing(classes.len())),
            Err(e) => return Err(e),
        };
        acc += a * rat(chi as i64) / rat(eps as i64);
    }
    Ok(AverageResult {
        value: Some(acc),
        status: AverageStatus::Exact,
        class_count: classes.len(),
        imprimitive_classes: imprimitive,
    })
}

fn check_disc(d: i64) -> Result<()> {
    if d >= 0 {
        return Err(Error::Precondition(format!("discriminant {d} must be negative")));
    }
    arith::Discriminant::new(d).map(|_| ())
}

/// `A(D) = ½ Σ a(T)/ε(T)` over all `Γ₀(N)`-classes of discriminant `D`.
pub fn average_a<S: CoefficientSource + ?Sized>(source: &S, d: i64) -> Result<AverageResult> {
    check_disc(d)?;
    let classes = quadforms::enumerate_classes(source.meta().level, d, None)?;
    let mut r = weighted_sum(source, &classes, None)?;
    if let Some(v) = r.value.as_mut() {
        *v *= half();
    }
    Ok(r)
}

/// `B_ℓ(D, ρ) = Σ χ_ℓ(T) a(T)/ε(T)` over classes of discriminant `ℓD` with
/// `b ≡ ρ (mod 2N)`.
pub fn average_b_rho<S: CoefficientSource + ?Sized>(
    source: &S,
    d: i64,
    rho: i64,
    ell: i64,
) -> Result<AverageResult> {
    let delta = ell * d;
    check_disc(delta)?;
    if !arith::is_fundamental(ell) {
        return Err(Error::Precondition(format!("{ell} is not a fundamental discriminant")));
    }
    arith::Discriminant::new(d)?;
    let level = source.meta().level;
    let rho = rho.rem_euclid(2 * level);
    if !quadforms::residues(level, delta).contains(&rho) {
        return Err(Error::Precondition(format!("{rho} is not in R_{delta} at level {level}")));
    }
    let classes = quadforms::enumerate_classes(level, delta, Some(rho))?;
    weighted_sum(source, &classes, Some(ell))
}

/// `B(D) = ½ Σ_ρ |B(D, ρ)|`, asserting that `|B(D, ρ)|` does not depend on `ρ`.
pub fn average_b<S: CoefficientSource + ?Sized>(source: &S, d: i64) -> Result<AverageResult> {
    check_disc(d)?;
    let level = source.meta().level;
    let rs = quadforms::residues(level, d);
    if rs.is_empty() {
        return Ok(AverageResult::empty());
    }
    let classes = quadforms::enumerate_classes(level, d, None)?;
    let mut acc = BigRational::zero();
    let mut first: Option<BigRational> = None;
    for &rho in &rs {
        let r = weighted_sum(source, &classes.with_residue(rho), None)?;
        let Some(v) = r.value else {
            return Ok(AverageResult::missing(classes.len()));
        };
        let v = v.abs();
        match &first {
            None => first = Some(v.clone()),
            Some(f) if *f != v => {
                return Err(Error::Inconsistent(format!(
                    "|B({d}, ρ)| depends on ρ: {f} vs {v} at ρ = {rho}"
                )))
            }
            _ => {}
        }
        acc += v;
    }
    Ok(AverageResult {
        value: Some(acc * half()),
        status: AverageStatus::Exact,
        class_count: classes.len(),
        imprimitive_classes: 0,
    })
}

/// `B_ℓ(D) = ½ Σ_{ρ ∈ R_{ℓD}} B_ℓ(D, ρ)`, signed.
pub fn twisted_average<S: CoefficientSource + ?Sized>(source: &S, ell: i64, d: i64) -> Result<AverageResult> {
    let delta = ell * d;
    check_disc(delta)?;
    if !arith::is_fundamental(ell) || !arith::is_fundamental(d) {
        return Err(Error::Precondition(format!("ℓ = {ell} and D = {d} must be fundamental")));
    }
    let level = source.meta().level;
    if quadforms::residues(level, delta).is_empty() {
        return Ok(AverageResult::empty());
    }
    let classes = quadforms::enumerate_classes(level, delta, None)?;
    let mut r = weighted_sum(source, &classes, Some(ell))?;
    if let Some(v) = r.value.as_mut() {
        *v *= half();
    }
    Ok(r)
}

/// Checks `|B(D, ρ)|` is independent of `ρ` for every discriminant whose
/// classes are all covered by the table.
pub fn check_table_consistency(table: &CoeffTable) -> Result<()> {
    let discs: BTreeSet<i64> = table.entries.values().map(|e| e.rep.disc()).collect();
    for d in discs {
        match average_b(table, d) {
            Ok(_) => {}
            Err(Error::Inconsistent(m)) => {
                return Err(Error::Inconsistent(format!("coefficient data corrupt: {m}")))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffstore::{gritsenko_table, JacobiTable};

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha(-15, 587).unwrap(), 2);
        assert_eq!(alpha(-15, 249).unwrap(), 2);
        assert_eq!(alpha(1, 2 * 3 * 5).unwrap(), 8);
        assert_eq!(alpha(-4, 3).unwrap(), 0);
    }

    #[test]
    fn lift_averages_level_three() {
        let v = rat(5);
        let mut j = JacobiTable::new(3, 2);
        for d in [-3i64, -15, -20, -24] {
            for rho in quadforms::residues(3, d) {
                j.set(d, rho, v.clone()).unwrap();
            }
        }
        let g = gritsenko_table(&j, &[(3, 1)], "lift").unwrap();
        // D = -3: h = 1, w = 6, R_D = {3}.
        let b = average_b(&g, -3).unwrap();
        assert_eq!(b.value, Some(v.clone() / rat(6) * half()));
        let a = average_a(&g, -15).unwrap();
        let h = arith::class_data(-15).unwrap();
        assert_eq!(a.value, Some(v.clone() * rat(h.h as i64) / rat(h.w as i64) * half()));
        let t = twisted_average(&g, -3, 5).unwrap();
        assert_eq!(t.value, Some(BigRational::zero()));
    }

    #[test]
    fn empty_and_missing() {
        let g = CoeffTable::parse("PARAMODULAR level=3 weight=2 AL=3:1\n1 3 2 1\n").unwrap();
        let e = average_a(&g, -4).unwrap();
        assert_eq!(e.status, AverageStatus::EmptySum);
        assert_eq!(e.value, Some(BigRational::zero()));
        let m = average_a(&g, -39).unwrap();
        assert!(m.is_missing());
        assert!(average_b_rho(&g, -15, 1, 1).is_err());
    }
}
