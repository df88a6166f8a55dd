//! Verification harness: both sides of the twisted-average conjectures,
//! `k_F` fitting, table emission and torsion divisibility.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::afe::{self, central_value, central_value_with_terms, fe_residual, required_terms, CompletedL};
use crate::arith;
use crate::averages::{self, AverageResult, AverageStatus};
use crate::coeffstore::{CoefficientSource, JacobiTable};
use crate::error::{Error, Result};
use crate::lseries::{self, curve_lseries, twist, Curve, LSeriesData};
use crate::quadforms;

/// One of the six reference forms with its constant `k_F`, torsion order and grid range.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GoldenForm {
    pub label: &'static str,
    pub level: u64,
    pub k_f: f64,
    pub torsion: u32,
    pub delta_min: i64,
    pub missing_deltas: &'static [i64],
}

pub const GOLDEN_FORMS: [GoldenForm; 6] = [
    GoldenForm { label: "F249", level: 249, k_f: 0.831968, torsion: 14, delta_min: -295, missing_deltas: &[] },
    GoldenForm {
        label: "F277",
        level: 277,
        k_f: 0.537715,
        torsion: 15,
        delta_min: -2435,
        missing_deltas: &[-2167, -2180, -2191, -2200, -2212, -2215],
    },
    GoldenForm {
        label: "F295",
        level: 295,
        k_f: 0.224744,
        torsion: 14,
        delta_min: -276,
        missing_deltas: &[-200, -211, -231, -259],
    },
    GoldenForm { label: "F587-", level: 587, k_f: 0.002680, torsion: 1, delta_min: -1108, missing_deltas: &[-927] },
    GoldenForm { label: "F713+", level: 713, k_f: 0.422121, torsion: 9, delta_min: -260, missing_deltas: &[] },
    GoldenForm { label: "F713-", level: 713, k_f: 0.005248, torsion: 1, delta_min: -260, missing_deltas: &[] },
];

pub fn golden_form(label: &str) -> Result<&'static GoldenForm> {
    GOLDEN_FORMS.iter().find(|g| g.label == label).ok_or(Error::UnknownCurve(label.to_string()))
}

/// One printed two-row block: normalized central values `α_{ℓD} C_ℓ L_D`
/// and the averages `B_ℓ(D)` (`None` where the table prints `--`).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GoldenBlock {
    pub label: &'static str,
    pub ell: i64,
    pub discs: [i64; 6],
    pub normalized: [f64; 6],
    pub averages: [Option<i64>; 6],
}

const fn blk(
    label: &'static str,
    ell: i64,
    discs: [i64; 6],
    normalized: [f64; 6],
    averages: [Option<i64>; 6],
) -> GoldenBlock {
    GoldenBlock { label, ell, discs, normalized, averages }
}

const X: Option<i64> = None;

const fn s(v: i64) -> Option<i64> {
    Some(v)
}

pub const GOLDEN_BLOCKS: &[GoldenBlock] = &[
    // F249
    blk("F249", 1, [-8, -20, -35, -47, -56, -71], [4.0, 16.0, 64.0, 4.0, 16.0, 0.0], [s(2), s(4), s(8), s(2), s(4), s(0)]),
    blk(
        "F249",
        5,
        [-3, -4, -7, -31, -40, -51],
        [196.0, 784.0, 784.0, 784.0, 3136.0, 19600.0],
        [s(14), s(28), s(28), s(28), s(56), s(140)],
    ),
    blk(
        "F249",
        8,
        [-3, -4, -7, -31, -40, -51],
        [196.0, 784.0, 784.0, 784.0, 3136.0, 19600.0],
        [s(14), s(28), s(28), s(28), X, X],
    ),
    blk(
        "F249",
        -3,
        [5, 8, 24, 53, 56, 60],
        [196.0, 196.0, 784.0, 3136.0, 3136.0, 3136.0],
        [s(14), s(14), s(28), s(56), s(56), s(56)],
    ),
    blk(
        "F249",
        -4,
        [5, 8, 24, 53, 56, 57],
        [784.0, 784.0, 784.0, 12544.0, 12544.0, 0.0],
        [s(28), s(28), s(28), s(112), s(112), s(0)],
    ),
    blk(
        "F249",
        -7,
        [5, 8, 24, 53, 56, 57],
        [784.0, 784.0, 784.0, 12544.0, 12544.0, 0.0],
        [s(28), s(28), s(28), X, X, X],
    ),
    blk("F249", -8, [1, 28, 37, 40, 61, 109], [4.0, 0.0, 3136.0, 3136.0, 3136.0, 28224.0], [s(2), s(0), X, X, X, X]),
    // F277
    blk("F277", 1, [-3, -4, -7, -19, -23, -39], [1.0, 1.0, 1.0, 4.0, -0.0, 1.0], [s(1), s(1), s(1), s(2), s(0), s(1)]),
    blk(
        "F277",
        12,
        [-3, -4, -7, -19, -23, -39],
        [225.0, 225.0, 225.0, 900.0, -0.0, 225.0],
        [s(15), s(15), s(15), s(30), s(0), s(15)],
    ),
    blk(
        "F277",
        13,
        [-3, -4, -7, -19, -23, -39],
        [225.0, 225.0, 225.0, 900.0, -0.0, 225.0],
        [s(15), s(15), s(15), s(30), s(0), s(15)],
    ),
    blk(
        "F277",
        -3,
        [1, 12, 13, 21, 28, 29],
        [1.0, 225.0, 225.0, 225.0, 225.0, 2025.0],
        [s(1), s(15), s(15), s(15), s(15), s(45)],
    ),
    blk(
        "F277",
        -4,
        [1, 12, 13, 21, 28, 29],
        [1.0, 225.0, 225.0, 225.0, 225.0, 2025.0],
        [s(1), s(15), s(15), s(15), s(15), s(45)],
    ),
    blk(
        "F277",
        -7,
        [1, 12, 13, 21, 28, 29],
        [1.0, 225.0, 225.0, 225.0, 225.0, 2025.0],
        [s(1), s(15), s(15), s(15), s(15), s(45)],
    ),
    // F295
    blk("F295", 1, [-11, -24, -31, -39, -40, -55], [4.0, 4.0, 4.0, 4.0, 16.0, 4.0], [s(2), s(2), s(2), s(2), s(4), s(2)]),
    blk(
        "F295",
        5,
        [-11, -24, -31, -39, -55, -56],
        [196.0, 196.0, 196.0, 196.0, 784.0, 196.0],
        [s(14), s(14), s(14), s(14), s(28), X],
    ),
    blk(
        "F295",
        8,
        [-3, -7, -68, -87, -88, -107],
        [196.0, 196.0, 3136.0, 784.0, 3136.0, 15876.0],
        [s(14), s(14), X, X, X, X],
    ),
    blk(
        "F295",
        -3,
        [8, 13, 33, 37, 73, 77],
        [196.0, 196.0, -0.0, 1764.0, -0.0, 784.0],
        [s(14), s(14), s(0), s(42), s(0), X],
    ),
    blk("F295", -7, [8, 13, 33, 37, 73, 77], [196.0, 196.0, -0.0, 1764.0, -0.0, 784.0], [s(14), s(14), X, X, X, X]),
    blk("F295", -11, [1, 5, 21, 29, 41, 60], [4.0, 196.0, 784.0, 3136.0, 784.0, 3136.0], [s(2), s(14), X, X, X, X]),
    // F587-
    blk("F587-", 5, [-3, -4, -7, -31, -40, -43], [4.0, 4.0, 4.0, 16.0, 36.0, 576.0], [s(2), s(2), s(2), s(4), s(6), s(24)]),
    blk("F587-", 8, [-3, -4, -7, -31, -40, -43], [4.0, 4.0, 4.0, 16.0, 36.0, 576.0], [s(2), s(2), s(2), s(4), s(6), s(24)]),
    blk("F587-", 13, [-3, -4, -7, -31, -40, -43], [4.0, 4.0, 4.0, 16.0, 36.0, 576.0], [s(2), s(2), s(2), s(4), s(6), s(24)]),
    blk("F587-", -3, [5, 8, 13, 24, 33, 37], [4.0, 4.0, 4.0, 4.0, 4.0, 16.0], [s(2), s(2), s(2), s(2), s(2), s(4)]),
    blk("F587-", -4, [5, 8, 13, 24, 33, 37], [4.0, 4.0, 4.0, 4.0, 4.0, 16.0], [s(2), s(2), s(2), s(2), s(2), s(4)]),
    blk("F587-", -7, [5, 8, 13, 24, 33, 37], [4.0, 4.0, 4.0, 4.0, 4.0, 16.0], [s(2), s(2), s(2), s(2), s(2), s(4)]),
    // F713+
    blk(
        "F713+",
        1,
        [-11, -15, -23, -43, -68, -79],
        [16.0, 16.0, -0.0, 144.0, 64.0, 64.0],
        [s(4), s(4), s(0), s(12), s(8), s(8)],
    ),
    blk(
        "F713+",
        8,
        [-11, -15, -23, -43, -68, -79],
        [1296.0, 1296.0, -0.0, 11664.0, 5184.0, 5184.0],
        [s(36), s(36), s(0), X, X, X],
    ),
    blk("F713+", 17, [-4, -8, -35, -39, -47, -59], [0.0, 0.0, 0.0, -0.0, 0.0, -0.0], [s(0), s(0), X, X, X, X]),
    blk(
        "F713+",
        -4,
        [17, 21, 37, 44, 53, 57],
        [0.0, 1296.0, -0.0, 1296.0, 1296.0, -0.0],
        [s(0), s(36), s(0), s(36), s(36), s(0)],
    ),
    blk("F713+", -8, [17, 21, 37, 44, 53, 57], [0.0, 1296.0, -0.0, 1296.0, 1296.0, -0.0], [s(0), s(36), X, X, X, X]),
    blk(
        "F713+",
        -11,
        [1, 8, 41, 69, 93, 101],
        [16.0, 1296.0, 1296.0, 20736.0, 20736.0, 20736.0],
        [s(4), s(36), X, X, X, X],
    ),
    // F713-
    blk("F713-", 5, [-3, -24, -52, -55, -104, -116], [16.0, 16.0, 400.0, 64.0, 16.0, 144.0], [s(4), s(4), s(20), X, X, X]),
    blk("F713-", 12, [-7, -19, -20, -40, -51, -56], [16.0, 256.0, 16.0, 400.0, 576.0, 16.0], [s(4), s(16), s(4), X, X, X]),
    blk("F713-", 13, [-7, -19, -20, -40, -51, -56], [16.0, 256.0, 16.0, 400.0, 576.0, 16.0], [s(4), s(16), s(4), X, X, X]),
    blk("F713-", -3, [5, 28, 33, 40, 56, 76], [16.0, 16.0, 0.0, 16.0, 16.0, -0.0], [s(4), s(4), s(0), s(4), s(4), s(0)]),
    blk("F713-", -7, [12, 13, 24, 29, 73, 77], [16.0, 16.0, 16.0, 144.0, 0.0, 576.0], [s(4), s(4), s(4), s(12), X, X]),
    blk(
        "F713-",
        -19,
        [12, 13, 24, 29, 73, 77],
        [256.0, 256.0, 256.0, 2304.0, 0.0, 9216.0],
        [s(16), s(16), X, X, X, X],
    ),
];

pub fn golden_blocks(label: &str) -> Vec<&'static GoldenBlock> {
    GOLDEN_BLOCKS.iter().filter(|b| b.label == label).collect()
}

/// The printed average for `(ℓ, D)`: `None` if the cell is not printed,
/// `Some(None)` if it is printed as `--`.
pub fn golden_average(label: &str, ell: i64, d: i64) -> Option<Option<i64>> {
    golden_blocks(label)
        .into_iter()
        .filter(|b| b.ell == ell)
        .find_map(|b| b.discs.iter().position(|&x| x == d).map(|i| b.averages[i]))
}

/// A printed average as an [`AverageResult`].
pub fn golden_average_result(label: &str, ell: i64, d: i64) -> Option<AverageResult> {
    golden_average(label, ell, d).map(|v| match v {
        Some(b) => AverageResult {
            value: Some(BigRational::from_integer(BigInt::from(b))),
            status: AverageStatus::Exact,
            class_count: 0,
            imprimitive_classes: 0,
        },
        None => AverageResult { value: None, status: AverageStatus::MissingData, class_count: 0, imprimitive_classes: 0 },
    })
}

/// Printed ratios `L_D / L_base` with `L_D = L(F, 1/2, χ_D)·|D|`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatioSpec {
    pub label: &'static str,
    pub base: i64,
    pub discs: &'static [i64],
    pub expected: &'static [f64],
    pub tolerance: f64,
}

pub const RATIO_TABLES: [RatioSpec; 3] = [
    RatioSpec {
        label: "F587-",
        base: -3,
        discs: &[-4, -7, -31, -40, -43, -47],
        expected: &[1.0, 1.0, 4.0, 9.0, 144.0, 1.0],
        tolerance: 0.02,
    },
    RatioSpec {
        label: "F277",
        base: 1,
        discs: &[12, 13, 21, 28, 29, 40],
        expected: &[225.0, 225.0, 225.0, 225.0, 2025.0, 900.0],
        tolerance: 0.1,
    },
    RatioSpec {
        label: "F249",
        base: -4,
        discs: &[-7, -8, -20, -31, -35, -40, -47, -56, -71],
        expected: &[1.0, 1.0, 4.0, 1.0, 16.0, 4.0, 1.0, 4.0, 0.0],
        tolerance: 0.02,
    },
];

/// `1e-8` for `|D| ≤ 60`, `1e-5` beyond.
pub fn default_tolerance(d: i64) -> f64 {
    if d.abs() <= 60 {
        1e-8
    } else {
        1e-5
    }
}

/// `L(F, 1/2, χ_D)` with its error bound and the data used.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwistedValue {
    pub disc: i64,
    pub value: f64,
    pub error: f64,
    pub terms: usize,
    pub conductor: u64,
    pub root_number: i32,
}

impl TwistedValue {
    /// `L(F, 1/2, χ_D)·|D|`, the normalization used in the printed tables.
    pub fn normalized(&self) -> f64 {
        self.value * self.disc.abs() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.value.abs() <= self.error.max(1e-12)
    }
}

fn twisted_probe(curve: &Curve, d: i64) -> Result<LSeriesData> {
    twist(&curve_lseries(curve, 10)?, d)
}

/// Terms needed for `L(C, 1/2, χ_D)` at tolerance `tol`.
pub fn twisted_terms(curve: &Curve, d: i64, tol: f64) -> Result<usize> {
    Ok(required_terms(&twisted_probe(curve, d)?, tol, 0)?.0)
}

/// `L(C, 1/2, χ_D)` for a built-in or user curve, counting points as needed.
pub fn twisted_central_value(curve: &Curve, d: i64, tol: f64) -> Result<TwistedValue> {
    let m = twisted_terms(curve, d, tol)?;
    let lsd = twist(&curve_lseries(curve, m)?, d)?;
    let conductor = lsd.conductor;
    let root_number = lsd.root_number.ok_or(Error::UnknownRootNumber)?;
    let (value, error) = central_value(&CompletedL::new(lsd), tol)?;
    Ok(TwistedValue { disc: d, value, error, terms: m, conductor, root_number })
}

/// The same sum truncated at exactly `m` terms.
pub fn twisted_central_value_with_terms(curve: &Curve, d: i64, m: usize) -> Result<f64> {
    let lsd = twist(&curve_lseries(curve, m)?, d)?;
    central_value_with_terms(&CompletedL::new(lsd), m)
}

/// Caches twisted central values of one curve.
#[derive(Debug, Clone)]
pub struct Harness {
    pub curve: Curve,
    values: BTreeMap<i64, TwistedValue>,
}

impl Harness {
    pub fn new(curve: Curve) -> Self {
        Harness { curve, values: BTreeMap::new() }
    }

    pub fn for_label(label: &str) -> Result<Self> {
        Ok(Harness::new(lseries::builtin_curve(label)?))
    }

    pub fn value(&mut self, d: i64) -> Result<TwistedValue> {
        if let Some(v) = self.values.get(&d) {
            return Ok(*v);
        }
        let v = twisted_central_value(&self.curve, d, default_tolerance(d))?;
        self.values.insert(d, v);
        Ok(v)
    }

    /// Counts points once up to the largest requirement among `discs`.
    pub fn prefetch(&mut self, discs: &[i64]) -> Result<()> {
        let mut m = 1;
        for &d in discs {
            m = m.max(twisted_terms(&self.curve, d, default_tolerance(d))?);
        }
        curve_lseries(&self.curve, m)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Empty,
    Missing,
    Vanishing,
}

/// Both sides of `B_ℓ(D)² = α_{ℓD} k_F L_ℓ L_D |Dℓ|^{k−1}` for one cell.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationRow {
    pub ell: i64,
    pub disc: i64,
    pub b: AverageResult,
    pub alpha: u64,
    pub l_ell: Option<f64>,
    pub l_d: Option<f64>,
    pub k_f: Option<f64>,
    /// `α_{ℓD} L_ℓ L_D |Dℓ|^{k−1}`, the right side without `k_F`.
    pub kernel: Option<f64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub residual: Option<f64>,
    pub status: RowStatus,
}

impl VerificationRow {
    /// `B²/(α L_ℓ L_D |Dℓ|^{k−1})`, defined for ok-cells with nonzero sides.
    pub fn implied_k(&self) -> Option<f64> {
        match (self.status, self.lhs, self.kernel) {
            (RowStatus::Ok, Some(l), Some(k)) if l > 0.0 && k > 0.0 => Some(l / k),
            _ => None,
        }
    }
}

fn check_pair(ell: i64, d: i64) -> Result<()> {
    if ell * d >= 0 {
        return Err(Error::Precondition(format!("ℓ·D = {} must be negative", ell * d)));
    }
    if !arith::is_fundamental(ell) || !arith::is_fundamental(d) {
        return Err(Error::Precondition(format!("ℓ = {ell} and D = {d} must be fundamental")));
    }
    Ok(())
}

/// Builds a row from an average and the two twisted central values.
/// The L-values may be omitted when the average is missing or empty.
pub fn verification_row(
    level: u64,
    weight: u32,
    ell: i64,
    d: i64,
    b: AverageResult,
    l_ell: Option<TwistedValue>,
    l_d: Option<TwistedValue>,
    k_f: Option<f64>,
) -> Result<VerificationRow> {
    check_pair(ell, d)?;
    let alpha = averages::alpha(ell * d, level as i64)?;
    let mut row = VerificationRow {
        ell,
        disc: d,
        b,
        alpha,
        l_ell: l_ell.map(|v| v.value),
        l_d: l_d.map(|v| v.value),
        k_f,
        kernel: None,
        lhs: None,
        rhs: None,
        residual: None,
        status: RowStatus::Ok,
    };
    if row.b.is_missing() {
        row.status = RowStatus::Missing;
        return Ok(row);
    }
    if row.b.status == AverageStatus::EmptySum {
        row.status = RowStatus::Empty;
        return Ok(row);
    }
    let bv = row.b.value.as_ref().and_then(|v| v.to_f64()).unwrap_or(0.0);
    row.lhs = Some(bv * bv);
    let (Some(le), Some(ld)) = (l_ell, l_d) else {
        return Ok(row);
    };
    let kernel = alpha as f64 * le.value * ld.value * ((d * ell).abs() as f64).powi(weight as i32 - 1);
    row.kernel = Some(kernel);
    row.rhs = k_f.map(|k| k * kernel);
    let side_zero = alpha == 0 || le.is_zero() || ld.is_zero();
    if bv == 0.0 && side_zero {
        row.status = RowStatus::Vanishing;
    } else if let Some(r) = row.rhs {
        row.residual = Some((bv * bv - r).abs());
    }
    Ok(row)
}

/// Rows for every printed cell of `label`, with the printed averages as the
/// left side. L-values are computed only for cells whose average is printed.
pub fn golden_rows(h: &mut Harness, form: &GoldenForm) -> Result<Vec<VerificationRow>> {
    let mut needed = Vec::new();
    for b in golden_blocks(form.label) {
        for (i, &d) in b.discs.iter().enumerate() {
            if b.averages[i].is_some() {
                needed.push(b.ell);
                needed.push(d);
            }
        }
    }
    h.prefetch(&needed)?;
    let mut rows = Vec::new();
    for b in golden_blocks(form.label) {
        for (i, &d) in b.discs.iter().enumerate() {
            let avg = golden_average_result(form.label, b.ell, d).expect("printed cell");
            let (le, ld) = if b.averages[i].is_some() { (Some(h.value(b.ell)?), Some(h.value(d)?)) } else { (None, None) };
            rows.push(verification_row(form.level, 2, b.ell, d, avg, le, ld, Some(form.k_f))?);
        }
    }
    Ok(rows)
}

/// Fitted `k_F` and the largest relative deviation of any cell from it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KFit {
    pub k_f: f64,
    pub max_relative_spread: f64,
    pub cells: usize,
}

/// Median of the implied `k_F` over ok-cells with nonzero central values.
pub fn fit_kf(rows: &[VerificationRow]) -> Result<KFit> {
    let mut ks: Vec<f64> = rows.iter().filter_map(|r| r.implied_k()).collect();
    if ks.len() < 2 {
        return Err(Error::AllCellsDegenerate);
    }
    ks.sort_by(|a, b| a.total_cmp(b));
    let n = ks.len();
    let median = if n % 2 == 1 { ks[n / 2] } else { 0.5 * (ks[n / 2 - 1] + ks[n / 2]) };
    let spread = ks.iter().map(|k| (k - median).abs() / median).fold(0.0, f64::max);
    Ok(KFit { k_f: median, max_relative_spread: spread, cells: n })
}

/// One row of a ratio table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatioRow {
    pub disc: i64,
    pub ratio: f64,
    pub expected: f64,
    /// Propagated bound on `|ratio − exact ratio|`.
    pub error: f64,
    pub value: TwistedValue,
    pub pass: bool,
}

pub fn ratio_rows(h: &mut Harness, spec: &RatioSpec) -> Result<Vec<RatioRow>> {
    let mut all = spec.discs.to_vec();
    all.push(spec.base);
    h.prefetch(&all)?;
    let base = h.value(spec.base)?;
    let bn = base.normalized();
    let be = base.error * spec.base.abs() as f64;
    let mut out = Vec::new();
    for (&d, &expected) in spec.discs.iter().zip(spec.expected) {
        let v = h.value(d)?;
        let ratio = v.normalized() / bn;
        let error = (v.error * d.abs() as f64 + ratio.abs() * be) / bn.abs();
        let pass = (ratio - expected).abs() <= spec.tolerance;
        out.push(RatioRow { disc: d, ratio, expected, error, value: v, pass });
    }
    Ok(out)
}

/// `Σ_n` truncated at twice the original term count, against the bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DoublingRow {
    pub disc: i64,
    pub value: f64,
    pub doubled: f64,
    pub error: f64,
    pub pass: bool,
}

pub fn doubling_check(h: &mut Harness, d: i64) -> Result<DoublingRow> {
    let v = h.value(d)?;
    let doubled = twisted_central_value_with_terms(&h.curve, d, 2 * v.terms)?;
    let pass = (doubled - v.value).abs() < v.error || (v.root_number == -1 && doubled == 0.0);
    Ok(DoublingRow { disc: d, value: v.value, doubled, error: v.error, pass })
}

/// One table cell: the normalized central value and the average.
#[derive(Debug, Clone, Serialize)]
pub struct TableCell {
    pub disc: i64,
    pub alpha: u64,
    pub normalized: Option<f64>,
    pub average: AverageResult,
}

/// A two-row block `α_{ℓD} C_ℓ L_D` / `B_ℓ(D)`, with `C_ℓ = k_F L_ℓ`.
#[derive(Debug, Clone, Serialize)]
pub struct TableBlock {
    pub label: String,
    pub ell: i64,
    pub k_f: f64,
    pub cells: Vec<TableCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            _ => Err(Error::Precondition(format!("unknown format {s}"))),
        }
    }
}

fn average_cell(a: &AverageResult) -> String {
    match (a.status, &a.value) {
        (AverageStatus::MissingData, _) => "--".into(),
        (AverageStatus::EmptySum, _) => String::new(),
        (_, Some(v)) => v.to_string(),
        (_, None) => "--".into(),
    }
}

impl TableBlock {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let mut head = vec!["D".to_string()];
        head.extend(self.cells.iter().map(|c| c.disc.to_string()));
        let mut norm = vec![format!("alpha_{{{}D}} C_{{{}}} L_D", self.ell, self.ell)];
        norm.extend(self.cells.iter().map(|c| match (c.alpha, c.normalized) {
            (0, _) | (_, None) => String::new(),
            (_, Some(v)) => format!("{v:.1}"),
        }));
        let mut avg = vec![format!("B_{{{}}}(D)", self.ell)];
        avg.extend(self.cells.iter().map(|c| average_cell(&c.average)));
        for r in [head, norm, avg] {
            w.write_record(&r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn render(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Csv => self.to_csv(),
            TableFormat::Json => self.to_json(),
        }
    }
}

impl GoldenBlock {
    /// The block exactly as printed.
    pub fn to_table(&self, k_f: f64) -> TableBlock {
        let level = golden_form(self.label).map(|g| g.level).unwrap_or(1);
        let cells = self
            .discs
            .iter()
            .enumerate()
            .map(|(i, &d)| TableCell {
                disc: d,
                alpha: averages::alpha(self.ell * d, level as i64).unwrap_or(0),
                normalized: Some(self.normalized[i]),
                average: golden_average_result(self.label, self.ell, d).expect("printed cell"),
            })
            .collect();
        TableBlock { label: self.label.to_string(), ell: self.ell, k_f, cells }
    }
}

/// Computes a block: central values from the curve, averages from `source`
/// if given, otherwise the printed averages where they exist.
pub fn emit_table(
    h: &mut Harness,
    level: u64,
    ell: i64,
    discs: &[i64],
    k_f: f64,
    source: Option<&dyn CoefficientSource>,
) -> Result<TableBlock> {
    let mut all = discs.to_vec();
    all.push(ell);
    h.prefetch(&all)?;
    let le = h.value(ell)?;
    let mut cells = Vec::new();
    for &d in discs {
        check_pair(ell, d)?;
        let alpha = averages::alpha(ell * d, level as i64)?;
        let ld = h.value(d)?;
        let normalized = Some(alpha as f64 * k_f * le.normalized() * ld.normalized());
        let average = match source {
            Some(s) => averages::twisted_average(s, ell, d)?,
            None => golden_average_result(&h.curve.label, ell, d).unwrap_or(AverageResult {
                value: None,
                status: AverageStatus::MissingData,
                class_count: 0,
                imprimitive_classes: 0,
            }),
        };
        cells.push(TableCell { disc: d, alpha, normalized, average });
    }
    Ok(TableBlock { label: h.curve.label.clone(), ell, k_f, cells })
}

/// Outcome of the torsion-divisibility check.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TorsionReport {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl TorsionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// For every cell with `ℓ ≠ 1` and `D ≠ 1`: `T | B_ℓ(D)` exactly, and the
/// normalized central value within `tol` of `T²` times an integer.
pub fn torsion_check(torsion: u32, blocks: &[TableBlock], tol: f64) -> TorsionReport {
    let t = BigInt::from(torsion);
    let t2 = (torsion as f64).powi(2);
    let mut rep = TorsionReport::default();
    for b in blocks {
        if b.ell == 1 {
            continue;
        }
        for c in &b.cells {
            if c.disc == 1 {
                continue;
            }
            if let (AverageStatus::Exact, Some(v)) = (c.average.status, &c.average.value) {
                rep.checked += 1;
                if !v.is_integer() || !(v.to_integer() % &t).is_zero() {
                    rep.violations.push(format!("{}: B_{}({}) = {v} not divisible by {torsion}", b.label, b.ell, c.disc));
                }
            }
            if let Some(x) = c.normalized.filter(|_| c.alpha != 0) {
                rep.checked += 1;
                let q = x / t2;
                if (q - q.round()).abs() > tol {
                    rep.violations.push(format!(
                        "{}: normalized value {x:.4} at (ℓ, D) = ({}, {}) is not {torsion}² times an integer",
                        b.label, b.ell, c.disc
                    ));
                }
            }
        }
    }
    rep
}

/// Distance of `x` from the nearest perfect square, and that square's root.
pub fn nearest_square(x: f64) -> (f64, u64) {
    let r = x.max(0.0).sqrt().round() as u64;
    ((x - (r * r) as f64).abs(), r)
}

/// L-only comparison for one cell: the average reconstructed as the positive
/// square root of the normalized central value.
#[derive(Debug, Clone, Serialize)]
pub struct LOnlyCell {
    pub ell: i64,
    pub disc: i64,
    pub normalized: f64,
    pub square_distance: f64,
    pub reconstructed: u64,
    pub printed: Option<i64>,
    pub pass: bool,
}

/// Runs a golden block without coefficient data, using `k_F` as printed.
pub fn l_only_block(h: &mut Harness, block: &GoldenBlock, k_f: f64, tol: f64) -> Result<Vec<LOnlyCell>> {
    let level = golden_form(block.label)?.level;
    let t = emit_table(h, level, block.ell, &block.discs, k_f, None)?;
    Ok(t.cells
        .iter()
        .zip(block.averages)
        .map(|(c, printed)| {
            let x = c.normalized.unwrap_or(0.0);
            let (dist, root) = nearest_square(x);
            let pass = dist <= tol * x.abs().max(1.0) && printed.map_or(true, |p| p.unsigned_abs() == root);
            LOnlyCell { ell: block.ell, disc: c.disc, normalized: x, square_distance: dist, reconstructed: root, printed, pass }
        })
        .collect())
}

/// Hypotheses for `A_F(D)² = α_D C_F L(F, 1/2, χ_D) |D|^{k−1}`.
pub fn conjecture_a_row<S: CoefficientSource + ?Sized>(
    source: &S,
    d: i64,
    l_d: TwistedValue,
    c_f: Option<f64>,
) -> Result<VerificationRow> {
    let meta = source.meta();
    let n = meta.level;
    if n < 2 || !arith::is_prime(n as u64) {
        return Err(Error::Precondition(format!("level {n} is not prime")));
    }
    if meta.weight % 2 != 0 {
        return Err(Error::Precondition(format!("weight {} is odd", meta.weight)));
    }
    if meta.atkin_lehner_signs.get(&(n as u64)).copied().unwrap_or(1) != 1 {
        return Err(Error::Precondition(format!("{} is not in the plus space", meta.label)));
    }
    if d >= 0 || !arith::is_fundamental(d) {
        return Err(Error::Precondition(format!("{d} must be a negative fundamental discriminant")));
    }
    let a = averages::average_a(source, d)?;
    let alpha = averages::alpha(d, n)?;
    let mut row = VerificationRow {
        ell: 1,
        disc: d,
        b: a,
        alpha,
        l_ell: None,
        l_d: Some(l_d.value),
        k_f: c_f,
        kernel: None,
        lhs: None,
        rhs: None,
        residual: None,
        status: RowStatus::Ok,
    };
    match row.b.status {
        AverageStatus::MissingData => {
            row.status = RowStatus::Missing;
            return Ok(row);
        }
        AverageStatus::EmptySum => {
            row.status = RowStatus::Empty;
            row.lhs = Some(0.0);
            row.rhs = Some(0.0);
            row.residual = Some(0.0);
            return Ok(row);
        }
        AverageStatus::Exact => {}
    }
    let av = row.b.value.as_ref().and_then(|v| v.to_f64()).unwrap_or(0.0);
    let kernel = alpha as f64 * l_d.value * (d.abs() as f64).powi(meta.weight as i32 - 1);
    let c = match c_f {
        Some(c) => c,
        None if kernel != 0.0 => av * av / kernel,
        None => 0.0,
    };
    row.k_f = Some(c);
    row.kernel = Some(kernel);
    row.lhs = Some(av * av);
    row.rhs = Some(c * kernel);
    if av == 0.0 && (alpha == 0 || l_d.is_zero()) {
        row.status = RowStatus::Vanishing;
    }
    row.residual = Some((av * av - c * kernel).abs());
    Ok(row)
}

/// Root number from the twisting lemma against the one preferred by the
/// functional-equation residual.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RootNumberRow {
    pub disc: i64,
    pub lemma: i32,
    pub fitted: i32,
    pub residual_plus: f64,
    pub residual_minus: f64,
}

pub fn root_number_rows(curve: &Curve, discs: &[i64]) -> Result<Vec<RootNumberRow>> {
    let mut m = 1;
    for &d in discs {
        m = m.max(afe::residual_terms(&twisted_probe(curve, d)?)?);
    }
    let base = curve_lseries(curve, m)?;
    let none = BTreeMap::new();
    let mut out = Vec::new();
    for &d in discs {
        let tw = twist(&base, d)?;
        let need = afe::residual_terms(&tw)?;
        let mut tw = tw;
        tw.coefficients.truncate(need + 1);
        let lemma = tw.root_number.ok_or(Error::UnknownRootNumber)?;
        let rp = fe_residual(&tw, 1, &none)?;
        let rm = fe_residual(&tw, -1, &none)?;
        out.push(RootNumberRow { disc: d, lemma, fitted: if rp <= rm { 1 } else { -1 }, residual_plus: rp, residual_minus: rm });
    }
    Ok(out)
}

/// The first `count` fundamental discriminants ordered by `|D|` (then sign).
pub fn smallest_fundamentals(count: usize, max_abs: i64) -> Vec<i64> {
    let mut ds: Vec<i64> = arith::fundamental_discriminants(-max_abs, max_abs).into_iter().filter(|&d| d != 1).collect();
    ds.sort_by_key(|&d| (d.abs(), d));
    ds.truncate(count);
    ds
}

/// Candidate local factors of degree ≤ 3 at a bad prime: products of
/// `(1 ± X)` and `1 − aX + pX²` with `|a| ≤ 2√p`.
pub fn bad_factor_candidates(p: u64) -> Vec<Vec<i64>> {
    let lin = [vec![1i64, -1], vec![1, 1]];
    let mut linear_products: Vec<Vec<i64>> = vec![vec![1]];
    for deg in 1..=3 {
        for plus in 0..=deg {
            let mut f = vec![1i64];
            for i in 0..deg {
                f = lseries::poly_product(&f, &lin[(i < plus) as usize]);
            }
            linear_products.push(f);
        }
    }
    let mut out = linear_products.clone();
    let bound = (2.0 * (p as f64).sqrt()).floor() as i64;
    for a in -bound..=bound {
        let q = vec![1, -a, p as i64];
        for l in linear_products.iter().filter(|l| l.len() <= 2) {
            out.push(lseries::poly_product(l, &q));
        }
    }
    out
}

/// Result of selecting a bad factor by the functional-equation residual.
///
/// Only `a_{p^k}` with `p^k ≤ M` enter the residual, so candidates are compared
/// through the first `visible_degree` coefficients of `1/L_p(X)`.
#[derive(Debug, Clone, Serialize)]
pub struct BadFactorFit {
    pub prime: u64,
    pub twist: i64,
    pub terms: usize,
    pub visible_degree: usize,
    pub counted: Vec<i64>,
    pub best: Vec<i64>,
    pub best_residual: f64,
    /// Best residual among candidates that differ from `best` in a visible coefficient.
    pub runner_up_residual: f64,
}

impl BadFactorFit {
    pub fn agrees(&self) -> bool {
        inverse_series(&self.counted, self.visible_degree) == inverse_series(&self.best, self.visible_degree)
    }
}

/// `1/c(X)` to degree `k`.
fn inverse_series(c: &[i64], k: usize) -> Vec<i64> {
    let mut b = vec![1i64];
    for n in 1..=k {
        let v: i64 = (1..=n.min(c.len() - 1)).map(|i| c[i] * b[n - i]).sum();
        b.push(-v);
    }
    b
}

/// Twist used to make the factor at `p` visible: the smallest `|D|` coprime
/// to `N` whose residual sum reaches `3p` terms.
pub fn fit_twist(curve: &Curve, p: u64) -> Result<i64> {
    let base = curve_lseries(curve, 10)?;
    let mut ds: Vec<i64> = arith::fundamental_discriminants(-400, 400)
        .into_iter()
        .filter(|&d| arith::gcd(d, curve.conductor as i64) == 1)
        .collect();
    ds.sort_by_key(|&d| (d.abs(), d));
    for d in ds {
        if afe::residual_terms(&twist(&base, d)?)? >= 3 * p as usize {
            return Ok(d);
        }
    }
    Err(Error::Precondition(format!("no twist makes p = {p} visible")))
}

pub fn fit_bad_factor(curve: &Curve, p: u64) -> Result<BadFactorFit> {
    let d = fit_twist(curve, p)?;
    let m = afe::residual_terms(&twist(&curve_lseries(curve, 10)?, d)?)?;
    let tw = twist(&curve_lseries(curve, m)?, d)?;
    let (counted, _) = lseries::bad_euler_factor(curve, p)?;
    let mut visible = 0;
    let mut pk = p as usize;
    while pk <= m {
        visible += 1;
        pk = pk.saturating_mul(p as usize);
    }
    let x = arith::kronecker(d, p as i64) as i64;
    let mut seen: BTreeMap<Vec<i64>, (f64, Vec<i64>)> = BTreeMap::new();
    for c in bad_factor_candidates(p) {
        let key = inverse_series(&c, visible);
        if seen.contains_key(&key) {
            continue;
        }
        let mut pw = 1i64;
        let twisted: Vec<i64> = c
            .iter()
            .map(|v| {
                let r = v * pw;
                pw *= x;
                r
            })
            .collect();
        let bad = BTreeMap::from([(p, twisted)]);
        let r = fe_residual(&tw, 1, &bad)?.min(fe_residual(&tw, -1, &bad)?);
        seen.insert(key, (r, c));
    }
    let mut scored: Vec<(f64, Vec<i64>)> = seen.into_values().collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(BadFactorFit {
        prime: p,
        twist: d,
        terms: m,
        visible_degree: visible,
        counted,
        best: scored[0].1.clone(),
        best_residual: scored[0].0,
        runner_up_residual: scored.get(1).map_or(f64::INFINITY, |s| s.0),
    })
}

/// A Jacobi table of index `n` and weight 2 whose values are the Dirichlet
/// coefficients of `f`: `c_ρ(D) = a_{|D|}(f) + 1`.
pub fn synthetic_jacobi(f: &LSeriesData, n: i64, max_abs_disc: i64) -> Result<JacobiTable> {
    let mut j = JacobiTable::new(n, 2);
    for d in (-max_abs_disc..0).filter(|&d| arith::is_fundamental(d)) {
        let a = f.coefficients.get(d.unsigned_abs() as usize).copied().ok_or(Error::InsufficientCoefficients {
            required: d.unsigned_abs() as usize,
            available: f.available(),
        })?;
        for rho in quadforms::residues(n, d) {
            j.set(d, rho, BigRational::from_integer(BigInt::from(a + 1)))?;
        }
    }
    Ok(j)
}

/// `B_F(D)` against `c*(D) h(D)/w_D`.
#[derive(Debug, Clone, Serialize)]
pub struct LiftAverageRow {
    pub disc: i64,
    pub average: String,
    pub expected: String,
    pub pass: bool,
}

pub fn lift_average_rows<S: CoefficientSource + ?Sized>(source: &S, j: &JacobiTable, discs: &[i64]) -> Result<Vec<LiftAverageRow>> {
    let mut out = Vec::new();
    for &d in discs {
        let b = averages::average_b(source, d)?;
        let cd = arith::class_data(d)?;
        let cs = j.c_star(d).ok_or(Error::MissingCoefficient { a: 0, b: 0, c: 0, disc: d })?;
        let expected = cs * BigRational::new(BigInt::from(cd.h), BigInt::from(cd.w));
        let v = b.value.clone().unwrap_or_else(BigRational::zero);
        out.push(LiftAverageRow {
            disc: d,
            average: v.to_string(),
            expected: expected.to_string(),
            pass: b.status != AverageStatus::MissingData && v == expected,
        });
    }
    Ok(out)
}

/// Degree-4 central value of the lift of `f` twisted by `D < 0`, against
/// `c h(D)²/(w_D² √|D|) L(f, 1/2, χ_D)` for `c = 4π²` and for `c = 4π`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LiftValueRow {
    pub disc: i64,
    pub lift_value: f64,
    pub error: f64,
    pub f_value: f64,
    pub relative_error_4pi2: f64,
    pub relative_error_4pi: f64,
}

pub fn lift_value_row(f: &Curve, d: i64, tol: f64) -> Result<LiftValueRow> {
    if d >= 0 {
        return Err(Error::Precondition("closed form needs D < 0".into()));
    }
    let probe = lseries::lift_lseries(&curve_lseries(f, 10)?, 2, d)?;
    let (m, _) = required_terms(&probe, tol, 0)?;
    let lift = lseries::lift_lseries(&curve_lseries(f, m)?, 2, d)?;
    let (v, e) = central_value(&CompletedL::new(lift), tol)?;
    let fv = twisted_central_value(f, d, tol * 1e-2)?.value;
    let cd = arith::class_data(d)?;
    let shape = (cd.h * cd.h) as f64 / ((cd.w * cd.w) as f64 * (d.abs() as f64).sqrt()) * fv;
    let rel = |c: f64| (v - c * shape).abs() / v.abs();
    Ok(LiftValueRow {
        disc: d,
        lift_value: v,
        error: e,
        f_value: fv,
        relative_error_4pi2: rel(4.0 * PI * PI),
        relative_error_4pi: rel(4.0 * PI),
    })
}

/// Plain-text summary of rows, one per line.
pub fn describe_rows(rows: &[VerificationRow]) -> String {
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(
            s,
            "ℓ={:>4} D={:>5} status={:?} B={} lhs={:?} rhs={:?}",
            r.ell,
            r.disc,
            r.status,
            average_cell(&r.b),
            r.lhs,
            r.rhs
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffstore::gritsenko_table;

    #[test]
    fn golden_blocks_are_consistent() {
        for b in GOLDEN_BLOCKS {
            let g = golden_form(b.label).unwrap();
            for (i, &d) in b.discs.iter().enumerate() {
                assert!(arith::is_fundamental(d) && arith::is_fundamental(b.ell));
                assert!(b.ell * d < 0, "{} {} {}", b.label, b.ell, d);
                if let Some(v) = b.averages[i] {
                    assert!(((v * v) as f64 - b.normalized[i]).abs() < 1e-9, "{} {} {}", b.label, b.ell, d);
                }
                let (dist, _) = nearest_square(b.normalized[i]);
                assert_eq!(dist, 0.0);
                assert!(b.ell * d >= g.delta_min || b.averages[i].is_none());
            }
        }
    }

    #[test]
    fn grid_symmetry_on_printed_averages() {
        let mut pairs = 0;
        for b in GOLDEN_BLOCKS {
            for (i, &d) in b.discs.iter().enumerate() {
                if let (Some(x), Some(Some(y))) = (b.averages[i], golden_average(b.label, d, b.ell)) {
                    assert_eq!(x, y, "{} ({}, {d})", b.label, b.ell);
                    pairs += 1;
                }
            }
        }
        assert!(pairs >= 6);
    }

    #[test]
    fn torsion_on_golden_tables() {
        for g in GOLDEN_FORMS {
            let blocks: Vec<TableBlock> = golden_blocks(g.label).iter().map(|b| b.to_table(g.k_f)).collect();
            let r = torsion_check(g.torsion, &blocks, 1e-9);
            assert!(r.passed(), "{:?}", r.violations);
            assert!(r.checked > 0);
        }
        let bad = golden_blocks("F249")[1].to_table(0.83);
        assert!(!torsion_check(4, &[bad], 1e-9).passed());
    }

    #[test]
    fn table_layout() {
        let t = golden_blocks("F249")[2].to_table(0.831968);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "D,-3,-4,-7,-31,-40,-51");
        assert_eq!(lines[1], "alpha_{8D} C_{8} L_D,196.0,784.0,784.0,784.0,3136.0,19600.0");
        assert_eq!(lines[2], "B_{8}(D),14,28,28,28,--,--");
        let j: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(j["cells"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn kf_median_and_degenerate() {
        let row = |b: i64, kernel: f64| VerificationRow {
            ell: 5,
            disc: -3,
            b: golden_average_result("F249", 5, -3).map(|mut a| {
                a.value = Some(BigRational::from_integer(BigInt::from(b)));
                a
            })
            .unwrap(),
            alpha: 1,
            l_ell: Some(1.0),
            l_d: Some(1.0),
            k_f: None,
            kernel: Some(kernel),
            lhs: Some((b * b) as f64),
            rhs: None,
            residual: None,
            status: RowStatus::Ok,
        };
        let rows = vec![row(2, 2.0), row(3, 4.5), row(4, 8.1)];
        let f = fit_kf(&rows).unwrap();
        assert!((f.k_f - 2.0).abs() < 1e-12);
        assert!((f.max_relative_spread - (2.0 - 16.0 / 8.1) / 2.0).abs() < 1e-12);
        assert!(matches!(fit_kf(&rows[..1]), Err(Error::AllCellsDegenerate)));
    }

    #[test]
    fn candidates_cover_shapes() {
        let c = bad_factor_candidates(3);
        assert!(c.contains(&vec![1]));
        assert!(c.contains(&vec![1, 1]));
        assert!(c.contains(&vec![1, -2, 3]));
        assert!(c.contains(&lseries::poly_product(&[1, -1], &[1, 3, 3])));
        assert!(c.iter().all(|p| p.len() <= 4));
    }

    #[test]
    fn conjecture_a_hypotheses() {
        let j = {
            let mut j = JacobiTable::new(3, 2);
            for d in [-3i64, -15, -20, -24] {
                for rho in quadforms::residues(3, d) {
                    j.set(d, rho, BigRational::from_integer(BigInt::from(2))).unwrap();
                }
            }
            j
        };
        let plus = gritsenko_table(&j, &[(3, 1)], "lift").unwrap();
        let lv = TwistedValue { disc: -4, value: 0.0, error: 0.0, terms: 0, conductor: 0, root_number: -1 };
        // (−4/3) = −1: empty sum on both sides.
        let r = conjecture_a_row(&plus, -4, lv, None).unwrap();
        assert_eq!(r.status, RowStatus::Empty);
        assert_eq!(r.lhs, Some(0.0));
        let minus = gritsenko_table(&j, &[(3, -1)], "minus").unwrap();
        assert!(conjecture_a_row(&minus, -15, lv, None).is_err());
    }
}
