//! Fourier coefficients `a(T; F)` keyed by `Γ₀(N)`-class, Jacobi coefficient
//! tables `c_ρ(D)`, and the coefficient table of a Gritsenko lift.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::arith;
use crate::error::{Error, Result};
use crate::quadforms::{self, ClassKey, QuadForm};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FormMeta {
    pub level: i64,
    pub weight: i64,
    /// `ε_p` for every prime `p | N`.
    pub atkin_lehner_signs: BTreeMap<u64, i32>,
    pub label: String,
}

impl FormMeta {
    pub fn new(level: i64, weight: i64, signs: &[(u64, i32)], label: &str) -> Result<Self> {
        if level < 1 || !arith::is_squarefree(level) {
            return Err(Error::Precondition(format!("level {level} is not squarefree")));
        }
        if weight < 2 {
            return Err(Error::Precondition(format!("weight {weight} < 2")));
        }
        let atkin_lehner_signs: BTreeMap<u64, i32> = signs.iter().copied().collect();
        for p in arith::prime_divisors(level) {
            match atkin_lehner_signs.get(&p) {
                Some(1) | Some(-1) => {}
                _ => {
                    return Err(Error::Precondition(format!(
                        "missing or invalid Atkin-Lehner sign at p = {p}"
                    )))
                }
            }
        }
        if atkin_lehner_signs.len() != arith::prime_divisors(level).len() {
            return Err(Error::Precondition("Atkin-Lehner sign at a prime not dividing N".into()));
        }
        Ok(FormMeta { level, weight, atkin_lehner_signs, label: label.to_string() })
    }

    /// `(-1)^k`.
    pub fn parity(&self) -> i32 {
        if self.weight % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

/// Anything that can answer `a(T; F)` queries.
pub trait CoefficientSource {
    fn meta(&self) -> &FormMeta;
    fn coefficient(&self, t: &QuadForm) -> Result<BigRational>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoeffEntry {
    pub rep: QuadForm,
    pub value: BigRational,
}

/// Coefficients stored on canonical class representatives.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable {
    pub meta: FormMeta,
    pub entries: BTreeMap<ClassKey, CoeffEntry>,
    pub max_disc: i64,
}

fn parse_rational(s: &str) -> Option<BigRational> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse::<BigInt>().ok()?, d.trim().parse::<BigInt>().ok()?),
        None => (s.trim().parse::<BigInt>().ok()?, BigInt::one()),
    };
    if den.is_zero() {
        return None;
    }
    Some(BigRational::new(num, den))
}

fn format_rational(v: &BigRational) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
    .trim()
}

fn header_fields<'a>(line: &'a str, tag: &str, lineno: usize) -> Result<BTreeMap<&'a str, &'a str>> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(Error::Parse { line: lineno, msg: format!("expected header starting with {tag}") });
    }
    let mut out = BTreeMap::new();
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: lineno, msg: format!("bad header field {p}") })?;
        out.insert(k, v);
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(fields: &BTreeMap<&str, &str>, key: &str, lineno: usize) -> Result<T> {
    fields
        .get(key)
        .ok_or_else(|| Error::Parse { line: lineno, msg: format!("missing header field {key}") })?
        .parse::<T>()
        .map_err(|_| Error::Parse { line: lineno, msg: format!("bad value for {key}") })
}

impl CoeffTable {
    pub fn new(meta: FormMeta) -> Self {
        CoeffTable { meta, entries: BTreeMap::new(), max_disc: 0 }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts `a(T) = value`, checking it against what is already known for
    /// the class of `T` and of its mirror image.
    pub fn insert(&mut self, t: &QuadForm, value: BigRational) -> Result<()> {
        if t.level != self.meta.level {
            return Err(Error::Precondition(format!("form {t} has the wrong level")));
        }
        if !t.is_positive_definite() {
            return Err(Error::Precondition(format!("form {t} is not positive definite")));
        }
        let key = quadforms::class_key(t)?;
        if let Some(e) = self.entries.get(&key) {
            if e.value != value {
                return Err(Error::Inconsistent(format!(
                    "conflicting values {} and {} for the class of {t}",
                    format_rational(&e.value),
                    format_rational(&value)
                )));
            }
            return Ok(());
        }
        let mkey = quadforms::class_key(&t.mirror())?;
        let parity = BigRational::from_integer(BigInt::from(self.meta.parity()));
        if mkey == key && self.meta.parity() == -1 && !value.is_zero() {
            return Err(Error::Inconsistent(format!(
                "class of {t} is fixed by the mirror but the weight is odd and the value is nonzero"
            )));
        }
        if let Some(e) = self.entries.get(&mkey) {
            if e.value != &value * &parity {
                return Err(Error::Inconsistent(format!(
                    "value for {t} violates a(T[diag(1,-1)]) = (-1)^k a(T)"
                )));
            }
        }
        let rep = quadforms::canonical_form(t)?;
        self.max_disc = self.max_disc.max(-t.disc());
        self.entries.insert(key, CoeffEntry { rep, value });
        Ok(())
    }

    /// Parses the `PARAMODULAR` text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l)));
        let (lineno, header) = lines
            .by_ref()
            .find(|(_, l)| !l.is_empty())
            .ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let fields = header_fields(header, "PARAMODULAR", lineno)?;
        let level: i64 = field(&fields, "level", lineno)?;
        let weight: i64 = field(&fields, "weight", lineno)?;
        let mut signs = Vec::new();
        if let Some(al) = fields.get("AL") {
            for item in al.split(',').filter(|s| !s.is_empty()) {
                let (p, s) = item
                    .split_once(':')
                    .ok_or_else(|| Error::Parse { line: lineno, msg: format!("bad AL item {item}") })?;
                let p: u64 = p.parse().map_err(|_| Error::Parse { line: lineno, msg: format!("bad prime {p}") })?;
                let s: i32 = s
                    .trim_start_matches('+')
                    .parse()
                    .map_err(|_| Error::Parse { line: lineno, msg: format!("bad sign {s}") })?;
                signs.push((p, s));
            }
        }
        let label = fields.get("label").map(|s| s.to_string()).unwrap_or_else(|| format!("F{level}"));
        let meta = FormMeta::new(level, weight, &signs, &label)
            .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        let mut table = CoeffTable::new(meta);
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(Error::Parse { line: lineno, msg: "expected `a b c value`".into() });
            }
            let ints: Vec<i64> = parts[..3]
                .iter()
                .map(|s| s.parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse { line: lineno, msg: "bad integer".into() })?;
            let value = parse_rational(parts[3])
                .ok_or_else(|| Error::Parse { line: lineno, msg: format!("bad rational {}", parts[3]) })?;
            let t = QuadForm::new(level, ints[0], ints[1], ints[2]);
            table.insert(&t, value).map_err(|e| match e {
                Error::Inconsistent(m) => Error::Inconsistent(format!("line {lineno}: {m}")),
                other => Error::Parse { line: lineno, msg: other.to_string() },
            })?;
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let al: Vec<String> =
            self.meta.atkin_lehner_signs.iter().map(|(p, s)| format!("{p}:{s}")).collect();
        let mut out = format!(
            "PARAMODULAR level={} weight={} AL={}\n",
            self.meta.level,
            self.meta.weight,
            al.join(",")
        );
        let mut rows: Vec<&CoeffEntry> = self.entries.values().collect();
        rows.sort_by_key(|e| (-e.rep.disc(), e.rep.a, e.rep.b, e.rep.c));
        for e in rows {
            let _ = writeln!(out, "{} {} {} {}", e.rep.a, e.rep.b, e.rep.c, format_rational(&e.value));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

impl CoefficientSource for CoeffTable {
    fn meta(&self) -> &FormMeta {
        &self.meta
    }

    fn coefficient(&self, t: &QuadForm) -> Result<BigRational> {
        coefficient(self, t)
    }
}

/// `a(T; F)` from a table, using `Γ₀(N)`-invariance and the mirror sign rule.
pub fn coefficient(table: &CoeffTable, t: &QuadForm) -> Result<BigRational> {
    if t.level != table.meta.level {
        return Err(Error::Precondition(format!("form {t} has the wrong level")));
    }
    if !t.is_positive_definite() {
        return Err(Error::Precondition(format!("form {t} is not positive definite")));
    }
    let missing = || Error::MissingCoefficient { a: t.big_a(), b: t.b, c: t.c, disc: t.disc() };
    if -t.disc() > table.max_disc {
        return Err(missing());
    }
    let key = quadforms::class_key(t)?;
    if let Some(e) = table.entries.get(&key) {
        return Ok(e.value.clone());
    }
    let mkey = quadforms::class_key(&t.mirror())?;
    if let Some(e) = table.entries.get(&mkey) {
        return Ok(&e.value * BigRational::from_integer(BigInt::from(table.meta.parity())));
    }
    Err(missing())
}

/// Reads a coefficient file and checks that `|B(D, ρ)|` does not depend on `ρ`
/// for every discriminant the file covers completely.
pub fn load_coeff_file(path: &Path) -> Result<CoeffTable> {
    let text = std::fs::read_to_string(path)?;
    let table = CoeffTable::parse(&text)?;
    crate::averages::check_table_consistency(&table)?;
    Ok(table)
}

/// Jacobi coefficients `c_ρ(D) = c((ρ² − D)/4N, ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiTable {
    pub index: i64,
    pub weight: i64,
    pub values: BTreeMap<(i64, i64), BigRational>,
}

impl JacobiTable {
    pub fn new(index: i64, weight: i64) -> Self {
        JacobiTable { index, weight, values: BTreeMap::new() }
    }

    /// Sets `c_ρ(D)` and, by symmetry, `c_{−ρ}(D) = (−1)^k c_ρ(D)`.
    pub fn set(&mut self, d: i64, rho: i64, value: BigRational) -> Result<()> {
        let m = 2 * self.index;
        let rho = rho.rem_euclid(m);
        if (rho * rho - d).rem_euclid(4 * self.index) != 0 {
            return Err(Error::Precondition(format!("{rho} is not in R_D for D = {d}")));
        }
        let sign = if self.weight % 2 == 0 { 1 } else { -1 };
        let neg = (-rho).rem_euclid(m);
        let neg_value = &value * BigRational::from_integer(BigInt::from(sign));
        if neg == rho && !neg_value.eq(&value) {
            return Err(Error::Inconsistent(format!("c_ρ(D) must vanish at ρ = {rho}, D = {d}")));
        }
        for (r, v) in [(rho, value), (neg, neg_value)] {
            if let Some(old) = self.values.get(&(d, r)) {
                if *old != v {
                    return Err(Error::Inconsistent(format!("conflicting c_{r}({d})")));
                }
            }
            self.values.insert((d, r), v);
        }
        Ok(())
    }

    pub fn get(&self, d: i64, rho: i64) -> Option<&BigRational> {
        self.values.get(&(d, rho.rem_euclid(2 * self.index)))
    }

    /// `c*(D) = ½ Σ_{ρ ∈ R_D} |c_ρ(D)|`; `None` if some `c_ρ(D)` is absent.
    pub fn c_star(&self, d: i64) -> Option<BigRational> {
        let mut acc = BigRational::zero();
        for rho in quadforms::residues(self.index, d) {
            acc += self.get(d, rho)?.abs();
        }
        Some(acc / BigRational::from_integer(BigInt::from(2)))
    }

    /// Parses the `JACOBI index=N weight=k` format with lines `n r value`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l)));
        let (lineno, header) = lines
            .by_ref()
            .find(|(_, l)| !l.is_empty())
            .ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let fields = header_fields(header, "JACOBI", lineno)?;
        let index: i64 = field(&fields, "index", lineno)?;
        let weight: i64 = field(&fields, "weight", lineno)?;
        if index < 1 {
            return Err(Error::Parse { line: lineno, msg: "index must be positive".into() });
        }
        let mut table = JacobiTable::new(index, weight);
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse { line: lineno, msg: "expected `n r value`".into() });
            }
            let n: i64 = parts[0].parse().map_err(|_| Error::Parse { line: lineno, msg: "bad n".into() })?;
            let r: i64 = parts[1].parse().map_err(|_| Error::Parse { line: lineno, msg: "bad r".into() })?;
            let v = parse_rational(parts[2])
                .ok_or_else(|| Error::Parse { line: lineno, msg: format!("bad rational {}", parts[2]) })?;
            let d = r * r - 4 * n * index;
            table.set(d, r, v).map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("JACOBI index={} weight={}\n", self.index, self.weight);
        for (&(d, rho), v) in &self.values {
            let n = (rho * rho - d) / (4 * self.index);
            let _ = writeln!(out, "{n} {rho} {}", format_rational(v));
        }
        out
    }
}

/// Coefficient table of the Gritsenko lift of a Jacobi form: `a(T) = c_b(disc T)`
/// on forms of fundamental discriminant, which are automatically primitive.
/// Forms of any other discriminant have no entry.
pub fn gritsenko_table(j: &JacobiTable, signs: &[(u64, i32)], label: &str) -> Result<CoeffTable> {
    let meta = FormMeta::new(j.index, j.weight, signs, label)?;
    let mut table = CoeffTable::new(meta);
    let mut discs: Vec<i64> = j.values.keys().map(|&(d, _)| d).collect();
    discs.dedup();
    for d in discs {
        if d >= 0 || !arith::is_fundamental(d) {
            continue;
        }
        let classes = quadforms::enumerate_classes(j.index, d, None)?;
        for (rep, key) in classes.reps.iter().zip(&classes.keys) {
            if let Some(v) = j.get(d, rep.b) {
                table.entries.insert(key.clone(), CoeffEntry { rep: *rep, value: v.clone() });
                table.max_disc = table.max_disc.max(-d);
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn empty_file() {
        let t = CoeffTable::parse("PARAMODULAR level=3 weight=2 AL=3:1\n").unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn duplicates_and_conflicts() {
        // [3,3,2][(1 -1; 0 1)] = [3,-3,2].
        let ok = "PARAMODULAR level=3 weight=2 AL=3:-1\n1 3 2 5\n1 -3 2 5 # same class\n";
        assert_eq!(CoeffTable::parse(ok).unwrap().len(), 1);
        let bad = "PARAMODULAR level=3 weight=2 AL=3:-1\n1 3 2 5\n1 -3 2 4\n";
        assert!(matches!(CoeffTable::parse(bad), Err(Error::Inconsistent(_))));
        let garbage = "PARAMODULAR level=3 weight=2 AL=3:-1\n1 3 x 5\n";
        assert!(matches!(CoeffTable::parse(garbage), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn mirror_sign_rule() {
        for (k, sign) in [(2, 1), (3, -1)] {
            let text = format!("PARAMODULAR level=5 weight={k} AL=5:1\n1 1 1 7\n");
            let t = CoeffTable::parse(&text).unwrap();
            let f = QuadForm::new(5, 1, 1, 1);
            assert_eq!(coefficient(&t, &f).unwrap(), r(7));
            assert_eq!(coefficient(&t, &f.mirror()).unwrap(), r(7 * sign));
            let moved = f.act(&crate::quadforms::Mat2::new(2, 1, 5, 3));
            assert_eq!(coefficient(&t, &moved).unwrap(), r(7));
        }
    }

    #[test]
    fn missing_beyond_coverage() {
        let t = CoeffTable::parse("PARAMODULAR level=3 weight=2 AL=3:1\n1 3 2 1\n").unwrap();
        let far = QuadForm::new(3, 1, 1, 100);
        assert!(matches!(coefficient(&t, &far), Err(Error::MissingCoefficient { .. })));
    }

    #[test]
    fn gritsenko_values() {
        let mut j = JacobiTable::new(3, 2);
        j.set(-15, 3, r(4)).unwrap();
        j.set(-3, 3, r(-1)).unwrap();
        j.set(-12, 0, r(9)).unwrap();
        let g = gritsenko_table(&j, &[(3, 1)], "lift").unwrap();
        let t1 = QuadForm::new(3, 1, 3, 2);
        let t2 = QuadForm::new(3, 2, 3, 1);
        assert_eq!(coefficient(&g, &t1).unwrap(), r(4));
        assert_eq!(coefficient(&g, &t2).unwrap(), r(4));
        assert_eq!(coefficient(&g, &QuadForm::new(3, 1, 3, 1)).unwrap(), r(-1));
        assert!(matches!(
            coefficient(&g, &QuadForm::new(3, 1, 0, 1)),
            Err(Error::MissingCoefficient { .. })
        ));
    }

    #[test]
    fn jacobi_roundtrip() {
        let text = "JACOBI index=2 weight=2\n1 1 3\n1 2 -1/2\n";
        let j = JacobiTable::parse(text).unwrap();
        assert_eq!(j.get(1 - 8, 1), Some(&r(3)));
        assert_eq!(j.get(-7, 3), Some(&r(3)));
        assert_eq!(JacobiTable::parse(&j.to_text()).unwrap(), j);
        assert_eq!(j.c_star(-7), Some(r(3)));
    }
}
