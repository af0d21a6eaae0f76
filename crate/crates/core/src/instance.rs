//! MILP instances in inequality form, the multiplier box, and the
//! bounded-violation check.
//!
//! An instance is `P = (c, A, b, C, d)` describing
//!
//! ```text
//! min cᵀx  s.t.  Ax ≥ b   (s dualized rows)
//!                Cx ≥ d   (t kept rows)
//!                x ∈ ℝ₊^m × {0,1}^p
//! ```
//!
//! Variables are ordered continuous first, then binary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix as nested rows.
pub type Rows = Vec<Vec<f64>>;

/// On-disk JSON layout. Deserialized first, then validated into a
/// [`MilpInstance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub c: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Rows,
    pub b: Vec<f64>,
    #[serde(rename = "C", default)]
    pub kept_a: Rows,
    #[serde(rename = "d", default)]
    pub kept_b: Vec<f64>,
    pub m: usize,
    pub p: usize,
}

/// A validated MILP instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct MilpInstance {
    c: Vec<f64>,
    a: Rows,
    b: Vec<f64>,
    kept_a: Rows,
    kept_b: Vec<f64>,
    m: usize,
    p: usize,
}

fn check_rows(name: &str, rows: &Rows, width: usize) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Dimension(format!(
                "{name} row {i} has {} entries, expected {width}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!("{name}[{i}][{j}] is not finite")));
        }
    }
    Ok(())
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Dimension(format!("{name}[{i}] is not finite"))),
        None => Ok(()),
    }
}

impl MilpInstance {
    pub fn new(
        c: Vec<f64>,
        a: Rows,
        b: Vec<f64>,
        kept_a: Rows,
        kept_b: Vec<f64>,
        m: usize,
        p: usize,
    ) -> Result<Self> {
        let n = m + p;
        if n == 0 {
            return Err(Error::Dimension("m + p must be at least 1".into()));
        }
        if c.len() != n {
            return Err(Error::Dimension(format!(
                "c has {} entries, expected m + p = {n}",
                c.len()
            )));
        }
        if b.is_empty() {
            return Err(Error::Dimension("at least one dualized row is required".into()));
        }
        if a.len() != b.len() {
            return Err(Error::Dimension(format!(
                "A has {} rows but b has {} entries",
                a.len(),
                b.len()
            )));
        }
        if kept_a.len() != kept_b.len() {
            return Err(Error::Dimension(format!(
                "C has {} rows but d has {} entries",
                kept_a.len(),
                kept_b.len()
            )));
        }
        check_finite("c", &c)?;
        check_finite("b", &b)?;
        check_finite("d", &kept_b)?;
        check_rows("A", &a, n)?;
        check_rows("C", &kept_a, n)?;
        Ok(Self {
            c,
            a,
            b,
            kept_a,
            kept_b,
            m,
            p,
        })
    }

    /// `min cᵀx over x ∈ {0,1}^s s.t. x_k ≥ ½`, i.e. `(c, I_s, ½·1_s, ∅, ∅)`.
    pub fn restricted(c: &[f64]) -> Result<Self> {
        let s = c.len();
        if s == 0 {
            return Err(Error::Dimension("objective vector is empty".into()));
        }
        let a = (0..s)
            .map(|i| (0..s).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(c.to_vec(), a, vec![0.5; s], Vec::new(), Vec::new(), 0, s)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }
    pub fn a(&self) -> &Rows {
        &self.a
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn kept_a(&self) -> &Rows {
        &self.kept_a
    }
    pub fn kept_b(&self) -> &[f64] {
        &self.kept_b
    }
    /// Number of continuous variables.
    pub fn m(&self) -> usize {
        self.m
    }
    /// Number of binary variables.
    pub fn p(&self) -> usize {
        self.p
    }
    /// Number of dualized rows.
    pub fn s(&self) -> usize {
        self.b.len()
    }
    /// Number of kept rows.
    pub fn t(&self) -> usize {
        self.kept_b.len()
    }
    pub fn n_vars(&self) -> usize {
        self.m + self.p
    }

    /// True when the instance has exactly the `(c, I_s, ½·1_s, ∅, ∅)` shape.
    pub fn is_restricted(&self) -> bool {
        let s = self.s();
        self.m == 0
            && self.p == s
            && self.kept_b.is_empty()
            && self.b.iter().all(|&bk| bk == 0.5)
            && self.a.iter().enumerate().all(|(i, row)| {
                row.iter()
                    .enumerate()
                    .all(|(j, &v)| v == if i == j { 1.0 } else { 0.0 })
            })
    }

    /// `A x`.
    pub fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        self.a.iter().map(|row| dot(row, x)).collect()
    }

    /// Whether `Cx ≥ d` holds up to [`FEAS_TOL`].
    pub fn kept_feasible(&self, x: &[f64]) -> bool {
        rows_feasible(&self.kept_a, &self.kept_b, x)
    }

    /// Whether `Ax ≥ b` holds up to [`FEAS_TOL`].
    pub fn coupling_feasible(&self, x: &[f64]) -> bool {
        rows_feasible(&self.a, &self.b, x)
    }
}

/// Absolute slack allowed when checking `≥` rows.
pub const FEAS_TOL: f64 = 1e-9;

fn rows_feasible(rows: &Rows, rhs: &[f64], x: &[f64]) -> bool {
    rows.iter()
        .zip(rhs)
        .all(|(row, &r)| dot(row, x) >= r - FEAS_TOL)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl TryFrom<InstanceFile> for MilpInstance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        Self::new(f.c, f.a, f.b, f.kept_a, f.kept_b, f.m, f.p)
    }
}

impl From<MilpInstance> for InstanceFile {
    fn from(p: MilpInstance) -> Self {
        Self {
            c: p.c,
            a: p.a,
            b: p.b,
            kept_a: p.kept_a,
            kept_b: p.kept_b,
            m: p.m,
            p: p.p,
        }
    }
}

/// Bounded-violation constant `B` and multiplier box edge `π_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemBounds {
    violation: f64,
    pi_max: f64,
}

impl ProblemBounds {
    pub fn new(violation: f64, pi_max: f64) -> Result<Self> {
        if !(violation > 0.0 && violation.is_finite()) {
            return Err(Error::Domain(format!("B must be positive, got {violation}")));
        }
        if !(pi_max > 0.0 && pi_max.is_finite()) {
            return Err(Error::Domain(format!("pi_max must be positive, got {pi_max}")));
        }
        Ok(Self { violation, pi_max })
    }

    /// `B`.
    pub fn violation(&self) -> f64 {
        self.violation
    }

    pub fn pi_max(&self) -> f64 {
        self.pi_max
    }

    /// Lipschitz constant `L = 2B√s` of `u(·, P)`.
    pub fn lipschitz(&self, s: usize) -> f64 {
        2.0 * self.violation * (s as f64).sqrt()
    }

    /// ℓ₂ diameter `D = π_max√s` of the box.
    pub fn diameter(&self, s: usize) -> f64 {
        self.pi_max * (s as f64).sqrt()
    }
}

/// A point of the box `Π = [0, π_max]^s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiplierVector(Vec<f64>);

impl MultiplierVector {
    /// Checks `0 ≤ π_k ≤ π_max` for every coordinate.
    pub fn new(values: Vec<f64>, pi_max: f64) -> Result<Self> {
        if let Some(k) = values
            .iter()
            .position(|&v| !(v.is_finite() && (0.0..=pi_max).contains(&v)))
        {
            return Err(Error::Domain(format!(
                "multiplier {k} = {} lies outside [0, {pi_max}]",
                values[k]
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(s: usize) -> Self {
        Self(vec![0.0; s])
    }

    /// Euclidean projection onto the box (coordinate-wise clamp).
    pub fn project(values: &[f64], pi_max: f64) -> Self {
        Self(values.iter().map(|v| v.clamp(0.0, pi_max)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for MultiplierVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// Outcome of [`validate_bounds`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub passed: bool,
    /// Coordinate attaining the largest of `|b_k|` and `|(Ax)_k|`.
    pub tightest_coordinate: usize,
    /// Largest `|(Ax)_k|` over feasible `x` and all `k`.
    pub max_abs_ax: f64,
    /// Largest `|b_k|`.
    pub max_abs_b: f64,
    /// First point found with `|(Ax)_k| > B`, if any.
    pub witness: Option<Vec<f64>>,
    pub feasible_points: u64,
}

/// Default cap on the number of binaries an enumeration may visit.
pub const ENUMERATION_LIMIT: usize = 24;

/// Verifies `|b_k| ≤ B` and `|(Ax)_k| ≤ B` for every `x ∈ {0,1}^p` with
/// `Cx ≥ d`.
pub fn validate_bounds(
    problem: &MilpInstance,
    bounds: &ProblemBounds,
    enumeration_limit: usize,
) -> Result<BoundsReport> {
    if problem.m() > 0 {
        return Err(Error::Unsupported(
            "bound verification enumerates binaries and needs m = 0".into(),
        ));
    }
    if problem.p() > enumeration_limit {
        return Err(Error::Unsupported(format!(
            "p = {} exceeds the enumeration limit {enumeration_limit}",
            problem.p()
        )));
    }
    let limit = bounds.violation();
    let s = problem.s();
    let mut worst = vec![0.0f64; s];
    for (k, bk) in problem.b().iter().enumerate() {
        worst[k] = bk.abs();
    }
    let max_abs_b = worst.iter().cloned().fold(0.0, f64::max);
    let mut max_abs_ax = 0.0f64;
    let mut witness = None;
    let mut feasible_points = 0u64;
    let mut x = vec![0.0; problem.p()];
    for mask in 0u64..(1u64 << problem.p()) {
        fill_binary(mask, &mut x);
        if !problem.kept_feasible(&x) {
            continue;
        }
        feasible_points += 1;
        for (k, ax) in problem.apply_a(&x).into_iter().enumerate() {
            let v = ax.abs();
            max_abs_ax = max_abs_ax.max(v);
            worst[k] = worst[k].max(v);
            if v > limit && witness.is_none() {
                witness = Some(x.clone());
            }
        }
    }
    let tightest_coordinate = worst
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v > worst[best] { k } else { best });
    let passed = witness.is_none() && max_abs_b <= limit;
    Ok(BoundsReport {
        passed,
        tightest_coordinate,
        max_abs_ax,
        max_abs_b,
        witness,
        feasible_points,
    })
}

/// Writes the bits of `mask` (least significant first) into `x` as 0/1.
pub(crate) fn fill_binary(mask: u64, x: &mut [f64]) {
    for (j, xj) in x.iter_mut().enumerate() {
        *xj = ((mask >> j) & 1) as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restricted_instance_layout() {
        let p = MilpInstance::restricted(&[1.0, 2.0]).unwrap();
        assert_eq!(p.a(), &vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(p.b(), &[0.5, 0.5]);
        assert_eq!((p.m(), p.p(), p.s(), p.t()), (0, 2, 2, 0));
        assert!(p.is_restricted());

        let single = MilpInstance::restricted(&[0.0]).unwrap();
        assert_eq!(single.s(), 1);
        assert!(single.is_restricted());
    }

    #[test]
    fn empty_objective_is_a_dimension_error() {
        assert!(matches!(
            MilpInstance::restricted(&[]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn malformed_inputs_never_construct() {
        // wrong row width
        let err = MilpInstance::new(
            vec![1.0, 1.0],
            vec![vec![1.0]],
            vec![1.0],
            vec![],
            vec![],
            0,
            2,
        );
        assert!(matches!(err, Err(Error::Dimension(_))));
        // A/b row count mismatch
        let err = MilpInstance::new(vec![1.0], vec![vec![1.0]], vec![1.0, 2.0], vec![], vec![], 0, 1);
        assert!(matches!(err, Err(Error::Dimension(_))));
        // C/d mismatch
        let err = MilpInstance::new(
            vec![1.0],
            vec![vec![1.0]],
            vec![1.0],
            vec![vec![1.0]],
            vec![],
            0,
            1,
        );
        assert!(matches!(err, Err(Error::Dimension(_))));
        // non-finite entry
        let err = MilpInstance::new(vec![f64::NAN], vec![vec![1.0]], vec![1.0], vec![], vec![], 0, 1);
        assert!(matches!(err, Err(Error::Dimension(_))));
        // no dualized rows
        let err = MilpInstance::new(vec![1.0], vec![], vec![], vec![], vec![], 0, 1);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn json_loader_validates() {
        let text = r#"{"c":[1,2],"A":[[1,0],[0,1]],"b":[0.5,0.5],"C":[],"d":[],"m":0,"p":2}"#;
        let p = MilpInstance::from_json_str(text).unwrap();
        assert!(p.is_restricted());
        let round = MilpInstance::from_json_str(&p.to_json().unwrap()).unwrap();
        assert_eq!(round, p);

        let bad = r#"{"c":[1,2],"A":[[1,0,0]],"b":[0.5],"C":[],"d":[],"m":0,"p":2}"#;
        assert!(MilpInstance::from_json_str(bad).is_err());
    }

    #[test]
    fn bounds_derived_quantities() {
        let b = ProblemBounds::new(1.0, 3.0).unwrap();
        assert_eq!(b.lipschitz(4), 4.0);
        assert_eq!(b.diameter(4), 6.0);
        assert!(ProblemBounds::new(0.0, 1.0).is_err());
        assert!(ProblemBounds::new(1.0, -1.0).is_err());
    }

    #[test]
    fn multiplier_box_membership() {
        assert!(MultiplierVector::new(vec![0.0, 3.0], 3.0).is_ok());
        assert!(MultiplierVector::new(vec![-0.1], 3.0).is_err());
        assert!(MultiplierVector::new(vec![3.1], 3.0).is_err());
        let p = MultiplierVector::project(&[-1.0, 1.0, 5.0], 3.0);
        assert_eq!(p.as_slice(), &[0.0, 1.0, 3.0]);
    }

    #[test]
    fn validate_bounds_restricted_pass() {
        let p = MilpInstance::restricted(&[1.0, 2.0]).unwrap();
        let r = validate_bounds(&p, &ProblemBounds::new(1.0, 3.0).unwrap(), 24).unwrap();
        assert!(r.passed);
        assert_eq!(r.max_abs_ax, 1.0);
        assert_eq!(r.feasible_points, 4);
        assert!(r.witness.is_none());

        let p3 = MilpInstance::restricted(&[1.0, 2.0, 3.0]).unwrap();
        let r3 = validate_bounds(&p3, &ProblemBounds::new(1.0, 3.0).unwrap(), 24).unwrap();
        assert!(r3.passed);
        assert_eq!(r3.feasible_points, 8);
    }

    #[test]
    fn validate_bounds_b_alone_violates() {
        let p = MilpInstance::restricted(&[1.0, 2.0]).unwrap();
        let r = validate_bounds(&p, &ProblemBounds::new(0.4, 3.0).unwrap(), 24).unwrap();
        assert!(!r.passed);
        assert_eq!(r.max_abs_b, 0.5);
        // |(Ax)_k| = 1 > 0.4 at any x with a set bit
        assert!(r.witness.is_some());
    }

    #[test]
    fn validate_bounds_rejects_continuous_and_large() {
        let p = MilpInstance::new(vec![1.0], vec![vec![1.0]], vec![1.0], vec![], vec![], 1, 0).unwrap();
        let b = ProblemBounds::new(1.0, 1.0).unwrap();
        assert!(matches!(validate_bounds(&p, &b, 24), Err(Error::Unsupported(_))));
        let big = MilpInstance::restricted(&[1.0; 5]).unwrap();
        assert!(matches!(validate_bounds(&big, &b, 4), Err(Error::Unsupported(_))));
    }
}
