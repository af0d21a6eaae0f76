//! Closed-form bound calculators and a Monte Carlo estimate of the empirical
//! Rademacher complexity of `{P ↦ u(π, P) : π ∈ Π}`.
//!
//! Logarithms are natural throughout.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dual::dual_eval;
use crate::error::{Error, Result};
use crate::instance::{MilpInstance, MultiplierVector, ProblemBounds};
use crate::rng::{derive_seed, seeded};

/// `3√π`: the Dudley integral `∫₀^{LD} √ln(LD/δ) dδ = LD·√π/2` with the
/// factor 3 from the covering radius, after substituting `L = 2B√s` and
/// `D = π_max√s`.
pub fn dudley_constant() -> f64 {
    3.0 * std::f64::consts::PI.sqrt()
}

/// `s·ln(1 + 2Bπ_max·s/δ)`.
pub fn covering_bound(s: usize, violation: f64, pi_max: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    let sf = s as f64;
    Ok(sf * (2.0 * violation * pi_max * sf / delta).ln_1p())
}

/// `C·B·π_max·s^{3/2}/√N` with `C` = [`dudley_constant`].
pub fn dudley_bound(s: usize, violation: f64, pi_max: f64, n: usize) -> f64 {
    dudley_constant() * violation * pi_max * (s as f64).powf(1.5) / (n as f64).sqrt()
}

/// `2Bπ_max·s/√N`.
pub fn sga_bound(s: usize, violation: f64, pi_max: f64, n: usize) -> f64 {
    2.0 * violation * pi_max * s as f64 / (n as f64).sqrt()
}

/// Twice the Rademacher bound.
pub fn erm_excess_bound(s: usize, violation: f64, pi_max: f64, n: usize) -> f64 {
    2.0 * dudley_bound(s, violation, pi_max, n)
}

/// `s·π_max²/(4N)`.
pub fn warmstart_bound(s: usize, pi_max: f64, n: usize) -> f64 {
    s as f64 * pi_max * pi_max / (4.0 * n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub s: usize,
    pub n: usize,
    #[serde(rename = "B")]
    pub violation: f64,
    pub pi_max: f64,
    pub delta: f64,
    pub covering_log: f64,
    pub dudley_bound: f64,
    pub sga_bound: f64,
    pub erm_excess_bound: f64,
    pub warmstart_bound: f64,
    pub dudley_constant: f64,
    pub constant_note: &'static str,
}

impl BoundReport {
    pub fn new(s: usize, n: usize, bounds: &ProblemBounds, delta: f64) -> Result<Self> {
        if s == 0 || n == 0 {
            return Err(Error::Domain("s and N must be at least 1".into()));
        }
        let (b, pm) = (bounds.violation(), bounds.pi_max());
        Ok(Self {
            s,
            n,
            violation: b,
            pi_max: pm,
            delta,
            covering_log: covering_bound(s, b, pm, delta)?,
            dudley_bound: dudley_bound(s, b, pm, n),
            sga_bound: sga_bound(s, b, pm, n),
            erm_excess_bound: erm_excess_bound(s, b, pm, n),
            warmstart_bound: warmstart_bound(s, pm, n),
            dudley_constant: dudley_constant(),
            constant_note: "Dudley constant assembled by this implementation; order s^1.5/sqrt(N)",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RademacherEstimate {
    /// Mean over draws of `sup_grid (1/N)Σ σ_i u(π, P_i)`.
    pub estimate: f64,
    pub std_error: f64,
    /// `L·π_max√s/G`, the allowance for replacing the continuous sup by the
    /// grid sup.
    pub grid_correction: f64,
    pub draws: usize,
    pub grid_points: usize,
}

impl RademacherEstimate {
    /// Estimate plus `k` standard errors plus the grid allowance.
    pub fn upper(&self, k: f64) -> f64 {
        self.estimate + k * self.std_error + self.grid_correction
    }
}

pub const MAX_RADEMACHER_DIM: usize = 3;
pub const MIN_RADEMACHER_DRAWS: usize = 100;

/// Uniform grid of `G` points per axis over `[0, π_max]^s`.
fn box_grid(s: usize, per_dim: usize, pi_max: f64) -> Vec<MultiplierVector> {
    let axis: Vec<f64> = (0..per_dim)
        .map(|i| pi_max * i as f64 / (per_dim - 1) as f64)
        .collect();
    let total = per_dim.pow(s as u32);
    (0..total)
        .map(|mut idx| {
            let values: Vec<f64> = (0..s)
                .map(|_| {
                    let v = axis[idx % per_dim];
                    idx /= per_dim;
                    v
                })
                .collect();
            MultiplierVector::project(&values, pi_max)
        })
        .collect()
}

/// Monte Carlo estimate of `E_σ sup_{π ∈ grid} (1/N)Σ σ_i u(π, P_i)`.
///
/// Each draw owns an RNG stream derived from `(seed, draw)`, and draws are
/// reduced in index order, so the result does not depend on thread count.
pub fn empirical_rademacher(
    sample: &[MilpInstance],
    bounds: &ProblemBounds,
    grid_per_dim: usize,
    draws: usize,
    seed: u64,
) -> Result<RademacherEstimate> {
    if sample.is_empty() {
        return Err(Error::Config("empty sample".into()));
    }
    let s = sample[0].s();
    if s > MAX_RADEMACHER_DIM {
        return Err(Error::Unsupported(format!(
            "grid sup over G^s points needs s ≤ {MAX_RADEMACHER_DIM}, got {s}"
        )));
    }
    if draws < MIN_RADEMACHER_DRAWS {
        return Err(Error::Config(format!(
            "need at least {MIN_RADEMACHER_DRAWS} Rademacher draws, got {draws}"
        )));
    }
    if grid_per_dim < 2 {
        return Err(Error::Config("grid needs at least 2 points per axis".into()));
    }
    let grid = box_grid(s, grid_per_dim, bounds.pi_max());
    // values[g][i] = u(π_g, P_i)
    let values = grid
        .par_iter()
        .map(|pi| {
            sample
                .iter()
                .enumerate()
                .map(|(i, p)| dual_eval(pi, p).map(|e| e.value).map_err(|e| Error::at(i, e)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = sample.len() as f64;
    let sups: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = seeded(derive_seed(seed, &[d as u64]));
            let signs: Vec<f64> = (0..sample.len())
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect();
            values
                .iter()
                .map(|row| row.iter().zip(&signs).map(|(u, sg)| u * sg).sum::<f64>() / n)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let t = draws as f64;
    let mean = sups.iter().sum::<f64>() / t;
    let var = sups.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
    Ok(RademacherEstimate {
        estimate: mean,
        std_error: (var / t).sqrt(),
        grid_correction: bounds.lipschitz(s) * bounds.diameter(s) / grid_per_dim as f64,
        draws,
        grid_points: grid.len(),
    })
}
