//! Dual evaluation with subgradients, and per-instance projected subgradient
//! ascent on `u(·, P)` over the multiplier box.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{MilpInstance, MultiplierVector, ProblemBounds};
use crate::subproblem::solve_subproblem;

/// `u(π, P)`, the minimizer `x*`, and the subgradient `g = b − A x*`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualEval {
    pub value: f64,
    pub subgradient: Vec<f64>,
    pub x_star: Vec<f64>,
}

pub fn dual_eval(pi: &MultiplierVector, problem: &MilpInstance) -> Result<DualEval> {
    let sol = solve_subproblem(pi, problem)?;
    let subgradient = problem
        .apply_a(&sol.x_star)
        .into_iter()
        .zip(problem.b())
        .map(|(ax, bk)| bk - ax)
        .collect();
    Ok(DualEval {
        value: sol.value,
        subgradient,
        x_star: sol.x_star,
    })
}

/// Step size rule for projected subgradient ascent, indexed from `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub enum StepSchedule {
    /// `η_t = h`.
    Constant(f64),
    /// `η_t = h / √t`.
    InvSqrt(f64),
    /// `η_t = D / (L√t)` with `D`, `L` from the problem bounds.
    #[default]
    Diameter,
}

impl StepSchedule {
    pub fn step(&self, t: usize, bounds: &ProblemBounds, s: usize) -> f64 {
        let root_t = (t as f64).sqrt();
        match *self {
            StepSchedule::Constant(h) => h,
            StepSchedule::InvSqrt(h) => h / root_t,
            StepSchedule::Diameter => bounds.diameter(s) / (bounds.lipschitz(s) * root_t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolveConfig {
    pub iterations: usize,
    /// Start point; the origin when `None`.
    pub initial: Option<MultiplierVector>,
    pub step: StepSchedule,
    /// Weight `λ` of the `−λ‖π‖²` term used for min-norm tie-breaking.
    pub norm_weight: f64,
    /// Reporting tolerance, carried through to results.
    pub tolerance: f64,
}

impl Default for DualSolveConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            initial: None,
            step: StepSchedule::Diameter,
            norm_weight: 0.0,
            tolerance: 1e-2,
        }
    }
}

impl DualSolveConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("dual solve needs at least one iteration".into()));
        }
        if !(self.norm_weight >= 0.0) {
            return Err(Error::Config(format!(
                "norm weight must be nonnegative, got {}",
                self.norm_weight
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSolution {
    /// Best of the iterates and their suffix average.
    pub pi_hat: MultiplierVector,
    /// `u(pi_hat, P)`.
    pub value: f64,
    /// Iterate index (1-based) at which `pi_hat` was recorded.
    pub best_iteration: usize,
    pub iterations: usize,
}

/// Projected subgradient ascent on `u(π, P) − λ‖π‖²` over `[0, π_max]^s`.
///
/// Returns whichever scores best on the penalized objective: any iterate,
/// or the average of the second half of the iterates.
pub fn solve_dual(
    problem: &MilpInstance,
    bounds: &ProblemBounds,
    cfg: &DualSolveConfig,
) -> Result<DualSolution> {
    cfg.validate()?;
    let s = problem.s();
    let start = match &cfg.initial {
        Some(p) if p.len() != s => {
            return Err(Error::Dimension(format!(
                "initial point has {} entries, expected {s}",
                p.len()
            )))
        }
        Some(p) => MultiplierVector::project(p.as_slice(), bounds.pi_max()),
        None => MultiplierVector::zeros(s),
    };
    let lambda = cfg.norm_weight;
    let penalized = |pi: &MultiplierVector, u: f64| {
        u - lambda * pi.as_slice().iter().map(|v| v * v).sum::<f64>()
    };

    let mut pi = start;
    let mut best: Option<(MultiplierVector, f64, f64, usize)> = None;
    let tail_start = cfg.iterations / 2 + 1;
    let mut tail_sum = vec![0.0; s];
    for t in 1..=cfg.iterations {
        let eval = dual_eval(&pi, problem)?;
        let score = penalized(&pi, eval.value);
        if best.as_ref().map_or(true, |(_, _, b, _)| score > *b) {
            best = Some((pi.clone(), eval.value, score, t));
        }
        if t >= tail_start {
            tail_sum.iter_mut().zip(pi.as_slice()).for_each(|(a, p)| *a += p);
        }
        let eta = cfg.step.step(t, bounds, s);
        let next: Vec<f64> = pi
            .as_slice()
            .iter()
            .zip(&eval.subgradient)
            .map(|(p, g)| p + eta * (g - 2.0 * lambda * p))
            .collect();
        pi = MultiplierVector::project(&next, bounds.pi_max());
    }
    let count = (cfg.iterations - tail_start + 1) as f64;
    let tail: Vec<f64> = tail_sum.iter().map(|v| v / count).collect();
    let tail = MultiplierVector::project(&tail, bounds.pi_max());
    let tail_value = dual_eval(&tail, problem)?.value;
    let tail_score = penalized(&tail, tail_value);
    let (mut pi_hat, mut value, best_score, mut best_iteration) = best.expect("at least one iteration");
    if tail_score > best_score {
        pi_hat = tail;
        value = tail_value;
        best_iteration = cfg.iterations;
    }
    Ok(DualSolution {
        pi_hat,
        value,
        best_iteration,
        iterations: cfg.iterations,
    })
}

/// Minimum-norm dual maximizer, exact or approximated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinNormSolution {
    pub pi: MultiplierVector,
    /// `false` when produced by the penalized path rather than in closed form.
    pub exact: bool,
}

/// Starting penalty weight for the Tikhonov path when the config has none.
pub const DEFAULT_TIKHONOV_WEIGHT: f64 = 1e-2;
/// Number of halvings of the penalty weight.
pub const TIKHONOV_STAGES: usize = 3;

/// Minimum-norm point of `argmax_{π ∈ Π} u(π, P)`.
///
/// For restricted instances with `c ≥ 0`, `u(π, P) = Σ_k min(π_k/2, c_k − π_k/2)`
/// peaks uniquely at `π_k = c_k` on `[0, c_k]`, so the answer is `c` clamped to
/// the box (and `0` for `c_k = 0`). Otherwise a decreasing-penalty path
/// `λ_j = λ₀·2^{−j}`, `j = 0..3`, is run with warm starts and the final iterate
/// is returned flagged as approximate.
pub fn min_norm_pi_star(
    problem: &MilpInstance,
    bounds: &ProblemBounds,
    cfg: &DualSolveConfig,
) -> Result<MinNormSolution> {
    if problem.is_restricted() && problem.c().iter().all(|&c| c >= 0.0) {
        return Ok(MinNormSolution {
            pi: MultiplierVector::project(problem.c(), bounds.pi_max()),
            exact: true,
        });
    }
    let lambda0 = if cfg.norm_weight > 0.0 {
        cfg.norm_weight
    } else {
        DEFAULT_TIKHONOV_WEIGHT
    };
    let mut stage_cfg = cfg.clone();
    let mut last = None;
    for j in 0..TIKHONOV_STAGES {
        stage_cfg.norm_weight = lambda0 * 0.5f64.powi(j as i32);
        let sol = solve_dual(problem, bounds, &stage_cfg)?;
        stage_cfg.initial = Some(sol.pi_hat.clone());
        last = Some(sol.pi_hat);
    }
    Ok(MinNormSolution {
        pi: last.expect("at least one stage"),
        exact: false,
    })
}
