//! Multiplier learners over a sample or stream of instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{dual_eval, min_norm_pi_star, DualSolveConfig};
use crate::error::{Error, Result};
use crate::instance::{MilpInstance, MultiplierVector, ProblemBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Sga,
    Erm,
    Warmstart,
}

impl LearnerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerKind::Sga => "sga",
            LearnerKind::Erm => "erm",
            LearnerKind::Warmstart => "warmstart",
        }
    }

    /// Stable numeric label used in seed derivation.
    pub fn label(&self) -> u64 {
        match self {
            LearnerKind::Sga => 1,
            LearnerKind::Erm => 2,
            LearnerKind::Warmstart => 3,
        }
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sga" => Ok(LearnerKind::Sga),
            "erm" => Ok(LearnerKind::Erm),
            "warmstart" => Ok(LearnerKind::Warmstart),
            other => Err(Error::Config(format!("unknown learner `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnedMultipliers {
    pub pi: MultiplierVector,
    pub learner: LearnerKind,
    pub n: usize,
    pub seed: u64,
    pub iterations: usize,
    /// Training objective at `pi` where the learner has one (ERM).
    pub empirical_value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgaConfig {
    pub n: usize,
    pub bounds: ProblemBounds,
    /// Constant step; `π_max/(2B√N)` when `None`.
    pub eta: Option<f64>,
    pub seed: u64,
}

impl SgaConfig {
    pub fn new(n: usize, bounds: ProblemBounds, seed: u64) -> Self {
        Self {
            n,
            bounds,
            eta: None,
            seed,
        }
    }

    pub fn step(&self) -> f64 {
        self.eta.unwrap_or_else(|| {
            self.bounds.pi_max() / (2.0 * self.bounds.violation() * (self.n as f64).sqrt())
        })
    }
}

/// Stochastic subgradient ascent with averaging.
///
/// Starting from `π₁ = 0`, each instance `P_t` contributes one step
/// `π_{t+1} = Proj_Π(π_t + η (b_t − A_t x_t*))`. The output is the average of
/// the pre-update iterates `π₁, …, π_N`.
pub fn sga_learn(stream: &[MilpInstance], cfg: &SgaConfig) -> Result<LearnedMultipliers> {
    if cfg.n == 0 {
        return Err(Error::Config("SGA needs N ≥ 1".into()));
    }
    if stream.len() != cfg.n {
        return Err(Error::Config(format!(
            "stream has {} instances but N = {}",
            stream.len(),
            cfg.n
        )));
    }
    let eta = cfg.step();
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!("step size must be finite and ≥ 0, got {eta}")));
    }
    let s = stream[0].s();
    let pi_max = cfg.bounds.pi_max();
    let mut pi = MultiplierVector::zeros(s);
    let mut sum = vec![0.0; s];
    for (t, problem) in stream.iter().enumerate() {
        if problem.s() != s {
            return Err(Error::at(
                t,
                Error::Dimension(format!("instance has s = {}, expected {s}", problem.s())),
            ));
        }
        for (acc, p) in sum.iter_mut().zip(pi.as_slice()) {
            *acc += p;
        }
        let eval = dual_eval(&pi, problem).map_err(|e| Error::at(t, e))?;
        let next: Vec<f64> = pi
            .as_slice()
            .iter()
            .zip(&eval.subgradient)
            .map(|(p, g)| p + eta * g)
            .collect();
        pi = MultiplierVector::project(&next, pi_max);
    }
    let n = cfg.n as f64;
    let avg: Vec<f64> = sum.iter().map(|v| v / n).collect();
    Ok(LearnedMultipliers {
        pi: MultiplierVector::project(&avg, pi_max),
        learner: LearnerKind::Sga,
        n: cfg.n,
        seed: cfg.seed,
        iterations: cfg.n,
        empirical_value: None,
    })
}

/// `(1/N)Σ u(π, P_i)` and the averaged subgradient, reduced in sample order.
pub fn empirical_dual(pi: &MultiplierVector, sample: &[MilpInstance]) -> Result<(f64, Vec<f64>)> {
    let evals: Vec<_> = sample
        .par_iter()
        .enumerate()
        .map(|(i, p)| dual_eval(pi, p).map_err(|e| Error::at(i, e)))
        .collect::<Result<Vec<_>>>()?;
    let n = sample.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; pi.len()];
    for e in &evals {
        value += e.value;
        for (g, ek) in grad.iter_mut().zip(&e.subgradient) {
            *g += ek;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((value / n, grad))
}

/// Default ERM iteration budget `50·N·√s`.
pub fn default_erm_iterations(n: usize, s: usize) -> usize {
    ((50 * n) as f64 * (s as f64).sqrt()).ceil() as usize
}

/// Empirical risk maximization by full-batch projected subgradient ascent
/// with step `D/(L√t)`, returning the best of the iterates and their suffix
/// average.
pub fn erm_learn(
    sample: &[MilpInstance],
    bounds: &ProblemBounds,
    iterations: Option<usize>,
    seed: u64,
) -> Result<LearnedMultipliers> {
    if sample.is_empty() {
        return Err(Error::Config("ERM needs at least one instance".into()));
    }
    let s = sample[0].s();
    if let Some(i) = sample.iter().position(|p| p.s() != s) {
        return Err(Error::at(i, Error::Dimension(format!("expected s = {s}"))));
    }
    let iterations = iterations.unwrap_or_else(|| default_erm_iterations(sample.len(), s));
    if iterations == 0 {
        return Err(Error::Config("ERM needs at least one iteration".into()));
    }
    let step0 = bounds.diameter(s) / bounds.lipschitz(s);
    let mut pi = MultiplierVector::zeros(s);
    let mut best: Option<(MultiplierVector, f64)> = None;
    let tail_start = iterations / 2 + 1;
    let mut tail_sum = vec![0.0; s];
    for t in 1..=iterations {
        let (value, grad) = empirical_dual(&pi, sample)?;
        if best.as_ref().map_or(true, |(_, b)| value > *b) {
            best = Some((pi.clone(), value));
        }
        if t >= tail_start {
            tail_sum.iter_mut().zip(pi.as_slice()).for_each(|(a, p)| *a += p);
        }
        let eta = step0 / (t as f64).sqrt();
        let next: Vec<f64> = pi.as_slice().iter().zip(&grad).map(|(p, g)| p + eta * g).collect();
        pi = MultiplierVector::project(&next, bounds.pi_max());
    }
    let count = (iterations - tail_start + 1) as f64;
    let tail: Vec<f64> = tail_sum.iter().map(|v| v / count).collect();
    let tail = MultiplierVector::project(&tail, bounds.pi_max());
    let (tail_value, _) = empirical_dual(&tail, sample)?;
    let (mut pi, mut value) = best.expect("at least one iteration");
    if tail_value > value {
        pi = tail;
        value = tail_value;
    }
    Ok(LearnedMultipliers {
        pi,
        learner: LearnerKind::Erm,
        n: sample.len(),
        seed,
        iterations,
        empirical_value: Some(value),
    })
}

/// Exact maximum of the empirical dual over the box for restricted instances.
///
/// Each coordinate's average `(1/N)Σ_i min(π/2, c_ik − π/2)` is concave and
/// piecewise linear with kinks at the `c_ik`, so its maximum over `[0, π_max]`
/// is attained at an endpoint or a kink.
pub fn restricted_erm_optimum(sample: &[MilpInstance], pi_max: f64) -> Result<(Vec<f64>, f64)> {
    if sample.is_empty() {
        return Err(Error::Config("empty sample".into()));
    }
    if let Some(i) = sample.iter().position(|p| !p.is_restricted()) {
        return Err(Error::at(i, Error::Unsupported("instance is not restricted".into())));
    }
    let s = sample[0].s();
    let n = sample.len() as f64;
    let mut argmax = Vec::with_capacity(s);
    let mut total = 0.0;
    for k in 0..s {
        let coord = |pi: f64| {
            sample
                .iter()
                .map(|p| (pi / 2.0).min(p.c()[k] - pi / 2.0))
                .sum::<f64>()
                / n
        };
        let mut candidates: Vec<f64> = sample
            .iter()
            .map(|p| p.c()[k].clamp(0.0, pi_max))
            .chain([0.0, pi_max])
            .collect();
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        let (x, v) = candidates
            .into_iter()
            .map(|x| (x, coord(x)))
            .fold((0.0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        argmax.push(x);
        total += v;
    }
    Ok((argmax, total))
}

/// Warm-start learner: coordinate-wise mean of per-instance min-norm dual
/// maximizers, clipped to the box.
pub fn warmstart_learn(
    sample: &[MilpInstance],
    bounds: &ProblemBounds,
    cfg: &DualSolveConfig,
    seed: u64,
) -> Result<LearnedMultipliers> {
    if sample.is_empty() {
        return Err(Error::Config("warm-start learner needs at least one instance".into()));
    }
    let stars = sample
        .par_iter()
        .enumerate()
        .map(|(i, p)| min_norm_pi_star(p, bounds, cfg).map_err(|e| Error::at(i, e)))
        .collect::<Result<Vec<_>>>()?;
    let s = stars[0].pi.len();
    let mut sum = vec![0.0; s];
    for star in &stars {
        if star.pi.len() != s {
            return Err(Error::Dimension("instances disagree on s".into()));
        }
        for (acc, v) in sum.iter_mut().zip(star.pi.as_slice()) {
            *acc += v;
        }
    }
    let n = sample.len() as f64;
    let mean: Vec<f64> = sum.iter().map(|v| v / n).collect();
    Ok(LearnedMultipliers {
        pi: MultiplierVector::project(&mean, bounds.pi_max()),
        learner: LearnerKind::Warmstart,
        n: sample.len(),
        seed,
        iterations: stars.iter().filter(|s| !s.exact).count() * cfg.iterations,
        empirical_value: None,
    })
}
