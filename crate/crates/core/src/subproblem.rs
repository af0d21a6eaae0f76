//! Exact oracles for the Lagrangian subproblem
//! `u(π, P) = min { cᵀx + πᵀ(b − Ax) : x ∈ {0,1}^p, Cx ≥ d }` and for `OPT(P)`.
//!
//! Restricted instances take a separable closed form; everything else is
//! enumerated over `{0,1}^p`, which caps `p` at [`ENUMERATION_LIMIT`].
//! Continuous variables are rejected.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{dot, fill_binary, MilpInstance, MultiplierVector, ENUMERATION_LIMIT};

/// Minimizer of the Lagrangian subproblem and its value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubproblemSolution {
    pub x_star: Vec<f64>,
    pub value: f64,
}

/// Which oracle the solver may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolvePath {
    /// Closed form when the instance is restricted, enumeration otherwise.
    #[default]
    Auto,
    /// Always enumerate.
    Enumerate,
}

pub fn solve_subproblem(pi: &MultiplierVector, problem: &MilpInstance) -> Result<SubproblemSolution> {
    solve_subproblem_with(pi, problem, SolvePath::Auto, ENUMERATION_LIMIT)
}

pub fn solve_subproblem_with(
    pi: &MultiplierVector,
    problem: &MilpInstance,
    path: SolvePath,
    enumeration_limit: usize,
) -> Result<SubproblemSolution> {
    if pi.len() != problem.s() {
        return Err(Error::Dimension(format!(
            "multiplier has {} entries, instance has {} dualized rows",
            pi.len(),
            problem.s()
        )));
    }
    if path == SolvePath::Auto && problem.is_restricted() {
        return Ok(solve_restricted(pi.as_slice(), problem.c()));
    }
    check_enumerable(problem, enumeration_limit)?;

    // Objective in x is (c − Aᵀπ)ᵀx plus the constant πᵀb.
    let pi = pi.as_slice();
    let reduced: Vec<f64> = (0..problem.n_vars())
        .map(|j| {
            problem.c()[j]
                - problem
                    .a()
                    .iter()
                    .zip(pi)
                    .map(|(row, pk)| pk * row[j])
                    .sum::<f64>()
        })
        .collect();
    let constant = dot(pi, problem.b());
    let (x_star, best) = enumerate_min(problem, &reduced, |_| true)
        .ok_or_else(|| Error::Infeasible("no binary point satisfies Cx ≥ d".into()))?;
    Ok(SubproblemSolution {
        x_star,
        value: best + constant,
    })
}

/// Per-coordinate minimizer: `x_k = 1` iff `c_k − π_k < 0`.
fn solve_restricted(pi: &[f64], c: &[f64]) -> SubproblemSolution {
    let mut x_star = vec![0.0; c.len()];
    let mut value = 0.0;
    for (k, (&ck, &pk)) in c.iter().zip(pi).enumerate() {
        if ck - pk < 0.0 {
            x_star[k] = 1.0;
            value += ck - 0.5 * pk;
        } else {
            value += 0.5 * pk;
        }
    }
    SubproblemSolution { x_star, value }
}

fn check_enumerable(problem: &MilpInstance, limit: usize) -> Result<()> {
    if problem.m() > 0 {
        return Err(Error::Unsupported(
            "enumeration oracles need m = 0 (no continuous variables)".into(),
        ));
    }
    if problem.p() > limit {
        return Err(Error::Unsupported(format!(
            "p = {} exceeds the enumeration limit {limit}",
            problem.p()
        )));
    }
    Ok(())
}

/// Smallest `wᵀx` over kept-feasible binaries accepted by `extra`; the first
/// minimizer in mask order wins ties.
fn enumerate_min(
    problem: &MilpInstance,
    weights: &[f64],
    extra: impl Fn(&[f64]) -> bool,
) -> Option<(Vec<f64>, f64)> {
    let mut x = vec![0.0; problem.p()];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u64..(1u64 << problem.p()) {
        fill_binary(mask, &mut x);
        if !problem.kept_feasible(&x) || !extra(&x) {
            continue;
        }
        let v = dot(weights, &x);
        if best.as_ref().map_or(true, |(_, b)| v < *b) {
            best = Some((x.clone(), v));
        }
    }
    best
}

/// Exact `OPT(P)` with its argmin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptSolution {
    pub x_star: Vec<f64>,
    pub value: f64,
}

pub fn solve_opt_bruteforce(problem: &MilpInstance) -> Result<OptSolution> {
    solve_opt_bruteforce_with(problem, ENUMERATION_LIMIT)
}

pub fn solve_opt_bruteforce_with(problem: &MilpInstance, enumeration_limit: usize) -> Result<OptSolution> {
    check_enumerable(problem, enumeration_limit)?;
    let (x_star, value) = enumerate_min(problem, problem.c(), |x| problem.coupling_feasible(x))
        .ok_or_else(|| Error::Infeasible("no binary point satisfies Ax ≥ b and Cx ≥ d".into()))?;
    Ok(OptSolution { x_star, value })
}
