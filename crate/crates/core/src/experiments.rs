//! Seeded rate experiments over the hard families.
//!
//! Every `(learner, s, N, trial)` cell draws its own instances from a stream
//! seeded by [`derive_seed`], runs the learner, and scores it with the exact
//! closed-form excess risk of the family. Records are sorted before writing,
//! so the CSV bytes do not depend on the worker count.
//!
//! Config JSON:
//!
//! ```json
//! {
//!   "family": { "variant": "dual-lb", "mu": 1.0, "sigma": 1.0, "epsilon": 0.2,
//!               "pi_max": 3.0, "B": 1.0, "v": "alternating" },
//!   "learners": ["sga"],
//!   "n_values": [100, 400, 1600, 6400],
//!   "s_values": [8],
//!   "trials": 50,
//!   "master_seed": 20240611,
//!   "workers": 8,
//!   "erm_iterations": null,
//!   "record_timing": false
//! }
//! ```
//!
//! `v` is `"alternating"` (`v_k = k mod 2`, default), `"ones"`, `"zeros"`, or an
//! explicit 0/1 array whose length must match every entry of `s_values`.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{erm_excess_bound, sga_bound, warmstart_bound};
use crate::dual::DualSolveConfig;
use crate::error::{Error, Result};
use crate::hard_family::{FamilyVariant, HardFamilySpec};
use crate::instance::ProblemBounds;
use crate::learners::{
    empirical_dual, erm_learn, restricted_erm_optimum, sga_learn, warmstart_learn, LearnerKind, SgaConfig,
};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VChoice {
    Pattern(VPattern),
    Explicit(Vec<u8>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VPattern {
    Alternating,
    Ones,
    Zeros,
}

impl Default for VChoice {
    fn default() -> Self {
        VChoice::Pattern(VPattern::Alternating)
    }
}

impl VChoice {
    pub fn for_dim(&self, s: usize) -> Result<Vec<u8>> {
        match self {
            VChoice::Pattern(VPattern::Alternating) => Ok((0..s).map(|k| (k % 2) as u8).collect()),
            VChoice::Pattern(VPattern::Ones) => Ok(vec![1; s]),
            VChoice::Pattern(VPattern::Zeros) => Ok(vec![0; s]),
            VChoice::Explicit(v) if v.len() == s => Ok(v.clone()),
            VChoice::Explicit(v) => Err(Error::Config(format!(
                "explicit v has length {} but s = {s}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub variant: FamilyVariant,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    pub epsilon: f64,
    pub pi_max: f64,
    #[serde(rename = "B", default = "one")]
    pub violation: f64,
    #[serde(default)]
    pub v: VChoice,
}

fn one() -> f64 {
    1.0
}

impl FamilyConfig {
    pub fn spec(&self, s: usize) -> Result<HardFamilySpec> {
        HardFamilySpec::new(
            self.variant,
            self.mu,
            self.sigma,
            self.epsilon,
            self.v.for_dim(s)?,
            self.pi_max,
        )
    }

    pub fn bounds(&self) -> Result<ProblemBounds> {
        ProblemBounds::new(self.violation, self.pi_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: FamilyConfig,
    pub learners: Vec<LearnerKind>,
    pub n_values: Vec<usize>,
    pub s_values: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    /// Thread count; rayon's default when `None`.
    #[serde(default)]
    pub workers: Option<usize>,
    /// ERM iteration budget; `50·N·√s` when `None`.
    #[serde(default)]
    pub erm_iterations: Option<usize>,
    /// Fill `runtime_ms`; when off the column is written as 0 so runs are
    /// byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.learners.is_empty() {
            return Err(Error::Config("no learners selected".into()));
        }
        let mut ns = self.n_values.clone();
        ns.sort_unstable();
        ns.dedup();
        if ns.len() < 2 {
            return Err(Error::Config("need at least two distinct N values for slope fitting".into()));
        }
        if ns[0] == 0 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        if self.s_values.is_empty() || self.s_values.contains(&0) {
            return Err(Error::Config("s values must be nonempty and positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        for learner in &self.learners {
            let needed = match learner {
                LearnerKind::Sga | LearnerKind::Erm => FamilyVariant::DualLb,
                LearnerKind::Warmstart => FamilyVariant::WarmstartLb,
            };
            if self.family.variant != needed {
                return Err(Error::Config(format!(
                    "learner {learner} is scored on a {needed} family, config has {}",
                    self.family.variant
                )));
            }
        }
        for &s in &self.s_values {
            let spec = self.family.spec(s)?;
            if spec.variant == FamilyVariant::DualLb && spec.epsilon == 0.0 {
                return Err(Error::Config("dual-lb rate runs need epsilon > 0".into()));
            }
        }
        self.family.bounds()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub learner: LearnerKind,
    pub s: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub excess_risk: f64,
    pub theory_bound: f64,
    pub runtime_ms: u64,
    /// ERM only: exact empirical optimum minus the value reached.
    #[serde(skip)]
    pub erm_gap: Option<f64>,
}

impl TrialRecord {
    /// Excess risk with round-off negatives clipped to zero.
    pub fn clipped_excess(&self) -> f64 {
        self.excess_risk.max(0.0)
    }

    /// ERM inner-solve gap exceeds 10% of the measured excess.
    pub fn erm_solve_flagged(&self) -> bool {
        self.erm_gap
            .is_some_and(|gap| gap > 0.1 * self.clipped_excess())
    }

    fn key(&self) -> (LearnerKind, usize, usize, usize) {
        (self.learner, self.s, self.n, self.trial)
    }
}

pub fn trial_seed(master: u64, learner: LearnerKind, s: usize, n: usize, trial: usize) -> u64 {
    derive_seed(master, &[learner.label(), s as u64, n as u64, trial as u64])
}

fn run_trial(
    cfg: &ExperimentConfig,
    learner: LearnerKind,
    s: usize,
    n: usize,
    trial: usize,
) -> Result<TrialRecord> {
    let spec = cfg.family.spec(s)?;
    let bounds = cfg.family.bounds()?;
    let seed = trial_seed(cfg.master_seed, learner, s, n, trial);
    let mut rng = seeded(seed);
    let sample = spec.sample_instances(&mut rng, n);
    let (b, pm) = (bounds.violation(), bounds.pi_max());
    let started = Instant::now();
    let (excess, bound, erm_gap) = match learner {
        LearnerKind::Sga => {
            let out = sga_learn(&sample, &SgaConfig::new(n, bounds, seed))?;
            (spec.excess_risk(out.pi.as_slice())?, sga_bound(s, b, pm, n), None)
        }
        LearnerKind::Erm => {
            let out = erm_learn(&sample, &bounds, cfg.erm_iterations, seed)?;
            let (_, exact) = restricted_erm_optimum(&sample, pm)?;
            let (reached, _) = empirical_dual(&out.pi, &sample)?;
            (
                spec.excess_risk(out.pi.as_slice())?,
                erm_excess_bound(s, b, pm, n),
                Some(exact - reached),
            )
        }
        LearnerKind::Warmstart => {
            let out = warmstart_learn(&sample, &bounds, &DualSolveConfig::default(), seed)?;
            (spec.warmstart_excess(out.pi.as_slice())?, warmstart_bound(s, pm, n), None)
        }
    };
    let runtime_ms = if cfg.record_timing {
        started.elapsed().as_millis() as u64
    } else {
        0
    };
    Ok(TrialRecord {
        learner,
        s,
        n,
        trial,
        seed,
        excess_risk: excess,
        theory_bound: bound,
        runtime_ms,
        erm_gap,
    })
}

/// Runs every `(learner, s, N, trial)` cell and returns records sorted by
/// that key.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &learner in &cfg.learners {
        for &s in &cfg.s_values {
            for &n in &cfg.n_values {
                for trial in 0..cfg.trials {
                    cells.push((learner, s, n, trial));
                }
            }
        }
    }
    cells.sort_unstable();
    cells.dedup();
    let work = || {
        cells
            .par_iter()
            .map(|&(learner, s, n, trial)| run_trial(cfg, learner, s, n, trial))
            .collect::<Result<Vec<_>>>()
    };
    let mut records = match cfg.workers {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    records.sort_by_key(TrialRecord::key);
    Ok(records)
}

pub const CSV_HEADER: [&str; 8] = [
    "learner",
    "s",
    "N",
    "trial",
    "seed",
    "excess_risk",
    "theory_bound",
    "runtime_ms",
];

pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(records, std::io::BufWriter::new(file))
}

pub fn to_csv_bytes(records: &[TrialRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(buf)
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Config(format!("unexpected CSV header {headers:?}")));
    }
    r.deserialize().map(|row| Ok(row?)).collect()
}

pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    read_csv(std::fs::File::open(path)?)
}

/// Mean excess risk of one `N` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub n: usize,
    pub trials: usize,
    pub mean_excess: f64,
    pub std_error: f64,
    pub mean_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub learner: LearnerKind,
    pub s: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub cells: Vec<CellSummary>,
    /// `N` values left out because their mean excess was not positive.
    pub undefined_cells: Vec<usize>,
}

pub const MIN_TRIALS_PER_CELL: usize = 10;

/// Per-`N` means for one learner (and one `s`).
pub fn summarize(records: &[TrialRecord], learner: LearnerKind, s: Option<usize>) -> Result<(usize, Vec<CellSummary>)> {
    let chosen: Vec<&TrialRecord> = records
        .iter()
        .filter(|r| r.learner == learner && s.map_or(true, |s| r.s == s))
        .collect();
    let mut dims: Vec<usize> = chosen.iter().map(|r| r.s).collect();
    dims.sort_unstable();
    dims.dedup();
    let s = match dims.as_slice() {
        [] => return Err(Error::Config(format!("no records for learner {learner}"))),
        [only] => *only,
        many => {
            return Err(Error::Config(format!(
                "records for {learner} span s = {many:?}; choose one"
            )))
        }
    };
    let mut ns: Vec<usize> = chosen.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let cells = ns
        .into_iter()
        .map(|n| {
            let xs: Vec<&&TrialRecord> = chosen.iter().filter(|r| r.n == n).collect();
            let t = xs.len() as f64;
            let mean = xs.iter().map(|r| r.excess_risk).sum::<f64>() / t;
            let var = if xs.len() > 1 {
                xs.iter().map(|r| (r.excess_risk - mean).powi(2)).sum::<f64>() / (t - 1.0)
            } else {
                0.0
            };
            CellSummary {
                n,
                trials: xs.len(),
                mean_excess: mean,
                std_error: (var / t).sqrt(),
                mean_bound: xs.iter().map(|r| r.theory_bound).sum::<f64>() / t,
            }
        })
        .collect();
    Ok((s, cells))
}

/// Ordinary least squares of `ln(mean excess)` on `ln N`.
pub fn fit_loglog_slope(records: &[TrialRecord], learner: LearnerKind, s: Option<usize>) -> Result<SlopeFit> {
    let (s, cells) = summarize(records, learner, s)?;
    if let Some(c) = cells.iter().find(|c| c.trials < MIN_TRIALS_PER_CELL) {
        return Err(Error::Config(format!(
            "cell N = {} has {} trials; slope fitting needs {MIN_TRIALS_PER_CELL}",
            c.n, c.trials
        )));
    }
    let (usable, undefined): (Vec<&CellSummary>, Vec<&CellSummary>) =
        cells.iter().partition(|c| c.mean_excess > 0.0);
    if usable.len() < 2 {
        return Err(Error::Config(format!(
            "need two N values with positive mean excess, have {}",
            usable.len()
        )));
    }
    let pts: Vec<(f64, f64)> = usable
        .iter()
        .map(|c| ((c.n as f64).ln(), c.mean_excess.ln()))
        .collect();
    let (slope, intercept, r2) = ols(&pts);
    Ok(SlopeFit {
        learner,
        s,
        slope,
        intercept,
        r2,
        undefined_cells: undefined.iter().map(|c| c.n).collect(),
        cells,
    })
}

fn ols(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(learner: LearnerKind, f: impl Fn(f64) -> f64) -> Vec<TrialRecord> {
        let mut out = Vec::new();
        for n in [100usize, 400, 1600, 6400] {
            for trial in 0..10 {
                out.push(TrialRecord {
                    learner,
                    s: 8,
                    n,
                    trial,
                    seed: 0,
                    excess_risk: f(n as f64),
                    theory_bound: 1.0,
                    runtime_ms: 0,
                    erm_gap: None,
                });
            }
        }
        out
    }

    #[test]
    fn exact_power_laws() {
        let fit = fit_loglog_slope(&synthetic(LearnerKind::Sga, |n| 7.0 / n.sqrt()), LearnerKind::Sga, None).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-12);
        let fit = fit_loglog_slope(&synthetic(LearnerKind::Sga, |n| 3.0 / n), LearnerKind::Sga, None).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_cells_are_reported() {
        let recs = synthetic(LearnerKind::Sga, |n| if n > 2000.0 { 0.0 } else { 1.0 / n });
        let fit = fit_loglog_slope(&recs, LearnerKind::Sga, None).unwrap();
        assert_eq!(fit.undefined_cells, vec![6400]);
        let dead = synthetic(LearnerKind::Sga, |n| if n > 200.0 { 0.0 } else { 1.0 });
        assert!(fit_loglog_slope(&dead, LearnerKind::Sga, None).is_err());
    }

    #[test]
    fn too_few_trials_rejected() {
        let mut recs = synthetic(LearnerKind::Sga, |n| 1.0 / n);
        recs.retain(|r| r.trial < 5);
        assert!(fit_loglog_slope(&recs, LearnerKind::Sga, None).is_err());
    }

    #[test]
    fn csv_round_trip_and_header() {
        let recs = synthetic(LearnerKind::Warmstart, |n| 1.0 / n);
        let bytes = to_csv_bytes(&recs).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("learner,s,N,trial,seed,excess_risk,theory_bound,runtime_ms\n"));
        let back = read_csv(bytes.as_slice()).unwrap();
        assert_eq!(back, recs);
    }

    fn small_config(learners: Vec<LearnerKind>, variant: FamilyVariant) -> ExperimentConfig {
        ExperimentConfig {
            family: FamilyConfig {
                variant,
                mu: 1.0,
                sigma: 1.0,
                epsilon: 0.2,
                pi_max: if variant == FamilyVariant::DualLb { 3.0 } else { 2.0 },
                violation: 1.0,
                v: VChoice::default(),
            },
            learners,
            n_values: vec![10, 40],
            s_values: vec![2],
            trials: 3,
            master_seed: 5,
            workers: Some(2),
            erm_iterations: Some(200),
            record_timing: false,
        }
    }

    #[test]
    fn mismatched_learner_and_family_rejected_before_running() {
        let cfg = small_config(vec![LearnerKind::Warmstart], FamilyVariant::DualLb);
        assert!(matches!(run_rate_experiment(&cfg), Err(Error::Config(_))));
        let cfg = small_config(vec![LearnerKind::Sga], FamilyVariant::WarmstartLb);
        assert!(matches!(run_rate_experiment(&cfg), Err(Error::Config(_))));
        let mut one_n = small_config(vec![LearnerKind::Sga], FamilyVariant::DualLb);
        one_n.n_values = vec![10, 10];
        assert!(run_rate_experiment(&one_n).is_err());
    }

    #[test]
    fn records_sorted_and_complete() {
        let cfg = small_config(vec![LearnerKind::Erm, LearnerKind::Sga], FamilyVariant::DualLb);
        let recs = run_rate_experiment(&cfg).unwrap();
        assert_eq!(recs.len(), 2 * 2 * 3);
        assert!(recs.windows(2).all(|w| w[0].key() < w[1].key()));
        for r in &recs {
            assert!(r.excess_risk >= -1e-9);
            assert!(r.erm_gap.is_some() == (r.learner == LearnerKind::Erm));
        }
    }

    #[test]
    fn config_json_schema() {
        let text = r#"{
            "family": {"variant": "warmstart-lb", "epsilon": 0.2, "pi_max": 2.0},
            "learners": ["warmstart"],
            "n_values": [100, 400],
            "s_values": [8],
            "trials": 10,
            "master_seed": 1
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.family.v, VChoice::Pattern(VPattern::Alternating));
        let explicit = r#"{"variant":"dual-lb","epsilon":0.1,"pi_max":3.0,"v":[1,0,1]}"#;
        let fam: FamilyConfig = serde_json::from_str(explicit).unwrap();
        assert_eq!(fam.spec(3).unwrap().v, vec![1, 0, 1]);
        assert!(fam.spec(4).is_err());
    }
}
