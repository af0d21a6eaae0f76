//! Two-point instance distributions used by the lower-bound constructions.
//!
//! Every instance is restricted, `P = (c, I_s, ½·1_s, ∅, ∅)`, so a
//! distribution over instances is a distribution over `c`. Coordinates are
//! independent with `c_k ∈ {lo, hi}` and
//!
//! ```text
//! P(c_k = hi) = (1 + ε)/2  if v_k = 1
//!             = (1 − ε)/2  if v_k = 0
//! ```
//!
//! The dual lower-bound family uses `{lo, hi} = {μ, μ + σ}`; the warm-start
//! family fixes `{1, 2}`.
//!
//! For the dual family the population risk `R(π) = Σ_k J_k(π_k)` with
//! `J_k(π) = E[min(π/2, c_k − π/2)]` is piecewise linear with kinks at `μ` and
//! `μ + σ`, and is maximized at `μ·1 + σ·v`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{MilpInstance, MultiplierVector};
use crate::rng::{bernoulli, bernoulli_threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyVariant {
    /// Supports `{μ, μ + σ}`.
    DualLb,
    /// Supports `{1, 2}`; `μ` and `σ` are ignored.
    WarmstartLb,
}

impl std::fmt::Display for FamilyVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FamilyVariant::DualLb => "dual-lb",
            FamilyVariant::WarmstartLb => "warmstart-lb",
        })
    }
}

impl std::str::FromStr for FamilyVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual-lb" => Ok(FamilyVariant::DualLb),
            "warmstart-lb" => Ok(FamilyVariant::WarmstartLb),
            other => Err(Error::Config(format!("unknown family variant `{other}`"))),
        }
    }
}

/// Parameters of one member `D_v` of a hard family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardFamilySpec {
    pub mu: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub v: Vec<u8>,
    pub variant: FamilyVariant,
    /// Edge of the multiplier box the family is posed in.
    pub pi_max: f64,
}

impl HardFamilySpec {
    pub fn new(
        variant: FamilyVariant,
        mu: f64,
        sigma: f64,
        epsilon: f64,
        v: Vec<u8>,
        pi_max: f64,
    ) -> Result<Self> {
        let spec = Self {
            mu,
            sigma,
            epsilon,
            v,
            variant,
            pi_max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dual_lb(mu: f64, sigma: f64, epsilon: f64, v: Vec<u8>, pi_max: f64) -> Result<Self> {
        Self::new(FamilyVariant::DualLb, mu, sigma, epsilon, v, pi_max)
    }

    pub fn warmstart_lb(epsilon: f64, v: Vec<u8>, pi_max: f64) -> Result<Self> {
        Self::new(FamilyVariant::WarmstartLb, 1.0, 1.0, epsilon, v, pi_max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.v.is_empty() {
            return Err(Error::Dimension("v must have at least one coordinate".into()));
        }
        if let Some(k) = self.v.iter().position(|&b| b > 1) {
            return Err(Error::Domain(format!("v[{k}] = {} is not binary", self.v[k])));
        }
        if !(0.0..0.5).contains(&self.epsilon) {
            return Err(Error::Domain(format!(
                "epsilon must lie in [0, 1/2), got {}",
                self.epsilon
            )));
        }
        if !(self.pi_max > 0.0 && self.pi_max.is_finite()) {
            return Err(Error::Domain(format!("pi_max must be positive, got {}", self.pi_max)));
        }
        match self.variant {
            FamilyVariant::DualLb => {
                if !(self.mu > 0.0 && self.sigma > 0.0) {
                    return Err(Error::Domain(format!(
                        "mu and sigma must be positive, got mu = {}, sigma = {}",
                        self.mu, self.sigma
                    )));
                }
                if !(self.mu + self.sigma < self.pi_max) {
                    return Err(Error::Domain(format!(
                        "mu + sigma = {} must be below pi_max = {}",
                        self.mu + self.sigma,
                        self.pi_max
                    )));
                }
            }
            FamilyVariant::WarmstartLb => {
                if self.pi_max < 2.0 {
                    return Err(Error::Domain(format!(
                        "warm-start family needs pi_max ≥ 2, got {}",
                        self.pi_max
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn s(&self) -> usize {
        self.v.len()
    }

    /// `(lo, hi)` support of every coordinate.
    pub fn support(&self) -> (f64, f64) {
        match self.variant {
            FamilyVariant::DualLb => (self.mu, self.mu + self.sigma),
            FamilyVariant::WarmstartLb => (1.0, 2.0),
        }
    }

    /// `P(c_k = hi)`.
    pub fn p_high(&self, k: usize) -> f64 {
        if self.v[k] == 1 {
            (1.0 + self.epsilon) / 2.0
        } else {
            (1.0 - self.epsilon) / 2.0
        }
    }

    fn require(&self, variant: FamilyVariant) -> Result<()> {
        if self.variant == variant {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "operation needs a {variant} family, got {}",
                self.variant
            )))
        }
    }

    fn check_pi(&self, pi: &[f64]) -> Result<()> {
        if pi.len() != self.s() {
            return Err(Error::Dimension(format!(
                "multiplier has {} entries, family has s = {}",
                pi.len(),
                self.s()
            )));
        }
        MultiplierVector::new(pi.to_vec(), self.pi_max).map(|_| ())
    }

    /// Objective vector of one draw.
    pub fn sample_objective<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (lo, hi) = self.support();
        (0..self.s())
            .map(|k| {
                if bernoulli(rng, bernoulli_threshold(self.p_high(k))) {
                    hi
                } else {
                    lo
                }
            })
            .collect()
    }

    /// One restricted instance drawn from `D_v`.
    pub fn sample_instance<R: RngCore + ?Sized>(&self, rng: &mut R) -> MilpInstance {
        MilpInstance::restricted(&self.sample_objective(rng))
            .expect("validated spec has s ≥ 1 and finite support")
    }

    pub fn sample_instances<R: RngCore + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<MilpInstance> {
        (0..n).map(|_| self.sample_instance(rng)).collect()
    }

    /// `J_k(π_k)`, closed form.
    pub fn coordinate_risk(&self, k: usize, pi: f64) -> f64 {
        let (mu, hi) = self.support();
        let p = self.p_high(k);
        if pi <= mu {
            pi / 2.0
        } else if pi <= hi {
            p * pi / 2.0 + (1.0 - p) * (mu - pi / 2.0)
        } else {
            p * (hi - pi / 2.0) + (1.0 - p) * (mu - pi / 2.0)
        }
    }

    /// Exact population risk `R(π) = E[u(π, P)]`.
    pub fn population_risk(&self, pi: &[f64]) -> Result<f64> {
        self.require(FamilyVariant::DualLb)?;
        self.check_pi(pi)?;
        Ok(pi
            .iter()
            .enumerate()
            .map(|(k, &p)| self.coordinate_risk(k, p))
            .sum())
    }

    /// `π*(D_v) = μ·1 + σ·v`.
    pub fn optimal_multiplier(&self) -> Result<MultiplierVector> {
        self.require(FamilyVariant::DualLb)?;
        if self.epsilon == 0.0 {
            return Err(Error::Domain(
                "epsilon = 0 leaves the maximizer flat on [mu, mu + sigma]".into(),
            ));
        }
        let values = self
            .v
            .iter()
            .map(|&b| self.mu + self.sigma * f64::from(b))
            .collect();
        MultiplierVector::new(values, self.pi_max)
    }

    /// Excess risk `R(π*) − R(π)`.
    pub fn excess_risk(&self, pi: &[f64]) -> Result<f64> {
        let star = self.optimal_multiplier()?;
        Ok(self.population_risk(star.as_slice())? - self.population_risk(pi)?)
    }

    /// `(R(π*) − R(π), (ε/2)·‖π* − π‖₁)`; the first never falls below the
    /// second.
    pub fn sharpness_gap(&self, pi: &[f64]) -> Result<(f64, f64)> {
        let star = self.optimal_multiplier()?;
        let lhs = self.population_risk(star.as_slice())? - self.population_risk(pi)?;
        let l1: f64 = star.as_slice().iter().zip(pi).map(|(a, b)| (a - b).abs()).sum();
        Ok((lhs, self.epsilon / 2.0 * l1))
    }

    /// Maximizes each `J_k` over the grid `{0, h, 2h, …} ∩ [0, π_max]`.
    /// First grid point wins ties.
    pub fn grid_argmax(&self, step: f64) -> Result<Vec<f64>> {
        self.require(FamilyVariant::DualLb)?;
        if !(step > 0.0) {
            return Err(Error::Domain(format!("grid step must be positive, got {step}")));
        }
        let points = (self.pi_max / step).floor() as usize;
        Ok((0..self.s())
            .map(|k| {
                let mut best = (0.0, self.coordinate_risk(k, 0.0));
                for i in 1..=points {
                    let x = (i as f64 * step).min(self.pi_max);
                    let r = self.coordinate_risk(k, x);
                    if r > best.1 {
                        best = (x, r);
                    }
                }
                best.0
            })
            .collect())
    }

    /// Warm-start target `φ* = E[c]`, coordinate-wise
    /// `lo + (hi − lo)·P(c_k = hi)`.
    pub fn warmstart_target(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        (0..self.s()).map(|k| lo + (hi - lo) * self.p_high(k)).collect()
    }

    /// `Σ_k Var(c_k)`.
    pub fn total_variance(&self) -> f64 {
        let (lo, hi) = self.support();
        (0..self.s())
            .map(|k| {
                let p = self.p_high(k);
                (hi - lo).powi(2) * p * (1.0 - p)
            })
            .sum()
    }

    /// Warm-start excess risk `‖φ − φ*‖²`.
    pub fn warmstart_excess(&self, phi: &[f64]) -> Result<f64> {
        self.require(FamilyVariant::WarmstartLb)?;
        self.check_pi(phi)?;
        Ok(self
            .warmstart_target()
            .iter()
            .zip(phi)
            .map(|(a, b)| (a - b).powi(2))
            .sum())
    }
}

/// Binary codewords with a guaranteed minimum pairwise Hamming distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingSet {
    pub s: usize,
    /// Codewords as bitmasks; bit `k` is coordinate `k`.
    pub codewords: Vec<u32>,
    /// Smallest pairwise distance actually achieved.
    pub min_hamming: usize,
    /// Required distance `⌈s/8⌉`.
    pub target: usize,
}

impl PackingSet {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Codeword `i` as a 0/1 vector.
    pub fn vector(&self, i: usize) -> Vec<u8> {
        mask_to_bits(self.codewords[i], self.s)
    }
}

pub fn mask_to_bits(mask: u32, s: usize) -> Vec<u8> {
    (0..s).map(|k| ((mask >> k) & 1) as u8).collect()
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Calls `f` on every mask at Hamming distance exactly `r` from `center`.
fn for_each_at_distance(center: u32, s: usize, r: usize, f: &mut impl FnMut(u32) -> bool) -> bool {
    fn rec(mask: u32, start: usize, left: usize, s: usize, f: &mut impl FnMut(u32) -> bool) -> bool {
        if left == 0 {
            return f(mask);
        }
        for k in start..s {
            if rec(mask ^ (1 << k), k + 1, left - 1, s, f) {
                return true;
            }
        }
        false
    }
    rec(center, 0, r, s, f)
}

pub const MIN_PACKING_DIM: usize = 8;
pub const MAX_PACKING_DIM: usize = 24;

/// Greedy lexicographic code: scan `{0,1}^s` in increasing mask order from
/// the zero vector and keep a vector iff it is at distance `≥ ⌈s/8⌉` from
/// everything kept so far.
pub fn vg_packing(s: usize) -> Result<PackingSet> {
    if s < MIN_PACKING_DIM {
        return Err(Error::Unsupported(format!(
            "packing construction needs s ≥ {MIN_PACKING_DIM}, got {s}"
        )));
    }
    if s > MAX_PACKING_DIM {
        return Err(Error::Unsupported(format!(
            "greedy packing enumerates 2^s points; s = {s} exceeds {MAX_PACKING_DIM}"
        )));
    }
    let target = s.div_ceil(8);
    let size = 1usize << s;
    // blocked[x] is set once x lies within distance target − 1 of a kept word
    let mut blocked = vec![false; size];
    let mut codewords = Vec::new();
    for x in 0..size as u32 {
        if blocked[x as usize] {
            continue;
        }
        codewords.push(x);
        for r in 0..target {
            for_each_at_distance(x, s, r, &mut |y| {
                blocked[y as usize] = true;
                false
            });
        }
    }
    let min_hamming = min_distance(&codewords, s);
    let required = 1usize << target;
    if codewords.len() < required {
        return Err(Error::Domain(format!(
            "greedy packing produced {} codewords, fewer than 2^{target}",
            codewords.len()
        )));
    }
    Ok(PackingSet {
        s,
        codewords,
        min_hamming,
        target,
    })
}

/// Smallest distance between two codewords, by searching spheres of growing
/// radius around each codeword.
fn min_distance(codewords: &[u32], s: usize) -> usize {
    if codewords.len() < 2 {
        return s + 1;
    }
    let mut member = vec![false; 1usize << s];
    for &c in codewords {
        member[c as usize] = true;
    }
    for r in 1..=s {
        let hit = codewords
            .iter()
            .any(|&c| for_each_at_distance(c, s, r, &mut |y| member[y as usize]));
        if hit {
            return r;
        }
    }
    s + 1
}

/// KL and Fano quantities for a pair of family members.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlFanoDiagnostics {
    pub hamming: usize,
    /// `KL(Ber((1+ε)/2) ‖ Ber((1−ε)/2))`.
    pub kl_per_coordinate: f64,
    /// `d_H · kl_per_coordinate`, single sample.
    pub kl_single: f64,
    /// `N · kl_single`.
    pub kl_product: f64,
    /// `χ²` bound per coordinate, `4ε²/(1 − ε²)`.
    pub chi2_per_coordinate: f64,
    /// `4Nsε²`.
    pub kl_bound: f64,
    pub kl_within_bound: bool,
    /// `√(((s/16 − 1)·ln 2)/(4Ns))`; `None` when `s ≤ 16`.
    pub fano_epsilon: Option<f64>,
    /// Warm-start analogue `√((s/16)·ln 2/(4Ns))`.
    pub warmstart_fano_epsilon: f64,
    /// `1 − (4Nsε² + ln 2)/((s/8)·ln 2)`, the testing-error factor.
    pub fano_test_term: f64,
    /// Separation of optimal multipliers in units of `σ`: `s/8`.
    pub separation_per_sigma: f64,
    /// Packing radius in units of `σ`: `s/16`.
    pub radius_per_sigma: f64,
}

pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

pub fn kl_and_fano(s: usize, n: usize, epsilon: f64, v: &[u8], v_prime: &[u8]) -> Result<KlFanoDiagnostics> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    if v.len() != s || v_prime.len() != s {
        return Err(Error::Dimension(format!(
            "index vectors must have length s = {s}, got {} and {}",
            v.len(),
            v_prime.len()
        )));
    }
    let p = (1.0 + epsilon) / 2.0;
    let q = (1.0 - epsilon) / 2.0;
    let d = hamming(v, v_prime);
    let kl_per_coordinate = bernoulli_kl(p, q);
    let kl_single = d as f64 * kl_per_coordinate;
    let kl_product = n as f64 * kl_single;
    let sf = s as f64;
    let nf = n as f64;
    let kl_bound = 4.0 * nf * sf * epsilon * epsilon;
    let ln2 = std::f64::consts::LN_2;
    let fano_epsilon = (s > 16).then(|| (((sf / 16.0 - 1.0) * ln2) / (4.0 * nf * sf)).sqrt());
    Ok(KlFanoDiagnostics {
        hamming: d,
        kl_per_coordinate,
        kl_single,
        kl_product,
        chi2_per_coordinate: 4.0 * epsilon * epsilon / (1.0 - epsilon * epsilon),
        kl_bound,
        kl_within_bound: kl_product <= kl_bound,
        fano_epsilon,
        warmstart_fano_epsilon: ((sf / 16.0) * ln2 / (4.0 * nf * sf)).sqrt(),
        fano_test_term: 1.0 - (kl_bound + ln2) / (sf / 8.0 * ln2),
        separation_per_sigma: sf / 8.0,
        radius_per_sigma: sf / 16.0,
    })
}
