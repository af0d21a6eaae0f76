//! `lagrelax` command-line front end.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lagrelax::bounds::BoundReport;
use lagrelax::dual::{solve_dual, DualSolveConfig};
use lagrelax::experiments::{
    fit_loglog_slope, read_csv_file, run_rate_experiment, write_csv_file, ExperimentConfig, VChoice,
};
use lagrelax::hard_family::{kl_and_fano, vg_packing, FamilyVariant, HardFamilySpec};
use lagrelax::learners::{erm_learn, sga_learn, warmstart_learn, LearnerKind, SgaConfig};
use lagrelax::rng::seeded;
use lagrelax::subproblem::solve_opt_bruteforce;
use lagrelax::vrp::{vrp_demo, VrpInstance, VrpStep};
use lagrelax::{MilpInstance, ProblemBounds};

#[derive(Parser)]
#[command(name = "lagrelax", version, about = "Data-driven Lagrangian relaxation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize the Lagrangian dual of one instance and check weak duality.
    DualSolve(DualSolveArgs),
    /// Learn multipliers from a sample of a hard family.
    Learn(LearnArgs),
    /// Check the lower-bound construction: packing, KL, Fano, maximizer.
    HardfamVerify(HardfamArgs),
    /// Print the theoretical bounds as JSON.
    Bounds(BoundsArgs),
    /// Toy capacitated VRP: dual ascent against brute-force OPT.
    VrpDemo(VrpArgs),
    /// Run a rate experiment and write the trial CSV.
    Rates(RatesArgs),
    /// Fit the log-log slope of mean excess risk against N.
    Slope(SlopeArgs),
}

#[derive(Args)]
struct DualSolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long = "pi-max")]
    pi_max: f64,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long = "B", default_value_t = 1.0)]
    violation: f64,
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long, alias = "family", default_value = "dual-lb")]
    variant: FamilyVariant,
    #[arg(long, default_value_t = 8)]
    s: usize,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    /// `alternating`, `ones`, `zeros`, or a comma-separated 0/1 list.
    #[arg(long, default_value = "alternating")]
    v: String,
    #[arg(long = "pi-max", default_value_t = 3.0)]
    pi_max: f64,
    #[arg(long = "B", default_value_t = 1.0)]
    violation: f64,
}

impl FamilyArgs {
    fn spec(&self) -> Result<HardFamilySpec> {
        let v = parse_v(&self.v)?.for_dim(self.s)?;
        Ok(HardFamilySpec::new(
            self.variant,
            self.mu,
            self.sigma,
            self.eps,
            v,
            self.pi_max,
        )?)
    }
}

fn parse_v(text: &str) -> Result<VChoice> {
    if !text.is_empty() && text.chars().all(|c| matches!(c, '0' | '1' | ',')) {
        let bits = text.chars().filter(|&c| c != ',').map(|c| (c == '1') as u8).collect();
        return Ok(VChoice::Explicit(bits));
    }
    serde_json::from_value(json!(text)).with_context(|| format!("unknown v pattern `{text}`"))
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    algo: LearnerKind,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long = "N")]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// ERM iteration budget.
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args)]
struct HardfamArgs {
    #[arg(long, default_value_t = 16)]
    s: usize,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    #[arg(long = "N", default_value_t = 100)]
    n: usize,
    #[arg(long = "pi-max")]
    pi_max: Option<f64>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    s: usize,
    #[arg(long = "N")]
    n: usize,
    #[arg(long = "B", default_value_t = 1.0)]
    violation: f64,
    #[arg(long = "pi-max")]
    pi_max: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

#[derive(Args)]
struct VrpArgs {
    /// Node count including the depot.
    #[arg(long)]
    nodes: usize,
    #[arg(long, default_value_t = 2)]
    vehicles: usize,
    /// Overrides the generated capacity.
    #[arg(long)]
    capacity: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    iters: usize,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SlopeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    learner: LearnerKind,
    #[arg(long)]
    s: Option<usize>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::DualSolve(a) => dual_solve(a),
        Command::Learn(a) => learn(a),
        Command::HardfamVerify(a) => hardfam_verify(a),
        Command::Bounds(a) => {
            let bounds = ProblemBounds::new(a.violation, a.pi_max)?;
            let report = BoundReport::new(a.s, a.n, &bounds, a.delta)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::VrpDemo(a) => vrp(a),
        Command::Rates(a) => rates(a),
        Command::Slope(a) => {
            let records = read_csv_file(&a.input)
                .with_context(|| format!("reading {}", a.input.display()))?;
            let fit = fit_loglog_slope(&records, a.learner, a.s)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(())
        }
    }
}

fn dual_solve(a: DualSolveArgs) -> Result<()> {
    let problem = MilpInstance::load(&a.instance)
        .with_context(|| format!("loading {}", a.instance.display()))?;
    let bounds = ProblemBounds::new(a.violation, a.pi_max)?;
    let cfg = DualSolveConfig {
        iterations: a.iters,
        ..DualSolveConfig::default()
    };
    let sol = solve_dual(&problem, &bounds, &cfg)?;
    let opt = solve_opt_bruteforce(&problem)?;
    let holds = sol.value <= opt.value + 1e-9;
    println!("value       {:.6}", sol.value);
    println!("pi_hat      {:?}", sol.pi_hat.as_slice());
    println!("best_iter   {}", sol.best_iteration);
    println!("opt         {:.6}", opt.value);
    println!("weak dual   {}", if holds { "ok" } else { "VIOLATED" });
    if !holds {
        bail!("dual value {} exceeds OPT {}", sol.value, opt.value);
    }
    Ok(())
}

fn learn(a: LearnArgs) -> Result<()> {
    let spec = a.family.spec()?;
    let bounds = ProblemBounds::new(a.family.violation, a.family.pi_max)?;
    let mut rng = seeded(a.seed);
    let sample = spec.sample_instances(&mut rng, a.n);
    let s = spec.s();
    let out = match a.algo {
        LearnerKind::Sga => sga_learn(&sample, &SgaConfig::new(a.n, bounds, a.seed))?,
        LearnerKind::Erm => erm_learn(&sample, &bounds, a.iters, a.seed)?,
        LearnerKind::Warmstart => warmstart_learn(&sample, &bounds, &DualSolveConfig::default(), a.seed)?,
    };
    let pi = out.pi.as_slice();
    let excess = match spec.variant {
        FamilyVariant::DualLb if a.algo != LearnerKind::Warmstart && spec.epsilon > 0.0 => {
            Some(spec.excess_risk(pi)?)
        }
        FamilyVariant::WarmstartLb if a.algo == LearnerKind::Warmstart => Some(spec.warmstart_excess(pi)?),
        _ => None,
    };
    let bound = {
        use lagrelax::bounds::{erm_excess_bound, sga_bound, warmstart_bound};
        let (b, pm) = (bounds.violation(), bounds.pi_max());
        match a.algo {
            LearnerKind::Sga => sga_bound(s, b, pm, a.n),
            LearnerKind::Erm => erm_excess_bound(s, b, pm, a.n),
            LearnerKind::Warmstart => warmstart_bound(s, pm, a.n),
        }
    };
    let doc = json!({
        "learned": out,
        "family": spec.variant,
        "s": s,
        "excess_risk": excess,
        "theory_bound": bound,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn hardfam_verify(a: HardfamArgs) -> Result<()> {
    let pi_max = a.pi_max.unwrap_or(a.mu + a.sigma + 1.0);
    let s = a.s;
    let mut ok = true;

    let packing = vg_packing(s)?;
    let separation = a.sigma * packing.min_hamming as f64;
    let wanted = a.sigma * s as f64 / 8.0;
    let sep_ok = separation >= wanted - 1e-12;
    ok &= sep_ok;
    println!("packing       M = {}, min d_H = {}, target = {}", packing.len(), packing.min_hamming, packing.target);
    println!(
        "separation    min l1 = {separation:.4} vs sigma*s/8 = {wanted:.4}  [{}]",
        verdict(sep_ok)
    );

    let zeros = vec![0u8; s];
    let ones = vec![1u8; s];
    let diag = kl_and_fano(s, a.n, a.eps, &zeros, &ones)?;
    ok &= diag.kl_within_bound;
    println!(
        "KL (d_H = s)  exact = {:.6} vs 4Ns eps^2 = {:.6}  [{}]",
        diag.kl_product,
        diag.kl_bound,
        verdict(diag.kl_within_bound)
    );
    match diag.fano_epsilon {
        Some(e) => println!("fano eps*     {e:.6e}"),
        None => println!("fano eps*     not applicable (needs s > 16)"),
    }
    println!("fano eps* (warm-start radius)  {:.6e}", diag.warmstart_fano_epsilon);
    println!(
        "radius        sigma*s/16 = {:.4}, separation sigma*s/8 = {:.4}",
        a.sigma * diag.radius_per_sigma,
        a.sigma * diag.separation_per_sigma
    );

    let v: Vec<u8> = (0..s).map(|k| (k % 2) as u8).collect();
    let spec = HardFamilySpec::dual_lb(a.mu, a.sigma, a.eps, v, pi_max)?;
    let closed = spec.optimal_multiplier()?;
    let grid = spec.grid_argmax(1e-3)?;
    let dev = closed
        .as_slice()
        .iter()
        .zip(&grid)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let grid_ok = dev <= 1e-3 + 1e-12;
    ok &= grid_ok;
    println!("maximizer     max |closed form - grid| = {dev:.2e}  [{}]", verdict(grid_ok));

    if !ok {
        bail!("hard-family verification failed");
    }
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn vrp(a: VrpArgs) -> Result<()> {
    if a.nodes < 2 {
        bail!("need at least one customer besides the depot");
    }
    let mut rng = seeded(a.seed);
    let mut inst = VrpInstance::random(&mut rng, a.nodes - 1, a.vehicles)?;
    if let Some(q) = a.capacity {
        inst.capacity = q;
        inst.validate()?;
    }
    let report = vrp_demo(&inst, a.iters, VrpStep::default_for(&inst))?;
    println!("customers     {}  vehicles {}  capacity {}", inst.n_customers(), inst.vehicles, inst.capacity);
    println!("demand        {:?}", inst.demand);
    println!("OPT           {:.6}", report.opt);
    println!("f(0)          {:.6}", report.bound_at_zero);
    println!("best LR bound {:.6}", report.best_bound);
    println!("gap           {:.6} ({:.2}%)", report.gap, 100.0 * report.relative_gap);
    Ok(())
}

fn rates(a: RatesArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.config)
        .with_context(|| format!("loading {}", a.config.display()))?;
    let records = run_rate_experiment(&cfg)?;
    write_csv_file(&records, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("{} records written to {}", records.len(), a.out.display());
    for &learner in &cfg.learners {
        for &s in &cfg.s_values {
            match fit_loglog_slope(&records, learner, Some(s)) {
                Ok(fit) => println!("{learner} s={s}: slope {:.4}, r2 {:.4}", fit.slope, fit.r2),
                Err(e) => println!("{learner} s={s}: slope unavailable ({e})"),
            }
        }
    }
    let flagged = records.iter().filter(|r| r.erm_solve_flagged()).count();
    if flagged > 0 {
        println!("{flagged} erm trials have an inner-solve gap above 10% of their excess risk");
    }
    Ok(())
}
