//! Lagrangian decomposition of a toy capacitated vehicle routing problem.
//!
//! Node 0 is the depot and nodes `1..n` are customers. Dualizing the
//! "visit every customer exactly once" rows with free multipliers `π_i`
//! leaves one independent routing subproblem per vehicle:
//!
//! ```text
//! f(π) = Σ_k min_route [cost(route) + Σ_{i ∈ route} π_i] − Σ_i π_i
//! ```
//!
//! The fleet is identical, so all `K` subproblems coincide. Routes leave the
//! depot, visit a nonempty capacity-feasible customer set, and return; the
//! visiting order is solved exactly by a Held–Karp subset recursion.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_NODES: usize = 9;
pub const MAX_BRUTEFORCE_VEHICLES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrpInstance {
    /// `n × n` travel costs, zero diagonal.
    pub cost: Vec<Vec<f64>>,
    /// Demand of customers `1..n` (length `n − 1`).
    pub demand: Vec<f64>,
    pub capacity: f64,
    pub vehicles: usize,
}

impl VrpInstance {
    pub fn new(cost: Vec<Vec<f64>>, demand: Vec<f64>, capacity: f64, vehicles: usize) -> Result<Self> {
        let inst = Self {
            cost,
            demand,
            capacity,
            vehicles,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.cost.len();
        if !(2..=MAX_NODES).contains(&n) {
            return Err(Error::Unsupported(format!(
                "toy VRP needs 2 ≤ n_nodes ≤ {MAX_NODES}, got {n}"
            )));
        }
        for (i, row) in self.cost.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!("cost row {i} has {} entries", row.len())));
            }
            if row[i] != 0.0 {
                return Err(Error::Domain(format!("cost[{i}][{i}] must be 0")));
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::Domain(format!("cost row {i} is not finite")));
            }
        }
        if self.demand.len() != n - 1 {
            return Err(Error::Dimension(format!(
                "{} demands for {} customers",
                self.demand.len(),
                n - 1
            )));
        }
        if self.demand.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Domain("demands must be positive".into()));
        }
        if !(self.capacity > 0.0) {
            return Err(Error::Domain("capacity must be positive".into()));
        }
        if self.vehicles == 0 {
            return Err(Error::Domain("fleet must have at least one vehicle".into()));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.cost.len()
    }

    pub fn n_customers(&self) -> usize {
        self.cost.len() - 1
    }

    /// Random instance on the unit square with Euclidean costs and integer
    /// demands in `1..=3`; capacity is large enough for `vehicles` routes to
    /// cover everyone.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, customers: usize, vehicles: usize) -> Result<Self> {
        let pts: Vec<(f64, f64)> = (0..=customers).map(|_| (rng.gen(), rng.gen())).collect();
        let cost = pts
            .iter()
            .map(|a| pts.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect())
            .collect();
        let demand: Vec<f64> = (0..customers).map(|_| rng.gen_range(1..=3) as f64).collect();
        let total: f64 = demand.iter().sum();
        let capacity = (total / vehicles as f64).ceil() + 2.0;
        Self::new(cost, demand, capacity, vehicles)
    }

    fn subset_demand(&self, mask: usize) -> f64 {
        (0..self.n_customers())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| self.demand[i])
            .sum()
    }
}

/// A depot-to-depot route as the ordered list of visited customers (1-based
/// node ids).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Route {
    pub customers: Vec<usize>,
    pub value: f64,
}

fn check_pi(inst: &VrpInstance, pi: &[f64]) -> Result<()> {
    if pi.len() != inst.n_customers() {
        return Err(Error::Dimension(format!(
            "{} multipliers for {} customers",
            pi.len(),
            inst.n_customers()
        )));
    }
    Ok(())
}

/// Cheapest nonempty capacity-feasible route under node prices `π`.
pub fn vrp_vehicle_subproblem(inst: &VrpInstance, pi: &[f64]) -> Result<Route> {
    check_pi(inst, pi)?;
    let n = inst.n_customers();
    let full = 1usize << n;
    // dp[mask][j]: cheapest depot → … → j path visiting exactly `mask`,
    // including prices, with customer j (0-based) last
    let mut dp = vec![vec![f64::INFINITY; n]; full];
    let mut parent = vec![vec![usize::MAX; n]; full];
    for j in 0..n {
        dp[1 << j][j] = inst.cost[0][j + 1] + pi[j];
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for mask in 1..full {
        if inst.subset_demand(mask) > inst.capacity {
            continue;
        }
        for j in 0..n {
            let here = dp[mask][j];
            if !here.is_finite() {
                continue;
            }
            let closed = here + inst.cost[j + 1][0];
            if best.map_or(true, |(b, _, _)| closed < b) {
                best = Some((closed, mask, j));
            }
            for k in 0..n {
                if mask >> k & 1 == 1 {
                    continue;
                }
                let next = mask | 1 << k;
                let cand = here + inst.cost[j + 1][k + 1] + pi[k];
                if cand < dp[next][k] {
                    dp[next][k] = cand;
                    parent[next][k] = j;
                }
            }
        }
    }
    let (value, mut mask, mut j) =
        best.ok_or_else(|| Error::Infeasible("no customer fits in a vehicle".into()))?;
    let mut order = Vec::new();
    loop {
        order.push(j + 1);
        let prev = parent[mask][j];
        mask &= !(1 << j);
        if mask == 0 {
            break;
        }
        j = prev;
    }
    order.reverse();
    Ok(Route {
        customers: order,
        value,
    })
}

/// `f(π) = K·(subproblem value) − Σπ_i`.
pub fn vrp_dual_bound(inst: &VrpInstance, pi: &[f64]) -> Result<f64> {
    let route = vrp_vehicle_subproblem(inst, pi)?;
    Ok(inst.vehicles as f64 * route.value - pi.iter().sum::<f64>())
}

/// Cheapest closed tour from the depot through every customer in `mask`, by
/// trying every visiting order.
pub fn tour_cost_by_permutation(inst: &VrpInstance, mask: usize) -> f64 {
    fn rec(inst: &VrpInstance, last: usize, left: &mut Vec<usize>, acc: f64, best: &mut f64) {
        if left.is_empty() {
            *best = best.min(acc + inst.cost[last][0]);
            return;
        }
        for idx in 0..left.len() {
            let node = left.swap_remove(idx);
            rec(inst, node, left, acc + inst.cost[last][node], best);
            left.push(node);
            let end = left.len() - 1;
            left.swap(idx, end);
        }
    }
    let mut left: Vec<usize> = (0..inst.n_customers()).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
    let mut best = f64::INFINITY;
    rec(inst, 0, &mut left, 0.0, &mut best);
    best
}

/// Exact optimum by enumerating customer-to-vehicle assignments, each vehicle
/// nonempty and within capacity, with per-vehicle tours by permutation.
pub fn vrp_opt_bruteforce(inst: &VrpInstance) -> Result<f64> {
    let n = inst.n_customers();
    let k = inst.vehicles;
    if k > MAX_BRUTEFORCE_VEHICLES {
        return Err(Error::Unsupported(format!(
            "brute force supports at most {MAX_BRUTEFORCE_VEHICLES} vehicles"
        )));
    }
    if k > n {
        return Err(Error::Infeasible(format!(
            "{k} vehicles cannot each serve a distinct customer out of {n}"
        )));
    }
    let mut tour = vec![f64::NAN; 1 << n];
    let mut tour_cost = |mask: usize| {
        if tour[mask].is_nan() {
            tour[mask] = tour_cost_by_permutation(inst, mask);
        }
        tour[mask]
    };
    let mut best = f64::INFINITY;
    let mut assign = vec![0usize; n];
    let total = k.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        for a in assign.iter_mut() {
            *a = c % k;
            c /= k;
        }
        let masks: Vec<usize> = (0..k)
            .map(|v| (0..n).filter(|&i| assign[i] == v).fold(0, |m, i| m | 1 << i))
            .collect();
        if masks.iter().any(|&m| m == 0 || inst.subset_demand(m) > inst.capacity) {
            continue;
        }
        let cost: f64 = masks.iter().map(|&m| tour_cost(m)).sum();
        best = best.min(cost);
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Infeasible("no capacity-feasible assignment of customers to vehicles".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VrpDualState {
    pub pi: Vec<f64>,
    pub best_bound: f64,
    pub best_pi: Vec<f64>,
    pub iterations: usize,
    /// Best bound after each evaluation, starting with `f(0)`.
    pub best_trace: Vec<f64>,
}

/// Subgradient ascent on `f(π)` over free multipliers. With identical vehicles
/// the subgradient is `g_i = K·[i on route] − 1`. Performs `T` updates and
/// `T + 1` evaluations.
pub fn vrp_dual_ascent(inst: &VrpInstance, iterations: usize, step: VrpStep) -> Result<VrpDualState> {
    let n = inst.n_customers();
    let k = inst.vehicles as f64;
    let mut pi = vec![0.0; n];
    let mut best_bound = f64::NEG_INFINITY;
    let mut best_pi = pi.clone();
    let mut best_trace = Vec::with_capacity(iterations + 1);
    for t in 0..=iterations {
        let route = vrp_vehicle_subproblem(inst, &pi)?;
        let bound = k * route.value - pi.iter().sum::<f64>();
        if bound > best_bound {
            best_bound = bound;
            best_pi = pi.clone();
        }
        best_trace.push(best_bound);
        if t == iterations {
            break;
        }
        let eta = step.step(t + 1);
        let mut g = vec![-1.0; n];
        for &c in &route.customers {
            g[c - 1] += k;
        }
        for (p, gi) in pi.iter_mut().zip(&g) {
            *p += eta * gi;
        }
    }
    Ok(VrpDualState {
        pi,
        best_bound,
        best_pi,
        iterations,
        best_trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum VrpStep {
    Constant(f64),
    /// `h/√t`.
    InvSqrt(f64),
}

impl VrpStep {
    fn step(&self, t: usize) -> f64 {
        match *self {
            VrpStep::Constant(h) => h,
            VrpStep::InvSqrt(h) => h / (t as f64).sqrt(),
        }
    }

    /// `InvSqrt` scaled by the mean off-diagonal travel cost.
    pub fn default_for(inst: &VrpInstance) -> Self {
        let n = inst.n_nodes();
        let sum: f64 = inst.cost.iter().flatten().sum();
        VrpStep::InvSqrt(sum / (n * (n - 1)) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VrpDemoReport {
    pub opt: f64,
    pub bound_at_zero: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub state: VrpDualState,
}

pub fn vrp_demo(inst: &VrpInstance, iterations: usize, step: VrpStep) -> Result<VrpDemoReport> {
    let opt = vrp_opt_bruteforce(inst)?;
    let bound_at_zero = vrp_dual_bound(inst, &vec![0.0; inst.n_customers()])?;
    let state = vrp_dual_ascent(inst, iterations, step)?;
    let gap = opt - state.best_bound;
    Ok(VrpDemoReport {
        opt,
        bound_at_zero,
        best_bound: state.best_bound,
        gap,
        relative_gap: if opt != 0.0 { gap / opt.abs() } else { gap },
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn line(n: usize, demand: f64, capacity: f64, vehicles: usize) -> VrpInstance {
        let cost = (0..n)
            .map(|i| (0..n).map(|j| (i as f64 - j as f64).abs()).collect())
            .collect();
        VrpInstance::new(cost, vec![demand; n - 1], capacity, vehicles).unwrap()
    }

    /// Every nonempty feasible subset in every order.
    fn subproblem_by_enumeration(inst: &VrpInstance, pi: &[f64]) -> f64 {
        let n = inst.n_customers();
        let mut best = f64::INFINITY;
        for mask in 1..(1usize << n) {
            if inst.subset_demand(mask) > inst.capacity {
                continue;
            }
            let price: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pi[i]).sum();
            best = best.min(tour_cost_by_permutation(inst, mask) + price);
        }
        best
    }

    #[test]
    fn single_customer() {
        let inst = VrpInstance::new(vec![vec![0.0, 2.0], vec![3.0, 0.0]], vec![1.0], 1.0, 1).unwrap();
        for p in [-4.0, 0.0, 0.7, 10.0] {
            let r = vrp_vehicle_subproblem(&inst, &[p]).unwrap();
            assert_eq!(r.customers, vec![1]);
            assert_eq!(r.value, 5.0 + p);
            assert_eq!(vrp_dual_bound(&inst, &[p]).unwrap(), 5.0);
        }
        assert_eq!(vrp_opt_bruteforce(&inst).unwrap(), 5.0);
        let st = vrp_dual_ascent(&inst, 1, VrpStep::Constant(1.0)).unwrap();
        assert_eq!(st.best_bound, 5.0);
    }

    #[test]
    fn two_customers_match_enumeration() {
        let inst = line(3, 1.0, 5.0, 1);
        for pi in [[0.0, 0.0], [1.0, -1.0], [-3.0, 0.5]] {
            let r = vrp_vehicle_subproblem(&inst, &pi).unwrap();
            assert!((r.value - subproblem_by_enumeration(&inst, &pi)).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_prices_pick_cheapest_singleton() {
        let inst = line(4, 1.0, 10.0, 1);
        let r = vrp_vehicle_subproblem(&inst, &[1e6; 3]).unwrap();
        assert_eq!(r.customers, vec![1]);
        assert_eq!(r.value, 2.0 + 1e6);
    }

    #[test]
    fn no_customer_fits() {
        let inst = line(3, 5.0, 1.0, 1);
        assert!(matches!(vrp_vehicle_subproblem(&inst, &[0.0, 0.0]), Err(Error::Infeasible(_))));
    }

    #[test]
    fn opt_examples() {
        let inst = line(3, 1.0, 1.0, 2);
        assert_eq!(vrp_opt_bruteforce(&inst).unwrap(), 2.0 + 4.0);
        let too_many = line(3, 1.0, 5.0, 3);
        assert!(matches!(vrp_opt_bruteforce(&too_many), Err(Error::Infeasible(_))));
    }

    #[test]
    fn zero_iterations_gives_bound_at_zero() {
        let inst = line(4, 1.0, 2.0, 2);
        let st = vrp_dual_ascent(&inst, 0, VrpStep::Constant(0.5)).unwrap();
        assert_eq!(st.best_bound, vrp_dual_bound(&inst, &[0.0; 3]).unwrap());
        assert_eq!(st.best_trace.len(), 1);
    }

    #[test]
    fn grid_instance_weak_duality_and_monotone_trace() {
        let inst = line(4, 1.0, 2.0, 2);
        let opt = vrp_opt_bruteforce(&inst).unwrap();
        let report = vrp_demo(&inst, 200, VrpStep::default_for(&inst)).unwrap();
        assert_eq!(report.opt, opt);
        assert!(report.best_bound <= opt + 1e-9);
        assert!(report.bound_at_zero <= report.best_bound);
        assert!(report.state.best_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn dp_matches_enumeration_on_random_instances() {
        let mut rng = seeded(99);
        for _ in 0..30 {
            let customers = rng.gen_range(1..=5);
            let inst = VrpInstance::random(&mut rng, customers, 1).unwrap();
            let pi: Vec<f64> = (0..customers).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dp = vrp_vehicle_subproblem(&inst, &pi).unwrap();
            assert!((dp.value - subproblem_by_enumeration(&inst, &pi)).abs() < 1e-9);
            // the reported route realizes the reported value
            let mut at = 0;
            let mut cost = 0.0;
            for &c in &dp.customers {
                cost += inst.cost[at][c] + pi[c - 1];
                at = c;
            }
            cost += inst.cost[at][0];
            assert!((cost - dp.value).abs() < 1e-9);
        }
    }

    #[test]
    fn instance_validation() {
        assert!(VrpInstance::new(vec![vec![1.0, 1.0], vec![1.0, 0.0]], vec![1.0], 1.0, 1).is_err());
        assert!(VrpInstance::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0], 1.0, 1).is_err());
        assert!(VrpInstance::new(vec![vec![0.0; 10]; 10], vec![1.0; 9], 1.0, 1).is_err());
    }
}
