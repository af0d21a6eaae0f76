use proptest::prelude::*;

use lagrelax::dual::dual_eval;
use lagrelax::hard_family::{kl_and_fano, vg_packing, HardFamilySpec};
use lagrelax::instance::validate_bounds;
use lagrelax::learners::{sga_learn, warmstart_learn, SgaConfig};
use lagrelax::dual::{min_norm_pi_star, DualSolveConfig};
use lagrelax::rng::seeded;
use lagrelax::vrp::{vrp_dual_bound, vrp_opt_bruteforce, VrpInstance};
use lagrelax::{MilpInstance, MultiplierVector, ProblemBounds};

/// Lagrangian value by direct enumeration of `{0,1}^p` with kept rows.
fn lagrangian_oracle(pi: &[f64], p: &MilpInstance) -> f64 {
    let n = p.n_vars();
    let mut best = f64::INFINITY;
    for mask in 0u64..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| (mask >> j & 1) as f64).collect();
        let ok = p
            .kept_a()
            .iter()
            .zip(p.kept_b())
            .all(|(row, d)| row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() >= d - 1e-9);
        if !ok {
            continue;
        }
        let mut v: f64 = p.c().iter().zip(&x).map(|(a, b)| a * b).sum();
        for (k, row) in p.a().iter().enumerate() {
            let ax: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            v += pi[k] * (p.b()[k] - ax);
        }
        best = best.min(v);
    }
    best
}

fn opt_oracle(p: &MilpInstance) -> Option<f64> {
    let n = p.n_vars();
    let mut best: Option<f64> = None;
    for mask in 0u64..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| (mask >> j & 1) as f64).collect();
        let rows_ok = |rows: &Vec<Vec<f64>>, rhs: &[f64]| {
            rows.iter()
                .zip(rhs)
                .all(|(row, r)| row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() >= r - 1e-9)
        };
        if rows_ok(p.a(), p.b()) && rows_ok(p.kept_a(), p.kept_b()) {
            let v: f64 = p.c().iter().zip(&x).map(|(a, b)| a * b).sum();
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

fn restricted_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (1usize..=10, 0.5f64..4.0).prop_flat_map(|(s, pi_max)| {
        (
            prop::collection::vec(0.0f64..3.0, s),
            prop::collection::vec(0.0..=pi_max, s),
            prop::collection::vec(0.0..=pi_max, s),
            Just(pi_max),
        )
    })
}

/// Small general instances: entries of `A`, `C` in {−1, 0, 1}, with a kept
/// row that the all-ones point satisfies.
fn general_case() -> impl Strategy<Value = (MilpInstance, Vec<f64>)> {
    (1usize..=3, 1usize..=6).prop_flat_map(|(s, p)| {
        (
            prop::collection::vec(-2.0f64..3.0, p),
            prop::collection::vec(prop::collection::vec(-1i8..=1, p), s),
            prop::collection::vec(-1.0f64..1.0, s),
            prop::collection::vec(0i8..=1, p),
            prop::collection::vec(0.0f64..2.0, s),
        )
            .prop_map(move |(c, a, b, kept, pi)| {
                let a = a.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
                let kept_row: Vec<f64> = kept.into_iter().map(f64::from).collect();
                let rhs = kept_row.iter().sum::<f64>().min(1.0);
                let inst = MilpInstance::new(c, a, b, vec![kept_row], vec![rhs], 0, p).unwrap();
                (inst, pi)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn weak_duality_restricted((c, pi, _, pi_max) in restricted_case()) {
        let p = MilpInstance::restricted(&c).unwrap();
        let pi = MultiplierVector::new(pi, pi_max).unwrap();
        let u = dual_eval(&pi, &p).unwrap().value;
        let opt: f64 = c.iter().sum();
        prop_assert!(u <= opt + 1e-12, "u = {u} > OPT = {opt}");
    }

    #[test]
    fn dual_value_matches_enumeration((inst, pi) in general_case()) {
        let pv = MultiplierVector::project(&pi, 2.0);
        let eval = dual_eval(&pv, &inst).unwrap();
        prop_assert!((eval.value - lagrangian_oracle(pv.as_slice(), &inst)).abs() < 1e-9);
        if let Some(opt) = opt_oracle(&inst) {
            prop_assert!(eval.value <= opt + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn subgradient_inequality_and_norm((c, pi, pi2, pi_max) in restricted_case()) {
        let p = MilpInstance::restricted(&c).unwrap();
        let s = c.len();
        let a = MultiplierVector::new(pi, pi_max).unwrap();
        let b = MultiplierVector::new(pi2, pi_max).unwrap();
        let ea = dual_eval(&a, &p).unwrap();
        let ub = dual_eval(&b, &p).unwrap().value;
        let lin: f64 = ea.subgradient.iter().zip(b.as_slice().iter().zip(a.as_slice())).map(|(g, (y, x))| g * (y - x)).sum();
        prop_assert!(ub <= ea.value + lin + 1e-12);
        let norm = ea.subgradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        prop_assert!(norm <= 2.0 * (s as f64).sqrt() + 1e-12);
    }

    #[test]
    fn lipschitz_in_pi((c, pi, pi2, pi_max) in restricted_case()) {
        let p = MilpInstance::restricted(&c).unwrap();
        let bounds = ProblemBounds::new(1.0, pi_max).unwrap();
        let a = MultiplierVector::new(pi, pi_max).unwrap();
        let b = MultiplierVector::new(pi2, pi_max).unwrap();
        let dist = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let gap = (dual_eval(&a, &p).unwrap().value - dual_eval(&b, &p).unwrap().value).abs();
        prop_assert!(gap <= bounds.lipschitz(c.len()) * dist + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restricted_instances_meet_unit_violation_bound(c in prop::collection::vec(-3.0f64..3.0, 1..=10)) {
        let p = MilpInstance::restricted(&c).unwrap();
        let r = validate_bounds(&p, &ProblemBounds::new(1.0, 1.0).unwrap(), 24).unwrap();
        prop_assert!(r.passed);
    }

    #[test]
    fn general_norm_bound_when_validated((inst, pi) in general_case()) {
        let b = 2.0;
        let bounds = ProblemBounds::new(b, 2.0).unwrap();
        let report = validate_bounds(&inst, &bounds, 24).unwrap();
        if report.passed {
            let g = dual_eval(&MultiplierVector::project(&pi, 2.0), &inst).unwrap().subgradient;
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm <= 2.0 * b * (inst.s() as f64).sqrt() + 1e-12);
        }
    }

    #[test]
    fn sga_replays_and_stays_in_box(seed in any::<u64>(), n in 1usize..200, s in 1usize..6) {
        let v: Vec<u8> = (0..s).map(|k| (k % 2) as u8).collect();
        let spec = HardFamilySpec::dual_lb(1.0, 1.0, 0.2, v, 3.0).unwrap();
        let stream = spec.sample_instances(&mut seeded(seed), n);
        let bounds = ProblemBounds::new(1.0, 3.0).unwrap();
        let cfg = SgaConfig::new(n, bounds, seed);
        let a = sga_learn(&stream, &cfg).unwrap();
        let b = sga_learn(&stream, &cfg).unwrap();
        prop_assert_eq!(
            a.pi.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.pi.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        // Replay the iterates with an independent loop and check each lies in the box.
        let eta = 3.0 / (2.0 * (n as f64).sqrt());
        let mut pi = vec![0.0f64; s];
        let mut sum = vec![0.0f64; s];
        for inst in &stream {
            for k in 0..s {
                prop_assert!((0.0..=3.0).contains(&pi[k]));
                sum[k] += pi[k];
                let g = if inst.c()[k] - pi[k] < 0.0 { -0.5 } else { 0.5 };
                pi[k] = (pi[k] + eta * g).clamp(0.0, 3.0);
            }
        }
        for k in 0..s {
            prop_assert!((a.pi[k] - sum[k] / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn warmstart_is_mean_of_min_norm(seed in any::<u64>(), n in 1usize..50) {
        let spec = HardFamilySpec::warmstart_lb(0.2, vec![1, 0, 1], 2.0).unwrap();
        let sample = spec.sample_instances(&mut seeded(seed), n);
        let bounds = ProblemBounds::new(1.0, 2.0).unwrap();
        let cfg = DualSolveConfig::default();
        let out = warmstart_learn(&sample, &bounds, &cfg, seed).unwrap();
        for k in 0..3 {
            let mean = sample
                .iter()
                .map(|p| min_norm_pi_star(p, &bounds, &cfg).unwrap().pi[k])
                .sum::<f64>()
                / n as f64;
            prop_assert!((out.pi[k] - mean).abs() <= 1e-15 * n as f64);
        }
    }

    #[test]
    fn kl_below_bound(eps in 0.01f64..0.49, n in 1usize..200, bits in prop::collection::vec(any::<(bool, bool)>(), 8..40)) {
        let s = bits.len();
        let v: Vec<u8> = bits.iter().map(|b| b.0 as u8).collect();
        let w: Vec<u8> = bits.iter().map(|b| b.1 as u8).collect();
        let d = kl_and_fano(s, n, eps, &v, &w).unwrap();
        prop_assert!(d.kl_product <= d.kl_bound);
        let p: f64 = (1.0 + eps) / 2.0;
        let q = 1.0 - p;
        let per = p * (p / q).ln() + q * (q / p).ln();
        let dh = v.iter().zip(&w).filter(|(a, b)| a != b).count() as f64;
        prop_assert!((d.kl_product - n as f64 * dh * per).abs() <= 1e-9 * (1.0 + d.kl_product));
    }

    #[test]
    fn vrp_weak_duality(seed in any::<u64>(), customers in 1usize..=5, vehicles in 1usize..=2,
                        pi in prop::collection::vec(-3.0f64..3.0, 5)) {
        prop_assume!(vehicles <= customers);
        let inst = VrpInstance::random(&mut seeded(seed), customers, vehicles).unwrap();
        let opt = vrp_opt_bruteforce(&inst).unwrap();
        let f = vrp_dual_bound(&inst, &pi[..customers]).unwrap();
        prop_assert!(f <= opt + 1e-9, "f = {f}, OPT = {opt}");
    }
}

#[test]
fn packing_images_are_l1_separated() {
    for s in [8usize, 16] {
        let packing = vg_packing(s).unwrap();
        let sigma = 0.7;
        let stars: Vec<Vec<f64>> = (0..packing.len())
            .map(|i| {
                HardFamilySpec::dual_lb(1.0, sigma, 0.2, packing.vector(i), 3.0)
                    .unwrap()
                    .optimal_multiplier()
                    .unwrap()
                    .into_inner()
            })
            .collect();
        let need = sigma * s as f64 / 8.0;
        // All pairs for s = 8; a strided subset of rows for s = 16.
        let stride = if s == 8 { 1 } else { 97 };
        for i in (0..stars.len()).step_by(stride) {
            for j in 0..stars.len() {
                if i == j {
                    continue;
                }
                let l1: f64 = stars[i].iter().zip(&stars[j]).map(|(a, b)| (a - b).abs()).sum();
                assert!(l1 >= need - 1e-12, "s={s} pair ({i},{j}) has l1 {l1} < {need}");
            }
        }
    }
}
