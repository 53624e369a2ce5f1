use proptest::prelude::*;

use cogmac::boolean::{exhaustive_solve, heuristic_assign};
use cogmac::dp::{backward_induction, build_grids, DpConfig, PolicyTable};
use cogmac::experiment::{generate_realization, ExperimentConfig};
use cogmac::model::{battery_trajectory, slot_interference, slot_throughput};
use cogmac::noncausal::power::allocate_slot;
use cogmac::noncausal::{
    alternating_optimize, build_sensing_time_lp, rank_users, ratio_triples, realized_jensen_bound, solve_lp,
    solve_power_subproblem, Assignment, Instance, RatioTriple,
};
use cogmac::sensing::or_fusion;
use cogmac::{Capacity, DecisionSet, Realization, SystemParams};

fn gains(n: usize, m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..4.0, m), n)
}

prop_compose! {
    fn instance_input()(n in 1usize..=3, m in 1usize..=2)
        (h in gains(n, m), g in gains(n, m), harvest in gains(n, m),
         b0 in prop::collection::vec(0.0f64..1.5, n),
         a in prop::collection::vec(prop::collection::vec(any::<bool>(), m), n),
         q in 0.05f64..1.0,
         tau in prop::collection::vec(0.1f64..1.9, m))
        -> (SystemParams, Realization, Assignment, Vec<f64>)
    {
        let (n, m) = (h.len(), h[0].len());
        let mut params = SystemParams::default();
        params.set_users(n);
        params.horizon = m;
        params.battery_init = b0;
        params.q_limit = q;
        let rz = Realization { g, h, harvest, pu_active: vec![false; m], seed: 0 };
        let asg = Assignment { a, theta: vec![false; m] };
        (params, rz, asg, tau)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn power_solution_satisfies_kkt_and_ordering(input in instance_input()) {
        let (params, rz, asg, tau) = input;
        let inst = Instance::new(&params, &rz, &asg);
        let sol = match solve_power_subproblem(&inst, &tau) {
            Ok(sol) => sol,
            Err(e) if e.is_infeasible() => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!(sol.kkt.max() <= 1e-6, "{:?}", sol.kkt);
        prop_assert!(inst.max_violation(&sol.p, &tau) <= 1e-9);
        let triples = ratio_triples(&inst, &tau, &sol.duals.mu);
        let lambda = sol.duals.lambda;
        for k in 0..inst.n_slots() {
            for i in 0..inst.n_users() {
                for j in 0..inst.n_users() {
                    if !inst.transmits(i, k) || !inst.transmits(j, k) {
                        continue;
                    }
                    if sol.p[i][k] > 1e-7 && sol.p[j][k] == 0.0 {
                        let ri = triples[i][k].ratio(lambda);
                        let rj = triples[j][k].ratio(lambda);
                        prop_assert!(ri >= rj * (1.0 - 1e-6) - 1e-9, "slot {} users {} {}: {} < {}", k, i, j, ri, rj);
                    }
                }
            }
        }
    }

    #[test]
    fn allocator_fills_in_ratio_order(
        c in prop::collection::vec(0.01f64..3.0, 3),
        d in prop::collection::vec(0.0f64..2.0, 3),
        e in prop::collection::vec(0.0f64..2.0, 3),
        lambda in 0.0f64..3.0,
    ) {
        let triples: Vec<RatioTriple> = (0..3).map(|i| RatioTriple { c: c[i], d: d[i], e: e[i] }).collect();
        let order = rank_users(&triples, lambda);
        for w in order.windows(2) {
            prop_assert!(triples[w[0]].ratio(lambda) >= triples[w[1]].ratio(lambda));
        }
        let p = allocate_slot(&triples, &c, lambda, 1.0);
        let interior = p.iter().filter(|&&x| x > 0.0 && x < 1.0).count();
        prop_assert!(interior <= 1);
        for i in 0..3 {
            for j in 0..3 {
                if p[i] > 0.0 && p[j] == 0.0 {
                    prop_assert!(triples[i].ratio(lambda) >= triples[j].ratio(lambda));
                }
            }
        }
    }

    #[test]
    fn lp_solution_is_feasible_and_beats_grid(input in instance_input(), scale in 0.0f64..1.0) {
        let (params, rz, asg, _) = input;
        let inst = Instance::new(&params, &rz, &asg);
        let m = inst.n_slots();
        let p: Vec<Vec<f64>> = (0..inst.n_users()).map(|_| vec![scale; m]).collect();
        let lp = build_sensing_time_lp(&inst, &p);
        let Ok(tau) = solve_lp(&lp) else { return Ok(()); };
        let dot = |r: &[f64], x: &[f64]| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!(dot(&lp.w, &tau) >= lp.q_tilde - 1e-9);
        for (row, z) in lp.y.iter().zip(&lp.z) {
            prop_assert!(dot(row, &tau) >= z - 1e-9);
        }
        for k in 0..m {
            prop_assert!(tau[k] >= lp.lower[k] - 1e-12 && tau[k] <= lp.upper[k] + 1e-12);
        }
        let best = dot(&lp.s, &tau);
        let steps = 20;
        let mut point = vec![0usize; m];
        loop {
            let x: Vec<f64> = (0..m).map(|k| lp.lower[k] + (lp.upper[k] - lp.lower[k]) * point[k] as f64 / steps as f64).collect();
            let feasible = dot(&lp.w, &x) >= lp.q_tilde && lp.y.iter().zip(&lp.z).all(|(r, z)| dot(r, &x) >= *z);
            if feasible {
                prop_assert!(best <= dot(&lp.s, &x) + 1e-9);
            }
            let mut k = 0;
            while k < m && point[k] == steps {
                point[k] = 0;
                k += 1;
            }
            if k == m {
                break;
            }
            point[k] += 1;
        }
    }

    #[test]
    fn alternating_trace_monotone_and_bounded(input in instance_input()) {
        let (params, rz, asg, _) = input;
        let inst = Instance::new(&params, &rz, &asg);
        let Ok(res) = alternating_optimize(&inst, None) else { return Ok(()); };
        for w in res.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
        prop_assert!(res.objective <= realized_jensen_bound(&params, &rz) + 1e-9);
    }

    #[test]
    fn battery_stays_in_bounds(seed in any::<u64>(), cap in 0.2f64..3.0, powers in prop::collection::vec(0.0f64..1.0, 6), taus in prop::collection::vec(0.1f64..2.0, 3), bits in any::<u16>()) {
        let params = SystemParams { horizon: 3, battery_max: Capacity::Finite(cap), battery_init: vec![cap.min(0.4); 2], ..SystemParams::default() };
        let rz = generate_realization(&params, seed);
        let dec = DecisionSet {
            a: (0..2).map(|i| (0..3).map(|k| bits >> (i * 3 + k) & 1 == 1).collect()).collect(),
            theta: (0..3).map(|k| bits >> (6 + k) & 1 == 1).collect(),
            p: (0..2).map(|i| powers[i * 3..i * 3 + 3].to_vec()).collect(),
            tau: taus,
        };
        let traj = battery_trajectory(&params, &rz, &dec).unwrap();
        for row in &traj.level {
            for &b in row {
                prop_assert!(b <= cap + 1e-12);
                prop_assert!(!traj.is_causal() || b >= -1e-9);
            }
        }
    }

    #[test]
    fn slot_throughput_monotone(p in prop::collection::vec(0.0f64..1.0, 2), h in prop::collection::vec(0.0f64..3.0, 2), tau in 0.1f64..1.8, dp in 0.0f64..0.5, dt in 0.0f64..0.2) {
        let params = SystemParams::default();
        let a = [true, true];
        let base = slot_throughput(&p, &h, &a, false, tau, &params);
        prop_assert!(slot_throughput(&p, &h, &a, false, tau + dt, &params) <= base + 1e-15);
        let more = [p[0] + dp, p[1]];
        prop_assert!(slot_throughput(&more, &h, &a, false, tau, &params) >= base - 1e-15);
        prop_assert_eq!(slot_throughput(&p, &h, &a, true, tau, &params), 0.0);
        prop_assert_eq!(slot_interference(&p, &h, &[false, false], false, tau, &params), 0.0);
    }

    #[test]
    fn or_fusion_monotone(bits in prop::collection::vec(any::<bool>(), 1..6), flip in 0usize..6) {
        let before = or_fusion(&bits);
        let mut after = bits.clone();
        let idx = flip % bits.len();
        after[idx] = true;
        prop_assert!(!before || or_fusion(&after));
    }

    #[test]
    fn config_text_round_trip(n in 1usize..4, m in 1usize..6, q in 0.01f64..2.0, seed in any::<u64>()) {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_override(&format!("N={n}")).unwrap();
        cfg.apply_override(&format!("M={m}")).unwrap();
        cfg.apply_override(&format!("Q={q}")).unwrap();
        cfg.seed = seed;
        let back = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exhaustive_dominates_heuristic(seed in any::<u64>(), m in 1usize..=2, b0 in 0.0f64..1.0) {
        let params = SystemParams { horizon: m, battery_init: vec![b0; 2], ..SystemParams::default() };
        let rz = generate_realization(&params, seed);
        let heur = heuristic_assign(&rz, &params).unwrap();
        for i in 0..2 {
            for k in 0..m {
                if heur.decisions.a[i][k] {
                    prop_assert!(heur.trajectory.level[i][k] > params.p_sense * params.tau_min);
                }
            }
        }
        let ex = exhaustive_solve(&rz, &params).unwrap();
        let ex_value = cogmac::model::evaluate_objective(&params, &rz, &ex.decisions()).unwrap().throughput;
        prop_assert!(ex_value >= heur.evaluation.throughput - 1e-7, "{} < {}", ex_value, heur.evaluation.throughput);
    }

    #[test]
    fn policy_table_text_round_trip(lambda in 0.0f64..3.0) {
        let params = SystemParams::default();
        let cfg = DpConfig { levels: 2, battery_levels: 3, power_levels: 3, tau_levels: 2, ..DpConfig::default() };
        let grids = build_grids(&params, &cfg).unwrap();
        let table = backward_induction(&params, lambda, &grids, &cfg).unwrap();
        let back = PolicyTable::from_text(&table.to_text()).unwrap();
        prop_assert_eq!(back.choice, table.choice);
        prop_assert_eq!(back.value, table.value);
        prop_assert_eq!(back.lambda, table.lambda);
    }
}
