use armab_core::oracle::{
    hindsight_baseline, penalized_reward, per_arm_dp, replicate_scenario, solve_relaxed_lp, LpConfig,
};
use armab_core::oracles::{brute_force_dp, lp_vertex_enumeration, relaxed_lp_standard_form};
use armab_core::{ArmModel, RewardSchedule, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_arm(rng: &mut ChaCha8Rng, id: usize, states: usize) -> ArmModel {
    let mut t = Vec::new();
    for _ in 0..2 * states {
        let raw: Vec<f64> = (0..states).map(|_| rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        t.extend(raw.iter().map(|v| v / s));
    }
    ArmModel::new(id, states, t, rng.random_range(0..states))
}

fn random_scenario(
    rng: &mut ChaCha8Rng,
    arms: usize,
    states: usize,
    budget: usize,
    horizon: usize,
    episodes: usize,
) -> Scenario {
    let arms: Vec<ArmModel> = (0..arms).map(|n| random_arm(rng, n, states)).collect();
    let n = arms.len();
    let values = (0..episodes * n * states * 2).map(|i| if i % 2 == 0 { 0.0 } else { rng.random::<f64>() }).collect();
    Scenario {
        schedule: RewardSchedule::from_tensor(episodes, n, states, values, true).unwrap(),
        arms,
        budget,
        horizon,
        episodes,
        epsilon: 0.05,
        eta: None,
    }
}

#[test]
fn dp_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let arm = random_arm(&mut rng, 0, 3);
        let reward: Vec<f64> = (0..3 * 3 * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let plan = per_arm_dp(&arm, &reward, 3);
        let brute = brute_force_dp(&arm, &reward, 3);
        assert!((plan.value - brute).abs() < 1e-12, "{} vs {brute}", plan.value);
    }
}

#[test]
fn lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let arms: Vec<ArmModel> = (0..2).map(|n| random_arm(&mut rng, n, 2)).collect();
        let reward: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let sol = solve_relaxed_lp(&arms, &reward, 1, 2, &LpConfig::default()).unwrap();
        let (a, b, c) = relaxed_lp_standard_form(&arms, &reward, 1, 2);
        let (best, _) = lp_vertex_enumeration(&a, &b, &c).expect("feasible");
        assert!(sol.converged);
        assert!((sol.value - best).abs() < 1e-4, "{} vs {best}", sol.value);
        assert!(sol.dual_bound >= sol.value - 1e-9);
    }
}

#[test]
fn lp_solution_is_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scenario = random_scenario(&mut rng, 6, 4, 2, 8, 3);
    let base = hindsight_baseline(&scenario, &LpConfig::default()).unwrap();
    let mu = &base.solution.mu_star;
    for h in 0..8 {
        assert!(mu.activation(h) <= 2.0 + 1e-6);
    }
    for n in 0..6 {
        let arm = &scenario.arms[n];
        for h in 0..8 {
            let layer: f64 = (0..4).flat_map(|s| (0..2).map(move |a| (s, a))).map(|(s, a)| mu.get(n, h, s, a)).sum();
            assert!((layer - 1.0).abs() < 1e-9);
            for s in 0..4 {
                let out = mu.get(n, h, s, 0) + mu.get(n, h, s, 1);
                if h == 0 {
                    let expect = if s == arm.initial_state { 1.0 } else { 0.0 };
                    assert!((out - expect).abs() < 1e-12);
                } else {
                    let inflow: f64 = (0..4)
                        .flat_map(|p| (0..2).map(move |a| (p, a)))
                        .map(|(p, a)| mu.get(n, h - 1, p, a) * arm.prob(p, a, s))
                        .sum();
                    assert!((out - inflow).abs() < 1e-6);
                }
            }
        }
    }
    assert!(mu.data.iter().all(|&v| v >= 0.0));
    assert_eq!(base.per_episode.len(), 3);
    assert!((base.total() - base.solution.value).abs() < 1e-9 * base.total().max(1.0));
}

#[test]
fn replication_scales_lp_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let base = random_scenario(&mut rng, 3, 3, 1, 5, 1);
    let v1 = hindsight_baseline(&base, &LpConfig::default()).unwrap().total();
    assert_eq!(replicate_scenario(&base, 1).unwrap(), base);
    for rho in [2, 4] {
        let rep = replicate_scenario(&base, rho).unwrap();
        assert_eq!(rep.num_arms(), 3 * rho);
        assert_eq!(rep.budget, rho);
        let v = hindsight_baseline(&rep, &LpConfig::default()).unwrap().total();
        assert!((v - rho as f64 * v1).abs() < 1e-5 * rho as f64 * 15.0, "rho {rho}: {v} vs {}", rho as f64 * v1);
    }
}

#[test]
fn single_arm_lp_is_the_unconstrained_dp() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scenario = random_scenario(&mut rng, 1, 3, 1, 6, 4);
    let base = hindsight_baseline(&scenario, &LpConfig::default()).unwrap();
    let total = scenario.schedule.total();
    let dp = per_arm_dp(&scenario.arms[0], &penalized_reward(&total, &[0.0; 6]), 6);
    assert!((base.total() - dp.value).abs() < 1e-9);
}
