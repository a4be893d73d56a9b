use armab_core::confidence::ConfidenceSet;
use armab_core::omd::{
    feasibility_residuals, init_occupancy, kl_divergence, mu_from_z, project_kl, unconstrained_step, FeasibleSetParams,
    OccupancyZ, SolverConfig,
};
use armab_core::oracles::dense_project_occupancy;
use armab_core::{ArmModel, RewardSchedule, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_row(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn random_params(rng: &mut ChaCha8Rng, arms: usize, states: usize, horizon: usize, budget: usize) -> FeasibleSetParams {
    let pairs = arms * states * 2;
    let p_hat: Vec<f64> = (0..pairs).flat_map(|_| random_row(rng, states)).collect();
    let delta: Vec<f64> = (0..pairs).map(|_| rng.random_range(0.02..0.6)).collect();
    let initial_states = (0..arms).map(|_| rng.random_range(0..states)).collect();
    FeasibleSetParams { num_arms: arms, num_states: states, horizon, p_hat, delta, budget, initial_states }
}

fn random_z(rng: &mut ChaCha8Rng, arms: usize, horizon: usize, states: usize) -> OccupancyZ {
    let mut z = OccupancyZ::zeros(arms, horizon, states);
    z.data.iter_mut().for_each(|v| *v = rng.random_range(0.01..1.0));
    z
}

#[test]
fn matches_dense_oracle_on_one_arm_two_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let params = random_params(&mut rng, 1, 2, 2, 1);
        let z_tilde = random_z(&mut rng, 1, 2, 2);
        let fast = project_kl(&z_tilde, &params, &SolverConfig::default(), None).unwrap();
        let dense = dense_project_occupancy(&z_tilde, &params, 200_000, 1e-13);
        for (a, b) in fast.z.data.iter().zip(&dense.data) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-4, "max entrywise difference {worst}");
}

#[test]
fn budget_binding_two_arms() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut params = random_params(&mut rng, 2, 2, 2, 1);
    params.delta.iter_mut().for_each(|d| *d = 1.0);
    params.initial_states = vec![0, 0];
    let mut z_tilde = OccupancyZ::zeros(2, 2, 2);
    for n in 0..2 {
        for h in 0..2 {
            for s in 0..2 {
                for sp in 0..2 {
                    z_tilde.set(n, h, s, 0, sp, 0.025);
                    z_tilde.set(n, h, s, 1, sp, 0.225);
                }
            }
        }
    }
    let fast = project_kl(&z_tilde, &params, &SolverConfig::default(), None).unwrap();
    let mu = mu_from_z(&fast.z);
    for h in 0..2 {
        assert!(mu.activation(h) <= 1.0 + 1e-6);
    }
    assert!(fast.duals.lambda.iter().any(|&l| l > 0.0));
    let dense = dense_project_occupancy(&z_tilde, &params, 200_000, 1e-13);
    for (a, b) in fast.z.data.iter().zip(&dense.data) {
        assert!((a - b).abs() <= 1e-4);
    }
}

#[test]
fn feasible_input_is_a_fixed_point() {
    let arms: Vec<ArmModel> =
        (0..3).map(|n| ArmModel::new(n, 2, vec![0.6, 0.4, 0.3, 0.7, 0.2, 0.8, 0.5, 0.5], n % 2)).collect();
    let schedule = RewardSchedule::from_tensor(1, 3, 2, vec![0.0; 12], true).unwrap();
    let scenario = Scenario { arms, budget: 1, horizon: 4, episodes: 1, schedule, epsilon: 0.05, eta: None };
    let p_hat: Vec<f64> = vec![0.5; 24];
    let z = init_occupancy(&scenario, &p_hat);
    let conf = ConfidenceSet { num_arms: 3, num_states: 2, p_hat: p_hat.clone(), delta: vec![1.0; 12] };
    let params = FeasibleSetParams::new(&conf, 1, 4, scenario.initial_states());
    assert!(feasibility_residuals(&z, &params).max() <= 1e-9);
    let out = project_kl(&z, &params, &SolverConfig::default(), None).unwrap();
    assert_eq!(out.iterations, 0);
    assert!(out.divergence.abs() < 1e-12);
    assert!(out.duals.beta.iter().chain(&out.duals.lambda).all(|&v| v == 0.0));
}

#[test]
fn residuals_and_pythagoras_on_larger_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10 {
        let params = random_params(&mut rng, 4, 3, 5, 2);
        let z_tilde = random_z(&mut rng, 4, 5, 3);
        let out = project_kl(&z_tilde, &params, &SolverConfig::default(), None).unwrap();
        let r = out.residuals;
        assert!(r.normalization <= 1e-8 && r.boundary <= 1e-8, "{r:?}");
        assert!(r.flow <= 1e-6 && r.budget <= 1e-6 && r.ratio <= 1e-6, "{r:?}");
        // a feasible point: the projection of another random tensor
        let other = project_kl(&random_z(&mut rng, 4, 5, 3), &params, &SolverConfig::default(), None).unwrap();
        assert!(kl_divergence(&other.z, &out.z) <= kl_divergence(&other.z, &z_tilde) + 1e-6);
    }
}

#[test]
fn exponential_step_then_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = random_params(&mut rng, 1, 2, 2, 1);
    let z = project_kl(&random_z(&mut rng, 1, 2, 2), &params, &SolverConfig::default(), None).unwrap().z;
    let r_hat = armab_core::estimator::RewardEstimate { num_arms: 1, num_states: 2, values: vec![0.3, 1.0, 0.0, 0.7] };
    let tilde = unconstrained_step(&z, &r_hat, 0.5).unwrap();
    let fast = project_kl(&tilde, &params, &SolverConfig::default(), None).unwrap();
    let dense = dense_project_occupancy(&tilde, &params, 200_000, 1e-13);
    for (a, b) in fast.z.data.iter().zip(&dense.data) {
        assert!((a - b).abs() <= 1e-4);
    }
}
