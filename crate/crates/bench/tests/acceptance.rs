//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --release -p armab-bench --test acceptance -- 2 4`.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use armab_bench::builders::{build_cpap, build_deadline, CpapParams, DeadlineParams};
use armab_bench::experiment::{run_rounds, LearnerSettings, RoundOutcome};
use armab_bench::runspec::LearnerKind;
use armab_bench::stats::{loglog_slope, mean, mean_curve, one_sided_positive, std_error};
use armab_core::baselines::RandomPolicy;
use armab_core::confidence::{ConfidenceSet, Counts, WidthParams};
use armab_core::env::run_episode;
use armab_core::estimator::{core_estimate, estimate_rewards, EpisodeCounts};
use armab_core::index::IndexTable;
use armab_core::learner::{run_learner, FixedIndexLearner, Learner, RandomLearner, UcmdArmab};
use armab_core::omd::{project_kl, FeasibleSetParams, OccupancyZ, SolverConfig};
use armab_core::oracle::{hindsight_baseline, replicate_scenario, solve_relaxed_lp, HindsightBaseline, LpConfig};
use armab_core::oracles::{dense_project_occupancy, lp_vertex_enumeration, relaxed_lp_standard_form};
use armab_core::rng::round_seed;
use armab_core::{ArmModel, RewardSchedule, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NUM_ACTIONS: usize = 2;
const DESK_ROUNDS: usize = 100;

type Criterion = (usize, &'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
    /// Stated runtime limit, if any.
    limit: Option<Duration>,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, limit: None }
    }

    fn within(mut self, minutes: u64) -> Self {
        self.limit = Some(Duration::from_secs(60 * minutes));
        self
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

fn random_row(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn random_arm(rng: &mut ChaCha8Rng, id: usize, states: usize) -> ArmModel {
    let transition = (0..NUM_ACTIONS * states).flat_map(|_| random_row(rng, states)).collect();
    ArmModel::new(id, states, transition, rng.random_range(0..states))
}

/// Random kernels and an arbitrary schedule with zero passive rewards.
fn random_scenario(
    rng: &mut ChaCha8Rng,
    arms: usize,
    states: usize,
    budget: usize,
    horizon: usize,
    episodes: usize,
) -> Scenario {
    let models: Vec<ArmModel> = (0..arms).map(|n| random_arm(rng, n, states)).collect();
    let values = (0..episodes * arms * states * NUM_ACTIONS)
        .map(|i| if i % NUM_ACTIONS == 0 { 0.0 } else { rng.random::<f64>() })
        .collect();
    Scenario {
        schedule: RewardSchedule::from_tensor(episodes, arms, states, values, true).unwrap(),
        arms: models,
        budget,
        horizon,
        episodes,
        epsilon: 0.05,
        eta: None,
    }
}

fn width_params(sc: &Scenario) -> WidthParams {
    WidthParams {
        num_states: sc.num_states(),
        num_actions: NUM_ACTIONS,
        num_arms: sc.num_arms(),
        horizon: sc.horizon,
        epsilon: sc.epsilon,
    }
}

fn desk_cpap() -> Scenario {
    build_cpap(&CpapParams::default()).unwrap()
}

fn desk_deadline() -> Scenario {
    build_deadline(&DeadlineParams { max_deadline: 3, max_charge: 2, ..DeadlineParams::default() }).unwrap()
}

/// Monte-Carlo rounds of one learner on one scenario, computed once.
struct Desk {
    scenario: Scenario,
    baseline: HindsightBaseline,
    runs: Vec<(LearnerKind, Vec<RoundOutcome>)>,
}

impl Desk {
    fn new(scenario: Scenario) -> Self {
        let baseline = hindsight_baseline(&scenario, &LpConfig::default()).unwrap();
        Self { scenario, baseline, runs: Vec::new() }
    }

    fn rounds(&mut self, kind: LearnerKind) -> &[RoundOutcome] {
        if let Some(i) = self.runs.iter().position(|(k, _)| *k == kind) {
            return &self.runs[i].1;
        }
        let start = Instant::now();
        let out = run_rounds(&self.scenario, &self.baseline, &LearnerSettings::new(kind), DESK_ROUNDS, 2024, workers())
            .unwrap();
        eprintln!("  {kind}: {DESK_ROUNDS} rounds in {:.1}s", start.elapsed().as_secs_f64());
        self.runs.push((kind, out));
        &self.runs.last().unwrap().1
    }
}

fn regret_slope(rounds: &[RoundOutcome]) -> f64 {
    let curves: Vec<Vec<f64>> = rounds.iter().map(|r| r.records.iter().map(|x| x.cum_regret).collect()).collect();
    loglog_slope(&mean_curve(&curves)).unwrap_or(f64::NAN)
}

fn feasibility() -> Verdict {
    let sc = desk_cpap();
    let mut learner = UcmdArmab::new(&sc, SolverConfig::default());
    let (mut worst, mut projections, mut failures) = ([0.0f64; 5], 0, 0);
    for t in 1..=sc.episodes {
        let out = learner.play_episode(&sc, t, 7).unwrap();
        if t == 1 {
            continue;
        }
        match out.residuals.filter(|_| !out.degraded) {
            Some(r) => {
                projections += 1;
                let now = [r.normalization, r.flow, r.budget, r.ratio, r.boundary];
                worst.iter_mut().zip(now).for_each(|(w, v)| *w = w.max(v));
            }
            None => failures += 1,
        }
    }
    let limits = [1e-8, 1e-6, 1e-6, 1e-6, 1e-8];
    let pass = failures == 0 && worst.iter().zip(limits).all(|(w, l)| *w <= l);
    Verdict::new(
        pass,
        format!(
            "{projections} projections, {failures} failed; max normalization {:.1e}, flow {:.1e}, budget {:.1e}, ratio {:.1e}, boundary {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
    .within(2)
}

fn projection_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let pairs = 2 * NUM_ACTIONS;
        let params = FeasibleSetParams {
            num_arms: 1,
            num_states: 2,
            horizon: 2,
            p_hat: (0..pairs).flat_map(|_| random_row(&mut rng, 2)).collect(),
            delta: (0..pairs).map(|_| rng.random_range(0.0..1.0)).collect(),
            budget: 1,
            initial_states: vec![rng.random_range(0..2)],
        };
        let mut z = OccupancyZ::zeros(1, 2, 2);
        z.data.iter_mut().for_each(|v| *v = rng.random_range(0.01..2.0));
        let fast = project_kl(&z, &params, &SolverConfig::default(), None).unwrap();
        let dense = dense_project_occupancy(&z, &params, 200_000, 1e-13);
        for (a, b) in fast.z.data.iter().zip(&dense.data) {
            worst = worst.max((a - b).abs());
        }
    }
    Verdict::new(worst <= 1e-4, format!("max entrywise difference {worst:.2e} over 100 instances")).within(1)
}

fn estimator() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut violations = 0usize;
    for trial in 0..10_000u64 {
        let arms = rng.random_range(1..=4);
        let states = rng.random_range(2..=4);
        let horizon = rng.random_range(1..=8);
        let episodes = rng.random_range(1..=3);
        let budget = rng.random_range(0..=arms);
        let sc = random_scenario(&mut rng, arms, states, budget, horizon, episodes);
        let t = rng.random_range(1..=episodes);
        let traj = run_episode(&sc, t, &mut RandomPolicy::new(sc.budget, trial, t), trial).unwrap();
        let counts = EpisodeCounts::from_trajectory(&traj, states);
        let delta: Vec<f64> = (0..arms * states * NUM_ACTIONS).map(|_| rng.random_range(0.0..=1.0)).collect();
        let est = estimate_rewards(&traj, &counts, &delta, horizon).unwrap();
        for n in 0..arms {
            for s in 0..states {
                for a in 0..NUM_ACTIONS {
                    let v = est.get(n, s, a);
                    if !(0.0..=1.0).contains(&v) || v < sc.schedule.reward(t, n, s, a) {
                        violations += 1;
                    }
                }
            }
        }
    }

    // Unbiasedness of the core under a fixed randomized policy.
    let episodes = 20_000u64;
    let sc = random_scenario(&mut rng, 3, 2, 1, 6, 1);
    let pairs = sc.num_arms() * sc.num_states() * NUM_ACTIONS;
    let (mut sum, mut sq, mut visited) = (vec![0.0; pairs], vec![0.0; pairs], vec![0u64; pairs]);
    // Mean of H / c over episodes with c > 0, the factor the core multiplies r by.
    let mut inflation = vec![0.0; pairs];
    for seed in 0..episodes {
        let traj = run_episode(&sc, 1, &mut RandomPolicy::new(sc.budget, seed, 1), seed).unwrap();
        let counts = EpisodeCounts::from_trajectory(&traj, sc.num_states());
        let core = core_estimate(&traj, &counts, sc.horizon).unwrap();
        for (i, v) in core.iter().enumerate() {
            sum[i] += v;
            sq[i] += v * v;
            visited[i] += u64::from(counts.counts[i] > 0);
            if counts.counts[i] > 0 {
                inflation[i] += sc.horizon as f64 / f64::from(counts.counts[i]);
            }
        }
    }
    let (mut checked, mut worst_z, mut worst_ratio, mut predicted) = (0, 0.0f64, 1.0f64, 1.0f64);
    for n in 0..sc.num_arms() {
        for s in 0..sc.num_states() {
            for a in 0..NUM_ACTIONS {
                let i = (n * sc.num_states() + s) * NUM_ACTIONS + a;
                let r = sc.schedule.reward(1, n, s, a);
                if (visited[i] as f64) < 0.2 * episodes as f64 || r == 0.0 {
                    continue;
                }
                let m = sum[i] / episodes as f64;
                let se = ((sq[i] / episodes as f64 - m * m) / episodes as f64).sqrt();
                checked += 1;
                worst_z = worst_z.max((m - r).abs() / se);
                if (m / r - 1.0).abs() > (worst_ratio - 1.0).abs() {
                    worst_ratio = m / r;
                    predicted = inflation[i] / episodes as f64;
                }
            }
        }
    }
    Verdict::new(
        violations == 0 && checked > 0 && worst_z <= 3.0,
        format!(
            "{violations} bound violations in 10^4 trajectories; core bias on {checked} high-visit pairs: worst |z| {worst_z:.1}, mean/true up to {worst_ratio:.2} (E[H/c; c>0] = {predicted:.2})"
        ),
    )
}

fn coverage() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let sc = random_scenario(&mut rng, 2, 2, 1, 10, 20);
    let runs = 500u64;
    let mut misses = 0usize;
    for run in 0..runs {
        let mut counts = Counts::new(sc.num_arms(), sc.num_states());
        let mut learner = RandomLearner;
        for t in 1..=sc.episodes {
            let conf = ConfidenceSet::build(&counts, t, &width_params(&sc));
            misses += usize::from(!conf.contains_truth(&sc.arms).unwrap());
            let out = learner.play_episode(&sc, t, round_seed(40, run)).unwrap();
            counts.update(&out.trajectory);
        }
    }
    let total = runs as usize * sc.episodes;
    let rate = misses as f64 / total as f64;
    let p = 2.0 * sc.epsilon;
    let bound = p + 3.0 * (p * (1.0 - p) / total as f64).sqrt();
    Verdict::new(rate <= bound, format!("miss rate {rate:.4} over {total} (run, episode) pairs, bound {bound:.4}"))
        .within(2)
}

fn lp_dominance() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let rounds = 200;
    let mut failures = Vec::new();
    let mut tightest = f64::INFINITY;
    for i in 0..20 {
        let states = rng.random_range(2..=3);
        let sc = random_scenario(&mut rng, 3, states, 1, 4, 5);
        let base = hindsight_baseline(&sc, &LpConfig::default()).unwrap();
        let lp = base.total();
        let mut totals: Vec<(String, Vec<f64>)> = Vec::new();
        for kind in [LearnerKind::UcmdArmab, LearnerKind::Random, LearnerKind::Greedy] {
            let out = run_rounds(&sc, &base, &LearnerSettings::new(kind), rounds, 500 + i, 1).unwrap();
            totals.push((kind.to_string(), out.iter().map(RoundOutcome::total_realized).collect()));
        }
        let table = IndexTable::from_mu(&base.solution.mu_star);
        let rmi = (0..rounds as u64)
            .map(|r| {
                let mut learner = FixedIndexLearner { table: table.clone() };
                let out = run_learner(&sc, &mut learner, round_seed(500 + i, r)).unwrap();
                out.iter().map(|o| o.trajectory.realized_reward()).sum()
            })
            .collect();
        totals.push(("rmi-true-lp".into(), rmi));
        for (name, xs) in &totals {
            let slack = (lp - mean(xs)) / std_error(xs).max(1e-12);
            tightest = tightest.min(slack);
            if slack < -3.0 {
                failures.push(format!("scenario {i} {name}: lp {lp:.4} < mean {:.4}", mean(xs)));
            }
        }
    }
    let mut worst_lp = 0.0f64;
    for _ in 0..20 {
        let arms: Vec<ArmModel> = (0..2).map(|n| random_arm(&mut rng, n, 2)).collect();
        let reward: Vec<f64> = (0..2 * 2 * NUM_ACTIONS).map(|_| rng.random::<f64>()).collect();
        let sol = solve_relaxed_lp(&arms, &reward, 1, 2, &LpConfig::default()).unwrap();
        let (a, b, c) = relaxed_lp_standard_form(&arms, &reward, 1, 2);
        let (best, _) = lp_vertex_enumeration(&a, &b, &c).expect("relaxed LP is feasible");
        worst_lp = worst_lp.max((sol.value - best).abs());
    }
    let mut detail = format!(
        "min (lp - mean)/se {tightest:.1} over 20 scenarios x 4 policies; max |lp - enumeration| {worst_lp:.1e}"
    );
    for f in &failures {
        detail += &format!("; {f}");
    }
    Verdict::new(failures.is_empty() && worst_lp <= 1e-4, detail)
}

fn sublinear_regret(cpap: &mut Desk) -> Verdict {
    let ucmd = regret_slope(cpap.rounds(LearnerKind::UcmdArmab));
    let random = regret_slope(cpap.rounds(LearnerKind::Random));
    Verdict::new(
        ucmd <= 0.85 && random >= 0.95,
        format!("log-log regret slope over [T/4, T]: ucmd-armab {ucmd:.3} (<= 0.85), random {random:.3} (>= 0.95)"),
    )
    .within(15)
}

fn ordering(desk: &mut Desk, name: &str) -> (bool, String) {
    let ucmd: Vec<(f64, f64)> =
        desk.rounds(LearnerKind::UcmdArmab).iter().map(|r| (r.total_realized(), r.final_regret())).collect();
    let ucrl: Vec<(f64, f64)> =
        desk.rounds(LearnerKind::RmabUcrl).iter().map(|r| (r.total_realized(), r.final_regret())).collect();
    let reward_diff: Vec<f64> = ucmd.iter().zip(&ucrl).map(|(a, b)| a.0 - b.0).collect();
    let regret_diff: Vec<f64> = ucmd.iter().zip(&ucrl).map(|(a, b)| b.1 - a.1).collect();
    let (t_reward, reward_ok) = one_sided_positive(&reward_diff, 0.95);
    let (t_regret, regret_ok) = one_sided_positive(&regret_diff, 0.95);
    let mean_of = |xs: &[(f64, f64)], f: fn(&(f64, f64)) -> f64| mean(&xs.iter().map(f).collect::<Vec<_>>());
    let detail = format!(
        "{name}: reward ucmd {:.1} vs ucrl {:.1} (t={t_reward:.1}), regret ucmd {:.1} vs ucrl {:.1} (t={t_regret:.1})",
        mean_of(&ucmd, |x| x.0),
        mean_of(&ucrl, |x| x.0),
        mean_of(&ucmd, |x| x.1),
        mean_of(&ucrl, |x| x.1),
    );
    (reward_ok && regret_ok, detail)
}

fn comparator_ordering(cpap: &mut Desk, deadline: &mut Desk) -> Verdict {
    let (a, da) = ordering(cpap, "cpap");
    let (b, db) = ordering(deadline, "deadline");
    Verdict::new(a && b, format!("{da}; {db}"))
}

fn asymptotic_trend() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let base = random_scenario(&mut rng, 3, 3, 1, 10, 4);
    let rounds = 200u64;
    let mut gaps: Vec<Vec<f64>> = Vec::new();
    for rho in [1usize, 2, 4, 8] {
        let sc = replicate_scenario(&base, rho).unwrap();
        let lp = hindsight_baseline(&sc, &LpConfig::default()).unwrap();
        let table = IndexTable::from_mu(&lp.solution.mu_star);
        let per_round = (0..rounds)
            .map(|r| {
                let mut learner = FixedIndexLearner { table: table.clone() };
                let out = run_learner(&sc, &mut learner, round_seed(80, r)).unwrap();
                let realized: f64 = out.iter().map(|o| o.trajectory.realized_reward()).sum();
                (lp.total() - realized) / rho as f64
            })
            .collect();
        gaps.push(per_round);
    }
    let mut pass = true;
    let mut detail = String::from("mean gap/rho");
    for (rho, g) in [1, 2, 4, 8].iter().zip(&gaps) {
        detail += &format!(" {rho}:{:.3}±{:.3}", mean(g), std_error(g));
    }
    for w in gaps.windows(2) {
        let increase: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
        let (_, significant) = one_sided_positive(&increase, 0.95);
        pass &= !significant;
    }
    Verdict::new(pass, detail).within(20)
}

fn determinism() -> Verdict {
    let dir = std::env::temp_dir().join(format!("armab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("spec.json");
    std::fs::write(
        &config,
        r#"{"scenario": {"builtin": "cpap", "params": {"arms_per_cluster": 4, "budget": 4, "horizon": 20, "episodes": 20}},
            "learner": "ucmd-armab", "mc_rounds": 16, "seed": 9}"#,
    )
    .unwrap();
    let run = |workers: &str| {
        let out = dir.join(format!("w{workers}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_armab"))
            .args(["run", "--config", config.to_str().unwrap(), "--workers", workers, "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let (one, eight) = (run("1"), run("8"));
    std::fs::remove_dir_all(&dir).ok();
    Verdict::new(one == eight && !one.is_empty(), format!("{} bytes, identical: {}", one.len(), one == eight))
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |i: usize| selected.is_empty() || selected.contains(&i);
    let mut cpap = Desk::new(desk_cpap());
    let mut deadline = Desk::new(desk_deadline());
    let criteria: [Criterion; 7] = [
        (1, "occupancy feasibility", feasibility),
        (2, "projection oracle equivalence", projection_oracle),
        (3, "estimator overestimation and unbiasedness", estimator),
        (4, "confidence coverage", coverage),
        (5, "LP dominance", lp_dominance),
        (8, "asymptotic optimality trend", asymptotic_trend),
        (9, "determinism across workers", determinism),
    ];
    let mut results = Vec::new();
    for (id, name, run) in criteria {
        if wanted(id) {
            results.push(evaluate(id, name, &mut || run()));
        }
    }
    if wanted(6) {
        results.push(evaluate(6, "sublinear regret", &mut || sublinear_regret(&mut cpap)));
    }
    if wanted(7) {
        results.push(evaluate(7, "comparator ordering", &mut || comparator_ordering(&mut cpap, &mut deadline)));
    }
    results.sort_by_key(|r| r.0);
    println!("\nacceptance summary");
    for (id, line, _) in &results {
        println!("criterion {id}: {line}");
    }
    if results.iter().all(|r| r.2) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn evaluate(id: usize, name: &str, run: &mut dyn FnMut() -> Verdict) -> (usize, String, bool) {
    eprintln!("criterion {id} ({name}) ...");
    let start = Instant::now();
    let v = run();
    let elapsed = start.elapsed();
    let in_time = v.limit.is_none_or(|l| elapsed <= l);
    let pass = v.pass && in_time;
    let limit = v.limit.map_or(String::new(), |l| format!(" (limit {}s)", l.as_secs()));
    let line =
        format!("{} {name}: {}; {:.1}s{limit}", if pass { "PASS" } else { "FAIL" }, v.detail, elapsed.as_secs_f64());
    println!("criterion {id}: {line}");
    (id, line, pass)
}
