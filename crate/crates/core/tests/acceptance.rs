//! Acceptance suite. Runs every criterion in order, prints one line each,
//! and exits non-zero if any failed.
//!
//! Built with `harness = false` so the lines show up in plain `cargo test`
//! output and the heavy experiments do not compete for cores.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use lagr_core::agents::gradcheck::gradient_check;
use lagr_core::agents::{Mlp, TabularQ};
use lagr_core::cache::{CacheKey, OracleCache};
use lagr_core::env::shapes::target_shape;
use lagr_core::env::{CubeEnv, CubeEnvConfig, Environment, Extrapolate, GridEnv, GridEnvConfig};
use lagr_core::oracle::{
    accuracy_sweep, OracleBackend, OracleError, OracleQuery, ScriptedConfig, ScriptedOracle, TaskDescriptor,
};
use lagr_core::oracle::descriptor::DescribedTask;
use lagr_core::orchestrator::{
    logistic_reward, performance_ratio, run_baseline, run_experiment, run_trial, ExperimentResult, Gating,
    OracleSpec, RunConfig, Variant,
};
use lagr_core::rng::{make_rng, RngStream};
use ndarray::Array2;

type Outcome = Result<String, String>;

const SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, took: Duration) -> Result<(), String> {
    if took < limit {
        Ok(())
    } else {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    }
}

fn cube_ratio(n: usize, seeds: &[u64]) -> Result<f64, String> {
    let cfg = RunConfig::cube(n, 300);
    let cache = OracleCache::default();
    let lagr = run_experiment(&cfg, Variant::Lagr(Gating::Seq), seeds, &cache).map_err(|e| e.to_string())?;
    let base = run_experiment(&cfg, Variant::Baseline, seeds, &cache).map_err(|e| e.to_string())?;
    performance_ratio(&lagr.aggregate, &base.aggregate).map_err(|e| e.to_string())
}

fn sample_efficiency() -> Outcome {
    let t = Instant::now();
    let ratio = cube_ratio(8, &SEEDS)?;
    within(Duration::from_secs(120), t.elapsed())?;
    check(ratio >= 1.10, format!("ratio {ratio:.3} (need >= 1.10) in {:.1?}", t.elapsed()))
}

fn stack_size_trend() -> Outcome {
    let t = Instant::now();
    let ratios = [5, 8, 11]
        .iter()
        .map(|&n| cube_ratio(n, &SEEDS))
        .collect::<Result<Vec<_>, _>>()?;
    within(Duration::from_secs(300), t.elapsed())?;
    check(
        ratios[0] < ratios[1] && ratios[1] < ratios[2],
        format!("ratios n=5,8,11: {ratios:.3?} (need strictly increasing) in {:.1?}", t.elapsed()),
    )
}

fn noisy_cube(gating: Gating) -> Result<ExperimentResult, String> {
    let mut cfg = RunConfig::cube(8, 300);
    cfg.temperature = 1.0;
    cfg.oracle = OracleSpec::Scripted(ScriptedConfig {
        theta: 0.45,
        kappa_slope: 0.3,
    });
    run_experiment(&cfg, Variant::Lagr(gating), &SEEDS, &OracleCache::default()).map_err(|e| e.to_string())
}

fn query_reduction() -> Outcome {
    let seq = noisy_cube(Gating::Seq)?;
    let always = noisy_cube(Gating::Always)?;
    let (s, a) = (seq.aggregate.queries.mean, always.aggregate.queries.mean);
    check(
        s <= 0.7 * a,
        format!("mean queries seq {s:.1} vs always {a:.1}, ratio {:.3} (need <= 0.7)", s / a),
    )
}

fn no_harm() -> Outcome {
    let last50 = |r: &ExperimentResult| {
        let tail = &r.aggregate.returns[r.aggregate.returns.len() - 50..];
        tail.iter().map(|m| m.mean).sum::<f64>() / 50.0
    };
    let s = last50(&noisy_cube(Gating::Seq)?);
    let a = last50(&noisy_cube(Gating::Always)?);
    check(
        (s - a).abs() <= 0.1 * a.abs(),
        format!("final-50 mean return seq {s:.2} vs always {a:.2} (need within 10%)"),
    )
}

fn logistic_exactness() -> Outcome {
    let half = logistic_reward(90, 100);
    let full = logistic_reward(100, 100);
    let expected = 1.0 / (1.0 + (-2.0f64).exp());
    check(
        (half - 0.5).abs() < 1e-6 && (full - expected).abs() < 1e-6,
        format!("r(90/100) = {half:.9}, r(100/100) = {full:.9}"),
    )
}

fn telescoping_error<E: Environment>(env: &E, rng: &mut RngStream, sequences: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..sequences {
        let start = env.reset();
        let mut s = start.clone();
        let mut sum = 0.0;
        let len = 1 + rng.below(env.horizon());
        for _ in 0..len {
            let legal = env.legal_actions(&s);
            let out = env.step(&s, legal[rng.below(legal.len())]).expect("legal action");
            sum += out.reward - out.bonus - out.rejected_delta;
            s = out.next;
            if out.terminal {
                break;
            }
        }
        worst = worst.max((sum - (env.evaluate(&s) - env.evaluate(&start))).abs());
    }
    worst
}

fn telescoping() -> Outcome {
    let mut rng = make_rng(6).fork("telescoping");
    let cube = CubeEnv::new(CubeEnvConfig::table()).map_err(|e| e.to_string())?;
    let image = GridEnv::new(GridEnvConfig::image(target_shape("oval10", 10, 10).map_err(|e| e.to_string())?))
        .map_err(|e| e.to_string())?;
    let arrange = GridEnv::new(GridEnvConfig::arrangement(
        target_shape("diamond5", 5, 5).map_err(|e| e.to_string())?,
    ))
    .map_err(|e| e.to_string())?;
    let errs = [
        telescoping_error(&cube, &mut rng, 1000),
        telescoping_error(&image, &mut rng, 1000),
        telescoping_error(&arrange, &mut rng, 1000),
    ];
    check(
        errs.iter().all(|&e| e <= 1e-12),
        format!("max |sum - dE| cube/image/arrangement: {:.1e} {:.1e} {:.1e}", errs[0], errs[1], errs[2]),
    )
}

#[derive(Default)]
struct Counting {
    calls: AtomicUsize,
}

impl OracleBackend for Counting {
    fn backend_id(&self) -> String {
        "counting".into()
    }

    fn complete(&self, q: &OracleQuery) -> Result<String, OracleError> {
        Ok(format!("{} -> {}", q.rendered_state, self.calls.fetch_add(1, Ordering::SeqCst)))
    }
}

fn random_text(rng: &mut RngStream) -> String {
    const ALPHABET: &[char] = &['a', 'Z', '0', ' ', '\n', '\t', '"', '\\', '[', ']', ',', '\'', 'é', '€', '🧊', '{', '}'];
    (0..rng.below(40)).map(|_| ALPHABET[rng.below(ALPHABET.len())]).collect()
}

fn cache_contract() -> Outcome {
    let mut rng = make_rng(7);
    let query = |state: &str, tau: f64| OracleQuery {
        env_id: "cube8".into(),
        descriptor_id: "cube8".into(),
        prompt: format!("complete {state}"),
        rendered_state: state.into(),
        temperature: tau,
    };
    let cache = OracleCache::new(10);
    let mut calls = Vec::new();
    for (state, tau) in [("['e']", 0.0), ("['e','f']", 0.0), ("['e']", 0.7), ("['e','f']", 1.0)] {
        let backend = Counting::default();
        for _ in 0..100 {
            cache.complete(&backend, &query(state, tau), &mut rng).map_err(|e| e.to_string())?;
        }
        calls.push(backend.calls.load(Ordering::SeqCst));
    }
    if calls != [1, 1, 10, 10] {
        return Err(format!("backend calls per key {calls:?}, expected [1, 1, 10, 10]"));
    }

    let payload = OracleCache::new(10);
    for _ in 0..200 {
        let key = CacheKey {
            env_id: random_text(&mut rng),
            descriptor_id: random_text(&mut rng),
            rendered_state: random_text(&mut rng),
            temperature_bucket: rng.below(101) as u32,
        };
        let responses = (0..1 + rng.below(10)).map(|_| random_text(&mut rng)).collect();
        payload.insert(key, responses);
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("cache.jsonl");
    payload.save(&path).map_err(|e| e.to_string())?;
    let (back, report) = OracleCache::load(&path, 10).map_err(|e| e.to_string())?;
    check(
        back.entries() == payload.entries() && report.warnings.is_empty(),
        format!("calls per key {calls:?}; {} random entries round-tripped", report.loaded),
    )
}

/// Mean squared error on one chosen output per row, as in the DQN update.
fn taken_action_loss(targets: Vec<(usize, f64)>) -> impl Fn(&Array2<f64>) -> (f64, Array2<f64>) {
    move |out: &Array2<f64>| {
        let b = targets.len() as f64;
        let mut grad = Array2::zeros(out.raw_dim());
        let mut loss = 0.0;
        for (i, &(a, y)) in targets.iter().enumerate() {
            let err = out[[i, a]] - y;
            loss += err * err / b;
            grad[[i, a]] = 2.0 * err / b;
        }
        (loss, grad)
    }
}

fn gradient_checks() -> Outcome {
    let archs: [&[usize]; 5] = [&[4, 2], &[3, 5, 2], &[6, 8, 8, 3], &[10, 16, 2], &[5, 7, 6, 5, 4]];
    let mut worst: f64 = 0.0;
    for sizes in archs {
        for seed in 0..5 {
            let mut rng = make_rng(seed).fork(&format!("gradcheck-{sizes:?}"));
            let net = Mlp::new(sizes, &mut rng).map_err(|e| e.to_string())?;
            let batch = 4;
            let x = Array2::from_shape_fn((batch, sizes[0]), |_| 2.0 * rng.uniform() - 1.0);
            let out = *sizes.last().unwrap();
            let targets = (0..batch).map(|_| (rng.below(out), 2.0 * rng.uniform() - 1.0)).collect();
            let report = gradient_check(&net, x.view(), taken_action_loss(targets), 1e-4);
            if !report.passed() {
                return Err(format!("{sizes:?} seed {seed}: {report:?}"));
            }
            worst = worst.max(report.max_rel_error);
        }
    }
    Ok(format!("25 nets, max relative error {worst:.2e} (need < 1e-4)"))
}

fn chain_equivalence() -> Outcome {
    // states 0-1-2, actions left/right; stepping right from 1 ends with reward 1
    const GAMMA: f64 = 0.9;
    let next = |s: usize, a: usize| -> (usize, f64, bool) {
        match (s, a) {
            (1, 1) => (2, 1.0, true),
            (s, 1) => (s + 1, 0.0, false),
            (s, _) => (s.saturating_sub(1), 0.0, false),
        }
    };
    let mut v = [0.0f64; 3];
    for _ in 0..1000 {
        for s in 0..2 {
            v[s] = (0..2)
                .map(|a| {
                    let (n, r, done) = next(s, a);
                    r + if done { 0.0 } else { GAMMA * v[n] }
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    let exact = |s: usize, a: usize| {
        let (n, r, done) = next(s, a);
        r + if done { 0.0 } else { GAMMA * v[n] }
    };
    let mut q = TabularQ::new(2, 0.1, GAMMA);
    let mut rng = make_rng(9);
    for _ in 0..10_000 {
        let (s, a) = (rng.below(2), rng.below(2));
        let (n, r, done) = next(s, a);
        q.update(&s.to_string(), a, r, &n.to_string(), &[0, 1], done)
            .map_err(|e| e.to_string())?;
    }
    let err = (0..2)
        .flat_map(|s| (0..2).map(move |a| (s, a)))
        .map(|(s, a)| (q.get(&s.to_string(), a) - exact(s, a)).abs())
        .fold(0.0, f64::max);
    check(err < 1e-3, format!("max |Q - Q*| = {err:.2e} after 10^4 updates"))
}

fn sweep_shape<E: Extrapolate + DescribedTask + 'static>(env: &E, label: &str) -> Result<String, String> {
    let theta = ScriptedConfig::default().theta;
    let oracle = ScriptedOracle::new(env.clone(), ScriptedConfig::default(), make_rng(10).fork("oracle"))
        .map_err(|e| e.to_string())?;
    let fractions: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
    let rows = accuracy_sweep(&oracle, env, &TaskDescriptor::for_env(env), &fractions, 20, 0.0)
        .map_err(|e| e.to_string())?;
    for r in &rows {
        let want = if r.realized >= theta { 1.0 } else { 0.0 };
        if r.accuracy != want {
            return Err(format!(
                "{label}: fraction {:.3} (realized {:.3}) accuracy {}",
                r.requested, r.realized, r.accuracy
            ));
        }
    }
    let first = rows.iter().find(|r| r.accuracy == 1.0).map(|r| r.realized);
    Ok(format!("{label} steps at {:.3}", first.unwrap_or(f64::NAN)))
}

fn oracle_benchmark_shape() -> Outcome {
    let cube = CubeEnv::new(CubeEnvConfig::table()).map_err(|e| e.to_string())?;
    let image = GridEnv::new(GridEnvConfig::image(target_shape("oval10", 10, 10).map_err(|e| e.to_string())?))
        .map_err(|e| e.to_string())?;
    let arrange = GridEnv::new(GridEnvConfig::arrangement(
        target_shape("diamond5", 5, 5).map_err(|e| e.to_string())?,
    ))
    .map_err(|e| e.to_string())?;
    let parts = [
        sweep_shape(&cube, "cube")?,
        sweep_shape(&image, "image")?,
        sweep_shape(&arrange, "arrangement")?,
    ];
    Ok(format!("20 fractions each; {}", parts.join(", ")))
}

fn median(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    v[v.len() / 2]
}

fn image_learning() -> Outcome {
    let t = Instant::now();
    let episodes = 400;
    let cfg = RunConfig::image("oval10", episodes);
    let seeds = [0, 1, 2, 3, 4];
    let cache = OracleCache::default();
    let first = |r: &ExperimentResult| -> Vec<usize> {
        // never reaching the threshold counts as the full budget
        r.trials.iter().map(|m| m.first_episode_reaching(0.95).unwrap_or(episodes)).collect()
    };
    let lagr = run_experiment(&cfg, Variant::Lagr(Gating::Seq), &seeds, &cache).map_err(|e| e.to_string())?;
    let base = run_experiment(&cfg, Variant::Baseline, &seeds, &cache).map_err(|e| e.to_string())?;
    within(Duration::from_secs(15 * 60), t.elapsed())?;
    let (l, b) = (first(&lagr), first(&base));
    let (ml, mb) = (median(l.clone()), median(b.clone()));
    check(
        ml < mb,
        format!("median first episode with E >= 0.95: lagr {ml} {l:?} vs dqn {mb} {b:?} in {:.1?}", t.elapsed()),
    )
}

fn baseline_purity() -> Outcome {
    let cube = CubeEnv::new(CubeEnvConfig::table()).map_err(|e| e.to_string())?;
    let image = GridEnv::new(GridEnvConfig::image(target_shape("oval10", 10, 10).map_err(|e| e.to_string())?))
        .map_err(|e| e.to_string())?;
    let mut cube_cfg = RunConfig::cube(8, 100);
    cube_cfg.gating = Gating::Never;
    let mut image_cfg = RunConfig::image("oval10", 3);
    image_cfg.gating = Gating::Never;

    fn same<E: Extrapolate + DescribedTask>(env: &E, cfg: &RunConfig, seed: u64) -> Result<bool, String> {
        let oracle = ScriptedOracle::new(env.clone(), ScriptedConfig::default(), make_rng(seed).fork("oracle"))
            .map_err(|e| e.to_string())?;
        let a = run_trial(env, cfg, &oracle, &OracleCache::default(), seed).map_err(|e| e.to_string())?;
        let b = run_baseline(env, cfg, seed).map_err(|e| e.to_string())?;
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        Ok(a.actions == b.actions && bits(&a.returns) == bits(&b.returns) && a.total_queries() == 0)
    }
    let mut runs = 0;
    for seed in [0, 1, 2] {
        if !same(&cube, &cube_cfg, seed)? {
            return Err(format!("cube seed {seed} diverged from the baseline"));
        }
        runs += 1;
    }
    if !same(&image, &image_cfg, 0)? {
        return Err("image seed 0 diverged from the baseline".into());
    }
    Ok(format!("{} trajectories bitwise identical (tabular and DQN)", runs + 1))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("sample efficiency", sample_efficiency),
        ("stack-size trend", stack_size_trend),
        ("query reduction", query_reduction),
        ("seq no-harm", no_harm),
        ("logistic reward", logistic_exactness),
        ("telescoping rewards", telescoping),
        ("cache contract", cache_contract),
        ("gradient check", gradient_checks),
        ("tabular vs value iteration", chain_equivalence),
        ("oracle benchmark shape", oracle_benchmark_shape),
        ("image completion learning", image_learning),
        ("baseline purity", baseline_purity),
    ];
    // comma-separated criterion numbers, for running a subset by hand
    let only: Option<Vec<usize>> = std::env::var("LAGR_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let outcome = run();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} {n:>2} {name}: {detail} [{:.1?}]", t.elapsed());
        failed += usize::from(outcome.is_err());
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
