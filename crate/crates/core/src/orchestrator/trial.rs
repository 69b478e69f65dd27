//! One trial: episodes of the primary agent, with or without the oracle.

use std::time::Instant;

use serde::Serialize;

use crate::agents::{BanditAgent, DqnAgent, PrimaryLearner, TabularQ, NO_QUERY, QUERY};
use crate::cache::{cached_query, OracleCache};
use crate::env::{Environment, Extrapolate};
use crate::oracle::descriptor::DescribedTask;
use crate::oracle::{OracleBackend, OracleQuery, TaskDescriptor};
use crate::rng::{make_rng, RngStream};

use super::config::{Gating, PrimaryConfig, RunConfig, SecondaryKind};
use super::reward::secondary_reward;
use super::TrialError;

/// One oracle query issued during a trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRecord {
    pub episode: usize,
    pub step: usize,
    /// Reward of the step that led to the queried state.
    pub prev_reward: f64,
    pub state: String,
    pub accepted: bool,
    pub secondary_reward: f64,
    pub served_from_cache: bool,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub seed: u64,
    pub returns: Vec<f64>,
    /// Best evaluation reached in each episode, initial state included.
    pub max_eval: Vec<f64>,
    pub steps: Vec<usize>,
    /// Queries issued per episode (gate open and the gate chose to query).
    pub queries: Vec<usize>,
    pub gate_open_steps: usize,
    pub backend_calls: usize,
    pub cache_hits: usize,
    pub oracle_failures: usize,
    pub primary_updates: usize,
    pub secondary_updates: usize,
    /// `(episode, step)` at which an oracle solution was accepted.
    pub found_at: Option<(usize, usize)>,
    pub solution: Option<String>,
    pub query_log: Vec<QueryRecord>,
    /// Every primary action taken, in order.
    pub actions: Vec<usize>,
    pub wall_secs: f64,
}

impl TrialMetrics {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            returns: Vec::new(),
            max_eval: Vec::new(),
            steps: Vec::new(),
            queries: Vec::new(),
            gate_open_steps: 0,
            backend_calls: 0,
            cache_hits: 0,
            oracle_failures: 0,
            primary_updates: 0,
            secondary_updates: 0,
            found_at: None,
            solution: None,
            query_log: Vec::new(),
            actions: Vec::new(),
            wall_secs: 0.0,
        }
    }

    pub fn total_queries(&self) -> usize {
        self.queries.iter().sum()
    }

    pub fn total_return(&self) -> f64 {
        self.returns.iter().sum()
    }

    /// First episode whose best evaluation reached `threshold`.
    pub fn first_episode_reaching(&self, threshold: f64) -> Option<usize> {
        self.max_eval.iter().position(|&e| e >= threshold)
    }
}

/// Builds the primary learner from the trial's `init` and `replay` streams.
pub fn build_primary<E: Environment>(env: &E, cfg: &RunConfig, root: &RngStream) -> Result<PrimaryLearner, TrialError> {
    Ok(match &cfg.primary {
        PrimaryConfig::Tabular { alpha, gamma } => {
            PrimaryLearner::Tabular(TabularQ::new(env.num_actions(), *alpha, *gamma))
        }
        PrimaryConfig::Dqn(d) => {
            let input = env.features(&env.reset()).len();
            if let Some(cells) = env.cell_count() {
                if input != cells + 2 {
                    return Err(TrialError::Config(format!(
                        "grid features have {input} entries, expected {}",
                        cells + 2
                    )));
                }
            }
            let mut init = root.fork("init");
            PrimaryLearner::Dqn(DqnAgent::new(
                input,
                env.num_actions(),
                d.clone(),
                &mut init,
                root.fork("replay"),
            )?)
        }
    })
}

fn build_gate<E: Environment>(env: &E, cfg: &RunConfig, root: &RngStream) -> Result<BanditAgent, TrialError> {
    Ok(match cfg.secondary_kind {
        SecondaryKind::Tabular => BanditAgent::tabular(&cfg.secondary),
        SecondaryKind::Network => {
            let input = env.gate_features(&env.reset()).len();
            BanditAgent::network(input, &cfg.secondary, &mut root.fork("gate-init"))?
        }
    })
}

fn check_finite(value: f64, what: &str, episode: usize, step: usize) -> Result<(), TrialError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(TrialError::NonFinite(format!("{what} = {value} at episode {episode}, step {step}")))
    }
}

/// Runs one trial of LaGR with the configured query gating.
pub fn run_trial<E, B>(
    env: &E,
    cfg: &RunConfig,
    backend: &B,
    cache: &OracleCache,
    seed: u64,
) -> Result<TrialMetrics, TrialError>
where
    E: Extrapolate + DescribedTask,
    B: OracleBackend + ?Sized,
{
    cfg.validate()?;
    let started = Instant::now();
    let root = make_rng(seed);
    let mut primary = build_primary(env, cfg, &root)?;
    let mut gate = build_gate(env, cfg, &root)?;
    let mut rng_primary = root.fork("primary");
    let mut rng_secondary = root.fork("secondary");
    let mut rng_follow = root.fork("follow");
    let mut rng_cache = root.fork("cache");
    let descriptor = TaskDescriptor::for_env(env);
    let mut m = TrialMetrics::new(seed);
    let mut solution: Option<E::Pattern> = None;

    for episode in 0..cfg.episodes {
        let eps = cfg.primary_epsilon.epsilon_at(episode);
        let eps_gate = cfg.secondary_epsilon.epsilon_at(episode);
        let mut s = env.reset();
        let mut prev_r = 0.0;
        let mut ret = 0.0;
        let mut best = env.evaluate(&s);
        let mut queries = 0;
        let mut steps = 0;
        for step in 0..env.horizon() {
            let gate_open = solution.is_none() && prev_r > 0.0 && cfg.gating != Gating::Never;
            let mut gate_update = None;
            if gate_open {
                m.gate_open_steps += 1;
                let arm = match cfg.gating {
                    Gating::Always => QUERY,
                    _ => gate.select(env, &s, eps_gate, &mut rng_secondary)?,
                };
                let r_bar = if arm == QUERY {
                    queries += 1;
                    let pattern = env.pattern_of(&s);
                    let query = OracleQuery::new(env, &descriptor, &pattern, cfg.temperature)?;
                    let (accepted, fraction, from_cache, failed) =
                        match cached_query(cache, backend, env, &query, &mut rng_cache) {
                            Ok((resp, calls)) => {
                                m.backend_calls += calls;
                                m.cache_hits += usize::from(resp.served_from_cache);
                                match resp.parsed {
                                    Some(p) => {
                                        let ok = env.is_solution(&p);
                                        let frac = env.match_fraction(&p);
                                        if ok {
                                            m.found_at = Some((episode, step));
                                            m.solution = Some(env.render_pattern(&p));
                                            solution = Some(p);
                                        }
                                        (ok, frac, resp.served_from_cache, false)
                                    }
                                    None => (false, env.cell_count().map(|_| 0.0), resp.served_from_cache, false),
                                }
                            }
                            Err(e) => {
                                log::warn!("oracle query failed at episode {episode}, step {step}: {e}");
                                m.oracle_failures += 1;
                                (false, env.cell_count().map(|_| 0.0), false, true)
                            }
                        };
                    let r_bar = secondary_reward(cfg.secondary_reward, accepted, fraction)?;
                    m.query_log.push(QueryRecord {
                        episode,
                        step,
                        prev_reward: prev_r,
                        state: query.rendered_state,
                        accepted,
                        secondary_reward: r_bar,
                        served_from_cache: from_cache,
                        failed,
                    });
                    r_bar
                } else {
                    0.0
                };
                if cfg.gating == Gating::Seq {
                    gate_update = Some((arm, r_bar));
                }
            }

            let mut action = primary.choose(env, &s, eps, &mut rng_primary)?;
            if let Some(sol) = &solution {
                if rng_follow.coin(cfg.follow_probability) {
                    if let Some(a) = env.policy_action(sol, &s) {
                        action = a;
                    }
                }
            }
            let out = env.step(&s, action)?;
            check_finite(out.reward, "reward", episode, step)?;
            primary.learn(env, &s, action, out.reward, &out.next, out.terminal)?;
            m.primary_updates += 1;
            if let Some((arm, r_bar)) = gate_update {
                debug_assert!(arm == QUERY || arm == NO_QUERY);
                gate.update(env, &s, arm, r_bar)?;
                m.secondary_updates += 1;
            }
            m.actions.push(action);
            ret += out.reward;
            best = best.max(env.evaluate(&out.next));
            prev_r = out.reward;
            s = out.next;
            steps += 1;
            if out.terminal {
                break;
            }
        }
        check_finite(ret, "episode return", episode, steps)?;
        m.returns.push(ret);
        m.max_eval.push(best);
        m.steps.push(steps);
        m.queries.push(queries);
    }
    if let Some(sol) = &solution {
        debug_assert!(env.is_solution(sol));
    }
    m.wall_secs = started.elapsed().as_secs_f64();
    Ok(m)
}

/// Plain reinforcement learning with no oracle machinery at all.
pub fn run_baseline<E: Environment>(env: &E, cfg: &RunConfig, seed: u64) -> Result<TrialMetrics, TrialError> {
    cfg.validate()?;
    let started = Instant::now();
    let root = make_rng(seed);
    let mut primary = build_primary(env, cfg, &root)?;
    let mut rng_primary = root.fork("primary");
    let mut m = TrialMetrics::new(seed);
    for episode in 0..cfg.episodes {
        let eps = cfg.primary_epsilon.epsilon_at(episode);
        let mut s = env.reset();
        let mut ret = 0.0;
        let mut best = env.evaluate(&s);
        let mut steps = 0;
        for step in 0..env.horizon() {
            let action = primary.choose(env, &s, eps, &mut rng_primary)?;
            let out = env.step(&s, action)?;
            check_finite(out.reward, "reward", episode, step)?;
            primary.learn(env, &s, action, out.reward, &out.next, out.terminal)?;
            m.primary_updates += 1;
            m.actions.push(action);
            ret += out.reward;
            best = best.max(env.evaluate(&out.next));
            s = out.next;
            steps += 1;
            if out.terminal {
                break;
            }
        }
        m.returns.push(ret);
        m.max_eval.push(best);
        m.steps.push(steps);
        m.queries.push(0);
    }
    m.wall_secs = started.elapsed().as_secs_f64();
    Ok(m)
}
