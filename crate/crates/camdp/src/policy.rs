use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CamdpError, Result};
use crate::eval::{scalar_of, Aggregator, ValueCache};
use crate::model::{FactoredCamdp, JointPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    Agent0,
    Agent1,
}

impl std::fmt::Display for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Agent::Agent0 => write!(f, "agent0"),
            Agent::Agent1 => write!(f, "agent1"),
        }
    }
}

impl std::str::FromStr for Agent {
    type Err = CamdpError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "agent0" => Ok(Agent::Agent0),
            "agent1" => Ok(Agent::Agent1),
            other => Err(CamdpError::Domain(format!("unknown agent '{other}'"))),
        }
    }
}

impl Agent {
    pub fn other(self) -> Agent {
        match self {
            Agent::Agent0 => Agent::Agent1,
            Agent::Agent1 => Agent::Agent0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImprovementMode {
    FullInfo,
    PartialInfo,
}

/// Deterministic tie handling; argmax scans actions in ascending index order
/// and keeps the first maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    LowestActionIndex,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    pub gamma: f64,
    pub theta: f64,
    pub epsilon_explore: f64,
    pub eta: f64,
    pub max_iterations: usize,
    pub aggregator: Aggregator,
    pub first_mover: Agent,
    pub improvement_mode: ImprovementMode,
    pub tie_break: TieBreak,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 0.9,
            theta: 1e-6,
            epsilon_explore: 0.1,
            eta: 0.0,
            max_iterations: 1000,
            aggregator: Aggregator::Max,
            first_mover: Agent::Agent0,
            improvement_mode: ImprovementMode::FullInfo,
            tie_break: TieBreak::LowestActionIndex,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(CamdpError::Domain(format!(
                "gamma must be in [0,1), got {}",
                self.gamma
            )));
        }
        if self.theta <= 0.0 || self.theta.is_nan() {
            return Err(CamdpError::Domain(format!(
                "theta must be positive, got {}",
                self.theta
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon_explore) {
            return Err(CamdpError::Domain(format!(
                "epsilon_explore must be in [0,1], got {}",
                self.epsilon_explore
            )));
        }
        if self.eta < 0.0 || self.eta.is_nan() {
            return Err(CamdpError::Domain(format!(
                "eta must be non-negative, got {}",
                self.eta
            )));
        }
        if self.max_iterations < 1 {
            return Err(CamdpError::Domain(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Who changed the joint policy in one trace step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mover {
    Agent0,
    Agent1,
    /// Simultaneous rounds apply both switches at once.
    Both,
}

impl From<Agent> for Mover {
    fn from(a: Agent) -> Self {
        match a {
            Agent::Agent0 => Mover::Agent0,
            Agent::Agent1 => Mover::Agent1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Converged,
    Oscillating,
    MaxIterations,
}

/// One driver step: the joint policy after the move, evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub mover: Mover,
    pub policy: JointPolicy,
    pub scalar_value: f64,
    pub v: Vec<f64>,
}

/// One accepted improvement sweep, kept for monotonicity auditing.
///
/// `min_delta_v` is the smallest per-state value change the sweep produced;
/// under a consistent full-information sweep it is never materially negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRecord {
    pub agent: Agent,
    pub consistent: bool,
    pub min_delta_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub steps: Vec<TraceStep>,
    pub outcome: Outcome,
    /// The repeating joint-policy subsequence, when oscillating.
    pub cycle: Option<Vec<JointPolicy>>,
    /// Per-agent counts of policy-cell changes over the whole run.
    pub switch_counts: [usize; 2],
    /// Accepted improvement sweeps, in order.
    pub improvements: Vec<ImprovementRecord>,
}

impl IterationTrace {
    pub fn final_policy(&self) -> Option<&JointPolicy> {
        self.steps.last().map(|s| &s.policy)
    }

    pub fn final_scalar(&self) -> Option<f64> {
        self.steps.last().map(|s| s.scalar_value)
    }
}

/// Action value at one composite state `(s0, ss, s1)` for a candidate action
/// pair: expected immediate reward plus discounted expected continuation.
fn q_value(
    model: &FactoredCamdp,
    (s0, ss, s1): (usize, usize, usize),
    a0: usize,
    a1: usize,
    gamma: f64,
    v: &DVector<f64>,
) -> f64 {
    let d = &model.dims;
    let p0_row = &model.p0[a0][s0];
    let ps_row = &model.ps[a0][a1][ss];
    let p1_row = &model.p1[a1][s1];
    let r0_row = &model.r0[a0][s0];
    let rs_row = &model.rs[a0][a1][ss];
    let r1_row = &model.r1[a1][s1];
    let mut q = 0.0;
    for t0 in 0..d.ns0 {
        for ts in 0..d.nss {
            for t1 in 0..d.ns1 {
                let j = t0 * (d.nss * d.ns1) + ts * d.ns1 + t1;
                let p = p0_row[t0] * ps_row[ts] * p1_row[t1];
                let r = r0_row[t0] * rs_row[ts] * r1_row[t1];
                q += p * (r + gamma * v[j]);
            }
        }
    }
    q
}

fn argmax_lowest(q: &[f64]) -> usize {
    q.iter()
        .enumerate()
        .fold(0, |acc, (a, &val)| if val > q[acc] { a } else { acc })
}

/// Per-cell improvement proposal for one agent.
#[derive(Debug, Clone)]
struct CellDecision {
    candidate: usize,
    /// Whether the per-state argmax agreed across the unobserved coordinate.
    agreed: bool,
    /// Best Q-gain of the candidate over the current action at any covered
    /// composite state.
    max_gain: f64,
}

/// Result of one improvement sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImproveOutcome {
    pub policy: Vec<usize>,
    pub changed: bool,
    /// True when every cell's argmax agreed across the unobserved coordinate.
    pub consistent: bool,
}

/// One greedy improvement sweep for `which` against the evaluated values `v`.
///
/// Full-information mode adopts a cell's argmax when it agrees across the
/// unobserved state coordinate and falls back to the uniform-average Q argmax
/// when it does not; partial-information mode always uses the average.
pub fn improve_agent(
    model: &FactoredCamdp,
    policy: &JointPolicy,
    v: &DVector<f64>,
    cfg: &SolverConfig,
    which: Agent,
) -> Result<ImproveOutcome> {
    policy.validate_for(&model.dims)?;
    if v.len() != model.n_states() {
        return Err(CamdpError::Dimension(format!(
            "value vector length {} does not match {} states",
            v.len(),
            model.n_states()
        )));
    }
    let decisions = cell_decisions_gamma(model, policy, v, cfg.improvement_mode, which, cfg.gamma);
    let current = match which {
        Agent::Agent0 => &policy.pi0,
        Agent::Agent1 => &policy.pi1,
    };
    let new: Vec<usize> = decisions.iter().map(|d| d.candidate).collect();
    let changed = &new != current;
    let consistent = decisions.iter().all(|d| d.agreed);
    Ok(ImproveOutcome {
        policy: new,
        changed,
        consistent,
    })
}

fn cell_decisions_gamma(
    model: &FactoredCamdp,
    policy: &JointPolicy,
    v: &DVector<f64>,
    mode: ImprovementMode,
    which: Agent,
    gamma: f64,
) -> Vec<CellDecision> {
    let d = &model.dims;
    let (n_obs, n_unobs, n_actions) = match which {
        Agent::Agent0 => (d.ns0, d.ns1, d.na0),
        Agent::Agent1 => (d.ns1, d.ns0, d.na1),
    };
    let mut out = Vec::with_capacity(n_obs * d.nss);
    for obs in 0..n_obs {
        for ss in 0..d.nss {
            let cell = obs * d.nss + ss;
            let mut qs: Vec<Vec<f64>> = Vec::with_capacity(n_unobs);
            for unobs in 0..n_unobs {
                let mut q = Vec::with_capacity(n_actions);
                for a in 0..n_actions {
                    let val = match which {
                        Agent::Agent0 => {
                            let a1 = policy.pi1[unobs * d.nss + ss];
                            q_value(model, (obs, ss, unobs), a, a1, gamma, v)
                        }
                        Agent::Agent1 => {
                            let a0 = policy.pi0[unobs * d.nss + ss];
                            q_value(model, (unobs, ss, obs), a0, a, gamma, v)
                        }
                    };
                    q.push(val);
                }
                qs.push(q);
            }
            let args: Vec<usize> = qs.iter().map(|q| argmax_lowest(q)).collect();
            let agreed = args.iter().all(|&a| a == args[0]);
            let candidate = if agreed && mode == ImprovementMode::FullInfo {
                args[0]
            } else {
                let avg: Vec<f64> = (0..n_actions)
                    .map(|a| qs.iter().map(|q| q[a]).sum::<f64>() / n_unobs as f64)
                    .collect();
                argmax_lowest(&avg)
            };
            let cur = match which {
                Agent::Agent0 => policy.pi0[cell],
                Agent::Agent1 => policy.pi1[cell],
            };
            let max_gain = qs
                .iter()
                .map(|q| q[candidate] - q[cur])
                .fold(f64::NEG_INFINITY, f64::max);
            out.push(CellDecision {
                candidate,
                agreed,
                max_gain,
            });
        }
    }
    out
}

/// Threshold improvement sweep for Agent 0: a cell switches only when the
/// candidate's Q-gain over the current action reaches `cfg.eta` at some
/// covered composite state. At eta = 0 this is exactly [`improve_agent`].
pub fn revised_improve(
    model: &FactoredCamdp,
    policy: &JointPolicy,
    v: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<ImproveOutcome> {
    policy.validate_for(&model.dims)?;
    if v.len() != model.n_states() {
        return Err(CamdpError::Dimension(format!(
            "value vector length {} does not match {} states",
            v.len(),
            model.n_states()
        )));
    }
    let decisions = cell_decisions_gamma(
        model,
        policy,
        v,
        cfg.improvement_mode,
        Agent::Agent0,
        cfg.gamma,
    );
    let mut new = policy.pi0.clone();
    for (cell, d) in decisions.iter().enumerate() {
        if d.candidate != new[cell] && d.max_gain >= cfg.eta {
            new[cell] = d.candidate;
        }
    }
    let changed = new != policy.pi0;
    let consistent = decisions.iter().all(|d| d.agreed);
    Ok(ImproveOutcome {
        policy: new,
        changed,
        consistent,
    })
}

/// Value-loss ceiling of the threshold pipeline: eta * (I - gamma * P)^-1 * 1
/// under the optimal joint policy.
pub fn loss_bound(
    model: &FactoredCamdp,
    pi_star: &JointPolicy,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    cfg.validate()?;
    let dyn_ = model.augment(pi_star)?;
    let n = dyn_.n_states();
    let a = DMatrix::identity(n, n) - cfg.gamma * &dyn_.pbar;
    let ones = DVector::from_element(n, 1.0);
    let x = a
        .lu()
        .solve(&ones)
        .ok_or_else(|| CamdpError::Numeric("singular discounted system".into()))?;
    Ok(cfg.eta * x)
}

fn joint_with(which: Agent, own: &[usize], other: &[usize]) -> JointPolicy {
    match which {
        Agent::Agent0 => JointPolicy::new(own.to_vec(), other.to_vec()),
        Agent::Agent1 => JointPolicy::new(other.to_vec(), own.to_vec()),
    }
}

fn cell_diff(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Inner policy iteration for one agent against a fixed opponent, recording
/// each accepted sweep into `records`.
fn best_response_traced(
    model: &FactoredCamdp,
    other: &[usize],
    start: &[usize],
    cfg: &SolverConfig,
    which: Agent,
    cache: &mut ValueCache,
    records: &mut Vec<ImprovementRecord>,
) -> Result<Vec<usize>> {
    let mut current = start.to_vec();
    let mut visited: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for _ in 0..cfg.max_iterations {
        let joint = joint_with(which, &current, other);
        let v = cache.value(model, &joint)?;
        let out = improve_agent(model, &joint, &v, cfg, which)?;
        if !out.changed {
            return Ok(current);
        }
        let new_joint = joint_with(which, &out.policy, other);
        let v_new = cache.value(model, &new_joint)?;
        let min_delta = (0..v.len())
            .map(|i| v_new[i] - v[i])
            .fold(f64::INFINITY, f64::min);
        records.push(ImprovementRecord {
            agent: which,
            consistent: out.consistent,
            min_delta_v: min_delta,
        });
        visited.push((joint.pi0.clone(), joint.pi1.clone()));
        // A revisit means the deterministic improvement cycles; the loop can
        // never stabilize, so report non-convergence without burning the cap.
        if visited.contains(&(new_joint.pi0.clone(), new_joint.pi1.clone())) {
            visited.push((new_joint.pi0, new_joint.pi1));
            return Err(CamdpError::NonConvergence {
                iterations: visited.len() - 1,
                partial: visited,
            });
        }
        current = out.policy;
    }
    let last = joint_with(which, &current, other);
    visited.push((last.pi0, last.pi1));
    Err(CamdpError::NonConvergence {
        iterations: cfg.max_iterations,
        partial: visited,
    })
}

/// Greedy-optimal sub-policy of `which` against the fixed opponent policy,
/// found by single-agent policy iteration from `start`.
pub fn best_response(
    model: &FactoredCamdp,
    other: &[usize],
    start: &[usize],
    cfg: &SolverConfig,
    which: Agent,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    let mut cache = ValueCache::new(cfg.gamma);
    let mut records = Vec::new();
    best_response_traced(model, other, start, cfg, which, &mut cache, &mut records)
}

fn push_step(
    steps: &mut Vec<TraceStep>,
    model: &FactoredCamdp,
    cache: &mut ValueCache,
    mover: Mover,
    policy: &JointPolicy,
    aggregator: Aggregator,
) -> Result<()> {
    let v = cache.value(model, policy)?;
    steps.push(TraceStep {
        mover,
        policy: policy.clone(),
        scalar_value: scalar_of(&v, aggregator),
        v: v.as_slice().to_vec(),
    });
    Ok(())
}

/// Collapses consecutive duplicates in a policy sequence.
fn dedup_cycle(window: &[JointPolicy]) -> Vec<JointPolicy> {
    let mut out: Vec<JointPolicy> = Vec::new();
    for p in window {
        if out.last() != Some(p) {
            out.push(p.clone());
        }
    }
    out
}

/// Alternating best-response iteration: agents take turns computing full best
/// responses until a round leaves the joint policy unchanged, a round-start
/// policy repeats (oscillation), or the iteration cap is hit.
pub fn alternate_iterate(
    model: &FactoredCamdp,
    initial: &JointPolicy,
    cfg: &SolverConfig,
) -> Result<IterationTrace> {
    cfg.validate()?;
    initial.validate_for(&model.dims)?;
    let mut cache = ValueCache::new(cfg.gamma);
    alternate_iterate_cached(model, initial, cfg, &mut cache)
}

/// [`alternate_iterate`] against a shared evaluation cache.
pub fn alternate_iterate_cached(
    model: &FactoredCamdp,
    initial: &JointPolicy,
    cfg: &SolverConfig,
    cache: &mut ValueCache,
) -> Result<IterationTrace> {
    let mut current = initial.clone();
    let mut steps = Vec::new();
    let mut records = Vec::new();
    let mut switch_counts = [0usize, 0usize];
    let mut seen: HashMap<JointPolicy, usize> = HashMap::new();
    let mut round_starts: Vec<JointPolicy> = Vec::new();

    for round in 0..cfg.max_iterations {
        if let Some(&first) = seen.get(&current) {
            let cycle = dedup_cycle(&round_starts[first..]);
            return Ok(IterationTrace {
                steps,
                outcome: Outcome::Oscillating,
                cycle: Some(cycle),
                switch_counts,
                improvements: records,
            });
        }
        seen.insert(current.clone(), round);
        round_starts.push(current.clone());
        let round_start = current.clone();

        for mover in [cfg.first_mover, cfg.first_mover.other()] {
            let (own, other): (&[usize], &[usize]) = match mover {
                Agent::Agent0 => (&current.pi0, &current.pi1),
                Agent::Agent1 => (&current.pi1, &current.pi0),
            };
            let new = best_response_traced(model, other, own, cfg, mover, cache, &mut records)?;
            match mover {
                Agent::Agent0 => {
                    switch_counts[0] += cell_diff(&new, &current.pi0);
                    current.pi0 = new;
                }
                Agent::Agent1 => {
                    switch_counts[1] += cell_diff(&new, &current.pi1);
                    current.pi1 = new;
                }
            }
            push_step(
                &mut steps,
                model,
                cache,
                mover.into(),
                &current,
                cfg.aggregator,
            )?;
        }

        if current == round_start {
            return Ok(IterationTrace {
                steps,
                outcome: Outcome::Converged,
                cycle: None,
                switch_counts,
                improvements: records,
            });
        }
    }
    Ok(IterationTrace {
        steps,
        outcome: Outcome::MaxIterations,
        cycle: None,
        switch_counts,
        improvements: records,
    })
}

/// Simultaneous update rule: both agents compute best responses against the
/// round's opening policies, then both switch at once.
pub fn simultaneous_iterate(
    model: &FactoredCamdp,
    initial: &JointPolicy,
    cfg: &SolverConfig,
) -> Result<IterationTrace> {
    cfg.validate()?;
    initial.validate_for(&model.dims)?;
    let mut cache = ValueCache::new(cfg.gamma);
    let mut current = initial.clone();
    let mut steps = Vec::new();
    let mut records = Vec::new();
    let mut switch_counts = [0usize, 0usize];
    let mut seen: HashMap<JointPolicy, usize> = HashMap::new();
    let mut round_starts: Vec<JointPolicy> = Vec::new();

    for round in 0..cfg.max_iterations {
        if let Some(&first) = seen.get(&current) {
            let cycle = dedup_cycle(&round_starts[first..]);
            return Ok(IterationTrace {
                steps,
                outcome: Outcome::Oscillating,
                cycle: Some(cycle),
                switch_counts,
                improvements: records,
            });
        }
        seen.insert(current.clone(), round);
        round_starts.push(current.clone());

        let new0 = best_response_traced(
            model,
            &current.pi1,
            &current.pi0,
            cfg,
            Agent::Agent0,
            &mut cache,
            &mut records,
        )?;
        let new1 = best_response_traced(
            model,
            &current.pi0,
            &current.pi1,
            cfg,
            Agent::Agent1,
            &mut cache,
            &mut records,
        )?;
        let next = JointPolicy::new(new0, new1);
        switch_counts[0] += cell_diff(&next.pi0, &current.pi0);
        switch_counts[1] += cell_diff(&next.pi1, &current.pi1);
        let unchanged = next == current;
        current = next;
        push_step(
            &mut steps,
            model,
            &mut cache,
            Mover::Both,
            &current,
            cfg.aggregator,
        )?;
        if unchanged {
            return Ok(IterationTrace {
                steps,
                outcome: Outcome::Converged,
                cycle: None,
                switch_counts,
                improvements: records,
            });
        }
    }
    Ok(IterationTrace {
        steps,
        outcome: Outcome::MaxIterations,
        cycle: None,
        switch_counts,
        improvements: records,
    })
}

/// Less-greedy cooperative iteration: per iteration Agent 0 evaluates and
/// performs one improvement sweep (threshold sweep when eta > 0), then
/// Agent 1 evaluates and performs one per-cell epsilon-greedy sweep.
///
/// With exploration disabled the loop stops on the first fully stable round;
/// with exploration enabled it runs the full iteration budget, since a later
/// random draw can always move the policy again. Deterministic given the
/// seed: per round, Agent 1's cells are visited in index order, each drawing
/// one uniform in [0,1), plus one uniform action index when it explores.
pub fn epsilon_greedy_iterate(
    model: &FactoredCamdp,
    initial: &JointPolicy,
    cfg: &SolverConfig,
) -> Result<IterationTrace> {
    cfg.validate()?;
    initial.validate_for(&model.dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cache = ValueCache::new(cfg.gamma);
    let mut current = initial.clone();
    let mut steps = Vec::new();
    let mut records = Vec::new();
    let mut switch_counts = [0usize, 0usize];

    for _ in 0..cfg.max_iterations {
        // Agent 0: evaluate, one greedy (or threshold) sweep.
        let v0 = cache.value(model, &current)?;
        let out0 = if cfg.eta > 0.0 {
            revised_improve(model, &current, &v0, cfg)?
        } else {
            improve_agent(model, &current, &v0, cfg, Agent::Agent0)?
        };
        let changed0 = out0.changed;
        if changed0 {
            switch_counts[0] += cell_diff(&out0.policy, &current.pi0);
            let next = JointPolicy::new(out0.policy, current.pi1.clone());
            let v_new = cache.value(model, &next)?;
            let min_delta = (0..v0.len())
                .map(|i| v_new[i] - v0[i])
                .fold(f64::INFINITY, f64::min);
            records.push(ImprovementRecord {
                agent: Agent::Agent0,
                consistent: out0.consistent,
                min_delta_v: min_delta,
            });
            current = next;
        }
        push_step(
            &mut steps,
            model,
            &mut cache,
            Mover::Agent0,
            &current,
            cfg.aggregator,
        )?;

        // Agent 1: evaluate, one epsilon-greedy sweep.
        let v1 = cache.value(model, &current)?;
        let greedy = improve_agent(model, &current, &v1, cfg, Agent::Agent1)?;
        let mut new1 = current.pi1.clone();
        let mut explored = false;
        for (cell, action) in new1.iter_mut().enumerate() {
            let draw: f64 = rng.gen();
            if draw < cfg.epsilon_explore {
                explored = true;
                *action = rng.gen_range(0..model.dims.na1);
            } else {
                *action = greedy.policy[cell];
            }
        }
        let changed1 = new1 != current.pi1;
        if changed1 {
            switch_counts[1] += cell_diff(&new1, &current.pi1);
            let next = JointPolicy::new(current.pi0.clone(), new1);
            if !explored {
                let v_new = cache.value(model, &next)?;
                let min_delta = (0..v1.len())
                    .map(|i| v_new[i] - v1[i])
                    .fold(f64::INFINITY, f64::min);
                records.push(ImprovementRecord {
                    agent: Agent::Agent1,
                    consistent: greedy.consistent,
                    min_delta_v: min_delta,
                });
            }
            current = next;
        }
        push_step(
            &mut steps,
            model,
            &mut cache,
            Mover::Agent1,
            &current,
            cfg.aggregator,
        )?;

        if cfg.epsilon_explore == 0.0 && !changed0 && !changed1 {
            return Ok(IterationTrace {
                steps,
                outcome: Outcome::Converged,
                cycle: None,
                switch_counts,
                improvements: records,
            });
        }
    }
    Ok(IterationTrace {
        steps,
        outcome: Outcome::MaxIterations,
        cycle: None,
        switch_counts,
        improvements: records,
    })
}
