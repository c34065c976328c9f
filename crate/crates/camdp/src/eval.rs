use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CamdpError, Result};
use crate::generate;
use crate::model::{AugmentedDynamics, FactoredCamdp, JointPolicy};

/// How a per-state value vector collapses to one scalar for policy comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Max,
    Mean,
}

impl std::fmt::Display for Aggregator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Aggregator::Max => write!(f, "max"),
            Aggregator::Mean => write!(f, "mean"),
        }
    }
}

impl std::str::FromStr for Aggregator {
    type Err = CamdpError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Aggregator::Max),
            "mean" => Ok(Aggregator::Mean),
            other => Err(CamdpError::Domain(format!("unknown aggregator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMethod {
    ExactSolve,
    IterativeSweep,
}

/// A policy evaluation: per-state discounted values plus solution metadata.
#[derive(Debug, Clone)]
pub struct EvaluationResult {
    pub v: DVector<f64>,
    pub gamma: f64,
    /// Average reward per transition, when requested via [`average_reward`].
    pub g: Option<f64>,
    pub method: EvalMethod,
    /// Max-norm Bellman residual of `v`.
    pub residual: f64,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(CamdpError::Domain(format!(
            "discount factor must be in [0,1), got {gamma}"
        )));
    }
    Ok(())
}

fn bellman_residual(dyn_: &AugmentedDynamics, gamma: f64, v: &DVector<f64>) -> f64 {
    let backup = &dyn_.r_exp + gamma * &dyn_.pbar * v;
    (v - backup).amax()
}

/// Solves (I - gamma * pbar) v = r_exp directly.
pub fn evaluate_exact(dyn_: &AugmentedDynamics, gamma: f64) -> Result<EvaluationResult> {
    check_gamma(gamma)?;
    let n = dyn_.n_states();
    let a = DMatrix::identity(n, n) - gamma * &dyn_.pbar;
    let v = a
        .lu()
        .solve(&dyn_.r_exp)
        .ok_or_else(|| CamdpError::Numeric("singular discounted system".into()))?;
    let residual = bellman_residual(dyn_, gamma, &v);
    Ok(EvaluationResult {
        v,
        gamma,
        g: None,
        method: EvalMethod::ExactSolve,
        residual,
    })
}

/// Repeated Bellman backups until the max per-state change drops below
/// `theta`; the result is within theta/(1-gamma) of the exact solution.
pub fn evaluate_iterative(
    dyn_: &AugmentedDynamics,
    gamma: f64,
    theta: f64,
) -> Result<EvaluationResult> {
    check_gamma(gamma)?;
    if theta <= 0.0 || theta.is_nan() {
        return Err(CamdpError::Domain(format!(
            "evaluation tolerance must be positive, got {theta}"
        )));
    }
    let mut v = DVector::zeros(dyn_.n_states());
    loop {
        let next = &dyn_.r_exp + gamma * &dyn_.pbar * &v;
        let delta = (&next - &v).amax();
        v = next;
        if delta < theta {
            break;
        }
    }
    let residual = bellman_residual(dyn_, gamma, &v);
    Ok(EvaluationResult {
        v,
        gamma,
        g: None,
        method: EvalMethod::IterativeSweep,
        residual,
    })
}

/// Average reward per transition: stationary distribution dotted with the
/// expected immediate rewards. Requires an irreducible, aperiodic chain.
pub fn average_reward(dyn_: &AugmentedDynamics) -> Result<f64> {
    let qp = generate::quasi_positivity(dyn_);
    if !qp.irreducible {
        return Err(CamdpError::Structure(
            "average reward undefined: transition matrix is reducible".into(),
        ));
    }
    if !qp.aperiodic {
        return Err(CamdpError::Structure(
            "average reward undefined: transition matrix is periodic".into(),
        ));
    }
    let mu = stationary_distribution(&dyn_.pbar)?;
    Ok(mu.dot(&dyn_.r_exp))
}

/// Solves mu * pbar = mu with sum(mu) = 1 by replacing one balance equation
/// with the normalization row.
pub fn stationary_distribution(pbar: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = pbar.nrows();
    let mut a = pbar.transpose() - DMatrix::identity(n, n);
    let mut b = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    let mu = a
        .lu()
        .solve(&b)
        .ok_or_else(|| CamdpError::Numeric("stationary distribution solve failed".into()))?;
    let total: f64 = mu.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CamdpError::Numeric(format!(
            "stationary distribution sums to {total}, expected 1"
        )));
    }
    Ok(mu)
}

/// Collapses a value vector to one scalar.
pub fn scalar_of(v: &DVector<f64>, aggregator: Aggregator) -> f64 {
    match aggregator {
        Aggregator::Max => v.max(),
        Aggregator::Mean => v.mean(),
    }
}

pub fn scalar_value(result: &EvaluationResult, aggregator: Aggregator) -> f64 {
    scalar_of(&result.v, aggregator)
}

/// Memoizes exact evaluations per joint policy at a fixed discount factor.
///
/// Iteration drivers and the enumeration pass revisit the same policies many
/// times; sharing one cache makes the full-matrix analyses cheap.
pub struct ValueCache {
    gamma: f64,
    map: HashMap<JointPolicy, Rc<DVector<f64>>>,
}

impl ValueCache {
    pub fn new(gamma: f64) -> Self {
        ValueCache {
            gamma,
            map: HashMap::new(),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn value(
        &mut self,
        model: &FactoredCamdp,
        policy: &JointPolicy,
    ) -> Result<Rc<DVector<f64>>> {
        if let Some(v) = self.map.get(policy) {
            return Ok(Rc::clone(v));
        }
        let dyn_ = model.augment(policy)?;
        let result = evaluate_exact(&dyn_, self.gamma)?;
        let v = Rc::new(result.v);
        self.map.insert(policy.clone(), Rc::clone(&v));
        Ok(v)
    }

    pub fn scalar(
        &mut self,
        model: &FactoredCamdp,
        policy: &JointPolicy,
        aggregator: Aggregator,
    ) -> Result<f64> {
        let v = self.value(model, policy)?;
        Ok(scalar_of(&v, aggregator))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
