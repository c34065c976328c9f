use serde::{Deserialize, Serialize};

use crate::equilibrium::{enumerate_value_matrix, ValueMatrix};
use crate::error::{CamdpError, Result};
use crate::eval::Aggregator;
use crate::model::{policy_index, Dims, FactoredCamdp};
use crate::policy::{Agent, SolverConfig};

/// Ties groups of one agent's policy cells to a shared action, shrinking the
/// agent's policy space from na^cells to na^classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConstraint {
    pub agent: Agent,
    /// Partition of the agent's policy cells; cells in one class must pick
    /// the same action.
    pub classes: Vec<Vec<usize>>,
    pub label: String,
}

impl PolicyConstraint {
    pub fn new(agent: Agent, classes: Vec<Vec<usize>>, label: impl Into<String>) -> Self {
        PolicyConstraint {
            agent,
            classes,
            label: label.into(),
        }
    }

    fn n_cells(&self, dims: &Dims) -> usize {
        match self.agent {
            Agent::Agent0 => dims.cells0(),
            Agent::Agent1 => dims.cells1(),
        }
    }

    fn n_actions(&self, dims: &Dims) -> usize {
        match self.agent {
            Agent::Agent0 => dims.na0,
            Agent::Agent1 => dims.na1,
        }
    }

    /// Checks that the classes cover every policy cell exactly once.
    pub fn validate(&self, dims: &Dims) -> Result<()> {
        let n = self.n_cells(dims);
        let mut seen = vec![false; n];
        for class in &self.classes {
            if class.is_empty() {
                return Err(CamdpError::Validation(format!(
                    "constraint '{}' contains an empty class",
                    self.label
                )));
            }
            for &cell in class {
                if cell >= n {
                    return Err(CamdpError::Validation(format!(
                        "constraint '{}' references cell {cell} but {} has only {n} cells",
                        self.label, self.agent
                    )));
                }
                if seen[cell] {
                    return Err(CamdpError::Validation(format!(
                        "constraint '{}' assigns cell {cell} to more than one class",
                        self.label
                    )));
                }
                seen[cell] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(CamdpError::Validation(format!(
                "constraint '{}' leaves cell {missing} unassigned",
                self.label
            )));
        }
        Ok(())
    }

    /// Expands the constraint to the full list of admissible sub-policies,
    /// in mixed-radix order over class actions (class 0 most significant).
    pub fn admissible_policies(&self, dims: &Dims) -> Result<Vec<Vec<usize>>> {
        self.validate(dims)?;
        let na = self.n_actions(dims);
        let n_cells = self.n_cells(dims);
        let k = self.classes.len();
        let count = na.pow(k as u32);
        let mut out = Vec::with_capacity(count);
        let mut assignment = vec![0usize; k];
        loop {
            let mut policy = vec![0usize; n_cells];
            for (class, &action) in self.classes.iter().zip(&assignment) {
                for &cell in class {
                    policy[cell] = action;
                }
            }
            out.push(policy);
            let mut pos = k;
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                assignment[pos] += 1;
                if assignment[pos] < na {
                    break;
                }
                assignment[pos] = 0;
            }
        }
    }
}

/// Named constraint presets accepted by the CLI.
pub fn preset(name: &str, dims: &Dims) -> Result<PolicyConstraint> {
    let by_first = |n_first: usize, nss: usize| -> Vec<Vec<usize>> {
        (0..n_first)
            .map(|f| (0..nss).map(|ss| f * nss + ss).collect())
            .collect()
    };
    let by_shared = |n_first: usize, nss: usize| -> Vec<Vec<usize>> {
        (0..nss)
            .map(|ss| (0..n_first).map(|f| f * nss + ss).collect())
            .collect()
    };
    match name {
        "s0-only" => Ok(PolicyConstraint::new(
            Agent::Agent0,
            by_first(dims.ns0, dims.nss),
            "pi0 depends on s0 only",
        )),
        "ss-only" => Ok(PolicyConstraint::new(
            Agent::Agent0,
            by_shared(dims.ns0, dims.nss),
            "pi0 depends on the shared state only",
        )),
        "s1-only" => Ok(PolicyConstraint::new(
            Agent::Agent1,
            by_first(dims.ns1, dims.nss),
            "pi1 depends on s1 only",
        )),
        other => Err(CamdpError::Validation(format!(
            "unknown constraint preset '{other}' (expected s0-only, ss-only, or s1-only)"
        ))),
    }
}

/// Value-loss accounting for one constraint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionReport {
    pub label: String,
    pub agent: Agent,
    pub original_count: usize,
    pub reduced_count: usize,
    pub best_original: f64,
    pub best_reduced: f64,
    /// best_original - best_reduced; never negative.
    pub delta_v: f64,
    /// max - min scalar value over constrained sub-policies crossed with all
    /// opponent sub-policies.
    pub spread: f64,
    pub gamma: f64,
    pub aggregator: Aggregator,
}

/// Sub-policies of `agent` whose best achievable value against any opponent
/// sub-policy is at most `threshold`. Never lists a sub-policy that takes
/// part in an equilibrium valued above the threshold.
pub fn prune_by_value(vm: &ValueMatrix, threshold: f64, agent: Agent) -> Vec<Vec<usize>> {
    match agent {
        Agent::Agent0 => vm
            .row_policies
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                vm.values[*i]
                    .iter()
                    .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                    <= threshold
            })
            .map(|(_, p)| p.clone())
            .collect(),
        Agent::Agent1 => vm
            .col_policies
            .iter()
            .enumerate()
            .filter(|(j, _)| {
                vm.values
                    .iter()
                    .map(|row| row[*j])
                    .fold(f64::NEG_INFINITY, f64::max)
                    <= threshold
            })
            .map(|(_, p)| p.clone())
            .collect(),
    }
}

/// Enumerates the constrained agent's admissible sub-policies against every
/// opponent sub-policy and reports the value lost to the constraint.
pub fn constrained_best(
    model: &FactoredCamdp,
    constraint: &PolicyConstraint,
    cfg: &SolverConfig,
) -> Result<ReductionReport> {
    let admissible = constraint.admissible_policies(&model.dims)?;
    let vm = enumerate_value_matrix(model, cfg)?;
    let na = constraint.n_actions(&model.dims);
    let mut best = f64::NEG_INFINITY;
    let mut worst = f64::INFINITY;
    for policy in &admissible {
        let k = policy_index(policy, na);
        let line: Box<dyn Iterator<Item = f64>> = match constraint.agent {
            Agent::Agent0 => Box::new(vm.values[k].iter().copied()),
            Agent::Agent1 => Box::new(vm.values.iter().map(move |row| row[k])),
        };
        for v in line {
            best = best.max(v);
            worst = worst.min(v);
        }
    }
    let (original_count, best_original) = match constraint.agent {
        Agent::Agent0 => (vm.n_rows(), vm.max_value()),
        Agent::Agent1 => (vm.n_cols(), vm.max_value()),
    };
    Ok(ReductionReport {
        label: constraint.label.clone(),
        agent: constraint.agent,
        original_count,
        reduced_count: admissible.len(),
        best_original,
        best_reduced: best,
        delta_v: best_original - best,
        spread: best - worst,
        gamma: cfg.gamma,
        aggregator: cfg.aggregator,
    })
}
