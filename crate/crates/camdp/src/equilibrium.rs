use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CamdpError, Result};
use crate::eval::{Aggregator, ValueCache};
use crate::model::{FactoredCamdp, JointPolicy};
use crate::policy::{alternate_iterate_cached, Agent, Outcome, SolverConfig};

/// Largest joint-policy count the exhaustive analyses will enumerate.
pub const ENUMERATION_CAP: usize = 65536;

/// Absolute tolerance for value comparisons after exact solves; dominance,
/// equilibrium, and global-optimum tests all share it.
pub const VALUE_TOL: f64 = 1e-9;

/// Scalar values of every joint policy: rows index Agent 0 sub-policies,
/// columns Agent 1 sub-policies, both in mixed-radix enumeration order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueMatrix {
    pub values: Vec<Vec<f64>>,
    pub gamma: f64,
    pub aggregator: Aggregator,
    /// Smallest |V(i,j) - V(i',j')| over distinct cells; zero iff two cells tie.
    pub min_gap: f64,
    pub row_policies: Vec<Vec<usize>>,
    pub col_policies: Vec<Vec<usize>>,
}

impl ValueMatrix {
    pub fn n_rows(&self) -> usize {
        self.row_policies.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_policies.len()
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    fn row_max(&self, i: usize) -> f64 {
        self.values[i]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    fn col_max(&self, j: usize) -> f64 {
        self.values
            .iter()
            .map(|row| row[j])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCell {
    pub row: usize,
    pub col: usize,
    pub pi0: Vec<usize>,
    pub pi1: Vec<usize>,
    pub value: f64,
}

/// The dominating row or column certifying the uniqueness condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DominanceWitness {
    Row(usize),
    Col(usize),
}

/// Results of the three structural condition checks plus the equilibrium
/// landscape of one model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    /// A single row or column dominates the whole matrix.
    pub cond1: bool,
    pub cond1_witness: Option<DominanceWitness>,
    /// Alternating best response converges to a pure Nash equilibrium from
    /// every initial joint policy, under both mover orders.
    pub cond2: bool,
    /// Every such run reaches the global value-matrix maximum.
    pub cond3: bool,
    pub n_dc: usize,
    pub n_dr: usize,
    pub ne_bound: usize,
    pub nash_equilibria: Vec<NashCell>,
    /// Terminal policy (or non-converged outcome) mapped to the number of
    /// initial joint policies reaching it, across both mover orders.
    pub basin: BTreeMap<String, usize>,
    pub gamma: f64,
    pub aggregator: Aggregator,
    pub min_gap: f64,
}

fn enumeration_size(model: &FactoredCamdp) -> Result<(usize, usize)> {
    let d = &model.dims;
    let rows = (d.na0 as u128).checked_pow(d.cells0() as u32);
    let cols = (d.na1 as u128).checked_pow(d.cells1() as u32);
    let total = rows.zip(cols).and_then(|(r, c)| r.checked_mul(c));
    match (rows, cols, total) {
        (Some(r), Some(c), Some(t)) if t <= ENUMERATION_CAP as u128 => Ok((r as usize, c as usize)),
        (_, _, t) => Err(CamdpError::SizeCap {
            actual: t.map_or(usize::MAX, |t| t.min(usize::MAX as u128) as usize),
            cap: ENUMERATION_CAP,
        }),
    }
}

/// Evaluates every joint policy exactly and aggregates to scalars.
pub fn enumerate_value_matrix(model: &FactoredCamdp, cfg: &SolverConfig) -> Result<ValueMatrix> {
    let mut cache = ValueCache::new(cfg.gamma);
    enumerate_value_matrix_cached(model, cfg, &mut cache)
}

/// [`enumerate_value_matrix`] against a shared evaluation cache.
pub fn enumerate_value_matrix_cached(
    model: &FactoredCamdp,
    cfg: &SolverConfig,
    cache: &mut ValueCache,
) -> Result<ValueMatrix> {
    cfg.validate()?;
    enumeration_size(model)?;
    let row_policies = model.enumerate_pi0();
    let col_policies = model.enumerate_pi1();
    let mut values = Vec::with_capacity(row_policies.len());
    for pi0 in &row_policies {
        let mut row = Vec::with_capacity(col_policies.len());
        for pi1 in &col_policies {
            let policy = JointPolicy::new(pi0.clone(), pi1.clone());
            row.push(cache.scalar(model, &policy, cfg.aggregator)?);
        }
        values.push(row);
    }
    let min_gap = min_gap_of(&values);
    Ok(ValueMatrix {
        values,
        gamma: cfg.gamma,
        aggregator: cfg.aggregator,
        min_gap,
        row_policies,
        col_policies,
    })
}

fn min_gap_of(values: &[Vec<f64>]) -> f64 {
    let mut flat: Vec<f64> = values.iter().flatten().copied().collect();
    flat.sort_by(|a, b| a.total_cmp(b));
    flat.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// All cells that are simultaneously a column maximum and a row maximum,
/// sorted by value descending.
pub fn find_nash_equilibria(vm: &ValueMatrix) -> Vec<NashCell> {
    let mut out = Vec::new();
    for i in 0..vm.n_rows() {
        let row_max = vm.row_max(i);
        for j in 0..vm.n_cols() {
            let v = vm.values[i][j];
            if v >= row_max - VALUE_TOL && v >= vm.col_max(j) - VALUE_TOL {
                out.push(NashCell {
                    row: i,
                    col: j,
                    pi0: vm.row_policies[i].clone(),
                    pi1: vm.col_policies[j].clone(),
                    value: v,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.row.cmp(&b.row))
            .then(a.col.cmp(&b.col))
    });
    out
}

/// Counts of row-dominant columns and column-dominant rows, and the
/// equilibrium-count bound min(n_dc, n_dr).
pub fn dominance_counts(vm: &ValueMatrix) -> (usize, usize, usize) {
    let row_maxes: Vec<f64> = (0..vm.n_rows()).map(|i| vm.row_max(i)).collect();
    let col_maxes: Vec<f64> = (0..vm.n_cols()).map(|j| vm.col_max(j)).collect();
    let n_dc = (0..vm.n_cols())
        .filter(|&k| (0..vm.n_rows()).any(|m| vm.values[m][k] >= row_maxes[m] - VALUE_TOL))
        .count();
    let n_dr = (0..vm.n_rows())
        .filter(|&k| (0..vm.n_cols()).any(|n| vm.values[k][n] >= col_maxes[n] - VALUE_TOL))
        .count();
    (n_dc, n_dr, n_dc.min(n_dr))
}

/// True iff one row is the maximum of every column, or one column the maximum
/// of every row.
pub fn check_theorem2(vm: &ValueMatrix) -> (bool, Option<DominanceWitness>) {
    let col_maxes: Vec<f64> = (0..vm.n_cols()).map(|j| vm.col_max(j)).collect();
    for m in 0..vm.n_rows() {
        if (0..vm.n_cols()).all(|j| vm.values[m][j] >= col_maxes[j] - VALUE_TOL) {
            return (true, Some(DominanceWitness::Row(m)));
        }
    }
    let row_maxes: Vec<f64> = (0..vm.n_rows()).map(|i| vm.row_max(i)).collect();
    for n in 0..vm.n_cols() {
        if (0..vm.n_rows()).all(|i| vm.values[i][n] >= row_maxes[i] - VALUE_TOL) {
            return (true, Some(DominanceWitness::Col(n)));
        }
    }
    (false, None)
}

struct ConvergenceScan {
    all_converged: bool,
    all_terminal_ne: bool,
    all_terminal_global: bool,
    basin: BTreeMap<String, usize>,
}

/// Runs alternating iteration from every initial joint policy under both
/// mover orders and classifies the terminals.
fn convergence_scan(
    model: &FactoredCamdp,
    cfg: &SolverConfig,
    vm: &ValueMatrix,
    cache: &mut ValueCache,
) -> Result<ConvergenceScan> {
    let nash: Vec<JointPolicy> = find_nash_equilibria(vm)
        .into_iter()
        .map(|c| JointPolicy::new(c.pi0, c.pi1))
        .collect();
    let global = vm.max_value();
    let mut scan = ConvergenceScan {
        all_converged: true,
        all_terminal_ne: true,
        all_terminal_global: true,
        basin: BTreeMap::new(),
    };
    for first_mover in [Agent::Agent0, Agent::Agent1] {
        let run_cfg = SolverConfig {
            first_mover,
            ..*cfg
        };
        for pi0 in &vm.row_policies {
            for pi1 in &vm.col_policies {
                let initial = JointPolicy::new(pi0.clone(), pi1.clone());
                let trace = match alternate_iterate_cached(model, &initial, &run_cfg, cache) {
                    Ok(t) => t,
                    // An inner best response that cycles or exhausts its cap
                    // counts as a non-converged initial, not a hard failure.
                    Err(CamdpError::NonConvergence { .. }) => {
                        scan.all_converged = false;
                        scan.all_terminal_ne = false;
                        scan.all_terminal_global = false;
                        *scan.basin.entry("max-iterations".to_string()).or_insert(0) += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                if trace.outcome == Outcome::Converged {
                    let terminal = trace.final_policy().expect("converged trace has steps");
                    let value = trace.final_scalar().expect("converged trace has steps");
                    if !nash.contains(terminal) {
                        scan.all_terminal_ne = false;
                    }
                    if value < global - VALUE_TOL {
                        scan.all_terminal_global = false;
                    }
                    *scan.basin.entry(terminal.to_string()).or_insert(0) += 1;
                } else {
                    scan.all_converged = false;
                    scan.all_terminal_ne = false;
                    scan.all_terminal_global = false;
                    let label = match trace.outcome {
                        Outcome::Oscillating => "oscillating",
                        _ => "max-iterations",
                    };
                    *scan.basin.entry(label.to_string()).or_insert(0) += 1;
                }
            }
        }
    }
    Ok(scan)
}

/// Centralized-equivalence check: from every initial joint policy, under both
/// mover orders, alternating best response converges and every terminal is a
/// pure Nash equilibrium of the enumerated value matrix.
pub fn check_observability(model: &FactoredCamdp, cfg: &SolverConfig) -> Result<bool> {
    let mut cache = ValueCache::new(cfg.gamma);
    let vm = enumerate_value_matrix_cached(model, cfg, &mut cache)?;
    let scan = convergence_scan(model, cfg, &vm, &mut cache)?;
    Ok(scan.all_converged && scan.all_terminal_ne)
}

/// True iff every alternating run from every initial joint policy converges
/// to a policy attaining the value-matrix maximum; also returns the basin map.
pub fn check_global_convergence(
    model: &FactoredCamdp,
    cfg: &SolverConfig,
) -> Result<(bool, BTreeMap<String, usize>)> {
    let mut cache = ValueCache::new(cfg.gamma);
    let vm = enumerate_value_matrix_cached(model, cfg, &mut cache)?;
    let scan = convergence_scan(model, cfg, &vm, &mut cache)?;
    Ok((scan.all_converged && scan.all_terminal_global, scan.basin))
}

/// Runs all three condition checks off one enumeration pass.
pub fn conditions(model: &FactoredCamdp, cfg: &SolverConfig) -> Result<ConditionReport> {
    let mut cache = ValueCache::new(cfg.gamma);
    let vm = enumerate_value_matrix_cached(model, cfg, &mut cache)?;
    let (cond1, witness) = check_theorem2(&vm);
    let (n_dc, n_dr, ne_bound) = dominance_counts(&vm);
    let nash_equilibria = find_nash_equilibria(&vm);
    let scan = convergence_scan(model, cfg, &vm, &mut cache)?;
    Ok(ConditionReport {
        cond1,
        cond1_witness: witness,
        cond2: scan.all_converged && scan.all_terminal_ne,
        cond3: scan.all_converged && scan.all_terminal_global,
        n_dc,
        n_dr,
        ne_bound,
        nash_equilibria,
        basin: scan.basin,
        gamma: cfg.gamma,
        aggregator: cfg.aggregator,
        min_gap: vm.min_gap,
    })
}

fn policy_label(p: &[usize]) -> String {
    if p.iter().all(|&a| a < 10) {
        p.iter().map(|a| a.to_string()).collect()
    } else {
        p.iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Renders the matrix as CSV with policy-vector header row and column.
pub fn value_matrix_csv(vm: &ValueMatrix) -> String {
    let mut out = String::new();
    out.push_str("pi0\\pi1");
    for p in &vm.col_policies {
        out.push(',');
        out.push_str(&policy_label(p));
    }
    out.push('\n');
    for (i, p) in vm.row_policies.iter().enumerate() {
        out.push_str(&policy_label(p));
        for j in 0..vm.n_cols() {
            out.push_str(&format!(",{:.12}", vm.values[i][j]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::generate::{random_camdp, GeneratorSpec};
    use crate::model::Dims;

    fn cfg98() -> SolverConfig {
        SolverConfig {
            gamma: 0.98,
            ..SolverConfig::default()
        }
    }

    fn synthetic(values: Vec<Vec<f64>>) -> ValueMatrix {
        let rows = values.len();
        let cols = values[0].len();
        let min_gap = super::min_gap_of(&values);
        ValueMatrix {
            values,
            gamma: 0.9,
            aggregator: Aggregator::Max,
            min_gap,
            row_policies: (0..rows).map(|i| vec![i]).collect(),
            col_policies: (0..cols).map(|j| vec![j]).collect(),
        }
    }

    #[test]
    fn single_policy_model() {
        let d = Dims {
            ns0: 1,
            nss: 1,
            ns1: 1,
            na0: 1,
            na1: 1,
        };
        let m = crate::model::FactoredCamdp::new(
            d,
            vec![vec![vec![1.0]]],
            vec![vec![vec![vec![1.0]]]],
            vec![vec![vec![1.0]]],
            vec![vec![vec![0.5]]],
            vec![vec![vec![vec![0.5]]]],
            vec![vec![vec![0.5]]],
        )
        .unwrap();
        let cfg = SolverConfig::default();
        let vm = enumerate_value_matrix(&m, &cfg).unwrap();
        assert_eq!(vm.n_rows(), 1);
        assert_eq!(vm.n_cols(), 1);
        assert_eq!(dominance_counts(&vm), (1, 1, 1));
        assert_eq!(find_nash_equilibria(&vm).len(), 1);
        let report = conditions(&m, &cfg).unwrap();
        assert!(report.cond1 && report.cond2 && report.cond3);
    }

    #[test]
    fn separable_payoffs() {
        let f = [0.0, 3.0, 1.0];
        let g = [2.0, 0.0, 1.0, 4.0];
        let values: Vec<Vec<f64>> = f
            .iter()
            .map(|fi| g.iter().map(|gj| fi + gj).collect())
            .collect();
        let vm = synthetic(values);
        let nes = find_nash_equilibria(&vm);
        assert_eq!(nes.len(), 1);
        assert_eq!((nes[0].row, nes[0].col), (1, 3));
        let (n_dc, n_dr, bound) = dominance_counts(&vm);
        assert_eq!((n_dc, n_dr, bound), (1, 1, 1));
        let (ok, witness) = check_theorem2(&vm);
        assert!(ok);
        assert_eq!(witness, Some(DominanceWitness::Row(1)));
    }

    #[test]
    fn no_dominating_line() {
        let vm = synthetic(vec![vec![2.0, 0.0], vec![1.0, 3.0]]);
        let (ok, witness) = check_theorem2(&vm);
        assert!(!ok);
        assert!(witness.is_none());
        // Both cells (0,0) and (1,1) are equilibria here.
        assert_eq!(find_nash_equilibria(&vm).len(), 2);
    }

    #[test]
    fn strictly_dominant_cell_is_sole_equilibrium() {
        let vm = synthetic(vec![vec![5.0, 1.0], vec![2.0, 0.5]]);
        let nes = find_nash_equilibria(&vm);
        assert_eq!(nes.len(), 1);
        assert_eq!((nes[0].row, nes[0].col), (0, 0));
    }

    #[test]
    fn case_study_matrix_and_equilibria() {
        let m = fixture::paper_case_study();
        let vm = enumerate_value_matrix(&m, &cfg98()).unwrap();
        assert_eq!(vm.n_rows(), 16);
        assert_eq!(vm.n_cols(), 16);
        let top = vm.max_value();
        assert!((top - 9.988937333283168).abs() < 1e-9, "max = {top}");

        let nes = find_nash_equilibria(&vm);
        assert_eq!(nes.len(), 2);
        assert_eq!(nes[0].pi0, vec![0, 1, 0, 0]);
        assert_eq!(nes[0].pi1, vec![0, 0, 0, 0]);
        assert!((nes[0].value - 9.988937333283168).abs() < 1e-9);
        assert_eq!(nes[1].pi0, vec![1, 1, 0, 0]);
        assert_eq!(nes[1].pi1, vec![1, 0, 0, 0]);
        assert!((nes[1].value - 9.81098320537743).abs() < 1e-9);
        assert!((nes[1].value - 9.81).abs() < 0.05);

        // The neighbouring cell differing in pi1's third entry is not stable.
        let i = crate::model::policy_index(&[1, 1, 0, 0], 2);
        let j = crate::model::policy_index(&[1, 0, 1, 0], 2);
        assert!((vm.values[i][j] - 9.711329584440588).abs() < 1e-9);
        assert!(!nes.iter().any(|c| (c.row, c.col) == (i, j)));

        let (n_dc, n_dr, bound) = dominance_counts(&vm);
        assert_eq!((n_dc, n_dr), (3, 3));
        assert!(nes.len() <= bound);
        assert!(
            vm.min_gap > 3.42e-5 && vm.min_gap < 3.44e-5,
            "gap {}",
            vm.min_gap
        );

        let (cond1, _) = check_theorem2(&vm);
        assert!(!cond1);
    }

    #[test]
    fn case_study_condition_report() {
        let m = fixture::paper_case_study();
        let report = conditions(&m, &cfg98()).unwrap();
        assert!(!report.cond1);
        assert!(report.cond2);
        assert!(!report.cond3);
        assert_eq!(report.ne_bound, 3);
        assert_eq!(report.nash_equilibria.len(), 2);
        let total: usize = report.basin.values().sum();
        assert_eq!(total, 512);
        assert_eq!(report.basin.get("([0,1,0,0],[0,0,0,0])"), Some(&176));
        assert_eq!(report.basin.get("([1,1,0,0],[1,0,0,0])"), Some(&336));
    }

    #[test]
    fn fully_observable_factors_satisfy_condition2() {
        let spec = GeneratorSpec {
            dims: Dims {
                ns0: 1,
                nss: 3,
                ns1: 1,
                na0: 2,
                na1: 2,
            },
            seed: 7,
            ..GeneratorSpec::default()
        };
        let m = random_camdp(&spec).unwrap();
        assert!(check_observability(&m, &SolverConfig::default()).unwrap());
    }

    #[test]
    fn matrix_max_matches_fresh_recomputation() {
        let spec = GeneratorSpec {
            seed: 42,
            ..GeneratorSpec::default()
        };
        let m = random_camdp(&spec).unwrap();
        let cfg = SolverConfig::default();
        let vm = enumerate_value_matrix(&m, &cfg).unwrap();
        let mut best = f64::NEG_INFINITY;
        for pi0 in m.enumerate_pi0() {
            for pi1 in m.enumerate_pi1() {
                let dyn_ = m.augment(&JointPolicy::new(pi0.clone(), pi1)).unwrap();
                let r = crate::eval::evaluate_exact(&dyn_, cfg.gamma).unwrap();
                best = best.max(crate::eval::scalar_value(&r, cfg.aggregator));
            }
        }
        assert!((vm.max_value() - best).abs() < 1e-12);
    }

    #[test]
    fn enumeration_cap_enforced() {
        let spec = GeneratorSpec {
            dims: Dims {
                ns0: 2,
                nss: 5,
                ns1: 2,
                na0: 2,
                na1: 2,
            },
            seed: 1,
            ..GeneratorSpec::default()
        };
        let m = random_camdp(&spec).unwrap();
        let err = enumerate_value_matrix(&m, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, CamdpError::SizeCap { .. }), "{err}");
    }

    #[test]
    fn csv_layout() {
        let m = fixture::paper_case_study();
        let vm = enumerate_value_matrix(&m, &cfg98()).unwrap();
        let csv = value_matrix_csv(&vm);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 17);
        assert!(lines[0].starts_with("pi0\\pi1,0000,0001,"));
        assert!(lines[1].starts_with("0000,"));
        assert_eq!(lines[1].split(',').count(), 17);
    }
}
