use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CamdpError, Result};

/// State and action counts of a factored two-agent MDP.
///
/// The composite state space is the product of three factors: states private
/// to agent 0 (`ns0`), states shared by both agents (`nss`), and states
/// private to agent 1 (`ns1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub ns0: usize,
    pub nss: usize,
    pub ns1: usize,
    pub na0: usize,
    pub na1: usize,
}

impl Dims {
    /// Number of composite states.
    pub fn composite(&self) -> usize {
        self.ns0 * self.nss * self.ns1
    }

    /// Number of observation cells for agent 0 (pairs of private and shared state).
    pub fn cells0(&self) -> usize {
        self.ns0 * self.nss
    }

    pub fn cells1(&self) -> usize {
        self.ns1 * self.nss
    }
}

/// Maps a factored state triple to its composite index.
///
/// Ordering is s0-major, then shared, then s1, matching the Kronecker
/// composition order used by [`FactoredCamdp::augment`].
pub fn composite_index(s0: usize, ss: usize, s1: usize, dims: &Dims) -> Result<usize> {
    if s0 >= dims.ns0 || ss >= dims.nss || s1 >= dims.ns1 {
        return Err(CamdpError::Dimension(format!(
            "state ({s0},{ss},{s1}) out of range for dims ({},{},{})",
            dims.ns0, dims.nss, dims.ns1
        )));
    }
    Ok(s0 * (dims.nss * dims.ns1) + ss * dims.ns1 + s1)
}

/// Inverse of [`composite_index`].
pub fn decompose_index(i: usize, dims: &Dims) -> (usize, usize, usize) {
    let s1 = i % dims.ns1;
    let rest = i / dims.ns1;
    let ss = rest % dims.nss;
    let s0 = rest / dims.nss;
    (s0, ss, s1)
}

/// A factored cooperative two-agent MDP.
///
/// Transitions and rewards factor per component: agent 0's action drives the
/// private factor `p0`/`r0`, agent 1's drives `p1`/`r1`, and both act on the
/// shared factor `ps`/`rs`. All reward entries are strictly positive.
///
/// Index orders: `p0[a0][s0][s0']`, `ps[a0][a1][ss][ss']`, `p1[a1][s1][s1']`,
/// and the same orders for `r0`, `rs`, `r1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactoredCamdp {
    pub dims: Dims,
    pub p0: Vec<Vec<Vec<f64>>>,
    pub ps: Vec<Vec<Vec<Vec<f64>>>>,
    pub p1: Vec<Vec<Vec<f64>>>,
    pub r0: Vec<Vec<Vec<f64>>>,
    pub rs: Vec<Vec<Vec<Vec<f64>>>>,
    pub r1: Vec<Vec<Vec<f64>>>,
}

/// Row-sum tolerance for transition matrices; rows within this distance of 1
/// are renormalized exactly once at load.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Outcome of structural validation: every violated rule, or empty if well-formed.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            write!(f, "ok")
        } else {
            write!(f, "{}", self.violations.join("\n"))
        }
    }
}

/// Composite-state dynamics under one fixed joint policy.
#[derive(Debug, Clone)]
pub struct AugmentedDynamics {
    /// Row-stochastic composite transition matrix.
    pub pbar: DMatrix<f64>,
    /// Per-transition rewards aligned with `pbar`.
    pub rbar: DMatrix<f64>,
    /// Expected immediate reward per state: `r_exp[i] = sum_j pbar[i][j] * rbar[i][j]`.
    pub r_exp: DVector<f64>,
}

impl AugmentedDynamics {
    pub fn n_states(&self) -> usize {
        self.pbar.nrows()
    }
}

/// A deterministic policy pair.
///
/// `pi0[s0 * nss + ss]` is agent 0's action at private state `s0` and shared
/// state `ss`; `pi1[s1 * nss + ss]` is agent 1's at `(s1, ss)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointPolicy {
    pub pi0: Vec<usize>,
    pub pi1: Vec<usize>,
}

impl JointPolicy {
    pub fn new(pi0: Vec<usize>, pi1: Vec<usize>) -> Self {
        JointPolicy { pi0, pi1 }
    }

    /// The all-zero-action policy for the given dimensions.
    pub fn zeros(dims: &Dims) -> Self {
        JointPolicy {
            pi0: vec![0; dims.cells0()],
            pi1: vec![0; dims.cells1()],
        }
    }

    pub fn validate_for(&self, dims: &Dims) -> Result<()> {
        if self.pi0.len() != dims.cells0() || self.pi1.len() != dims.cells1() {
            return Err(CamdpError::Dimension(format!(
                "policy lengths ({}, {}) do not match expected ({}, {})",
                self.pi0.len(),
                self.pi1.len(),
                dims.cells0(),
                dims.cells1()
            )));
        }
        if self.pi0.iter().any(|&a| a >= dims.na0) {
            return Err(CamdpError::Dimension("pi0 action out of range".into()));
        }
        if self.pi1.iter().any(|&a| a >= dims.na1) {
            return Err(CamdpError::Dimension("pi1 action out of range".into()));
        }
        Ok(())
    }
}

impl std::fmt::Display for JointPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let fmt_vec = |v: &[usize]| {
            v.iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "([{}],[{}])", fmt_vec(&self.pi0), fmt_vec(&self.pi1))
    }
}

fn check_tensor3(
    name: &str,
    t: &[Vec<Vec<f64>>],
    na: usize,
    ns: usize,
    stochastic: bool,
    out: &mut Vec<String>,
) {
    if t.len() != na {
        out.push(format!(
            "{name}: expected {na} action slices, found {}",
            t.len()
        ));
        return;
    }
    for (a, mat) in t.iter().enumerate() {
        if mat.len() != ns {
            out.push(format!(
                "{name}[{a}]: expected {ns} rows, found {}",
                mat.len()
            ));
            continue;
        }
        for (s, row) in mat.iter().enumerate() {
            if row.len() != ns {
                out.push(format!(
                    "{name}[{a}][{s}]: expected {ns} columns, found {}",
                    row.len()
                ));
                continue;
            }
            check_row(&format!("{name}[{a}][{s}]"), row, stochastic, out);
        }
    }
}

fn check_row(label: &str, row: &[f64], stochastic: bool, out: &mut Vec<String>) {
    if stochastic {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            out.push(format!("{label}: row sums to {sum:.12}, expected 1"));
        }
        for (j, &p) in row.iter().enumerate() {
            if !(0.0..=1.0 + ROW_SUM_TOL).contains(&p) || !p.is_finite() {
                out.push(format!("{label}[{j}]: probability {p} outside [0,1]"));
            }
        }
    } else {
        for (j, &r) in row.iter().enumerate() {
            if r <= 0.0 || !r.is_finite() {
                out.push(format!("{label}[{j}]: reward {r} is not strictly positive"));
            }
        }
    }
}

impl FactoredCamdp {
    /// Builds a model from raw tensors, rejecting structural violations and
    /// renormalizing transition rows once.
    pub fn new(
        dims: Dims,
        p0: Vec<Vec<Vec<f64>>>,
        ps: Vec<Vec<Vec<Vec<f64>>>>,
        p1: Vec<Vec<Vec<f64>>>,
        r0: Vec<Vec<Vec<f64>>>,
        rs: Vec<Vec<Vec<Vec<f64>>>>,
        r1: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let mut m = FactoredCamdp {
            dims,
            p0,
            ps,
            p1,
            r0,
            rs,
            r1,
        };
        let report = m.validate();
        if !report.is_ok() {
            return Err(CamdpError::Validation(report.to_string()));
        }
        m.renormalize();
        Ok(m)
    }

    /// Checks every structural rule and reports all violations.
    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let d = &self.dims;
        if d.ns0 == 0 || d.nss == 0 || d.ns1 == 0 || d.na0 == 0 || d.na1 == 0 {
            v.push("dims: every state and action count must be positive".to_string());
            return ValidationReport { violations: v };
        }
        check_tensor3("p0", &self.p0, d.na0, d.ns0, true, &mut v);
        check_tensor3("p1", &self.p1, d.na1, d.ns1, true, &mut v);
        check_tensor3("r0", &self.r0, d.na0, d.ns0, false, &mut v);
        check_tensor3("r1", &self.r1, d.na1, d.ns1, false, &mut v);
        for (name, t, stochastic) in [("ps", &self.ps, true), ("rs", &self.rs, false)] {
            if t.len() != d.na0 {
                v.push(format!(
                    "{name}: expected {} a0 slices, found {}",
                    d.na0,
                    t.len()
                ));
                continue;
            }
            for (a0, sub) in t.iter().enumerate() {
                check_tensor3(
                    &format!("{name}[{a0}]"),
                    sub,
                    d.na1,
                    d.nss,
                    stochastic,
                    &mut v,
                );
            }
        }
        ValidationReport { violations: v }
    }

    fn renormalize(&mut self) {
        let norm = |row: &mut Vec<f64>| {
            let sum: f64 = row.iter().sum();
            for p in row.iter_mut() {
                *p /= sum;
            }
        };
        for mat in self.p0.iter_mut().chain(self.p1.iter_mut()) {
            mat.iter_mut().for_each(norm);
        }
        for sub in self.ps.iter_mut() {
            for mat in sub.iter_mut() {
                mat.iter_mut().for_each(norm);
            }
        }
    }

    pub fn n_states(&self) -> usize {
        self.dims.composite()
    }

    /// Builds composite-state dynamics under `policy`.
    ///
    /// Each composite row is the Kronecker product of the three factor rows
    /// selected by the policy's actions at that state; composition is per row
    /// because actions vary with the state. The per-transition reward is the
    /// product of the three factor rewards.
    pub fn augment(&self, policy: &JointPolicy) -> Result<AugmentedDynamics> {
        policy.validate_for(&self.dims)?;
        let d = &self.dims;
        let n = d.composite();
        let mut pbar = DMatrix::zeros(n, n);
        let mut rbar = DMatrix::zeros(n, n);
        let mut r_exp = DVector::zeros(n);
        for s0 in 0..d.ns0 {
            for ss in 0..d.nss {
                for s1 in 0..d.ns1 {
                    let i = s0 * (d.nss * d.ns1) + ss * d.ns1 + s1;
                    let a0 = policy.pi0[s0 * d.nss + ss];
                    let a1 = policy.pi1[s1 * d.nss + ss];
                    let p0_row = &self.p0[a0][s0];
                    let ps_row = &self.ps[a0][a1][ss];
                    let p1_row = &self.p1[a1][s1];
                    let r0_row = &self.r0[a0][s0];
                    let rs_row = &self.rs[a0][a1][ss];
                    let r1_row = &self.r1[a1][s1];
                    let mut exp = 0.0;
                    for t0 in 0..d.ns0 {
                        for ts in 0..d.nss {
                            for t1 in 0..d.ns1 {
                                let j = t0 * (d.nss * d.ns1) + ts * d.ns1 + t1;
                                let p = p0_row[t0] * ps_row[ts] * p1_row[t1];
                                let r = r0_row[t0] * rs_row[ts] * r1_row[t1];
                                pbar[(i, j)] = p;
                                rbar[(i, j)] = r;
                                exp += p * r;
                            }
                        }
                    }
                    r_exp[i] = exp;
                }
            }
        }
        Ok(AugmentedDynamics { pbar, rbar, r_exp })
    }

    /// Parses a model from its JSON file representation.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: FactoredCamdp = serde_json::from_str(text)?;
        FactoredCamdp::new(raw.dims, raw.p0, raw.ps, raw.p1, raw.r0, raw.rs, raw.r1)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Enumerates agent 0's sub-policies in mixed-radix order (cell 0 most
    /// significant), so index 0 is all-zeros and consecutive indices differ in
    /// the last cell first.
    pub fn enumerate_pi0(&self) -> Vec<Vec<usize>> {
        enumerate_policies(self.dims.na0, self.dims.cells0())
    }

    pub fn enumerate_pi1(&self) -> Vec<Vec<usize>> {
        enumerate_policies(self.dims.na1, self.dims.cells1())
    }
}

/// All action assignments of `cells` cells over `na` actions, cell 0 most significant.
pub fn enumerate_policies(na: usize, cells: usize) -> Vec<Vec<usize>> {
    let total = na.pow(cells as u32);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut v = vec![0; cells];
        let mut rem = idx;
        for c in (0..cells).rev() {
            v[c] = rem % na;
            rem /= na;
        }
        out.push(v);
    }
    out
}

/// Index of a sub-policy in [`enumerate_policies`] order.
pub fn policy_index(policy: &[usize], na: usize) -> usize {
    policy.iter().fold(0, |acc, &a| acc * na + a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    fn dims222() -> Dims {
        Dims {
            ns0: 2,
            nss: 2,
            ns1: 2,
            na0: 2,
            na1: 2,
        }
    }

    #[test]
    fn composite_index_cases() {
        let d = dims222();
        assert_eq!(composite_index(0, 0, 0, &d).unwrap(), 0);
        assert_eq!(composite_index(1, 1, 1, &d).unwrap(), 7);
        assert_eq!(composite_index(1, 0, 1, &d).unwrap(), 5);
        assert!(composite_index(2, 0, 0, &d).is_err());
    }

    #[test]
    fn composite_index_roundtrip() {
        let d = Dims {
            ns0: 3,
            nss: 2,
            ns1: 4,
            na0: 1,
            na1: 1,
        };
        for i in 0..d.composite() {
            let (s0, ss, s1) = decompose_index(i, &d);
            assert_eq!(composite_index(s0, ss, s1, &d).unwrap(), i);
        }
    }

    #[test]
    fn fixture_validates_clean() {
        let m = fixture::paper_case_study();
        assert!(m.validate().is_ok());
    }

    #[test]
    fn bad_row_sum_reported() {
        let mut m = fixture::paper_case_study();
        m.p0[0][0][0] -= 0.1;
        let report = m.validate();
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].contains("row sums"));
    }

    #[test]
    fn zero_reward_reported() {
        let mut m = fixture::paper_case_study();
        m.r1[1][0][1] = 0.0;
        let report = m.validate();
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].contains("strictly positive"));
    }

    #[test]
    fn augment_identity_transitions() {
        let d = dims222();
        let eye = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 2];
        let eye_s = vec![eye.clone(); 2];
        let ones = vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]; 2];
        let ones_s = vec![ones.clone(); 2];
        let m = FactoredCamdp::new(d, eye.clone(), eye_s, eye, ones.clone(), ones_s, ones).unwrap();
        let policy = JointPolicy::zeros(&d);
        let dyn_ = m.augment(&policy).unwrap();
        assert_eq!(dyn_.pbar, DMatrix::identity(8, 8));
    }

    #[test]
    fn augment_scalar_case() {
        let d = Dims {
            ns0: 1,
            nss: 1,
            ns1: 1,
            na0: 1,
            na1: 1,
        };
        let m = FactoredCamdp::new(
            d,
            vec![vec![vec![1.0]]],
            vec![vec![vec![vec![1.0]]]],
            vec![vec![vec![1.0]]],
            vec![vec![vec![0.3]]],
            vec![vec![vec![vec![0.7]]]],
            vec![vec![vec![0.2]]],
        )
        .unwrap();
        let dyn_ = m.augment(&JointPolicy::zeros(&d)).unwrap();
        assert_eq!(dyn_.pbar[(0, 0)], 1.0);
        assert!((dyn_.r_exp[0] - 0.3 * 0.7 * 0.2).abs() < 1e-15);
    }

    #[test]
    fn augment_rows_stochastic_and_r_exp_matches_direct_sum() {
        let m = fixture::paper_case_study();
        let policy = JointPolicy::new(vec![0, 0, 0, 0], vec![1, 0, 0, 0]);
        let dyn_ = m.augment(&policy).unwrap();
        for i in 0..8 {
            let sum: f64 = dyn_.pbar.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {i} sums to {sum}");
            let direct: f64 = (0..8).map(|j| dyn_.pbar[(i, j)] * dyn_.rbar[(i, j)]).sum();
            assert!((dyn_.r_exp[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn augment_marginals_recover_factors() {
        let m = fixture::paper_case_study();
        let policy = JointPolicy::new(vec![1, 0, 1, 0], vec![0, 1, 1, 0]);
        let dyn_ = m.augment(&policy).unwrap();
        let d = &m.dims;
        for i in 0..8 {
            let (s0, ss, s1) = decompose_index(i, d);
            let a0 = policy.pi0[s0 * d.nss + ss];
            let a1 = policy.pi1[s1 * d.nss + ss];
            for t0 in 0..d.ns0 {
                let marginal: f64 = (0..d.nss)
                    .flat_map(|ts| (0..d.ns1).map(move |t1| (ts, t1)))
                    .map(|(ts, t1)| dyn_.pbar[(i, t0 * (d.nss * d.ns1) + ts * d.ns1 + t1)])
                    .sum();
                assert!((marginal - m.p0[a0][s0][t0]).abs() < 1e-9);
            }
            for t1 in 0..d.ns1 {
                let marginal: f64 = (0..d.ns0)
                    .flat_map(|t0| (0..d.nss).map(move |ts| (t0, ts)))
                    .map(|(t0, ts)| dyn_.pbar[(i, t0 * (d.nss * d.ns1) + ts * d.ns1 + t1)])
                    .sum();
                assert!((marginal - m.p1[a1][s1][t1]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn kronecker_consistency_single_action() {
        let d = Dims {
            ns0: 2,
            nss: 2,
            ns1: 2,
            na0: 1,
            na1: 1,
        };
        let p0 = vec![vec![vec![0.3, 0.7], vec![0.6, 0.4]]];
        let ps = vec![vec![vec![vec![0.1, 0.9], vec![0.8, 0.2]]]];
        let p1 = vec![vec![vec![0.5, 0.5], vec![0.25, 0.75]]];
        let r = vec![vec![vec![0.2, 0.4], vec![0.6, 0.8]]];
        let rsz = vec![vec![vec![vec![0.2, 0.4], vec![0.6, 0.8]]]];
        let m =
            FactoredCamdp::new(d, p0.clone(), ps.clone(), p1.clone(), r.clone(), rsz, r).unwrap();
        let dyn_ = m.augment(&JointPolicy::zeros(&d)).unwrap();
        for i in 0..8 {
            let (s0, ss, s1) = decompose_index(i, &d);
            for j in 0..8 {
                let (t0, ts, t1) = decompose_index(j, &d);
                let expect = p0[0][s0][t0] * ps[0][0][ss][ts] * p1[0][s1][t1];
                assert!((dyn_.pbar[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn policy_enumeration_order() {
        let pols = enumerate_policies(2, 4);
        assert_eq!(pols.len(), 16);
        assert_eq!(pols[0], vec![0, 0, 0, 0]);
        assert_eq!(pols[1], vec![0, 0, 0, 1]);
        assert_eq!(pols[4], vec![0, 1, 0, 0]);
        assert_eq!(pols[15], vec![1, 1, 1, 1]);
        for (idx, p) in pols.iter().enumerate() {
            assert_eq!(policy_index(p, 2), idx);
        }
    }

    #[test]
    fn json_roundtrip() {
        let m = fixture::paper_case_study();
        let text = m.to_json();
        let back = FactoredCamdp::from_json(&text).unwrap();
        assert_eq!(back.dims, m.dims);
        assert_eq!(back.p0, m.p0);
        assert_eq!(back.rs, m.rs);
    }
}
