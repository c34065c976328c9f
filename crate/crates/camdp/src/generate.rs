use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CamdpError, Result};
use crate::model::{AugmentedDynamics, Dims, FactoredCamdp, JointPolicy};

/// Sampling law for transition rows, recorded in generated outputs.
pub const TRANSITION_LAW: &str = "uniform-simplex";
/// Sampling law for reward entries, recorded in generated outputs.
pub const REWARD_LAW: &str = "uniform(reward_min,1]";
/// RNG family identity, recorded in generated outputs for reproducibility.
pub const RNG_NAME: &str = "chacha8";

const RETRY_CAP: usize = 100;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub dims: Dims,
    pub seed: u64,
    /// Lower bound keeping every reward strictly positive.
    pub reward_min: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            dims: Dims {
                ns0: 2,
                nss: 2,
                ns1: 2,
                na0: 2,
                na1: 2,
            },
            seed: 0,
            reward_min: 0.01,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.reward_min > 0.0 && self.reward_min < 1.0) {
            return Err(CamdpError::Validation(format!(
                "reward_min must lie in (0, 1), got {}",
                self.reward_min
            )));
        }
        let d = &self.dims;
        if d.ns0 == 0 || d.nss == 0 || d.ns1 == 0 || d.na0 == 0 || d.na1 == 0 {
            return Err(CamdpError::Validation(
                "all dimensions must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One row from the uniform simplex; every entry strictly positive.
fn simplex_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n).map(|_| 1.0 - rng.gen::<f64>()).collect();
    let sum: f64 = row.iter().sum();
    for x in &mut row {
        *x /= sum;
    }
    row
}

/// One reward in (reward_min, 1].
fn reward(rng: &mut ChaCha8Rng, reward_min: f64) -> f64 {
    1.0 - rng.gen::<f64>() * (1.0 - reward_min)
}

fn stochastic_matrix(rng: &mut ChaCha8Rng, ns: usize) -> Vec<Vec<f64>> {
    (0..ns).map(|_| simplex_row(rng, ns)).collect()
}

fn reward_matrix(rng: &mut ChaCha8Rng, ns: usize, rmin: f64) -> Vec<Vec<f64>> {
    (0..ns)
        .map(|_| (0..ns).map(|_| reward(rng, rmin)).collect())
        .collect()
}

fn transition_tensor(rng: &mut ChaCha8Rng, na: usize, ns: usize) -> Vec<Vec<Vec<f64>>> {
    (0..na).map(|_| stochastic_matrix(rng, ns)).collect()
}

fn reward_tensor(rng: &mut ChaCha8Rng, na: usize, ns: usize, rmin: f64) -> Vec<Vec<Vec<f64>>> {
    (0..na).map(|_| reward_matrix(rng, ns, rmin)).collect()
}

/// Draws one CaMDP. Deterministic per seed; the result always validates
/// cleanly, and the augmented chain of every joint policy is irreducible and
/// aperiodic (resampled if not, up to a retry cap).
pub fn random_camdp(spec: &GeneratorSpec) -> Result<FactoredCamdp> {
    spec.validate()?;
    let d = spec.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..RETRY_CAP {
        let p0 = transition_tensor(&mut rng, d.na0, d.ns0);
        let ps: Vec<Vec<Vec<Vec<f64>>>> = (0..d.na0)
            .map(|_| {
                (0..d.na1)
                    .map(|_| stochastic_matrix(&mut rng, d.nss))
                    .collect()
            })
            .collect();
        let p1 = transition_tensor(&mut rng, d.na1, d.ns1);
        let r0 = reward_tensor(&mut rng, d.na0, d.ns0, spec.reward_min);
        let rs: Vec<Vec<Vec<Vec<f64>>>> = (0..d.na0)
            .map(|_| {
                (0..d.na1)
                    .map(|_| reward_matrix(&mut rng, d.nss, spec.reward_min))
                    .collect()
            })
            .collect();
        let r1 = reward_tensor(&mut rng, d.na1, d.ns1, spec.reward_min);
        let model = FactoredCamdp::new(d, p0, ps, p1, r0, rs, r1)?;
        if all_policies_quasi_positive(&model)? {
            return Ok(model);
        }
    }
    Err(CamdpError::Generation(format!(
        "no quasi-positive model within {RETRY_CAP} draws from seed {}",
        spec.seed
    )))
}

/// Every factor row strictly positive makes every augmented row strictly
/// positive, so the full per-policy scan is only needed for degenerate draws.
fn all_policies_quasi_positive(model: &FactoredCamdp) -> Result<bool> {
    let positive = |t: &Vec<Vec<Vec<f64>>>| t.iter().flatten().flatten().all(|&x| x > 0.0);
    if positive(&model.p0) && model.ps.iter().all(positive) && positive(&model.p1) {
        return Ok(true);
    }
    for pi0 in model.enumerate_pi0() {
        for pi1 in model.enumerate_pi1() {
            let dyn_ = model.augment(&JointPolicy::new(pi0.clone(), pi1))?;
            if !check_quasi_positive(&dyn_) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuasiPositivity {
    pub irreducible: bool,
    pub aperiodic: bool,
}

/// Structural check of the augmented chain: strong connectivity of the
/// support graph and period 1.
pub fn quasi_positivity(dyn_: &AugmentedDynamics) -> QuasiPositivity {
    let n = dyn_.pbar.nrows();
    let support: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dyn_.pbar[(i, j)] > 0.0).collect())
        .collect();
    let reverse: Vec<Vec<usize>> = {
        let mut rev = vec![Vec::new(); n];
        for (i, succ) in support.iter().enumerate() {
            for &j in succ {
                rev[j].push(i);
            }
        }
        rev
    };
    let dist_fwd = bfs(&support, 0);
    let dist_bwd = bfs(&reverse, 0);
    let irreducible = dist_fwd.iter().all(Option::is_some) && dist_bwd.iter().all(Option::is_some);

    // Period: gcd of dist(u) + 1 - dist(v) over support edges reachable from
    // node 0. Valid on strongly connected graphs; reported anyway otherwise.
    let mut g: u64 = 0;
    for (u, succ) in support.iter().enumerate() {
        if let Some(du) = dist_fwd[u] {
            for &v in succ {
                if let Some(dv) = dist_fwd[v] {
                    g = gcd(g, (du + 1 - dv) as u64);
                }
            }
        }
    }
    QuasiPositivity {
        irreducible,
        aperiodic: g == 1,
    }
}

/// True iff the chain is irreducible and aperiodic.
pub fn check_quasi_positive(dyn_: &AugmentedDynamics) -> bool {
    let qp = quasi_positivity(dyn_);
    qp.irreducible && qp.aperiodic
}

fn bfs(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    let mut queue = std::collections::VecDeque::new();
    dist[start] = Some(0);
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn dynamics_from(p: Vec<Vec<f64>>) -> AugmentedDynamics {
        let n = p.len();
        let pbar = DMatrix::from_fn(n, n, |i, j| p[i][j]);
        let rbar = DMatrix::from_element(n, n, 1.0);
        let r_exp = DVector::from_element(n, 1.0);
        AugmentedDynamics { pbar, rbar, r_exp }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = GeneratorSpec::default();
        let a = random_camdp(&spec).unwrap();
        let b = random_camdp(&spec).unwrap();
        assert_eq!(a.p0, b.p0);
        assert_eq!(a.ps, b.ps);
        assert_eq!(a.rs, b.rs);
        let other = random_camdp(&GeneratorSpec {
            seed: 1,
            ..GeneratorSpec::default()
        })
        .unwrap();
        assert_ne!(a.p0, other.p0);
    }

    #[test]
    fn generated_models_validate() {
        for seed in 0..20 {
            let spec = GeneratorSpec {
                seed,
                ..GeneratorSpec::default()
            };
            let m = random_camdp(&spec).unwrap();
            assert!(m.validate().violations.is_empty(), "seed {seed}");
            let row_sum: f64 = m.p0[0][0].iter().sum();
            assert!((row_sum - 1.0).abs() < 1e-12);
            let rmin =
                m.r0.iter()
                    .chain(m.r1.iter())
                    .flatten()
                    .flatten()
                    .fold(f64::INFINITY, |a, &b| a.min(b));
            assert!(rmin > spec.reward_min);
        }
    }

    #[test]
    fn generated_chains_are_quasi_positive() {
        let m = random_camdp(&GeneratorSpec::default()).unwrap();
        for pi0 in m.enumerate_pi0() {
            for pi1 in m.enumerate_pi1() {
                let dyn_ = m.augment(&JointPolicy::new(pi0.clone(), pi1)).unwrap();
                assert!(check_quasi_positive(&dyn_));
            }
        }
    }

    #[test]
    fn identity_chain_is_reducible() {
        let n = 3;
        let mut p = vec![vec![0.0; n]; n];
        for (i, row) in p.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let qp = quasi_positivity(&dynamics_from(p));
        assert!(!qp.irreducible);
    }

    #[test]
    fn positive_chain_is_quasi_positive() {
        let p = vec![vec![0.25; 4]; 4];
        let qp = quasi_positivity(&dynamics_from(p));
        assert!(qp.irreducible && qp.aperiodic);
    }

    #[test]
    fn two_state_swap_is_periodic() {
        let p = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let qp = quasi_positivity(&dynamics_from(p));
        assert!(qp.irreducible);
        assert!(!qp.aperiodic);
    }

    #[test]
    fn rejects_bad_spec() {
        let bad = GeneratorSpec {
            reward_min: 0.0,
            ..GeneratorSpec::default()
        };
        assert!(random_camdp(&bad).is_err());
        let zero_dim = GeneratorSpec {
            dims: Dims {
                ns0: 0,
                nss: 2,
                ns1: 2,
                na0: 2,
                na1: 2,
            },
            ..GeneratorSpec::default()
        };
        assert!(random_camdp(&zero_dim).is_err());
    }
}
