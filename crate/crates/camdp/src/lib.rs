//! Cooperative adaptive Markov decision processes: two agents with private
//! state factors and a shared factor, jointly optimizing one discounted
//! value.
//!
//! The crate builds factored models ([`model`]), evaluates joint policies
//! exactly or iteratively ([`eval`]), runs alternating, simultaneous, and
//! exploring policy-iteration schemes ([`policy`]), enumerates the joint
//! policy space for equilibrium and convergence analysis ([`equilibrium`]),
//! shrinks policy spaces with value-loss accounting ([`reduce`]), and samples
//! random instances for Monte Carlo studies ([`generate`]).
//!
//! ```
//! use camdp::{alternate_iterate, conditions, JointPolicy, SolverConfig};
//!
//! let model = camdp::by_name("paper-case-study").unwrap();
//! let cfg = SolverConfig { gamma: 0.98, ..SolverConfig::default() };
//! let start = JointPolicy::zeros(&model.dims);
//!
//! let trace = alternate_iterate(&model, &start, &cfg).unwrap();
//! println!("{:?} at {}", trace.outcome, trace.final_policy().unwrap());
//!
//! let report = conditions(&model, &cfg).unwrap();
//! println!("{} equilibria (bound {})", report.nash_equilibria.len(), report.ne_bound);
//! ```

pub mod equilibrium;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod generate;
pub mod model;
pub mod policy;
pub mod reduce;

pub use equilibrium::{
    check_global_convergence, check_observability, check_theorem2, conditions, dominance_counts,
    enumerate_value_matrix, find_nash_equilibria, value_matrix_csv, ConditionReport, NashCell,
    ValueMatrix, ENUMERATION_CAP, VALUE_TOL,
};
pub use error::{CamdpError, Result};
pub use eval::{
    average_reward, evaluate_exact, evaluate_iterative, scalar_value, Aggregator, EvaluationResult,
    ValueCache,
};
pub use fixture::{by_name, paper_case_study, CASE_STUDY_NAME};
pub use generate::{check_quasi_positive, quasi_positivity, random_camdp, GeneratorSpec};
pub use model::{
    composite_index, decompose_index, AugmentedDynamics, Dims, FactoredCamdp, JointPolicy,
};
pub use policy::{
    alternate_iterate, best_response, epsilon_greedy_iterate, improve_agent, loss_bound,
    revised_improve, simultaneous_iterate, Agent, ImprovementMode, IterationTrace, Mover, Outcome,
    SolverConfig, TraceStep,
};
pub use reduce::{constrained_best, preset, prune_by_value, PolicyConstraint, ReductionReport};
