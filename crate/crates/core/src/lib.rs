//! Monotone skew-product semiflows generated by Carathéodory ordinary and
//! unit-delay differential equations: simulation, semi-equilibria and their
//! pullback limits, and sampled checks of order properties.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibria;
pub mod error;
pub mod fields;
pub mod linear;
pub mod models;
pub mod phase;
pub mod quad;
pub mod semiflow;
pub mod signal;
pub mod solver;
pub mod topologies;

pub use equilibria::{
    equilibrium_residual, equilibrium_traces_from_linear, forward_attraction, limit_equilibrium, pullback_step, EquilibriumTrace,
    PullbackSchedule, TraceKind, TraceOptions,
};
pub use error::{Error, Result};
pub use fields::{
    check_condition, check_l1loc_equicontinuity, optimal_m_bound, optimal_m_bounds, Condition, ConditionReport, FieldModel, FnField,
    Nonlinearity, Sampler, Shape, VectorField, Verdict,
};
pub use linear::{atilde, btilde, fit_decay, fundamental_matrix_ode, fundamental_scalar_delay, DecayEstimate, FundamentalSolution};
pub use models::{build_model, preset, validate_assumptions, Bundle, Model, ModelSpec};
pub use phase::History;
pub use semiflow::{flow, monotonicity_harness, strict_order_harness, sublinearity_harness, HarnessOptions, HarnessResult};
pub use signal::CoefficientSignal;
pub use solver::{solve_dde, solve_dde_pulse, solve_ode, Method, SolveOptions, Status, TrajectorySegment};
pub use topologies::{sigma_p_distance, theta_d_seminorm, tp_distance, Modulus, SeminormBasis};
