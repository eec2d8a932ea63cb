//! Finite-difference laboratory for fully nonlinear, possibly degenerate
//! elliptic equations F(D²u, Du, u, (x,y)) = 0 with homogeneous Neumann
//! conditions on thin strips Ω_ε = {x ∈ (a,b), 0 < y < εg(x)}, together with
//! the dimension-reduced 1D problem G(w″, w′, w, x) = 0 that captures the
//! ε → 0 limit, and a harness that measures sup-norm convergence of the thin
//! solutions to the 1D limit across an ε-sweep.
//!
//! The thin problem is discretized on terrain-following coordinates
//! s = y/(εg(x)), which map Ω_ε onto the fixed rectangle [a,b] × [0,1] so
//! that every boundary condition sits on a grid line. Physical derivatives
//! are reconstructed from flattened ones through exact chain-rule
//! coefficients. Both solvers drive a damped, diagonally preconditioned
//! residual iteration accelerated by windowed Anderson extrapolation.

pub mod geometry;
pub mod grids;
pub mod harness;
pub mod limit_solver;
pub mod operators;
mod relax;
pub mod thin_solver;

pub use geometry::{
    chain_rule_bundle, profile_eval, top_normal, ChainRuleBundle, DomainSpec, GeometryError,
    ProfileKind, ProfileSpec, ThinDomainSpec, EPSILON_MAX,
};
pub use grids::{fd_derivs, reconstruct_jet, Field, FlatDerivs, GridError, PhysicalJet, ReferenceGrid};
pub use harness::{
    fit_order, oracle_suite, run_sweep, HarnessError, Mutation, OracleCheck, OracleOptions,
    OracleReport, SweepRecord, SweepResult, SweepTemplate,
};
pub use limit_solver::{residual_limit, solve_limit, LimitScenario};
pub use operators::{
    apply_operator, build_limit_G, eigen2, Ellipticity, FunctionalSpec, LimitFunctionalSpec,
    OperatorError, OperatorKind, SourceComponent, SourceSpec, SymMat2,
};
pub use relax::{IterParams, SolveError};
pub use thin_solver::{residual, solve_thin, SolveReport, ThinScenario};
