//! Steady states, existence thresholds, stability and dynamics of the bistable
//! reaction–diffusion problem
//!
//! ```text
//!   ∂ₜp − ∂ₓₓp = f(p)            on (−L, L)
//!   ∂ₙp = −D (p − p_ext)          at x = ±L
//! ```
//!
//! where `f` vanishes at 0, θ and 1. The phase-plane machinery lives in
//! [`timemap`], profile construction in [`steady`], linear stability in
//! [`stability`], and time integration (including the two-species system the
//! scalar problem is a limit of) in [`pde`].

// `!(x > 0.0)` style checks are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extended;
pub mod numerics;
pub mod pde;
pub mod reaction;
pub mod stability;
pub mod steady;
pub mod timemap;

pub use error::{Error, Result};
pub use extended::Extended;
pub use pde::{
    epsilon_convergence_study, relax_to_steady, simulate_scalar, simulate_system, species_rates, EpsilonError,
    Relaxation, SimConfig, Snapshot, SystemConfig, Trajectory,
};
pub use reaction::{
    compute_landmarks, make_cubic_reaction, make_reaction, make_wolbachia_reaction, Landmarks, Nonlinearity,
    ReactionKind, ReactionModel, WolbachiaParams,
};
pub use stability::{
    classify_stability, classify_with_oracle, fprime_range, linearized_ground_eigenvalue, principal_eigenvalue,
    StabilityVerdict, Verdict,
};
pub use steady::{
    all_steady_states, constant_profile, construct_non_monotone, profile_residual, reconstruct_profile,
    solve_boundary_values, BoundaryRoots, BranchTable, ProfileClass, Residuals, SteadyProfile, DEFAULT_N_GRID,
};
pub use timemap::{
    critical_diffusion_dstar, critical_diffusion_point, invert_f, minimizer_qbar, monotone_threshold,
    nonmonotone_threshold_mstar, potential_g, thresholds, time_map, time_map_domain, time_map_with, BoundaryEnv,
    Branch, FBranch, Family, Threshold, ThresholdReport, TimeMapBranch,
};
