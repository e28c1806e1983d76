//! Electromagnetically consistent channel modeling for reconfigurable
//! intelligent surfaces built from loaded thin-wire dipoles.
//!
//! The library computes mutual impedances between sinusoidal-current wire
//! elements by direct double quadrature of the exact near-field kernel,
//! assembles the full multiport impedance matrix of a
//! transmitter/surface/receiver deployment, solves the coupled port network
//! for end-to-end channels, and optimizes the surface's tunable loads under
//! mutual coupling.
//!
//! Module map:
//! - [`scenario`]: geometry, physical constants, deployment validation
//! - [`config`]: TOML scenario descriptions
//! - [`quadrature`]: composite Gauss-Legendre integration with refinement
//! - [`kernels`]: current profile, near-field kernel, radiated field
//! - [`impedance`]: pairwise mutual impedance and block assembly
//! - [`cache`]: on-disk impedance cache keyed by geometry hash
//! - [`loads`]: generator/load/tunable-element terminations
//! - [`channel`]: coupled port solve, closed forms, channel metrics
//! - [`optimizer`]: projected gradient ascent over load reactances

pub mod cache;
pub mod channel;
pub mod config;
pub mod impedance;
pub mod kernels;
pub mod loads;
pub mod optimizer;
pub mod quadrature;
pub mod scenario;

pub use channel::{
    e2e_closed_form, e2e_matrix_direct, far_field_siso, solve_ports_direct, ChannelError,
    ChannelMetrics, ChannelResult, PortSolution,
};
pub use config::{ConfigError, ScenarioConfig};
pub use impedance::{
    assemble_impedance_blocks, enforce_reciprocity, mutual_impedance, AssemblyReport,
    ImpedanceBlocks, ImpedanceError, MutualImpedance,
};
pub use loads::{build_load_network, build_ris_load_matrix, LoadError, LoadNetwork};
pub use optimizer::{
    evaluate_objective, objective_gradient, optimize_ris_loads, Objective, OptimizationProblem,
    OptimizationResult, OptimizerError,
};
pub use quadrature::{QuadError, QuadratureSpec};
pub use scenario::{
    PhysicalConstants, Point3, Role, Scenario, ScenarioError, WireElement,
};
