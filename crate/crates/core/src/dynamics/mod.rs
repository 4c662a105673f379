//! Reduced mode dynamics and full radial NLS evolutions near a standing wave.

pub mod evolve;
pub mod experiment;
pub mod modulation;
pub mod reduced;

pub use evolve::{
    nls_evolve, nls_trajectory, step_ceiling, Absorber, EvolveConfig, FieldState, LinearFlow, Modulation, Observe, Splitting,
    SineTransform,
};
pub use experiment::{
    instability_experiment, seed_perturbation, ExperimentConfig, ExperimentInputs, ExperimentSample, InstabilityReport,
    Seed, SeedScale,
};
pub use modulation::{
    mode_field, mode_project, modulation_decompose, orbital_distance, synthesize, Decomposition, ModeProjection,
    ModulationConfig, OrbitFamily, OrbitPoint, OrbitalDistance,
};
pub use reduced::{
    blowup_time, integrate_reduced, reduced_instability_metrics, single_mode_closed_form, Blowup, DampingTerm,
    LedgerRow, ReducedConfig, ReducedMetrics, ReducedModel, ReducedSample, ReducedTrajectory,
};
