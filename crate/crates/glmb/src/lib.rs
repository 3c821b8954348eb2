//! Delta-GLMB Bayes multi-target tracking filter with Gaussian-mixture track
//! densities.
//!
//! The filter propagates an enumerated table of weighted hypotheses (label
//! set + per-track density) through closed-form prediction and measurement
//! update steps. The intractably large sums are truncated without exhaustive
//! computation: ranked assignment picks the best association maps per
//! hypothesis in the update, and K-shortest-path subset enumeration picks the
//! best survivor/birth sets in the prediction. A PHD look-ahead score decides
//! which hypotheses are worth expanding at all. The crate also ships a
//! linear-Gaussian scenario simulator and the OSPA miss-distance for
//! evaluation.

pub mod assignment;
pub mod density;
pub mod error;
pub mod filter;
pub mod gaussian;
pub mod io;
pub mod kshortest;
pub mod label;
pub mod model;
pub mod oracle;
pub mod ospa;
pub mod scenario;
pub mod track;

pub use assignment::{
    assignment_cost, extend_for_misdetection, ranked_assignments, solve_optimal_assignment,
    AssociationMap, CostMatrix, RankedSolution,
};
pub use density::{l1_truncation_error, GlmbDensity, Hypothesis, Provenance, TruncationError};
pub use error::{GlmbError, Result};
pub use filter::{
    estimate_state, lookahead_allocate, predict_step, predict_step_at, run_filter, update_step,
    update_step_with_requests, weight_proportional_requests, FilterConfig, FilterOutput,
    PredictionInfo, StateEstimate, StepDiagnostics, UpdateInfo,
};
pub use gaussian::{prune_merge_mixture, GaussianComponent, GaussianMixture};
pub use kshortest::{k_shortest_subsets, RankedSubset};
pub use label::Label;
pub use model::{BirthComponent, ClutterIntensity, LabelOverrides, LinearGaussianModel};
pub use ospa::{ospa, OspaDistance};
pub use scenario::{
    generate_measurements, generate_truth, truth_cardinality, BirthSpec, ModelSpec, Region,
    ScenarioSpec, TruthTrack,
};
pub use track::{
    birth_cost_vector, birth_weight, constituent_updated_phd_mass, cost_matrix_update,
    eta_survival, phd_mass, predict_track, survival_cost_vector, update_track, TrackUpdate,
};
