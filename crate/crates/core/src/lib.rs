//! Estimation and decomposition of time-varying disparities between a
//! majority and a minority group observed longitudinally.
//!
//! The crate covers the whole pipeline:
//!
//! - [`data`]: long-format ingestion, validation and group summaries;
//! - [`kernel`] and [`vc`]: local-constant varying-coefficient fits of
//!   `beta(t, z)` and of the conditional covariate means `E{X(t) | z}`;
//! - [`bandwidth`]: leave-one-subject-out cross-validation;
//! - [`decomposition`]: the time-only (LDD), marginal-modifier (mLDD) and
//!   conditional-modifier (cmLDD) decompositions `D = D1 + D2 + D3`;
//! - [`inference`]: subject-level bootstrap simultaneous confidence bands;
//! - [`simulation`]: a varying-coefficient data generator with exact truth.

pub mod bandwidth;
pub mod data;
pub mod decomposition;
pub mod error;
pub mod inference;
pub mod kernel;
mod linalg;
pub mod simulation;
pub mod vc;

pub use bandwidth::{select_bandwidths_cv, BandwidthGrid, CvOptions, CvResult, CvTarget};
pub use data::{load_dataset, summarize, GroupSummary, LongitudinalDataset, ModifierKind, Schema, Subject};
pub use decomposition::{
    estimate, estimate_cmldd, estimate_ldd, estimate_mldd, BandwidthBundle, BandwidthPair,
    Bandwidths, Component, DecompositionConfig, DecompositionCurve, Method, TimeGrid,
};
pub use error::{Error, Result};
pub use inference::{bootstrap_scb, scb_from_replicates, BootstrapConfig, ScbResult};
pub use kernel::{kernel_eval, weight_vector, KernelSpec};
pub use simulation::{
    generate, true_conditional_decomposition, true_decomposition, DgpConfig, GroupLaw, ModifierLaw,
    ObsLaw, Surface,
};
pub use vc::{
    fit_beta_continuous, fit_beta_discrete, fit_beta_time_only, fit_cond_mean,
    CoefficientEstimate, CondMeanEstimate, FitOptions,
};

/// Formats a float at 17 significant digits, the precision that round-trips
/// every `f64` exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Formats an optional value, writing `NA` for gaps.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_else(|| "NA".to_string())
}
