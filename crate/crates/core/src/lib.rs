//! Learning multivariate, optionally time-varying Hawkes processes from short
//! doubly-censored (SDC) event sequences.
//!
//! The crate is organised bottom-up:
//!
//! - [`sequence`], [`basis`], [`model`]: domain types.
//! - [`likelihood`]: conditional intensity, kernel-basis integrals,
//!   compensators and log-likelihoods.
//! - [`simulate`]: ground-truth construction, thinning simulation and
//!   interval censoring.
//! - [`stitch`]: sampling-stitching synthesis of long training sequences.
//! - [`learn`]: the weighted EM estimator with ADMM-coupled L1 sparsity.
//! - [`eval`]: metrics, simulator validation and the experiment runner.

// `!(x > 0.0)` is used on purpose to also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod eval;
pub mod learn;
pub mod likelihood;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod sequence;
pub mod simulate;
pub mod stitch;

pub use basis::{BasisConfig, BasisKind};
pub use error::{Error, Result};
pub use eval::{
    heldout_loglik, relative_error, run_experiment, time_rescaling_check, ExperimentConfig,
    ExperimentReport, HeldoutLikelihood, KsOutcome, Regime, RegimeSummary, ReportRow,
};
pub use learn::{fit, FitResult, LearnerConfig, LearnerState, Responsibilities};
pub use likelihood::{basis_eval, compensator, g_integral, intensity, log_likelihood};
pub use model::{Excitation, HawkesModel, InfectivityTensor};
pub use sequence::{Event, EventSequence, ObservationWindow};
pub use simulate::{
    censor, make_ground_truth, simulate, simulate_many, GroundTruth, GroundTruthSpec, Infectivity,
    SdcDataset, TruthKind,
};
pub use stitch::{
    predecessor_distribution, resolve_overlap, sample_stitched, similarity, stitch_dataset,
    successor_distribution, StitchConfig, StitchedDataset,
};
