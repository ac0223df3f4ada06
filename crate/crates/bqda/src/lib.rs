//! Uncertainty-aware generative classification for multi-realization
//! data cubes.
//!
//! The input is a cube of `pixels x bands x realizations` values: each
//! pixel carries several equally plausible band vectors instead of one
//! measurement, as produced by sampling a retrieval's uncertainty. The
//! centerpiece is a Bayesian quadratic discriminant that pools all
//! realizations into per-class normal-inverse-Wishart posteriors under a
//! data-dependent prior and scores pixels with Student-t posterior
//! predictives. Frequentist QDA/LDA baselines, an ensemble-over-
//! realizations protocol, proper-scoring metrics, a principal component
//! projection, and a synthetic cube generator round out the toolkit; the
//! `bqda` binary drives all of it from the command line.
//!
//! Determinism is a design rule throughout: every random choice (splits,
//! ensemble permutations, synthesis) flows from an explicit seed through
//! a counter-based generator, and model files regenerate their densities
//! exactly on reload.

pub mod classify;
pub mod data;
pub mod dist;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod niw;
pub mod pca;
pub mod spd;
pub mod synth;

pub use classify::{
    fit_bqda, fit_lda, fit_qda, ClassCatalog, ClassStats, FittedModel, ModelKind,
    ProbabilityTable,
};
pub use data::{
    aod_standard_uncertainty, class_summary, load_cube, save_cube, split_pixels,
    ClassBandSummary, CubeSchema, DataCube, SplitSpec,
};
pub use dist::{GaussianParams, StudentTParams};
pub use ensemble::{
    ensemble_fit, ensemble_predict, fit_on_realization, fit_pooled, predict_averaged,
};
pub use error::{Error, Result};
pub use metrics::{
    bs_norm, class_rates, confusion, evaluate_table, f_beta, xe_norm, ClassRates,
    ConfusionMatrix, EvalMeta, EvalReport, PriorClassDistribution,
};
pub use niw::{default_prior, niw_posterior, niw_posterior_predictive, NiwParams};
pub use pca::pca_project;
pub use spd::SpdMatrix;
pub use synth::{synth_cube, SynthClass, SynthSpec};
