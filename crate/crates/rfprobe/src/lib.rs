//! # rfprobe
//!
//! Estimation and validation of the spatial receptive fields of units in
//! feedforward convolutional networks via reverse correlation.
//!
//! A unit is driven with Gaussian white noise; its receptive field is
//! recovered as the activation-weighted average (AWA) of the stimuli and
//! as the eigenvectors of the activation-weighted covariance (AWC) matrix,
//! whose large-eigenvalue directions act as excitatory sub-filters and
//! small-eigenvalue directions as suppressive ones. The recovered bank is
//! validated with a linear–nonlinear cascade fitted by least squares and
//! scored by Pearson correlation, alongside grating-tuning maps and
//! natural-image category selectivity.
//!
//! ## Modules
//!
//! - [`stimulus`] — white-noise streams, the 408-grating battery,
//!   categorized image ingestion (PNM).
//! - [`net`] — forward-only conv/relu/maxpool inference, the center-value
//!   response probe, synthetic ground-truth units, the `NNF1` model file.
//! - [`revcorr`] — streaming AWA/AWC accumulation with mergeable chunks,
//!   Jacobi eigendecomposition, sub-filter selection, the `RFB1` bank file.
//! - [`lnmodel`] — the LN cascade: regressors, ridge least squares,
//!   prediction, Pearson scoring, chance-level controls.
//! - [`tuning`] — orientation/SF tuning maps, one-way ANOVA with
//!   Bonferroni correction, response-distribution diagnostics.
//! - [`cli`] — the `analyze` / `fit` / `tune` / `export` batch driver.
//!
//! ## Quick start
//!
//! ```
//! use rfprobe::net::{make_synthetic_unit, GaborSpec, Responder, SyntheticUnitParams};
//! use rfprobe::revcorr::{AwcForm, RevCorrAccumulator};
//! use rfprobe::stimulus::{gen_white_noise, NoiseSpec};
//!
//! let shape = (16, 16, 1);
//! let params = SyntheticUnitParams::LinearHalfRect { gabor: GaborSpec::centered(16, 16, 0.0) };
//! let unit = make_synthetic_unit(&params, shape).unwrap();
//!
//! let spec = NoiseSpec { seed: 7, count: 2_000, shape, mean: 0.0, std: 1.0 };
//! let mut acc = RevCorrAccumulator::new(shape, AwcForm::StandardStc).unwrap();
//! for stim in gen_white_noise(&spec).unwrap() {
//!     let r = unit.respond(&stim).unwrap();
//!     acc.accumulate(&stim, r).unwrap();
//! }
//! let awa = acc.finalize_awa().unwrap();
//! let k = &unit.excitatory_filters()[0];
//! let cosine = awa.values.dot(k).unwrap() / awa.values.norm();
//! assert!(cosine > 0.5);
//! ```
//!
//! Runnable walkthroughs for every capability live in `examples/`; the
//! `rfprobe` binary wraps the same pipelines as batch subcommands.

pub mod cli;
pub mod error;
pub mod lnmodel;
pub mod net;
pub mod revcorr;
pub mod stats;
pub mod stimulus;
pub mod tensor;
pub mod tuning;

pub use error::{Error, Result};
pub use tensor::ImageTensor;
