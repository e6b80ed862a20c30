//! Handwritten digit recognition by elastic graph matching.
//!
//! Digits are described by grids of Gabor jets. A test digit is compared with
//! every stored model by sliding its grid rigidly over all wrap-around
//! offsets, then letting each node step to a neighbouring grid position; the
//! class of the cheapest match wins.

pub mod classifier;
pub mod error;
pub mod gabor;
pub mod graph;
pub mod harness;
pub mod matcher;
pub mod mnist;
pub mod slant;

pub use classifier::{build_model_bank, classify, evaluate, Classification, Evaluation, ModelBank};
pub use error::{Error, Result};
pub use gabor::{extract_jets, GaborParams, JetField};
pub use graph::{GridGraph, GridSpec};
pub use matcher::{match_image, CostParams, MatchResult};
pub use mnist::{Image, LabelledSet};
