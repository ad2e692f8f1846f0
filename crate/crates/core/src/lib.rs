//! Ordinal regression as structured prediction.
//!
//! A label `y ∈ 1..=K` is encoded as `K-1` cumulative bits and modelled with a
//! heterogeneous linear-chain CRF whose potentials are linear in the features
//! ([`models::StormModel`]). The crate also ships the comparison baselines (ordered
//! logit, nested binary classifiers, multinomial logistic regression), dataset tooling,
//! and the statistics used to compare models over many datasets.
//!
//! Numerical code is generic over [`scalar::Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.

pub mod benchmark;
pub mod chain_crf;
pub mod data;
pub mod encoding;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod optim;
pub mod scalar;

pub use error::{Result, StormError};

pub type ChainCrfParams64 = chain_crf::ChainCrfParams<f64>;
pub type ChainCrfParams32 = chain_crf::ChainCrfParams<f32>;
pub type StormModel64 = models::StormModel<f64>;
pub type StormModel32 = models::StormModel<f32>;
pub type OrderedLogit64 = models::OrderedLogitModel<f64>;
pub type OrderedLogit32 = models::OrderedLogitModel<f32>;
pub type NestedBinary64 = models::NestedBinaryModel<f64>;
pub type NestedBinary32 = models::NestedBinaryModel<f32>;
pub type Multinomial64 = models::MultinomialLogisticModel<f64>;
pub type Multinomial32 = models::MultinomialLogisticModel<f32>;
pub type Predictor64 = models::Predictor<f64>;
pub type Predictor32 = models::Predictor<f32>;
