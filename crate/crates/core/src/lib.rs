//! Forecast evaluation toolkit.
//!
//! Trains and evaluates forecasters under a windowed rolling-origin protocol,
//! explains them with segment LIME and TreeSHAP (directly or through a
//! surrogate), and rates them with causally grounded metrics (weighted
//! rejection score and G-computation ATE) against random and biased baselines.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`] ingestion, splitting, windowing and the per-domain protocol constants
//! * [`statkit`] ACF, ADF/KPSS, Welch t-test, robust scaling, weighted least squares
//! * [`features`] deterministic feature engineering shared by GBDT and surrogates
//! * [`forecast`] the forecaster contract, seasonal naive, ARIMA and GBDT
//! * [`harness`] autoregressive/direct evaluation, sMAPE/MASE and aggregation
//! * [`explain`] segment LIME, TreeSHAP and surrogate fitting
//! * [`rde`] causal frames, WRS, ATE, baselines and ratings
//! * [`adapter`] wire protocol and mocks for external black-box forecasters

pub mod adapter;
pub mod data;
pub mod error;
pub mod explain;
pub mod features;
pub mod forecast;
pub mod harness;
pub mod plot;
pub mod rde;
pub mod statkit;

pub use error::{Error, Result};
