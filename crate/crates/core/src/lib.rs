//! Learning-based predictive monitoring for discrete-time hybrid systems under
//! noisy partial observability.
//!
//! The crate is organised bottom-up:
//!
//! - [`models`]: benchmark hybrid systems and their fixed-step simulation.
//! - [`reach`]: the simulation-based reachability oracle that labels states.
//! - [`data`]: dataset generation, scaling, splitting and persistence.
//! - [`nets`]: a small 1-D CNN engine with reverse-mode gradients, Adam, and
//!   the end-to-end / two-step monitor training pipelines.
//! - [`conformal`]: inductive conformal prediction for classification and
//!   regression, confidence and credibility.
//! - [`detection`]: the uncertainty-based rejection rule (linear SVC).
//! - [`runtime`]: a monitor bundled with its calibration and rule, and its
//!   evaluation on labelled data.
//! - [`active`]: uncertainty-aware active learning.
//! - [`ukf`]: the unscented Kalman filter baseline and relative-error metric.

pub mod active;
pub mod conformal;
pub mod data;
pub mod detection;
pub mod error;
pub mod models;
pub mod nets;
pub mod reach;
pub mod rng;
pub mod runtime;
pub mod store;
pub mod ukf;

pub use error::{Error, Result};
