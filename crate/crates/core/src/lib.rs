//! Perpetual discounted optimal stopping, `V(x) = sup_τ E_x[e^{-ατ} g(X_τ)]`,
//! for one-dimensional diffusions and spectrally one-sided jump processes.
//!
//! Layers, bottom up:
//! - [`markov`]: intervals, regions, signed measures, quadrature, roots.
//! - [`diffusion`]: process catalog, Green function, hitting transforms, rewards.
//! - [`onesided`]: threshold problems and smooth-fit diagnostics.
//! - [`region`]: two-sided systems and the general expansion/merge algorithm.
//! - [`jump`]: Lévy exponents, the Lévy-driven OU kernel and its thresholds.
//! - [`mc`]: Monte-Carlo estimates of stopping rules.
//! - [`config`], [`driver`] and [`cli`]: JSON problem files, solver dispatch
//!   and the `optstop` front end.

pub mod cli;
pub mod config;
pub mod diffusion;
pub mod driver;
pub mod error;
pub mod jump;
pub mod markov;
pub mod mc;
pub mod onesided;
pub mod output;
pub mod region;
pub mod solution;

pub use error::{Error, Result};
