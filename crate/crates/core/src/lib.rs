//! Robust consumption-investment for an Epstein-Zin investor facing Heston
//! stochastic volatility.
//!
//! The crate evaluates the exponential-affine closed form of the robust value
//! function and optimal controls, and ships the machinery needed to check it
//! independently:
//!
//! - [`params`]: raw inputs, derived constants and the validity gates that
//!   must pass before any solve.
//! - [`closed_form`]: Riccati functions `A`, `B`, the surface `g` and its
//!   `y`-derivatives by quadrature, optimal controls and worst-case distortion.
//! - [`verification`]: Epstein-Zin aggregator, robustness penalty, the HJBI
//!   Hamiltonian and residual/saddle diagnostics.
//! - [`oracles`]: RK4 for the Riccati system and a Crank-Nicolson solver for
//!   the linear PDE satisfied by `g`.
//! - [`simulation`]: Monte Carlo of the distorted state dynamics with
//!   Feynman-Kac, CIR-moment and martingale estimators.

pub mod closed_form;
pub mod config;
pub mod error;
pub mod oracles;
pub mod params;
pub mod quadrature;
pub mod simulation;
pub mod verification;

pub use closed_form::{
    eval_g, optimal_strategy, riccati_closed_form, value_function, EvalOptions, GTriple, HestonModel,
    RiccatiCoefficients, RiccatiPair, StrategyPoint,
};
pub use config::{Config, Settings};
pub use error::{Error, Result};
pub use params::{
    derive_constants, validate_heston, validate_preference_case, DerivedConstants, ModelParams, PreferenceCase,
    ValidationReport,
};
