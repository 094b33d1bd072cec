//! Independent solvers used to cross-check the closed form.

pub mod pde;
pub mod riccati_ode;

pub use pde::{
    refinement_study, solve_g_pde, solve_h_pde, solve_linear_pde, CoefficientSet, FnCoefficients, HestonCoefficients,
    LinearPde, PdeGrid, RefinementStudy,
};
pub use riccati_ode::{solve_riccati_ode, uniform_grid, RiccatiPath};
