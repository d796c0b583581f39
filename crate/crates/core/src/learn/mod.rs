//! Graph learning from smooth signals: the informed (prior-aware) primal-dual
//! solver, its no-prior special case, and the Laplacian-space baseline.

mod igl;
mod lap_smooth;
pub mod prox;

pub use igl::{
    igl_objective, igl_objective_matrix, solve_adj_smooth, solve_igl, IglParams, SolverTrace,
};
pub use lap_smooth::{
    lap_smooth_objective, project_scaled_simplex, solve_lap_smooth, LapSmoothParams,
    LapSmoothResult,
};
pub use prox::{grad_h, h_value, prox_f, prox_g, prox_g_conjugate};
