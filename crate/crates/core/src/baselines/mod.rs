//! Reference solvers for the column problems: hard thresholding pursuit and
//! ADMM in equality and box-constrained forms.

mod admm;
mod htp;

pub use admm::{
    admm_solve_column, admm_solve_column_with, admm_solve_columns_with, primal_gap, shrink, ADMM_LANES, AdmmConfig, AdmmProjector,
};
pub use htp::{htp_solve_column, htp_solve_column_with_step, htp_step_size, HtpConfig};
