//! Sub- and super-solutions, the monotone iteration, conformal
//! pre-normalizations and the prescription pipeline.

mod bracket;
mod glue;
mod inequalities;
mod iterate;
mod normalize;
mod pipeline;

pub use bracket::{dyadic_theta, make_subsolution, scale_eigenfunction, ScaledEigenfunction};
pub use glue::{admissible_gamma, glue_supersolution, linearized_rayleigh, GlueBranch, GlueOptions, GlueOutcome, GluingConfig};
pub use inequalities::{
    check_side, residual_rows, residual_scale, verify_inequalities, InequalityReport, Side, SideReport, INEQUALITY_TOLERANCE,
    ORDER_SLACK,
};
pub use iterate::{monotone_iterate, order_preserving_shift, IterationOptions, IterationState};
pub use normalize::{negative_scalar_normalization, positive_mean_curvature_normalization, Normalization};
pub use pipeline::*;
