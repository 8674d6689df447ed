//! Stereographic charts, paired-point symmetry classifiers and integral
//! obstructions on the round sphere.

mod condition;
mod obstruction;
mod stereo;

pub use condition::{
    antipodal_pairs, check_condition_a, check_condition_b, check_pairs, orthonormal_completion, ConditionVerdict, Extension,
    PointPair, Relation, SphereFunction, Verdict, Witness, GRADIENT_STEP, GRADIENT_TOLERANCE, VALUE_TOLERANCE,
};
pub use obstruction::{be_obstruction, conformal_killing_field, kw_obstruction, obstruction_report, ObstructionReport};
pub use stereo::{conformal_factor_phi, inverse_jacobian, pullback_metric, stereo_forward, stereo_inverse, Pole, SpherePoint};

use crate::error::Result;
use crate::geometry::{Mesh, GeometrySpec};

/// Mesh vertices projected to the unit sphere.
pub fn mesh_samples(mesh: &Mesh) -> Result<Vec<SpherePoint>> {
    (0..mesh.vertex_count()).map(|v| SpherePoint::normalized(mesh.vertex(v))).collect()
}

/// Half the smallest chart edge length.
pub fn default_pair_tolerance(mesh: &Mesh, geom: &GeometrySpec) -> f64 {
    0.5 * mesh
        .edges()
        .iter()
        .map(|&(a, b)| geom.chart.distance(mesh.vertex(a), mesh.vertex(b)))
        .fold(f64::INFINITY, f64::min)
}
