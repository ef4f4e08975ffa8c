//! Hardy-space factorizations over finite subdiagonal algebras, realized on two
//! concrete models: block upper triangular matrices inside `M_n`, and analytic
//! matrix-valued trigonometric polynomials on the circle.

pub mod element;
pub mod error;
pub mod factor;
pub(crate) mod fft;
pub mod functional;
pub mod linalg;
pub mod model;
pub mod random;
pub mod suite;
pub mod szego_opt;
pub mod torus;

pub use element::{Element, ElementData};
pub use error::{Error, Result};
pub use functional::{
    det_as_limit, fk_det, fk_det_resolved, in_a, in_a0, in_d, newton_power_root, phi, pnorm, pnorm_resolved, polar, trace, Determinant,
    Membership, MembershipMode, NewtonRoot, PolarData,
};
pub use model::{AlgebraModel, ModelKind};
pub use random::{random_element, ElementClass};
pub use factor::{
    arveson_factor, inner_outer, is_outer, outer_factor_scalar, riesz_factor, riesz_factor_attained, subspace_rank,
    szego_factor, szego_factor_projection, wilson_factor, FactorizationResult, OuterReport, Side,
};
pub use szego_opt::{brute_force_infimum, closed_form_p2, szego_infimum, SzegoReport};
pub use suite::{run_suite, CheckRecord, SuiteConfig, SuiteReport};
