//! Null and positive paths of diffeomorphisms of standard contact R^3.
//!
//! The contact form is `alpha = dz + x dy`. A path `t -> f_t` of
//! diffeomorphisms generates the time-dependent field `X_t` with
//! `d/dt f_t = X_t o f_t`; the path is null when `alpha(X_t) = 0` and
//! positive when `alpha(X_t) > 0` everywhere.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contact;
pub mod diffeo;
pub mod error;
pub mod extension;
pub mod expr;
pub mod factorize;
pub mod family;
pub mod field;
pub mod grid;
pub mod legendrian;
pub mod ode;
pub mod paths;
pub mod smooth;
pub mod synthesis;
pub mod verify;

pub use contact::{
    alpha_eval, conformal_factor, flow, frame_eval, hamiltonian_vector_field, ContactSpace,
    FrameField, Point, Tangent, Vector,
};
pub use diffeo::{check_near_identity, invert_point, Builtin, Diffeo, SmoothMap};
pub use error::{Error, Result};
pub use expr::{parse_map, MapExpr, ScalarExpr};
pub use factorize::{
    auto_epsilon, build_phi, compute_tau, factorization_eval, factorize, Amplitude,
    FactorizeOptions, Factorization, TauIndex, Translation,
};
pub use family::Family;
pub use field::{Bump, ScalarField};
pub use grid::{time_grid, Aabb, Grid, Shell};
pub use paths::{
    classify, concat, hofer_length, right_translate, DiffeoPath, Exactness, PathRecord, Verdict, Warp,
};
pub use extension::{
    compute_constants, extend_positive, ContactPathInput, Extension, ExtensionOptions,
    ExtensionParams, ExtensionReport,
};
pub use legendrian::{
    isotopy_classify, jet_legendrian, transport, IsotopyRecord, IsotopySample, Jet, JetSampling,
    LegendrianSample,
};
pub use synthesis::{
    far_field_report, null_path_to, positive_path_compact, positive_path_to, reeb_null_path,
    reeb_null_path_small, subdivide_and_connect, FarFieldReport, SynthesisOptions, Synthesized,
};
pub use verify::{verify, verify_records, VerificationReport, VerifyConfig};
