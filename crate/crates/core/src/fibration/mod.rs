//! Great-circle fibrations of `S^{2n+1}` given by their base spaces in the
//! chart around a fixed fibre `P`.
//!
//! A base is the graph of a map `N: P⊥ → P⊥`; the fibre over `x` is the great
//! circle of the plane spanned by `e₁ + x` and `e₂ + N(x)`. It is a fibration
//! when every `dN_x` has no real eigenvalue and distinct base points give
//! disjoint circles.

mod artifact;
mod base;
mod bump;
mod germ;
mod hopf;
mod margin;
mod verify;

pub use artifact::FibrationArtifact;
pub use base::{
    build_fibration, build_fibration_with, eval_base, eval_dn, BaseMap, BuildOptions, Certificate,
    FibrationBase, DEFAULT_EXPONENT_CAP,
};
pub use bump::{bump_eval, bump_slope, slope_sup, BumpProfile};
pub use germ::{
    default_schedule, extend_germ, Attempt, ExtendOptions, Extension, GermComposite, GermSpec,
    MAX_GERM_DEGREE,
};
pub use hopf::{extend_structure, hopf_fibre_through, hopf_map, standard_hopf_structure, stereographic};
pub use margin::{transversality_margin, Margin, MarginGrid, MarginWitness};
pub use verify::{
    sample_points, verify_fibration, verify_points, CheckSummary, Failure, VerificationReport,
    VerifyOptions,
};
