//! Neutral-signature metrics on cotangent bundles of affine surfaces:
//! construction by deformed Riemannian extensions, the curvature hierarchy
//! through the Bach tensor, scalar and non-Weyl invariants, and numerical
//! solvers for the Bach-flat structure equations.

pub mod bachflat;
pub mod curvature;
pub mod expr;
pub mod extension;
pub mod field;
pub mod invariants;
pub mod jet;
pub mod normalize;
pub mod pde;
pub mod surface;

pub use curvature::{
    bach_values, convention_record, curvature_pack, max_abs2, theta_coefficients, weyl_sd,
    ConventionRecord, CurvaturePack, WeylSD,
};
pub use expr::{parse_expr, parse_expr_consts, parse_expr_with, ExprError, ScalarExpr};
pub use extension::{
    classify_endo, mixed_jordan_example, Deformation, EndoClass, EndoField, ExtensionMetric,
    MetricField,
};
pub use bachflat::{
    brinkmann_e, brinkmann_e_field, e_tilde, einstein_residual, example_catalog_checks, p1_eval,
    p2_eval, q_identities, strictness_sweep, thm11_check, CatalogCheck, ConformalCandidate,
    PDEOperands, QReport, SweepReport,
};
pub use field::{ConstTable, Field, FieldError, Point4, PolyField, Rect};
pub use invariants::{
    derivative_level_invariants, eigen2, invariant_report, quadratic_closed_forms,
    quadratic_invariants, structural_zeros,
    walker_invariants, DerivativeInvariants, InvariantReport, QuadraticInvariants,
    StructuralZeros, VsiVerdict, WalkerInvariants,
};
pub use jet::{Jet, JetError, MAX_ORDER, NVARS};
pub use normalize::{normalize_nilpotent, NormalizationReport, NormalizedNode};
pub use pde::{
    p1_residual, p2_residual, solve_p1, solve_p2, verify_bach_on_grid, BachGridReport,
    FieldOnGrid, MarchMethod, PdeError, StencilFitter, StripGrid,
};
pub use surface::{ricci_affine, AffineRicci, AffineSurface, FlatnessReport};
