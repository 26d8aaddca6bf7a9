//! The deformed Riemannian extension: a neutral-signature metric on the
//! cotangent bundle built from an affine surface, a (1,1)-tensor field T,
//! and a symmetric deformation 2-tensor.

use crate::field::{Field, FieldError, Point4};
use crate::jet::Jet;
use crate::surface::AffineSurface;

/// A (1,1)-tensor field `T = T^i_j  d/dx^i (x) dx^j` on the base surface.
#[derive(Debug, Clone)]
pub enum EndoField {
    /// All four components given independently; `t[i][j] = T^i_j`.
    Explicit { t: [[Field; 2]; 2] },
    /// The trace-free, determinant-free family
    /// `T = alpha * [[xi, 1], [-xi^2, -xi]]`; nilpotent by construction,
    /// with `T^1_2 = alpha` nonvanishing where `alpha != 0`.
    Nilpotent { alpha: Field, xi: Field },
    /// The normal form `T = d/dx^1 (x) dx^2` of a nonzero nilpotent tensor.
    Canonical,
    /// Jordan type changing across `x2 = 0`: `alpha * Id` for `x2 <= 0`
    /// and `[[0, alpha], [0, 0]]` for `x2 >= 0`. Meaningful when `alpha`
    /// vanishes at `x2 = 0` to high enough order that the components stay
    /// at least C^2.
    PiecewiseScalarNilpotent { alpha: Field },
}

impl EndoField {
    pub fn zero() -> EndoField {
        EndoField::Explicit {
            t: std::array::from_fn(|_| std::array::from_fn(|_| Field::zero())),
        }
    }

    pub fn constant(t: [[f64; 2]; 2]) -> EndoField {
        EndoField::Explicit {
            t: std::array::from_fn(|i| std::array::from_fn(|j| Field::constant(t[i][j]))),
        }
    }

    pub fn nilpotent(alpha: Field, xi: Field) -> EndoField {
        EndoField::Nilpotent { alpha, xi }
    }

    /// Component jets `[i][j] = T^i_j` at the base point of `p`.
    pub fn matrix_jets(&self, p: &Point4, order: usize) -> Result<[[Jet; 2]; 2], FieldError> {
        Ok(match self {
            EndoField::Explicit { t } => {
                let mut m: [[Jet; 2]; 2] =
                    std::array::from_fn(|_| std::array::from_fn(|_| Jet::zero(order)));
                for i in 0..2 {
                    for j in 0..2 {
                        m[i][j] = t[i][j].jet(p, order)?;
                    }
                }
                m
            }
            EndoField::Nilpotent { alpha, xi } => {
                let a = alpha.jet(p, order)?;
                let x = xi.jet(p, order)?;
                let ax = a.mul(&x).truncate(order);
                [
                    [ax.clone(), a.clone()],
                    [ax.mul(&x).truncate(order).neg(), ax.neg()],
                ]
            }
            EndoField::Canonical => [
                [Jet::zero(order), Jet::constant(order, 1.0)],
                [Jet::zero(order), Jet::zero(order)],
            ],
            EndoField::PiecewiseScalarNilpotent { alpha } => {
                let a = alpha.jet(p, order)?;
                if p.x2 <= 0.0 {
                    [
                        [a.clone(), Jet::zero(order)],
                        [Jet::zero(order), a],
                    ]
                } else {
                    [
                        [Jet::zero(order), a],
                        [Jet::zero(order), Jet::zero(order)],
                    ]
                }
            }
        })
    }

    pub fn matrix_values(&self, p: &Point4) -> Result<[[f64; 2]; 2], FieldError> {
        let m = self.matrix_jets(p, 0)?;
        Ok(std::array::from_fn(|i| std::array::from_fn(|j| m[i][j].value())))
    }
}

/// Pointwise algebraic type of the endomorphism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndoClass {
    /// `T = lambda * Id`; the extension is half conformally flat there.
    ScalarMultiple { lambda: f64 },
    /// `T^2 = 0` with `T != 0`: nontrivial Jordan block.
    NilpotentNonzero,
    /// trace and determinant both below tolerance but not a scalar
    /// multiple and not covered above (numerically indistinct cases).
    NilpotentLike,
    /// Neither a scalar multiple of the identity nor nilpotent.
    Generic { trace: f64, det: f64 },
}

pub fn classify_endo(t: [[f64; 2]; 2], tol: f64) -> EndoClass {
    let tr = t[0][0] + t[1][1];
    let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
    let lambda = 0.5 * tr;
    let off = (t[0][1].abs())
        .max(t[1][0].abs())
        .max((t[0][0] - lambda).abs())
        .max((t[1][1] - lambda).abs());
    if off < tol {
        return EndoClass::ScalarMultiple { lambda };
    }
    if tr.abs() < tol && det.abs() < tol {
        let norm = t.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        if norm >= tol {
            return EndoClass::NilpotentNonzero;
        }
        return EndoClass::NilpotentLike;
    }
    EndoClass::Generic { trace: tr, det }
}

/// Symmetric deformation 2-tensor; entries `(phi11, phi12, phi22)`.
#[derive(Debug, Clone)]
pub struct Deformation {
    pub phi11: Field,
    pub phi12: Field,
    pub phi22: Field,
}

impl Deformation {
    pub fn zero() -> Deformation {
        Deformation {
            phi11: Field::zero(),
            phi12: Field::zero(),
            phi22: Field::zero(),
        }
    }

    pub fn new(phi11: Field, phi12: Field, phi22: Field) -> Deformation {
        Deformation { phi11, phi12, phi22 }
    }

    pub fn jets(&self, p: &Point4, order: usize) -> Result<[[Jet; 2]; 2], FieldError> {
        let a = self.phi11.jet(p, order)?;
        let b = self.phi12.jet(p, order)?;
        let c = self.phi22.jet(p, order)?;
        Ok([[a, b.clone()], [b, c]])
    }
}

/// The extension metric on the cotangent bundle chart `(x1, x2, y1, y2)`:
/// the base-base block is
/// `y_r y_s T^r_(i T^s_j) - 2 y_k G_ij^k + Phi_ij`,
/// the base-fiber block is the identity, and the fiber-fiber block is zero.
#[derive(Debug, Clone)]
pub struct ExtensionMetric {
    pub surface: AffineSurface,
    pub endo: EndoField,
    pub deformation: Deformation,
}

impl ExtensionMetric {
    pub fn new(surface: AffineSurface, endo: EndoField, deformation: Deformation) -> ExtensionMetric {
        ExtensionMetric {
            surface,
            endo,
            deformation,
        }
    }

    pub fn plain(surface: AffineSurface) -> ExtensionMetric {
        ExtensionMetric::new(surface, EndoField::zero(), Deformation::zero())
    }

    /// Component jets `g_ab` at `p` (coordinates ordered `x1, x2, y1, y2`).
    pub fn metric_jets(&self, p: &Point4, order: usize) -> Result<[[Jet; 4]; 4], FieldError> {
        let t = self.endo.matrix_jets(p, order)?;
        let gamma = self.surface.christoffel_at(p, order)?;
        let phi = self.deformation.jets(p, order)?;
        let y: [Jet; 2] = [
            Jet::variable(order, 2, p.y1),
            Jet::variable(order, 3, p.y2),
        ];
        let mut g: [[Jet; 4]; 4] =
            std::array::from_fn(|_| std::array::from_fn(|_| Jet::zero(order)));
        for i in 0..2 {
            g[i][2 + i] = Jet::constant(order, 1.0);
            g[2 + i][i] = Jet::constant(order, 1.0);
            for j in 0..2 {
                let mut a = phi[i][j].clone();
                for k in 0..2 {
                    a = a.sub(&y[k].mul(&gamma[i][j][k]).truncate(order).scale(2.0));
                }
                for r in 0..2 {
                    for s in 0..2 {
                        let tt = t[r][i]
                            .mul(&t[s][j])
                            .truncate(order)
                            .add(&t[r][j].mul(&t[s][i]).truncate(order));
                        a = a.add(
                            &y[r]
                                .mul(&y[s])
                                .truncate(order)
                                .mul(&tt)
                                .truncate(order)
                                .scale(0.5),
                        );
                    }
                }
                g[i][j] = a;
            }
        }
        Ok(g)
    }

    pub fn metric_values(&self, p: &Point4) -> Result<[[f64; 4]; 4], FieldError> {
        let g = self.metric_jets(p, 0)?;
        Ok(std::array::from_fn(|a| std::array::from_fn(|b| g[a][b].value())))
    }
}

/// A metric together with conformal rescalings of it.
#[derive(Debug, Clone)]
pub enum MetricField {
    Extension(ExtensionMetric),
    /// `g = factor^(-2) * base`; the factor is a positive scalar field
    /// (it may depend on all four coordinates).
    Conformal { base: Box<MetricField>, factor: Field },
}

impl MetricField {
    pub fn extension(m: ExtensionMetric) -> MetricField {
        MetricField::Extension(m)
    }

    pub fn conformal(self, factor: Field) -> MetricField {
        MetricField::Conformal {
            base: Box::new(self),
            factor,
        }
    }

    /// `c^2 * base` for constant `c^2 > 0`.
    pub fn const_scaled(self, c2: f64) -> MetricField {
        self.conformal(Field::constant(1.0 / c2.sqrt()))
    }

    pub fn metric_jets(&self, p: &Point4, order: usize) -> Result<[[Jet; 4]; 4], FieldError> {
        match self {
            MetricField::Extension(m) => m.metric_jets(p, order),
            MetricField::Conformal { base, factor } => {
                let g = base.metric_jets(p, order)?;
                let f = factor.jet(p, order)?;
                let w = f.mul(&f).truncate(order).recip()?;
                Ok(std::array::from_fn(|a| {
                    std::array::from_fn(|b| g[a][b].mul(&w).truncate(order))
                }))
            }
        }
    }

    pub fn metric_values(&self, p: &Point4) -> Result<[[f64; 4]; 4], FieldError> {
        let g = self.metric_jets(p, 0)?;
        Ok(std::array::from_fn(|a| std::array::from_fn(|b| g[a][b].value())))
    }
}

/// The smooth-category example where the Jordan type of T changes across
/// `x2 = 0`: flat connection, `alpha = (x2)^6`, no deformation. Both
/// half-planes give a Bach-flat extension, but T is a scalar multiple of
/// the identity on one side and nilpotent on the other.
pub fn mixed_jordan_example() -> ExtensionMetric {
    use crate::expr::ScalarExpr;
    let alpha = Field::expr(ScalarExpr::Pow(Box::new(ScalarExpr::coord(1)), 6.0));
    ExtensionMetric::new(
        AffineSurface::flat(),
        EndoField::PiecewiseScalarNilpotent { alpha },
        Deformation::zero(),
    )
}
