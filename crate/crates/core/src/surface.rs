//! Affine surfaces: a torsion-free connection on a 2-dimensional chart
//! given by six Christoffel symbols, with the homogeneous Type A / Type B
//! families and the potential-generated family whose cotangent extensions
//! are Bach flat.

use crate::expr::ScalarExpr;
use crate::field::{Field, FieldError, Point4, Rect};
use crate::jet::{Jet, MAX_ORDER};

/// Index into the six stored Christoffel entries, ordered
/// `G11^1, G11^2, G12^1, G12^2, G22^1, G22^2`.
fn slot(i: usize, j: usize, k: usize) -> usize {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    let pair = match (lo, hi) {
        (0, 0) => 0,
        (0, 1) => 1,
        (1, 1) => 2,
        _ => panic!("christoffel index out of range"),
    };
    pair * 2 + k
}

/// An affine surface `(M, nabla)`.
#[derive(Debug, Clone)]
pub enum AffineSurface {
    /// Six independent Christoffel entries as scalar fields.
    Explicit { gamma: [Field; 6], domain: Rect },
    /// Connections generated by a potential `phi(x1, x2)` and a gauge
    /// function `c(x2)`: the derived entries are
    /// `G11^2 = 0`, `G11^1 = -d(phi)/dx1`, `G12^2 = G11^1 + c*e^phi`,
    /// which close the Bach-flat conditions for the canonical nilpotent
    /// endomorphism. The remaining three entries are free.
    Potential {
        phi: Field,
        c: Field,
        g12_1: Field,
        g22_1: Field,
        g22_2: Field,
        domain: Rect,
    },
}

impl AffineSurface {
    pub fn flat() -> AffineSurface {
        AffineSurface::Explicit {
            gamma: std::array::from_fn(|_| Field::zero()),
            domain: Rect::whole_plane(),
        }
    }

    /// Entries in the order `G11^1, G11^2, G12^1, G12^2, G22^1, G22^2`.
    pub fn from_fields(gamma: [Field; 6], domain: Rect) -> AffineSurface {
        AffineSurface::Explicit { gamma, domain }
    }

    /// Constant Christoffel symbols (Type A homogeneous surface).
    pub fn type_a(gamma: [f64; 6]) -> AffineSurface {
        AffineSurface::Explicit {
            gamma: std::array::from_fn(|s| Field::constant(gamma[s])),
            domain: Rect::whole_plane(),
        }
    }

    /// `G_ij^k = C_ij^k / x1` on `x1 > 0` (Type B homogeneous surface).
    /// Entries in the order `C11^1, C11^2, C12^1, C12^2, C22^1, C22^2`.
    pub fn type_b(c: [f64; 6]) -> AffineSurface {
        AffineSurface::Explicit {
            gamma: std::array::from_fn(|s| {
                Field::expr(ScalarExpr::Div(
                    Box::new(ScalarExpr::Num(c[s])),
                    Box::new(ScalarExpr::coord(0)),
                ))
            }),
            domain: Rect::positive_x1(),
        }
    }

    pub fn potential_family(
        phi: Field,
        c: Field,
        g12_1: Field,
        g22_1: Field,
        g22_2: Field,
    ) -> AffineSurface {
        AffineSurface::Potential {
            phi,
            c,
            g12_1,
            g22_1,
            g22_2,
            domain: Rect::whole_plane(),
        }
    }

    pub fn domain(&self) -> &Rect {
        match self {
            AffineSurface::Explicit { domain, .. } => domain,
            AffineSurface::Potential { domain, .. } => domain,
        }
    }

    fn check_domain(&self, p: &Point4) -> Result<(), FieldError> {
        if !self.domain().contains(p) {
            return Err(FieldError::OutOfDomain { x1: p.x1, x2: p.x2 });
        }
        Ok(())
    }

    /// Jets of the six Christoffel symbols at the base point of `p`,
    /// indexed `[i][j][k]` for `G_ij^k` (symmetric in `i, j`).
    pub fn christoffel_at(
        &self,
        p: &Point4,
        order: usize,
    ) -> Result<[[[Jet; 2]; 2]; 2], FieldError> {
        self.check_domain(p)?;
        let mut slots: [Jet; 6] = std::array::from_fn(|_| Jet::zero(order));
        match self {
            AffineSurface::Explicit { gamma, .. } => {
                for (s, g) in gamma.iter().enumerate() {
                    slots[s] = g.jet(p, order)?;
                }
            }
            AffineSurface::Potential {
                phi,
                c,
                g12_1,
                g22_1,
                g22_2,
                ..
            } => {
                if order + 1 > MAX_ORDER {
                    return Err(FieldError::Invalid(format!(
                        "potential family needs order {} jets of phi (max {MAX_ORDER})",
                        order + 1
                    )));
                }
                let phi_j = phi.jet(p, order + 1)?;
                let g11_1 = phi_j.deriv(0)?.neg();
                let c_j = c.jet(p, order)?;
                let g12_2 = g11_1.add(&c_j.mul(&phi_j.truncate(order).exp()));
                slots[slot(0, 0, 0)] = g11_1;
                slots[slot(0, 0, 1)] = Jet::zero(order);
                slots[slot(0, 1, 0)] = g12_1.jet(p, order)?;
                slots[slot(0, 1, 1)] = g12_2;
                slots[slot(1, 1, 0)] = g22_1.jet(p, order)?;
                slots[slot(1, 1, 1)] = g22_2.jet(p, order)?;
            }
        }
        Ok(std::array::from_fn(|i| {
            std::array::from_fn(|j| std::array::from_fn(|k| slots[slot(i, j, k)].clone()))
        }))
    }

    /// Curvature operator components `R_ijk^l` of the affine connection as
    /// jets (one order below the Christoffel jets).
    pub fn curvature_at(
        &self,
        p: &Point4,
        order: usize,
    ) -> Result<[[[[Jet; 2]; 2]; 2]; 2], FieldError> {
        let g = self.christoffel_at(p, order + 1)?;
        let mut r: [[[[Jet; 2]; 2]; 2]; 2] = std::array::from_fn(|_| {
            std::array::from_fn(|_| std::array::from_fn(|_| std::array::from_fn(|_| Jet::zero(order))))
        });
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let mut t = g[j][k][l].deriv(i)?.sub(&g[i][k][l].deriv(j)?);
                        for m in 0..2 {
                            t = t
                                .add(&g[i][m][l].mul(&g[j][k][m]).truncate(order))
                                .sub(&g[j][m][l].mul(&g[i][k][m]).truncate(order));
                        }
                        r[i][j][k][l] = t;
                    }
                }
            }
        }
        Ok(r)
    }
}

/// Ricci tensor of the affine connection with its symmetric and
/// antisymmetric parts; `rho(Y, Z) = trace(X -> R(X, Y) Z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineRicci {
    pub rho: [[f64; 2]; 2],
    pub sym: [[f64; 2]; 2],
    pub alt: [[f64; 2]; 2],
}

impl AffineRicci {
    pub fn alt_12(&self) -> f64 {
        self.alt[0][1]
    }
}

pub fn ricci_affine(s: &AffineSurface, p: &Point4) -> Result<AffineRicci, FieldError> {
    let r = s.curvature_at(p, 0)?;
    let mut rho = [[0.0; 2]; 2];
    for j in 0..2 {
        for k in 0..2 {
            for i in 0..2 {
                rho[j][k] += r[i][j][k][i].value();
            }
        }
    }
    let mut sym = [[0.0; 2]; 2];
    let mut alt = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            sym[a][b] = 0.5 * (rho[a][b] + rho[b][a]);
            alt[a][b] = 0.5 * (rho[a][b] - rho[b][a]);
        }
    }
    Ok(AffineRicci { rho, sym, alt })
}

/// Affine Ricci as jets on the base (for pulled-back comparisons).
pub fn ricci_affine_jets(
    s: &AffineSurface,
    p: &Point4,
    order: usize,
) -> Result<[[Jet; 2]; 2], FieldError> {
    let r = s.curvature_at(p, order)?;
    let mut rho: [[Jet; 2]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| Jet::zero(order)));
    for j in 0..2 {
        for k in 0..2 {
            for i in 0..2 {
                rho[j][k] = rho[j][k].add(&r[i][j][k][i]);
            }
        }
    }
    Ok(rho)
}

/// Evidence report for affine flatness over a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessReport {
    pub flat: bool,
    pub max_abs: f64,
    pub witness: Option<Point4>,
}

pub fn is_flat(
    s: &AffineSurface,
    samples: &[Point4],
    tol: f64,
) -> Result<FlatnessReport, FieldError> {
    if samples.is_empty() {
        return Err(FieldError::Invalid("empty sample list".into()));
    }
    let mut max_abs = 0.0f64;
    let mut witness = None;
    for p in samples {
        let r = s.curvature_at(p, 0)?;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let v = r[i][j][k][l].value().abs();
                        if v > max_abs {
                            max_abs = v;
                            witness = Some(*p);
                        }
                    }
                }
            }
        }
    }
    Ok(FlatnessReport {
        flat: max_abs < tol,
        max_abs,
        witness: if max_abs < tol { None } else { witness },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// The Type A surface with `G12^1 = G12^2 = 1` and other symbols zero.
    pub fn crossing_type_a() -> AffineSurface {
        AffineSurface::type_a([0.0, 0.0, 1.0, 1.0, 0.0, 0.0])
    }

    #[test]
    fn flat_surface_zero_everything() {
        let s = AffineSurface::flat();
        let p = Point4::new(0.4, -1.2, 0.0, 0.0);
        let g = s.christoffel_at(&p, 3).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_eq!(g[i][j][k].max_abs_coeff(), 0.0);
                }
            }
        }
        let report = is_flat(&s, &[p], 1e-10).unwrap();
        assert!(report.flat);
    }

    #[test]
    fn crossing_surface_symbols_and_ricci() {
        let s = crossing_type_a();
        let p = Point4::new(0.7, 0.3, 0.0, 0.0);
        let g = s.christoffel_at(&p, 2).unwrap();
        assert_eq!(g[0][1][0].value(), 1.0);
        assert_eq!(g[0][1][1].value(), 1.0);
        assert_eq!(g[1][0][0].value(), 1.0); // torsion-free
        assert_eq!(g[0][0][0].value(), 0.0);
        let ric = ricci_affine(&s, &p).unwrap();
        // rho = -(dx1 - dx2)^2
        let expect = [[-1.0, 1.0], [1.0, -1.0]];
        for a in 0..2 {
            for b in 0..2 {
                assert!((ric.rho[a][b] - expect[a][b]).abs() < 1e-12);
            }
        }
        assert!(!is_flat(&s, &[p], 1e-10).unwrap().flat);
    }

    #[test]
    fn type_a_ricci_is_symmetric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let s = AffineSurface::type_a(g);
            let p = Point4::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0, 0.0);
            let ric = ricci_affine(&s, &p).unwrap();
            assert!(ric.alt_12().abs() < 1e-12);
        }
    }

    #[test]
    fn type_b_symbol_jets() {
        // C12^1 = 3 at x1 = 2: value 1.5, d/dx1 coefficient -0.75
        let s = AffineSurface::type_b([0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        let p = Point4::new(2.0, 0.5, 0.0, 0.0);
        let g = s.christoffel_at(&p, 2).unwrap();
        assert!((g[0][1][0].value() - 1.5).abs() < 1e-14);
        assert!((g[0][1][0].coeff([1, 0, 0, 0]) + 0.75).abs() < 1e-14);
        assert!(s.christoffel_at(&Point4::new(-1.0, 0.0, 0.0, 0.0), 1).is_err());
    }

    #[test]
    fn single_constant_symbol_is_flat() {
        // G11^1 = 1, others 0: R vanishes
        let s = AffineSurface::type_a([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let pts = [
            Point4::new(0.0, 0.0, 0.0, 0.0),
            Point4::new(1.3, -0.4, 0.0, 0.0),
        ];
        assert!(is_flat(&s, &pts, 1e-10).unwrap().flat);
    }

    #[test]
    fn type_b_symmetry_criteria() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            // Case 1 constraints: C11^2 = 0, C11^1 = 1; symmetric iff C12^1 + C22^2 = 0
            let c12_1 = rng.gen_range(-2.0..2.0);
            let c12_2 = rng.gen_range(-2.0..2.0);
            let c22_1 = rng.gen_range(-2.0..2.0);
            let sym_choice: bool = rng.gen();
            let c22_2 = if sym_choice {
                -c12_1
            } else {
                -c12_1 + rng.gen_range(0.3..1.0)
            };
            let s = AffineSurface::type_b([1.0, 0.0, c12_1, c12_2, c22_1, c22_2]);
            let p = Point4::new(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0), 0.0, 0.0);
            let ric = ricci_affine(&s, &p).unwrap();
            if sym_choice {
                assert!(ric.alt_12().abs() < 1e-12);
            } else {
                assert!(ric.alt_12().abs() > 1e-8);
            }
        }
        for _ in 0..30 {
            // Case 2 constraints: C22^1 = 0, C22^2 (C12^1 - C22^2) = 0;
            // symmetric iff C12^1 = 0
            let mut rng2 = rand_chacha::ChaCha8Rng::seed_from_u64(rng.gen());
            let sym_choice: bool = rng2.gen();
            let c12_1: f64 = if sym_choice {
                0.0
            } else {
                rng2.gen_range(0.3..1.5)
            };
            // satisfy the case constraint with C22^2 = 0 or C22^2 = C12^1
            let c22_2 = if rng2.gen() { 0.0 } else { c12_1 };
            let c11_1 = rng2.gen_range(-1.0..1.0);
            let c11_2 = rng2.gen_range(-1.0..1.0);
            let c12_2 = rng2.gen_range(-1.0..1.0);
            let s = AffineSurface::type_b([c11_1, c11_2, c12_1, c12_2, 0.0, c22_2]);
            let p = Point4::new(1.3, 0.2, 0.0, 0.0);
            let ric = ricci_affine(&s, &p).unwrap();
            if sym_choice {
                assert!(ric.alt_12().abs() < 1e-12);
            } else {
                assert!(ric.alt_12().abs() > 1e-8, "alt {}", ric.alt_12());
            }
        }
    }

    #[test]
    fn potential_family_closure_relations() {
        use crate::expr::parse_expr;
        let phi = Field::expr(parse_expr("x1*x2 + sin(x1)").unwrap());
        let c = Field::expr(parse_expr("1 + x2^2").unwrap());
        let s = AffineSurface::potential_family(
            phi,
            c,
            Field::constant(0.3),
            Field::zero(),
            Field::zero(),
        );
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let p = Point4::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0, 0.0);
            let g = s.christoffel_at(&p, 1).unwrap();
            // derived entries: G11^2 = 0 and G12^2 - G11^1 = c e^phi > 0
            assert_eq!(g[0][0][1].max_abs_coeff(), 0.0);
            let diff = g[0][1][1].value() - g[0][0][0].value();
            let cephi = (1.0 + p.x2 * p.x2) * (p.x1 * p.x2 + p.x1.sin()).exp();
            assert!((diff - cephi).abs() < 1e-12);
        }
    }
}
