//! Curvature hierarchy of a metric given by component jets: Levi-Civita
//! symbols, Riemann and Weyl tensors, Ricci, scalar curvature, covariant
//! derivatives of lowered tensors, the Bach tensor, fiber-quadratic Bach
//! coefficients, and the (anti-)self-dual Weyl operators in the null
//! orthonormal frame adapted to the bundle structure.
//!
//! Sign conventions used throughout (recorded in [`convention_record`]):
//! `R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]`, lowered as
//! `R_ijkl = g(R(d_i,d_j) d_l, d_k)`, `rho_jl = g^ik R_ijkl`,
//! `tau = g^jl rho_jl`.

use crate::extension::MetricField;
use crate::field::{FieldError, Point4};
use crate::jet::{invert4, Jet};
use serde::{Deserialize, Serialize};

/// Human-readable record of the index and sign conventions, emitted in
/// reports so numeric output is reproducible without reading the source.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConventionRecord {
    pub curvature_operator: String,
    pub lowering: String,
    pub ricci: String,
    pub weyl: String,
    pub bach: String,
    pub coordinates: String,
}

pub fn convention_record() -> ConventionRecord {
    ConventionRecord {
        curvature_operator: "R(X,Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y]".into(),
        lowering: "R_ijkl = g(R(d_i, d_j) d_l, d_k)".into(),
        ricci: "rho_jl = g^{ik} R_ijkl; tau = g^{jl} rho_jl".into(),
        weyl: "W_ijkl = R_ijkl - (1/2)(g_ik rho_jl - g_il rho_jk + g_jl rho_ik - g_jk rho_il) \
               + (tau/6)(g_ik g_jl - g_il g_jk)"
            .into(),
        bach: "B_ij = g^{ka} g^{lb} (nabla_a nabla_b W')_kijl + (1/2) rho^{kl} W'_kijl \
               with W'_ijkl = g(W(d_i, d_j) d_k, d_l) = -W_ijkl"
            .into(),
        coordinates: "(x1, x2, y1, y2); indices 0..3 in that order".into(),
    }
}

pub type Sym4 = [[Jet; 4]; 4];
pub type Rank4 = [[[[Jet; 4]; 4]; 4]; 4];

fn zeros2(order: usize) -> Sym4 {
    std::array::from_fn(|_| std::array::from_fn(|_| Jet::zero(order)))
}

fn zeros3(order: usize) -> [[[Jet; 4]; 4]; 4] {
    std::array::from_fn(|_| zeros2(order))
}

fn zeros4(order: usize) -> Rank4 {
    std::array::from_fn(|_| zeros3(order))
}

/// A fully lowered tensor of arbitrary rank with jet components, flat
/// storage with the last index fastest.
#[derive(Debug, Clone)]
pub struct LowTensor {
    pub rank: usize,
    pub comp: Vec<Jet>,
}

impl LowTensor {
    pub fn zeros(rank: usize, order: usize) -> LowTensor {
        LowTensor {
            rank,
            comp: vec![Jet::zero(order); 1 << (2 * rank)],
        }
    }

    #[inline]
    pub fn flat(&self, ix: &[usize]) -> usize {
        debug_assert_eq!(ix.len(), self.rank);
        ix.iter().fold(0, |a, i| (a << 2) | i)
    }

    pub fn get(&self, ix: &[usize]) -> &Jet {
        &self.comp[self.flat(ix)]
    }

    pub fn from_rank4(t: &Rank4) -> LowTensor {
        let order = t[0][0][0][0].order();
        let mut r = LowTensor::zeros(4, order);
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        r.comp[(((i << 2 | j) << 2) | k) << 2 | l] = t[i][j][k][l].clone();
                    }
                }
            }
        }
        r
    }
}

/// Levi-Civita covariant derivative of a fully lowered tensor; the new
/// (derivative) index is appended last and the jet order drops by one.
pub fn covariant_derivative(
    t: &LowTensor,
    gamma: &[[[Jet; 4]; 4]; 4],
) -> Result<LowTensor, FieldError> {
    let order = t.comp[0].order();
    if order == 0 {
        return Err(FieldError::Invalid(
            "covariant derivative needs jets of order >= 1".into(),
        ));
    }
    let rank = t.rank;
    let mut out = LowTensor::zeros(rank + 1, order - 1);
    let n = t.comp.len();
    let mut ix = vec![0usize; rank];
    for a in 0..n {
        // decode digits of a (last index fastest)
        let mut rem = a;
        for s in (0..rank).rev() {
            ix[s] = rem & 3;
            rem >>= 2;
        }
        for m in 0..4 {
            let mut v = t.comp[a].deriv(m)?;
            for s in 0..rank {
                let orig = ix[s];
                let stride = 1isize << (2 * (rank - 1 - s));
                for b in 0..4 {
                    let nb = (a as isize + (b as isize - orig as isize) * stride) as usize;
                    v = v.sub(&gamma[b][m][orig].mul(&t.comp[nb]));
                }
            }
            out.comp[(a << 2) | m] = v;
        }
    }
    Ok(out)
}

/// Everything derived from the metric jets at a single point.
#[derive(Debug, Clone)]
pub struct CurvaturePack {
    /// jet order of the metric components
    pub order: usize,
    pub g: Sym4,
    pub g_inv: Sym4,
    /// `gamma[c][a][b] = G^c_ab` (one order below the metric)
    pub gamma: [[[Jet; 4]; 4]; 4],
    /// lowered curvature `R_ijkl` (two orders below the metric)
    pub riemann: Rank4,
    pub ricci: Sym4,
    pub tau: Jet,
    pub weyl: Rank4,
    /// `B_ij` (four orders below the metric); present when `order >= 4`
    pub bach: Option<Sym4>,
}

pub fn curvature_pack(
    metric: &MetricField,
    p: &Point4,
    order: usize,
) -> Result<CurvaturePack, FieldError> {
    if order < 2 {
        return Err(FieldError::Invalid(
            "curvature needs metric jets of order >= 2".into(),
        ));
    }
    let g = metric.metric_jets(p, order)?;
    let g_inv = invert4(&g)?;

    // dg[x][y][z] = d_z g_xy
    let mut dg = zeros3(order - 1);
    for x in 0..4 {
        for y in 0..4 {
            for z in 0..4 {
                dg[x][y][z] = g[x][y].deriv(z)?;
            }
        }
    }
    let mut gamma = zeros3(order - 1);
    for c in 0..4 {
        for a in 0..4 {
            for b in a..4 {
                let mut s = Jet::zero(order - 1);
                for d in 0..4 {
                    let br = dg[d][b][a].add(&dg[d][a][b]).sub(&dg[a][b][d]);
                    s = s.add(&g_inv[c][d].mul(&br));
                }
                let s = s.scale(0.5);
                gamma[c][a][b] = s.clone();
                gamma[c][b][a] = s;
            }
        }
    }

    // operator components: rop[m][i][j][l] = coefficient of d_m in R(d_i, d_j) d_l
    let rord = order - 2;
    let mut rop = zeros4(rord);
    for m in 0..4 {
        for i in 0..4 {
            for j in 0..i {
                for l in 0..4 {
                    let mut v = gamma[m][j][l].deriv(i)?.sub(&gamma[m][i][l].deriv(j)?);
                    for a in 0..4 {
                        v = v
                            .add(&gamma[m][i][a].mul(&gamma[a][j][l]))
                            .sub(&gamma[m][j][a].mul(&gamma[a][i][l]));
                    }
                    rop[m][i][j][l] = v.clone();
                    rop[m][j][i][l] = v.neg();
                }
            }
        }
    }
    let mut riemann = zeros4(rord);
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    let mut v = Jet::zero(rord);
                    for m in 0..4 {
                        v = v.add(&g[k][m].mul(&rop[m][i][j][l]));
                    }
                    riemann[i][j][k][l] = v;
                }
            }
        }
    }

    let mut ricci = zeros2(rord);
    for j in 0..4 {
        for l in 0..4 {
            let mut v = Jet::zero(rord);
            for i in 0..4 {
                for k in 0..4 {
                    v = v.add(&g_inv[i][k].mul(&riemann[i][j][k][l]));
                }
            }
            ricci[j][l] = v;
        }
    }
    let mut tau = Jet::zero(rord);
    for j in 0..4 {
        for l in 0..4 {
            tau = tau.add(&g_inv[j][l].mul(&ricci[j][l]));
        }
    }

    let mut weyl = zeros4(rord);
    let tau6 = tau.scale(1.0 / 6.0);
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    let schouten = g[i][k]
                        .mul(&ricci[j][l])
                        .sub(&g[i][l].mul(&ricci[j][k]))
                        .add(&g[j][l].mul(&ricci[i][k]))
                        .sub(&g[j][k].mul(&ricci[i][l]));
                    let scal = g[i][k]
                        .mul(&g[j][l])
                        .sub(&g[i][l].mul(&g[j][k]))
                        .mul(&tau6);
                    weyl[i][j][k][l] = riemann[i][j][k][l].sub(&schouten.scale(0.5)).add(&scal);
                }
            }
        }
    }

    let bach = if order >= 4 {
        let w_low = LowTensor::from_rank4(&weyl);
        let dw = covariant_derivative(&w_low, &gamma)?; // rank 5, order - 3
        // div over the fourth tensor slot: d4[k][i][j] = g^{lb} (nabla W)_kijl;b
        let mut d4 = LowTensor::zeros(3, order - 3);
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    let mut v = Jet::zero(order - 3);
                    for l in 0..4 {
                        for b in 0..4 {
                            v = v.add(&g_inv[l][b].mul(dw.get(&[k, i, j, l, b])));
                        }
                    }
                    let fi = d4.flat(&[k, i, j]);
                    d4.comp[fi] = v;
                }
            }
        }
        let dd4 = covariant_derivative(&d4, &gamma)?; // rank 4, order - 4
        let bord = order - 4;
        let mut b = zeros2(bord);
        for i in 0..4 {
            for j in 0..4 {
                let mut v = Jet::zero(bord);
                for k in 0..4 {
                    for a in 0..4 {
                        v = v.add(&g_inv[k][a].mul(dd4.get(&[k, i, j, a])));
                    }
                }
                // + (1/2) rho^{kl} W_kijl
                for k in 0..4 {
                    for l in 0..4 {
                        let mut up = Jet::zero(rord);
                        for a in 0..4 {
                            for bb in 0..4 {
                                up = up.add(&g_inv[k][a].mul(&g_inv[l][bb]).mul(&ricci[a][bb]));
                            }
                        }
                        v = v.add(&up.mul(&weyl[k][i][j][l]).scale(0.5));
                    }
                }
                // Overall sign calibrated against the closed forms of the
                // fiber-quadratic coefficients and the nilpotent reduction
                // identities (the displayed values use the opposite
                // lowering of W); conformal covariance fixes the relative
                // sign of the two terms and is checked in the tests.
                b[i][j] = v.neg();
            }
        }
        Some(b)
    } else {
        None
    };

    Ok(CurvaturePack {
        order,
        g,
        g_inv,
        gamma,
        riemann,
        ricci,
        tau,
        weyl,
        bach,
    })
}

/// Bach component values at a point (metric jets at order 4).
pub fn bach_values(metric: &MetricField, p: &Point4) -> Result<[[f64; 4]; 4], FieldError> {
    let pack = curvature_pack(metric, p, 4)?;
    let b = pack.bach.unwrap();
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| b[i][j].value())))
}

pub fn max_abs2(m: &[[f64; 4]; 4]) -> f64 {
    m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Coefficients `Theta_ijkl` of `y_i y_j` in `B_kl` at the base point under
/// `p` (fiber indices `i, j` in `{0, 1}` refer to `y1, y2`). Symmetric in
/// `(i, j)`. Requires metric jets of order 6.
pub fn theta_coefficients(
    metric: &MetricField,
    p: &Point4,
) -> Result<[[[[f64; 2]; 2]; 2]; 2], FieldError> {
    let base = Point4::base(p.x1, p.x2);
    let pack = curvature_pack(metric, &base, 6)?;
    let b = pack.bach.unwrap();
    let mut theta = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let mut m = [0u8; 4];
                    m[2 + i] += 1;
                    m[2 + j] += 1;
                    let c = b[k][l].coeff(m);
                    theta[i][j][k][l] = if i == j { c } else { 0.5 * c };
                }
            }
        }
    }
    Ok(theta)
}

/// The orthonormal frame `e1..e4` (signature `+,+,-,-`) adapted to the
/// bundle structure; `frame[a]` holds the four coordinate components of
/// `e_{a+1}` as jets.
pub fn adapted_frame(g: &Sym4) -> [[Jet; 4]; 4] {
    let order = g[0][0].order();
    let one = Jet::constant(order, 1.0);
    let zero = Jet::zero(order);
    let half = |j: &Jet| j.scale(0.5);
    let e1 = [
        one.clone(),
        zero.clone(),
        half(&one.sub(&g[0][0])),
        zero.clone(),
    ];
    let e2 = [
        zero.clone(),
        one.clone(),
        g[0][1].neg(),
        half(&one.sub(&g[1][1])),
    ];
    let e3 = [
        one.clone(),
        zero.clone(),
        half(&one.add(&g[0][0])).neg(),
        zero.clone(),
    ];
    let e4 = [
        zero.clone(),
        one.clone(),
        g[0][1].neg(),
        half(&one.add(&g[1][1])).neg(),
    ];
    [e1, e2, e3, e4]
}

fn eval4(t: &Rank4, u: &[Jet; 4], v: &[Jet; 4], w: &[Jet; 4], z: &[Jet; 4]) -> Jet {
    let order = t[0][0][0][0].order();
    let mut acc = Jet::zero(order);
    for i in 0..4 {
        for j in 0..4 {
            let uv = u[i].mul(&v[j]);
            if uv.max_abs_coeff() == 0.0 {
                continue;
            }
            for k in 0..4 {
                for l in 0..4 {
                    let tkl = &t[i][j][k][l];
                    if tkl.max_abs_coeff() == 0.0 {
                        continue;
                    }
                    acc = acc.add(&uv.mul(&w[k]).mul(&z[l]).mul(tkl));
                }
            }
        }
    }
    acc
}

/// Weyl operator restricted to the self-dual (`plus`) and anti-self-dual
/// (`minus`) bivector bases `E_1, E_2, E_3` built from the adapted frame.
#[derive(Debug, Clone)]
pub struct WeylSD {
    pub plus: [[Jet; 3]; 3],
    pub minus: [[Jet; 3]; 3],
}

pub fn weyl_sd(pack: &CurvaturePack) -> WeylSD {
    let frame = adapted_frame(&pack.g);
    let build = |eps: f64, sign: f64, sigma: [f64; 3]| -> [[Jet; 3]; 3] {
        // E_1 = (e1^e2 + eps e3^e4)/sqrt2, E_2 = (e1^e3 + eps e2^e4)/sqrt2,
        // E_3 = (e1^e4 - eps e2^e3)/sqrt2
        let pairs: [[(usize, usize, f64); 2]; 3] = [
            [(0, 1, 1.0), (2, 3, eps)],
            [(0, 2, 1.0), (1, 3, eps)],
            [(0, 3, 1.0), (1, 2, -eps)],
        ];
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                let mut acc = Jet::zero(pack.weyl[0][0][0][0].order());
                for (i1, j1, s1) in pairs[a] {
                    for (i2, j2, s2) in pairs[b] {
                        let w = eval4(
                            &pack.weyl,
                            &frame[i1],
                            &frame[j1],
                            &frame[i2],
                            &frame[j2],
                        );
                        acc = acc.add(&w.scale(0.5 * s1 * s2 * sign * sigma[a] * sigma[b]));
                    }
                }
                acc
            })
        })
    };
    // Per-chirality signs calibrated against the frame anchors: the
    // nonzero anti-self-dual diagonal entry, the self-dual detection of
    // the antisymmetric Ricci, and the fiber slope of the self-dual
    // diagonal under a deformation term. The last two force opposite
    // relative signs, which is realized by negating the second and third
    // self-dual basis bivectors (a rotation of the self-dual frame);
    // this absorbs the orientation convention of the bivector bases.
    WeylSD {
        plus: build(1.0, -1.0, [1.0, -1.0, -1.0]),
        minus: build(-1.0, -1.0, [1.0, 1.0, 1.0]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::extension::{Deformation, EndoField, ExtensionMetric};
    use crate::field::Field;
    use crate::surface::AffineSurface;
    use rand::{Rng, SeedableRng};

    fn canonical_flat() -> MetricField {
        MetricField::extension(ExtensionMetric::new(
            AffineSurface::flat(),
            EndoField::Canonical,
            Deformation::zero(),
        ))
    }

    fn generic_metric() -> MetricField {
        MetricField::extension(ExtensionMetric::new(
            AffineSurface::type_a([0.3, -0.1, 0.2, 0.4, -0.3, 0.1]),
            EndoField::nilpotent(
                Field::expr(parse_expr("1 + x1^2/4").unwrap()),
                Field::expr(parse_expr("x2/2").unwrap()),
            ),
            Deformation::new(
                Field::expr(parse_expr("x1*x2").unwrap()),
                Field::constant(0.5),
                Field::zero(),
            ),
        ))
    }

    fn rand_point(rng: &mut impl Rng) -> Point4 {
        Point4::new(
            rng.gen_range(-0.8..0.8),
            rng.gen_range(-0.8..0.8),
            rng.gen_range(-0.8..0.8),
            rng.gen_range(-0.8..0.8),
        )
    }

    #[test]
    fn trivial_extension_is_flat() {
        let m = MetricField::extension(ExtensionMetric::plain(AffineSurface::flat()));
        let p = Point4::new(0.3, -0.2, 0.5, 0.1);
        let pack = curvature_pack(&m, &p, 3).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        assert!(pack.riemann[i][j][k][l].max_abs_coeff() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_curvature_component() {
        // flat connection, T = d_x1 (x) dx2, no deformation:
        // the only curvature is R_2323 = -1 (indices x2, y1)
        let m = canonical_flat();
        let p = Point4::new(0.2, -0.4, 0.7, -0.3);
        let pack = curvature_pack(&m, &p, 3).unwrap();
        assert!((pack.riemann[1][2][1][2].value() + 1.0).abs() < 1e-12);
        // scalar curvature vanishes (nilpotent T)
        assert!(pack.tau.max_abs_coeff() < 1e-12);
    }

    #[test]
    fn metric_compatibility() {
        // nabla g = 0 as jets
        let m = generic_metric();
        let p = Point4::new(0.25, -0.35, 0.4, 0.15);
        let pack = curvature_pack(&m, &p, 3).unwrap();
        let mut gt = LowTensor::zeros(2, 3);
        for a in 0..4 {
            for b in 0..4 {
                let fi = gt.flat(&[a, b]);
                gt.comp[fi] = pack.g[a][b].clone();
            }
        }
        let dg = covariant_derivative(&gt, &pack.gamma).unwrap();
        for c in &dg.comp {
            assert!(c.max_abs_coeff() < 1e-11, "nabla g residual {}", c.max_abs_coeff());
        }
    }

    #[test]
    fn curvature_symmetries() {
        let m = generic_metric();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let p = rand_point(&mut rng);
        let pack = curvature_pack(&m, &p, 2).unwrap();
        let r = &pack.riemann;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        let v = r[i][j][k][l].value();
                        assert!((v + r[j][i][k][l].value()).abs() < 1e-11);
                        assert!((v + r[i][j][l][k].value()).abs() < 1e-11);
                        assert!((v - r[k][l][i][j].value()).abs() < 1e-11);
                        // first Bianchi
                        let b = v + r[j][k][i][l].value() + r[k][i][j][l].value();
                        assert!(b.abs() < 1e-11);
                    }
                }
            }
        }
        // Ricci symmetric, Weyl trace-free
        for j in 0..4 {
            for l in 0..4 {
                assert!((pack.ricci[j][l].value() - pack.ricci[l][j].value()).abs() < 1e-11);
            }
        }
        for j in 0..4 {
            for l in 0..4 {
                let mut tr = 0.0;
                for i in 0..4 {
                    for k in 0..4 {
                        tr += pack.g_inv[i][k].value() * pack.weyl[i][j][k][l].value();
                    }
                }
                assert!(tr.abs() < 1e-10, "weyl trace {tr}");
            }
        }
    }

    #[test]
    fn bach_symmetric_and_trace_free() {
        let m = generic_metric();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        for _ in 0..3 {
            let p = rand_point(&mut rng);
            let pack = curvature_pack(&m, &p, 4).unwrap();
            let b = pack.bach.as_ref().unwrap();
            let mut tr = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    assert!((b[i][j].value() - b[j][i].value()).abs() < 1e-9);
                    tr += pack.g_inv[i][j].value() * b[i][j].value();
                }
            }
            assert!(tr.abs() < 1e-9, "bach trace {tr}");
        }
    }

    #[test]
    fn bach_conformal_covariance() {
        // B(c^2 g) = c^-2 B(g) for constant c^2
        let m = generic_metric();
        let c2 = 2.5;
        let scaled = generic_metric().const_scaled(c2);
        let p = Point4::new(0.3, 0.1, -0.2, 0.45);
        let b0 = bach_values(&m, &p).unwrap();
        let b1 = bach_values(&scaled, &p).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (b1[i][j] - b0[i][j] / c2).abs() < 1e-8,
                    "({i},{j}): {} vs {}",
                    b1[i][j],
                    b0[i][j] / c2
                );
            }
        }
    }

    #[test]
    fn closed_form_bach_flat_family() {
        // canonical nilpotent T over the potential-generated connection
        let s = AffineSurface::potential_family(
            Field::expr(parse_expr("x1*x2/2").unwrap()),
            Field::expr(parse_expr("1 + x2^2/4").unwrap()),
            Field::constant(0.3),
            Field::expr(parse_expr("x1/5").unwrap()),
            Field::constant(-0.2),
        );
        let m = MetricField::extension(ExtensionMetric::new(
            s,
            EndoField::Canonical,
            Deformation::new(Field::constant(1.0), Field::zero(), Field::constant(0.7)),
        ));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..4 {
            let p = rand_point(&mut rng);
            let b = bach_values(&m, &p).unwrap();
            assert!(max_abs2(&b) < 1e-8, "bach residual {}", max_abs2(&b));
        }
    }

    #[test]
    fn generic_endomorphism_not_bach_flat() {
        let m = MetricField::extension(ExtensionMetric::new(
            AffineSurface::flat(),
            EndoField::constant([[1.0, 0.3], [0.0, -0.4]]),
            Deformation::zero(),
        ));
        let p = Point4::new(0.1, 0.2, 0.6, -0.3);
        let b = bach_values(&m, &p).unwrap();
        assert!(max_abs2(&b) > 1e-4);
    }

    #[test]
    fn fiber_quadratic_bach_coefficients() {
        // constant upper-triangular endomorphism; connection and
        // deformation must not enter
        let cases = [
            (1.3, -0.7, 0.4),
            (0.9, 0.9, 1.1),
            (0.0, 0.8, -0.5),
            (1.1, 0.0, 0.6),
        ];
        for (l1, l2, eps) in cases {
            let m = MetricField::extension(ExtensionMetric::new(
                AffineSurface::type_a([0.2, -0.4, 0.1, 0.3, 0.25, -0.15]),
                EndoField::constant([[l1, eps], [0.0, l2]]),
                Deformation::new(Field::constant(0.8), Field::constant(-0.3), Field::zero()),
            ));
            let p = Point4::base(0.3, -0.2);
            let th = theta_coefficients(&m, &p).unwrap();
            let d = l1 - l2;
            let t1111 = l1 * l1 * d * d * (l1 * l1 + l1 * l2 - 5.0 * l2 * l2) / 6.0;
            let t2222 = l2 * l2 * d * d * (-5.0 * l1 * l1 + l1 * l2 + l2 * l2) / 6.0;
            assert!(
                (th[0][0][0][0] - t1111).abs() < 1e-7 * (1.0 + t1111.abs()),
                "theta1111 {} vs {}",
                th[0][0][0][0],
                t1111
            );
            assert!(
                (th[1][1][1][1] - t2222).abs() < 1e-7 * (1.0 + t2222.abs()),
                "theta2222 {} vs {}",
                th[1][1][1][1],
                t2222
            );
            if l1 == l2 {
                let t1122 = -3.0 * eps * eps * l1.powi(4);
                assert!((th[0][0][1][1] - t1122).abs() < 1e-7 * (1.0 + t1122.abs()));
            }
        }
    }

    #[test]
    fn theta_scales_degree_six() {
        let t0 = [[0.7, 0.4], [-0.2, 0.3]];
        let s = 1.7;
        let mk = |t: [[f64; 2]; 2]| {
            MetricField::extension(ExtensionMetric::new(
                AffineSurface::flat(),
                EndoField::constant(t),
                Deformation::zero(),
            ))
        };
        let p = Point4::base(0.0, 0.0);
        let a = theta_coefficients(&mk(t0), &p).unwrap();
        let ts = std::array::from_fn(|i| std::array::from_fn(|j| s * t0[i][j]));
        let b = theta_coefficients(&mk(ts), &p).unwrap();
        let k = s.powi(6);
        for i in 0..2 {
            for j in 0..2 {
                for u in 0..2 {
                    for v in 0..2 {
                        assert!(
                            (b[i][j][u][v] - k * a[i][j][u][v]).abs()
                                < 1e-6 * (1.0 + (k * a[i][j][u][v]).abs()),
                            "({i}{j}{u}{v})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn adapted_frame_is_orthonormal() {
        let m = generic_metric();
        let p = Point4::new(0.4, -0.1, 0.3, 0.6);
        let pack = curvature_pack(&m, &p, 2).unwrap();
        let frame = adapted_frame(&pack.g);
        let expect = [1.0, 1.0, -1.0, -1.0];
        for a in 0..4 {
            for b in 0..4 {
                let mut ip = Jet::zero(2);
                for i in 0..4 {
                    for j in 0..4 {
                        ip = ip.add(&frame[a][i].mul(&frame[b][j]).mul(&pack.g[i][j]));
                    }
                }
                let want = if a == b { expect[a] } else { 0.0 };
                assert!(
                    (ip.value() - want).abs() < 1e-12 && ip.max_abs_coeff() - want.abs() < 1e-12,
                    "g(e{a},e{b}) = {}",
                    ip.value()
                );
            }
        }
    }

    #[test]
    fn weyl_sd_anchors() {
        // W-(E1,E1) = alpha^2 (xi^2+1)^2 / 2 and
        // W+(E1,E2) = -2 * (antisymmetric Ricci of the connection)(d1, d2)
        let alpha = |p: &Point4| 1.0 + p.x1 * p.x1 / 4.0;
        let xi = |p: &Point4| p.x2 / 2.0;
        let m = generic_metric();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        for _ in 0..3 {
            let p = rand_point(&mut rng);
            let pack = curvature_pack(&m, &p, 2).unwrap();
            let sd = weyl_sd(&pack);
            let want = 0.5 * alpha(&p).powi(2) * (xi(&p).powi(2) + 1.0).powi(2);
            assert!(
                (sd.minus[0][0].value() - want).abs() < 1e-9,
                "W-(E1,E1) = {} want {}",
                sd.minus[0][0].value(),
                want
            );
            // the underlying connection here is Type A, so the
            // antisymmetric Ricci vanishes
            assert!(sd.plus[0][1].value().abs() < 1e-9);
        }
        // non-symmetric connection: W+(E1,E2) detects it
        let s = AffineSurface::type_b([1.0, 0.0, 0.5, 0.3, 0.2, 0.4]);
        let ric = crate::surface::ricci_affine(&s, &Point4::base(1.2, 0.3)).unwrap();
        assert!(ric.alt_12().abs() > 1e-6);
        let m2 = MetricField::extension(ExtensionMetric::new(
            s,
            EndoField::Canonical,
            Deformation::zero(),
        ));
        let p = Point4::new(1.2, 0.3, 0.4, -0.6);
        let pack = curvature_pack(&m2, &p, 2).unwrap();
        let sd = weyl_sd(&pack);
        assert!(
            (sd.plus[0][1].value() + 2.0 * ric.alt_12()).abs() < 1e-9,
            "W+(E1,E2) = {} want {}",
            sd.plus[0][1].value(),
            -2.0 * ric.alt_12()
        );
    }
}
