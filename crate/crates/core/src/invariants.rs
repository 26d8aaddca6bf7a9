//! Scalar curvature invariants (quadratic and derivative-level), the
//! vanishing-scalar-invariants classifier, structural component zeros for
//! the canonical nilpotent model, and the non-Weyl Walker invariants
//! `beta1`, `beta2` of the parallel null distribution.

use crate::curvature::{covariant_derivative, curvature_pack, CurvaturePack, LowTensor};
use crate::extension::MetricField;
use crate::field::{FieldError, Point4};
use serde::{Deserialize, Serialize};

type M4 = [[f64; 4]; 4];

fn values2(j: &[[crate::jet::Jet; 4]; 4]) -> M4 {
    std::array::from_fn(|a| std::array::from_fn(|b| j[a][b].value()))
}

fn tensor_values(t: &LowTensor) -> Vec<f64> {
    t.comp.iter().map(|j| j.value()).collect()
}

/// Raise the index in `slot` of a fully lowered value tensor.
fn raise_slot(vals: &[f64], rank: usize, gi: &M4, slot: usize) -> Vec<f64> {
    let stride = 1usize << (2 * (rank - 1 - slot));
    let mut out = vec![0.0; vals.len()];
    for (a, o) in out.iter_mut().enumerate() {
        let digit = (a / stride) & 3;
        let base = a - digit * stride;
        let mut s = 0.0;
        for i in 0..4 {
            s += gi[digit][i] * vals[base + i * stride];
        }
        *o = s;
    }
    out
}

fn raise_all(vals: &[f64], rank: usize, gi: &M4) -> Vec<f64> {
    let mut v = vals.to_vec();
    for slot in 0..rank {
        v = raise_slot(&v, rank, gi, slot);
    }
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rank4_values(t: &crate::curvature::Rank4) -> Vec<f64> {
    let mut v = Vec::with_capacity(256);
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    v.push(t[i][j][k][l].value());
                }
            }
        }
    }
    v
}

/// `tau`, `|rho|^2 = rho^jl rho_jl`, `|R|^2 = R^ijkl R_ijkl`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadraticInvariants {
    pub tau: f64,
    pub norm_rho2: f64,
    pub norm_r2: f64,
}

pub fn quadratic_invariants(pack: &CurvaturePack) -> QuadraticInvariants {
    let gi = values2(&pack.g_inv);
    let rho = values2(&pack.ricci);
    let rho_flat: Vec<f64> = rho.iter().flatten().copied().collect();
    let rho_up = raise_all(&rho_flat, 2, &gi);
    let r = rank4_values(&pack.riemann);
    let r_up = raise_all(&r, 4, &gi);
    QuadraticInvariants {
        tau: pack.tau.value(),
        norm_rho2: dot(&rho_up, &rho_flat),
        norm_r2: dot(&r_up, &r),
    }
}

/// First-derivative-level scalar invariants and the cubic `R` contraction
/// `R_ij^kl R_kl^mn R_mn^ij`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DerivativeInvariants {
    pub norm_nabla_r2: f64,
    pub norm_nabla_w2: f64,
    pub cubic_r: f64,
}

pub fn derivative_level_invariants(
    metric: &MetricField,
    p: &Point4,
) -> Result<DerivativeInvariants, FieldError> {
    let pack = curvature_pack(metric, p, 5)?;
    derivative_level_from_pack(&pack)
}

pub fn derivative_level_from_pack(
    pack: &CurvaturePack,
) -> Result<DerivativeInvariants, FieldError> {
    let gi = values2(&pack.g_inv);
    let r_low = LowTensor::from_rank4(&pack.riemann);
    let dr = covariant_derivative(&r_low, &pack.gamma)?;
    let dr_vals = tensor_values(&dr);
    let dr_up = raise_all(&dr_vals, 5, &gi);
    let w_low = LowTensor::from_rank4(&pack.weyl);
    let dw = covariant_derivative(&w_low, &pack.gamma)?;
    let dw_vals = tensor_values(&dw);
    let dw_up = raise_all(&dw_vals, 5, &gi);
    // pair-raised curvature as a 16x16 matrix over bivector-style index
    // pairs: A[(ij)][(kl)] = R_ij^kl
    let r = rank4_values(&pack.riemann);
    let mut up2 = r.clone();
    up2 = raise_slot(&up2, 4, &gi, 2);
    up2 = raise_slot(&up2, 4, &gi, 3);
    let a = |ij: usize, kl: usize| up2[(ij << 4) | kl];
    let mut cubic = 0.0;
    for ij in 0..16 {
        for kl in 0..16 {
            for mn in 0..16 {
                cubic += a(ij, kl) * a(kl, mn) * a(mn, ij);
            }
        }
    }
    Ok(DerivativeInvariants {
        norm_nabla_r2: dot(&dr_up, &dr_vals),
        norm_nabla_w2: dot(&dw_up, &dw_vals),
        cubic_r: cubic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VsiVerdict {
    VsiEvidence,
    NotVsi { witness: String, value: f64 },
}

/// The full invariant report: quadratic and derivative-level scalars, the
/// two single-invariant classifiers, and the evidence verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantReport {
    pub tau: f64,
    pub norm_rho2: f64,
    pub norm_r2: f64,
    pub norm_nabla_r2: f64,
    pub norm_nabla_w2: f64,
    pub cubic_r: f64,
    /// `4|rho|^2 - 3 tau^2`; zero iff both eigenvalues of T vanish
    pub kappa1: f64,
    /// `|R|^2 - (88/5)|rho|^2 + (56/5) tau^2`; same zero locus
    pub kappa2: f64,
    pub verdict: VsiVerdict,
}

pub fn kappa(a: f64, b: f64, c: f64, q: &QuadraticInvariants) -> f64 {
    a * q.tau * q.tau + b * q.norm_r2 + c * q.norm_rho2
}

pub fn invariant_report(
    metric: &MetricField,
    p: &Point4,
    tol: f64,
) -> Result<InvariantReport, FieldError> {
    let pack = curvature_pack(metric, p, 5)?;
    let q = quadratic_invariants(&pack);
    let d = derivative_level_from_pack(&pack)?;
    let named = [
        ("tau", q.tau),
        ("norm_rho2", q.norm_rho2),
        ("norm_r2", q.norm_r2),
        ("norm_nabla_r2", d.norm_nabla_r2),
        ("norm_nabla_w2", d.norm_nabla_w2),
        ("cubic_r", d.cubic_r),
    ];
    let verdict = match named.iter().find(|(_, v)| v.abs() >= tol) {
        None => VsiVerdict::VsiEvidence,
        Some((name, v)) => VsiVerdict::NotVsi {
            witness: name.to_string(),
            value: *v,
        },
    };
    Ok(InvariantReport {
        tau: q.tau,
        norm_rho2: q.norm_rho2,
        norm_r2: q.norm_r2,
        norm_nabla_r2: d.norm_nabla_r2,
        norm_nabla_w2: d.norm_nabla_w2,
        cubic_r: d.cubic_r,
        kappa1: kappa(-3.0, 0.0, 4.0, &q),
        kappa2: kappa(56.0 / 5.0, 1.0, -88.0 / 5.0, &q),
        verdict,
    })
}

/// Eigenvalue closed forms of the quadratic invariants for constant T
/// (valid for complex-conjugate eigenvalue pairs; the result is real).
pub fn quadratic_closed_forms(l1: num_complex_shim::C, l2: num_complex_shim::C) -> (f64, f64, f64) {
    use num_complex_shim::C;
    let two = C::new(2.0, 0.0);
    let tau = two * (l1 * l1 + l1 * l2 + l2 * l2);
    let r2 = C::new(4.0, 0.0) * (l1.powu(4) + l1.powu(2) * l2.powu(2) + l2.powu(4));
    let rho2 = two * l1.powu(4)
        + two * l1.powu(3) * l2
        + l1.powu(2) * l2.powu(2)
        + two * l1 * l2.powu(3)
        + two * l2.powu(4);
    (tau.re, rho2.re, r2.re)
}

/// Tiny local complex type so the closed forms stay dependency-free in the
/// library (the richer complex crate is only a dev-dependency).
pub mod num_complex_shim {
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct C {
        pub re: f64,
        pub im: f64,
    }
    impl C {
        pub fn new(re: f64, im: f64) -> C {
            C { re, im }
        }
        pub fn powu(self, n: u32) -> C {
            let mut r = C::new(1.0, 0.0);
            for _ in 0..n {
                r = r * self;
            }
            r
        }
    }
    impl std::ops::Add for C {
        type Output = C;
        fn add(self, o: C) -> C {
            C::new(self.re + o.re, self.im + o.im)
        }
    }
    impl std::ops::Mul for C {
        type Output = C;
        fn mul(self, o: C) -> C {
            C::new(
                self.re * o.re - self.im * o.im,
                self.re * o.im + self.im * o.re,
            )
        }
    }
}

/// Eigenvalues of a real 2x2 matrix as a complex pair.
pub fn eigen2(t: [[f64; 2]; 2]) -> (num_complex_shim::C, num_complex_shim::C) {
    use num_complex_shim::C;
    let tr = t[0][0] + t[1][1];
    let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (C::new((tr + s) / 2.0, 0.0), C::new((tr - s) / 2.0, 0.0))
    } else {
        let s = (-disc).sqrt();
        (C::new(tr / 2.0, s / 2.0), C::new(tr / 2.0, -s / 2.0))
    }
}

/// For the canonical nilpotent model, the unordered curvature index pairs
/// that may carry nonzero components (0-based; pairs of antisymmetric
/// index pairs, closed under the usual symmetries).
const ALLOWED_R_PAIRS: [((usize, usize), (usize, usize)); 6] = [
    ((0, 1), (0, 1)),
    ((0, 1), (0, 2)),
    ((0, 1), (0, 3)),
    ((0, 1), (1, 2)),
    ((0, 1), (1, 3)),
    ((1, 2), (1, 2)),
];

/// Report on the structural zeros of the lowered curvature for the
/// canonical nilpotent model: `off_list_max` is the largest component
/// outside the allowed list and `r_2323` should equal -1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StructuralZeros {
    pub off_list_max: f64,
    pub r_2323: f64,
}

pub fn structural_zeros(metric: &MetricField, p: &Point4) -> Result<StructuralZeros, FieldError> {
    let pack = curvature_pack(metric, p, 2)?;
    let mut off = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    let v = pack.riemann[i][j][k][l].value().abs();
                    if v == 0.0 {
                        continue;
                    }
                    if i == j || k == l {
                        off = off.max(v);
                        continue;
                    }
                    let p1 = (i.min(j), i.max(j));
                    let p2 = (k.min(l), k.max(l));
                    let key = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
                    if !ALLOWED_R_PAIRS.contains(&key) {
                        off = off.max(v);
                    }
                }
            }
        }
    }
    Ok(StructuralZeros {
        off_list_max: off,
        r_2323: pack.riemann[1][2][1][2].value(),
    })
}

/// Walker-structure invariants at a point for the canonical nilpotent
/// model (or its coordinate-swapped mirror).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkerInvariants {
    /// horizontal Ricci block (indices 1, 2)
    pub rho_h: [[f64; 2]; 2],
    /// `Omega(d1, d2) = R_121^1 + R_122^2`
    pub omega_h: f64,
    /// the 1-form `omega` with `d(omega) = Omega`; None when `Omega = 0`
    pub omega_one_form: Option<[f64; 2]>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub degenerate_rho: bool,
    pub zero_omega: bool,
}

const SWAP: [usize; 4] = [1, 0, 3, 2];

/// `mirrored = true` relabels coordinates `x1 <-> x2`, `y1 <-> y2` before
/// applying the canonical formulas; use it when `T = d_x2 (x) dx1`.
pub fn walker_invariants(
    metric: &MetricField,
    p: &Point4,
    mirrored: bool,
) -> Result<WalkerInvariants, FieldError> {
    let pack = curvature_pack(metric, p, 5)?;
    let gi0 = values2(&pack.g_inv);
    let rho0 = values2(&pack.ricci);
    let r_low = LowTensor::from_rank4(&pack.riemann);
    let dr = covariant_derivative(&r_low, &pack.gamma)?;
    let r0 = rank4_values(&pack.riemann);
    let dr0 = tensor_values(&dr);

    let perm = |i: usize| if mirrored { SWAP[i] } else { i };
    let gi: M4 = std::array::from_fn(|a| std::array::from_fn(|b| gi0[perm(a)][perm(b)]));
    let rho: M4 = std::array::from_fn(|a| std::array::from_fn(|b| rho0[perm(a)][perm(b)]));
    let r = |a: usize, b: usize, c: usize, d: usize| {
        r0[(((perm(a) << 2 | perm(b)) << 2 | perm(c)) << 2) | perm(d)]
    };
    let drv = |a: usize, b: usize, c: usize, d: usize, m: usize| {
        dr0[(((((perm(a) << 2) | perm(b)) << 2 | perm(c)) << 2 | perm(d)) << 2) | perm(m)]
    };

    // mixed components R_12i^j = g^{jk} R_12ki and their covariant
    // derivatives (raising commutes with the derivative since g is
    // parallel)
    let mixed = |i: usize, j: usize| -> f64 {
        (0..4).map(|k| gi[j][k] * r(0, 1, k, i)).sum()
    };
    let mixed_d = |i: usize, j: usize, m: usize| -> f64 {
        (0..4).map(|k| gi[j][k] * drv(0, 1, k, i, m)).sum()
    };

    let rho_h = [[rho[0][0], rho[0][1]], [rho[1][0], rho[1][1]]];
    let omega_h = mixed(0, 0) + mixed(1, 1);
    let det = rho_h[0][0] * rho_h[1][1] - rho_h[0][1] * rho_h[1][0];
    let degenerate = det.abs() < 1e-12;
    let zero_omega = omega_h.abs() < 1e-12;
    let beta1 = if degenerate {
        None
    } else {
        Some(omega_h * omega_h / det)
    };
    let (omega_one_form, beta2) = if zero_omega {
        (None, None)
    } else {
        // sign calibrated so that d(omega) = Omega holds together with
        // Omega = -2 * (antisymmetric affine Ricci); the two constraints
        // force the negated quotient
        let w = [
            -(mixed_d(0, 0, 0) + mixed_d(1, 1, 0)) / omega_h,
            -(mixed_d(0, 0, 1) + mixed_d(1, 1, 1)) / omega_h,
        ];
        let b2 = if degenerate {
            None
        } else {
            Some(
                (rho_h[1][1] * w[0] * w[0] + rho_h[0][0] * w[1] * w[1]
                    - 2.0 * rho_h[0][1] * w[0] * w[1])
                    / det,
            )
        };
        (Some(w), b2)
    };
    Ok(WalkerInvariants {
        rho_h,
        omega_h,
        omega_one_form,
        beta1,
        beta2,
        degenerate_rho: degenerate,
        zero_omega,
    })
}
