//! Normal-form coordinates for a nonvanishing nilpotent endomorphism
//! field: a sampled coordinate map in which the pushforward of `T`
//! becomes the canonical `d/dx1 (x) dx2`.
//!
//! Construction: pick a constant frame vector `Z2` with `T Z2 != 0`;
//! then `Z1 := T Z2` spans the kernel and the image of `T`. Straighten
//! `Z1` by its flow to get an intermediate chart `z` with `d_z1 = Z1`,
//! read off the function `f` from `T d_z2 = f d_z1`, and solve
//! `d_z1 g = (g d_z1 f + d_z2 f) / f`, `g(0, z2) = 0`, so that
//! `X1 = f d_z1` and `X2 = g d_z1 + d_z2` commute with `T X2 = X1`,
//! `T X1 = 0`. The flows of `X1`, `X2` then define the output chart.
//!
//! Everything is sampled: the intermediate chart, `f`, and `g` live on a
//! uniform grid in `z` and are evaluated off-grid by 4-point tensor
//! Lagrange interpolation; downstream curvature work should use the
//! canonical endomorphism directly rather than compose with this map.

use crate::extension::EndoField;
use crate::field::{FieldError, Point4};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedNode {
    /// output (normal-form) coordinates
    pub xhat: (f64, f64),
    /// corresponding point in the original chart
    pub x: (f64, f64),
    /// max-norm deviation of the pushforward of T from the canonical form
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub base_point: (f64, f64),
    pub nodes: Vec<NormalizedNode>,
    pub max_residual: f64,
    /// worst |T^2| seen during the nilpotency pre-check
    pub t_square_residual: f64,
}

/// First-derivative weights at node `p` of five consecutive unit-spaced
/// nodes (Lagrange differentiation; exact through degree 4).
fn d_weights5(p: usize) -> [f64; 5] {
    let mut w = [0.0; 5];
    for (k, wk) in w.iter_mut().enumerate() {
        let mut den = 1.0;
        for m in 0..5 {
            if m != k {
                den *= k as f64 - m as f64;
            }
        }
        let mut num = 0.0;
        for j in 0..5 {
            if j == k {
                continue;
            }
            let mut prod = 1.0;
            for m in 0..5 {
                if m != k && m != j {
                    prod *= p as f64 - m as f64;
                }
            }
            num += prod;
        }
        *wk = num / den;
    }
    w
}

/// Derivative along one index of a line of samples with spacing `h`,
/// shifting the 5-point stencil at the ends.
fn line_deriv(vals: &[f64], i: usize, h: f64) -> f64 {
    let base = i.saturating_sub(2).min(vals.len() - 5);
    let w = d_weights5(i - base);
    let mut acc = 0.0;
    for (k, wk) in w.iter().enumerate() {
        acc += wk * vals[base + k];
    }
    acc / h
}

/// 4-point Lagrange interpolation of a line of samples at real index `t`.
fn line_interp(vals: &[f64], t: f64) -> f64 {
    let base = ((t.floor() as isize) - 1)
        .clamp(0, vals.len() as isize - 4) as usize;
    let s = t - base as f64;
    let mut acc = 0.0;
    for k in 0..4 {
        let mut w = 1.0;
        for m in 0..4 {
            if m != k {
                w *= (s - m as f64) / (k as f64 - m as f64);
            }
        }
        acc += w * vals[base + k];
    }
    acc
}

/// Uniform grid over `[-a, a]^2` in the intermediate `z` chart with
/// per-node samples; `n` intervals per half-axis.
struct ZGrid {
    a: f64,
    n: usize,
    /// values indexed `i * (2n + 1) + j`, `i` along z1
    data: Vec<f64>,
}

impl ZGrid {
    fn side(n: usize) -> usize {
        2 * n + 1
    }

    fn h(&self) -> f64 {
        self.a / self.n as f64
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * Self::side(self.n) + j]
    }

    /// interpolate at z-coordinates
    fn interp(&self, z1: f64, z2: f64) -> f64 {
        let side = Self::side(self.n);
        let h = self.h();
        let ti = (z1 + self.a) / h;
        let tj = (z2 + self.a) / h;
        let base_i = ((ti.floor() as isize) - 1).clamp(0, side as isize - 4) as usize;
        let mut rows = [0.0; 4];
        for (r, row) in rows.iter_mut().enumerate() {
            let line = &self.data[(base_i + r) * side..(base_i + r + 1) * side];
            *row = line_interp(line, tj);
        }
        let s = ti - base_i as f64;
        let mut acc = 0.0;
        for (k, row) in rows.iter().enumerate() {
            let mut w = 1.0;
            for m in 0..4 {
                if m != k {
                    w *= (s - m as f64) / (k as f64 - m as f64);
                }
            }
            acc += w * row;
        }
        acc
    }
}

fn t_at(t: &EndoField, x: [f64; 2]) -> Result<[[f64; 2]; 2], FieldError> {
    t.matrix_values(&Point4::base(x[0], x[1]))
}

fn mat_vec(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn rk4_flow<F>(mut x: [f64; 2], time: f64, steps: usize, rhs: F) -> Result<[f64; 2], FieldError>
where
    F: Fn([f64; 2]) -> Result<[f64; 2], FieldError>,
{
    let h = time / steps as f64;
    for _ in 0..steps {
        let k1 = rhs(x)?;
        let k2 = rhs([x[0] + h / 2.0 * k1[0], x[1] + h / 2.0 * k1[1]])?;
        let k3 = rhs([x[0] + h / 2.0 * k2[0], x[1] + h / 2.0 * k2[1]])?;
        let k4 = rhs([x[0] + h * k3[0], x[1] + h * k3[1]])?;
        for c in 0..2 {
            x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    Ok(x)
}

/// Build normal-form coordinates for a nilpotent `T` around `p0`.
///
/// `z_half_width` is the half-width of the intermediate straightening
/// chart (must contain the output rectangle comfortably), `n` the number
/// of grid intervals per half-axis; `out_half_width` and `out_n` shape
/// the rectangle of reported output nodes.
pub fn normalize_nilpotent(
    t: &EndoField,
    p0: (f64, f64),
    z_half_width: f64,
    n: usize,
    out_half_width: f64,
    out_n: usize,
) -> Result<NormalizationReport, FieldError> {
    let a = z_half_width;
    let side = ZGrid::side(n);
    let h = a / n as f64;
    if n < 8 {
        return Err(FieldError::Invalid(
            "straightening grid needs at least 8 intervals per half-axis".into(),
        ));
    }

    // nilpotency pre-check on a coarse sample of the chart rectangle
    let mut t2_worst = 0.0f64;
    for i in 0..5 {
        for j in 0..5 {
            let x = [
                p0.0 + a * (i as f64 / 2.0 - 1.0),
                p0.1 + a * (j as f64 / 2.0 - 1.0),
            ];
            let m = t_at(t, x)?;
            for r in 0..2 {
                for c in 0..2 {
                    let sq: f64 = (0..2).map(|k| m[r][k] * m[k][c]).sum();
                    t2_worst = t2_worst.max(sq.abs());
                }
            }
        }
    }
    if t2_worst > 1e-8 {
        return Err(FieldError::Invalid(format!(
            "endomorphism is not nilpotent on the chart rectangle: |T^2| = {t2_worst:.3e}"
        )));
    }

    let t0 = t_at(t, [p0.0, p0.1])?;
    // constant probe vector: the column of T with the larger image
    let col_norm = |k: usize| t0[0][k].hypot(t0[1][k]);
    let k = if col_norm(1) >= col_norm(0) { 1 } else { 0 };
    if col_norm(k) < 1e-8 {
        return Err(FieldError::Invalid(
            "endomorphism vanishes at the base point".into(),
        ));
    }
    let z2_probe = [if k == 0 { 1.0 } else { 0.0 }, if k == 0 { 0.0 } else { 1.0 }];
    // kernel direction field
    let z1_dir = |x: [f64; 2]| -> Result<[f64; 2], FieldError> {
        Ok(mat_vec(&t_at(t, x)?, z2_probe))
    };
    let z1_p0 = z1_dir([p0.0, p0.1])?;
    // transversal axis: the coordinate direction least aligned with Z1
    let m_axis = if z1_p0[0].abs() >= z1_p0[1].abs() { 1 } else { 0 };

    // straightening chart: x(z1, z2) by flowing Z1 from the transversal
    let mut chart = [
        ZGrid { a, n, data: vec![0.0; side * side] },
        ZGrid { a, n, data: vec![0.0; side * side] },
    ];
    let flow_steps_per_h = 1usize.max((h / 0.01).ceil() as usize);
    for j in 0..side {
        let z2 = -a + h * j as f64;
        let mut start = [p0.0, p0.1];
        start[m_axis] += z2;
        // march outward from z1 = 0 in both directions, reusing nodes
        for dir in [1isize, -1isize] {
            let mut x = start;
            let mut i = n as isize;
            chart[0].data[(i as usize) * side + j] = x[0];
            chart[1].data[(i as usize) * side + j] = x[1];
            while (dir > 0 && i < (side as isize - 1)) || (dir < 0 && i > 0) {
                x = rk4_flow(x, dir as f64 * h, flow_steps_per_h, z1_dir)?;
                i += dir;
                chart[0].data[(i as usize) * side + j] = x[0];
                chart[1].data[(i as usize) * side + j] = x[1];
            }
        }
    }

    // f from T d_z2 = f d_z1, with d_z2 read off the chart by grid
    // differentiation; component ratio taken against the larger entry
    let mut f = ZGrid { a, n, data: vec![0.0; side * side] };
    for i in 0..side {
        for j in 0..side {
            let col0: Vec<f64> = (0..side).map(|jj| chart[0].at(i, jj)).collect();
            let col1: Vec<f64> = (0..side).map(|jj| chart[1].at(i, jj)).collect();
            let dz2x = [line_deriv(&col0, j, h), line_deriv(&col1, j, h)];
            let x = [chart[0].at(i, j), chart[1].at(i, j)];
            let img = mat_vec(&t_at(t, x)?, dz2x);
            let z1 = z1_dir(x)?;
            let c = if z1[0].abs() >= z1[1].abs() { 0 } else { 1 };
            if z1[c].abs() < 1e-10 {
                return Err(FieldError::Invalid(
                    "kernel direction degenerates inside the chart".into(),
                ));
            }
            let fv = img[c] / z1[c];
            if fv.abs() < 1e-8 {
                return Err(FieldError::Invalid(
                    "frame function f vanishes inside the chart".into(),
                ));
            }
            f.data[i * side + j] = fv;
        }
    }

    // grid derivatives of f
    let mut f10 = ZGrid { a, n, data: vec![0.0; side * side] };
    let mut f01 = ZGrid { a, n, data: vec![0.0; side * side] };
    for i in 0..side {
        for j in 0..side {
            let line1: Vec<f64> = (0..side).map(|ii| f.at(ii, j)).collect();
            f10.data[i * side + j] = line_deriv(&line1, i, h);
            f01.data[i * side + j] = line_deriv(f.data[i * side..(i + 1) * side].as_ref(), j, h);
        }
    }

    // g: march d_z1 g = (g f10 + f01)/f per z2 line, g(0, .) = 0
    let mut g = ZGrid { a, n, data: vec![0.0; side * side] };
    for j in 0..side {
        let fl: Vec<f64> = (0..side).map(|ii| f.at(ii, j)).collect();
        let f10l: Vec<f64> = (0..side).map(|ii| f10.at(ii, j)).collect();
        let f01l: Vec<f64> = (0..side).map(|ii| f01.at(ii, j)).collect();
        let rhs = |ti: f64, gv: f64| -> f64 {
            (gv * line_interp(&f10l, ti) + line_interp(&f01l, ti)) / line_interp(&fl, ti)
        };
        for dir in [1isize, -1isize] {
            let hs = dir as f64 * h;
            let mut gv = 0.0;
            let mut i = n as isize;
            while (dir > 0 && i < (side as isize - 1)) || (dir < 0 && i > 0) {
                let ti = i as f64;
                let k1 = rhs(ti, gv);
                let k2 = rhs(ti + dir as f64 * 0.5, gv + hs / 2.0 * k1);
                let k3 = rhs(ti + dir as f64 * 0.5, gv + hs / 2.0 * k2);
                let k4 = rhs(ti + dir as f64, gv + hs * k3);
                gv += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                i += dir;
                g.data[(i as usize) * side + j] = gv;
            }
        }
    }

    // normal-form chart: commuting flows of X2 = (g, 1), then X1 = (f, 0)
    let x1_rhs = |z: [f64; 2]| -> Result<[f64; 2], FieldError> {
        Ok([f.interp(z[0], z[1]), 0.0])
    };
    let x2_rhs = |z: [f64; 2]| -> Result<[f64; 2], FieldError> {
        Ok([g.interp(z[0], z[1]), 1.0])
    };
    let map = |xh1: f64, xh2: f64| -> Result<[f64; 2], FieldError> {
        let steps2 = 4usize.max((xh2.abs() / 0.01).ceil() as usize);
        let z = rk4_flow([0.0, 0.0], xh2, steps2, x2_rhs)?;
        let steps1 = 4usize.max((xh1.abs() / 0.01).ceil() as usize);
        let z = rk4_flow(z, xh1, steps1, x1_rhs)?;
        Ok([chart[0].interp(z[0], z[1]), chart[1].interp(z[0], z[1])])
    };

    // report nodes with the pushforward residual P^{-1} T P vs canonical
    let delta = 0.75 * h;
    let mut nodes = Vec::new();
    let mut worst = 0.0f64;
    let out_side = 2 * out_n + 1;
    for io in 0..out_side {
        for jo in 0..out_side {
            let xh1 = out_half_width * (io as f64 / out_n as f64 - 1.0);
            let xh2 = out_half_width * (jo as f64 / out_n as f64 - 1.0);
            let x = map(xh1, xh2)?;
            // fourth-order central differences of the map
            let mut p_mat = [[0.0f64; 2]; 2];
            for (col, dv) in [(0usize, [delta, 0.0]), (1, [0.0, delta])] {
                let mut samples = [[0.0f64; 2]; 4];
                for (s, off) in [-2.0f64, -1.0, 1.0, 2.0].iter().enumerate() {
                    samples[s] = map(xh1 + off * dv[0], xh2 + off * dv[1])?;
                }
                for r in 0..2 {
                    p_mat[r][col] = (samples[0][r] - 8.0 * samples[1][r] + 8.0 * samples[2][r]
                        - samples[3][r])
                        / (12.0 * delta);
                }
            }
            let det = p_mat[0][0] * p_mat[1][1] - p_mat[0][1] * p_mat[1][0];
            if det.abs() < 1e-10 {
                return Err(FieldError::Invalid(
                    "normal-form chart degenerates (zero Jacobian)".into(),
                ));
            }
            let inv = [
                [p_mat[1][1] / det, -p_mat[0][1] / det],
                [-p_mat[1][0] / det, p_mat[0][0] / det],
            ];
            let tm = t_at(t, x)?;
            let mut pushed = [[0.0f64; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    let mut acc = 0.0;
                    for u in 0..2 {
                        for v in 0..2 {
                            acc += inv[r][u] * tm[u][v] * p_mat[v][c];
                        }
                    }
                    pushed[r][c] = acc;
                }
            }
            let canon = [[0.0, 1.0], [0.0, 0.0]];
            let mut res = 0.0f64;
            for r in 0..2 {
                for c in 0..2 {
                    res = res.max((pushed[r][c] - canon[r][c]).abs());
                }
            }
            worst = worst.max(res);
            nodes.push(NormalizedNode {
                xhat: (xh1, xh2),
                x: (x[0], x[1]),
                residual: res,
            });
        }
    }

    Ok(NormalizationReport {
        base_point: p0,
        nodes,
        max_residual: worst,
        t_square_residual: t2_worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::field::Field;

    #[test]
    fn canonical_form_is_a_fixed_point() {
        let t = EndoField::constant([[0.0, 1.0], [0.0, 0.0]]);
        let rep = normalize_nilpotent(&t, (0.2, -0.1), 0.4, 16, 0.15, 2).unwrap();
        assert!(rep.max_residual < 1e-8, "residual {}", rep.max_residual);
        assert_eq!(rep.t_square_residual, 0.0);
    }

    #[test]
    fn variable_nilpotent_field_is_normalized() {
        let t = EndoField::nilpotent(
            Field::expr(parse_expr("exp((x1 + 2*x2)/10)").unwrap()),
            Field::expr(parse_expr("3/10 + x1/10").unwrap()),
        );
        let rep = normalize_nilpotent(&t, (0.0, 0.0), 0.4, 40, 0.15, 2).unwrap();
        assert!(rep.max_residual < 1e-6, "residual {}", rep.max_residual);
        assert!(rep.nodes.len() == 25);
        // center node maps to the base point
        let center = rep
            .nodes
            .iter()
            .find(|nd| nd.xhat == (0.0, 0.0))
            .unwrap();
        assert!((center.x.0).abs() + (center.x.1).abs() < 1e-9);
    }

    #[test]
    fn refinement_tightens_the_residual() {
        let t = EndoField::nilpotent(
            Field::expr(parse_expr("1 + x1/5").unwrap()),
            Field::constant(0.2),
        );
        let coarse = normalize_nilpotent(&t, (0.0, 0.0), 0.4, 16, 0.1, 1).unwrap();
        let fine = normalize_nilpotent(&t, (0.0, 0.0), 0.4, 32, 0.1, 1).unwrap();
        assert!(
            fine.max_residual < coarse.max_residual,
            "coarse {} fine {}",
            coarse.max_residual,
            fine.max_residual
        );
        assert!(fine.max_residual < 1e-6);
    }

    #[test]
    fn rejects_zero_and_non_nilpotent_input() {
        let zero = EndoField::zero();
        assert!(normalize_nilpotent(&zero, (0.0, 0.0), 0.3, 16, 0.1, 1).is_err());
        let id = EndoField::constant([[1.0, 0.0], [0.0, 1.0]]);
        assert!(normalize_nilpotent(&id, (0.0, 0.0), 0.3, 16, 0.1, 1).is_err());
    }
}
