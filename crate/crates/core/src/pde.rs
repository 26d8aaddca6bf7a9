//! Marching solvers for the two structure equations on a periodic strip:
//! the quasilinear first-order equation for `xi` and the second-order
//! equation for `alpha`, plus the grid-to-engine bridge that verifies
//! Bach-flatness of the solved fields through local polynomial fits.
//!
//! Method of lines: fourth-order central differences in the periodic
//! `x2` direction, one-step marching in `x1` (classical fourth-order by
//! default, midpoint available for cross-checking). The analytic
//! local-solvability statement backs the well-posedness of the march; we
//! treat it as motivation only and control error by refinement studies.

use crate::bachflat::p2_lower_order;
use crate::extension::{Deformation, EndoField, ExtensionMetric, MetricField};
use crate::field::{Field, FieldError, Point4, PolyField};
use crate::surface::AffineSurface;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("advective stability bound violated at x1 = {x1}: |xi| h1/h2 = {ratio} > 0.5")]
    Cfl { x1: f64, ratio: f64 },
    #[error("field blow-up at x1 = {x1}: |{field}| = {value} exceeds cap {cap}")]
    BlowUp {
        x1: f64,
        field: &'static str,
        value: f64,
        cap: f64,
    },
    #[error("alpha vanishes along the march at x1 = {x1}: |alpha| = {value} < 1e-6")]
    AlphaVanishes { x1: f64, value: f64 },
    #[error("{0}")]
    Grid(String),
}

/// Strip `[0, L] x [0, 2 pi)`, periodic in the second coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripGrid {
    pub l: f64,
    pub n1: usize,
    pub n2: usize,
}

impl StripGrid {
    pub fn new(l: f64, n1: usize, n2: usize) -> Result<StripGrid, PdeError> {
        if !(l > 0.0) || n1 == 0 {
            return Err(PdeError::Grid(format!(
                "need positive length and steps, got L = {l}, N1 = {n1}"
            )));
        }
        if n2 < 8 || n2 % 2 != 0 {
            return Err(PdeError::Grid(format!(
                "periodic direction needs an even node count >= 8, got {n2}"
            )));
        }
        Ok(StripGrid { l, n1, n2 })
    }

    pub fn h1(&self) -> f64 {
        self.l / self.n1 as f64
    }

    pub fn h2(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n2 as f64
    }

    pub fn x1(&self, i: usize) -> f64 {
        self.l * i as f64 / self.n1 as f64
    }

    pub fn x2(&self, j: usize) -> f64 {
        self.h2() * j as f64
    }
}

/// Node values over the strip, stored level by level in `x1`
/// (`(n1 + 1) * n2` entries, the `x2` index fastest).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldOnGrid {
    pub grid: StripGrid,
    pub values: Vec<f64>,
    /// companion `d alpha / d x1` levels for second-order solutions
    pub deriv_x1: Option<Vec<f64>>,
}

impl FieldOnGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n2 + j]
    }

    pub fn level(&self, i: usize) -> &[f64] {
        &self.values[i * self.grid.n2..(i + 1) * self.grid.n2]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarchMethod {
    Midpoint,
    ClassicalFourth,
}

const BLOWUP_CAP: f64 = 1e3;

/// Fourth-order periodic first derivative in `x2`.
fn ddx2(level: &[f64], j: usize, h2: f64) -> f64 {
    let n = level.len();
    let g = |o: isize| level[((j as isize + o).rem_euclid(n as isize)) as usize];
    (-g(2) + 8.0 * g(1) - 8.0 * g(-1) + g(-2)) / (12.0 * h2)
}

/// Fourth-order periodic second derivative in `x2`.
fn d2dx2(level: &[f64], j: usize, h2: f64) -> f64 {
    let n = level.len();
    let g = |o: isize| level[((j as isize + o).rem_euclid(n as isize)) as usize];
    (-g(2) + 16.0 * g(1) - 30.0 * g(0) + 16.0 * g(-1) - g(-2)) / (12.0 * h2 * h2)
}

fn gamma_values(
    s: &AffineSurface,
    x1: f64,
    x2: f64,
    order: usize,
) -> Result<[crate::jet::Jet; 6], FieldError> {
    let p = Point4::new(x1, x2, 0.0, 0.0);
    let g = s.christoffel_at(&p, order)?;
    Ok([
        g[0][0][0].clone(),
        g[0][0][1].clone(),
        g[0][1][0].clone(),
        g[0][1][1].clone(),
        g[1][1][0].clone(),
        g[1][1][1].clone(),
    ])
}

/// Right-hand side of the first structure equation solved for the `x1`
/// slope: `xi10 = xi xi01 + G22^1 xi^3 - (2 G12^1 - G22^2) xi^2
/// + (G11^1 - 2 G12^2) xi + G11^2`.
fn p1_rhs(
    s: &AffineSurface,
    grid: &StripGrid,
    x1: f64,
    level: &[f64],
) -> Result<Vec<f64>, PdeError> {
    let h2 = grid.h2();
    let mut out = vec![0.0; level.len()];
    for (j, o) in out.iter_mut().enumerate() {
        let g = gamma_values(s, x1, grid.x2(j), 0)?;
        let x = level[j];
        let x01 = ddx2(level, j, h2);
        *o = x * x01 + g[4].value() * x * x * x
            - (2.0 * g[2].value() - g[5].value()) * x * x
            + (g[0].value() - 2.0 * g[3].value()) * x
            + g[1].value();
    }
    Ok(out)
}

fn check_level(level: &[f64], grid: &StripGrid, x1: f64, name: &'static str) -> Result<(), PdeError> {
    let m = level.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !m.is_finite() || m > BLOWUP_CAP {
        return Err(PdeError::BlowUp {
            x1,
            field: name,
            value: m,
            cap: BLOWUP_CAP,
        });
    }
    if name == "xi" {
        let ratio = m * grid.h1() / grid.h2();
        if ratio > 0.5 {
            return Err(PdeError::Cfl { x1, ratio });
        }
    }
    Ok(())
}

pub fn solve_p1(
    s: &AffineSurface,
    xi0: &Field,
    grid: &StripGrid,
    method: MarchMethod,
) -> Result<FieldOnGrid, PdeError> {
    let mut values = Vec::with_capacity((grid.n1 + 1) * grid.n2);
    let mut level: Vec<f64> = (0..grid.n2)
        .map(|j| xi0.value(&Point4::new(0.0, grid.x2(j), 0.0, 0.0)))
        .collect::<Result<_, _>>()?;
    let h = grid.h1();
    check_level(&level, grid, 0.0, "xi")?;
    values.extend_from_slice(&level);
    for i in 0..grid.n1 {
        let x1 = grid.x1(i);
        let axpy = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> {
            y.iter().zip(k).map(|(a, b)| a + s * b).collect()
        };
        level = match method {
            MarchMethod::Midpoint => {
                let k1 = p1_rhs(s, grid, x1, &level)?;
                let k2 = p1_rhs(s, grid, x1 + h / 2.0, &axpy(&level, &k1, h / 2.0))?;
                axpy(&level, &k2, h)
            }
            MarchMethod::ClassicalFourth => {
                let k1 = p1_rhs(s, grid, x1, &level)?;
                let k2 = p1_rhs(s, grid, x1 + h / 2.0, &axpy(&level, &k1, h / 2.0))?;
                let k3 = p1_rhs(s, grid, x1 + h / 2.0, &axpy(&level, &k2, h / 2.0))?;
                let k4 = p1_rhs(s, grid, x1 + h, &axpy(&level, &k3, h))?;
                level
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
                    .collect()
            }
        };
        check_level(&level, grid, x1 + h, "xi")?;
        values.extend_from_slice(&level);
    }
    Ok(FieldOnGrid {
        grid: *grid,
        values,
        deriv_x1: None,
    })
}

/// Max residual of the first structure operator over interior nodes,
/// evaluated with the same fourth-order stencils (central in `x1` too,
/// so levels `2 ..= n1 - 2`).
pub fn p1_residual(s: &AffineSurface, xi: &FieldOnGrid) -> Result<f64, PdeError> {
    let grid = &xi.grid;
    let (h1, h2) = (grid.h1(), grid.h2());
    let mut worst = 0.0f64;
    for i in 2..=grid.n1.saturating_sub(2) {
        for j in 0..grid.n2 {
            let x10 = (-xi.at(i + 2, j) + 8.0 * xi.at(i + 1, j) - 8.0 * xi.at(i - 1, j)
                + xi.at(i - 2, j))
                / (12.0 * h1);
            let x = xi.at(i, j);
            let x01 = ddx2(xi.level(i), j, h2);
            let g = gamma_values(s, grid.x1(i), grid.x2(j), 0)?;
            let p1 = -x10 + x * x01 + g[4].value() * x * x * x
                - (2.0 * g[2].value() - g[5].value()) * x * x
                + (g[0].value() - 2.0 * g[3].value()) * x
                + g[1].value();
            worst = worst.max(p1.abs());
        }
    }
    Ok(worst)
}

/// Fourth-order interpolation of a level stack at half-integer `x1`
/// positions (used for the marching stages of the second equation).
fn xi_at(xi: &FieldOnGrid, i2: usize, half: bool, j: usize) -> f64 {
    if !half {
        return xi.at(i2, j);
    }
    let n1 = xi.grid.n1;
    // cubic through the four nearest levels, shifted at the ends
    let base = i2.saturating_sub(1).min(n1.saturating_sub(3));
    let t = i2 as f64 + 0.5 - base as f64;
    let mut acc = 0.0;
    for (k, w) in lagrange4(t).into_iter().enumerate() {
        acc += w * xi.at(base + k, j);
    }
    acc
}

fn lagrange4(t: f64) -> [f64; 4] {
    let mut w = [0.0; 4];
    for (k, wk) in w.iter_mut().enumerate() {
        let mut num = 1.0;
        let mut den = 1.0;
        for m in 0..4 {
            if m != k {
                num *= t - m as f64;
                den *= k as f64 - m as f64;
            }
        }
        *wk = num / den;
    }
    w
}

struct P2State {
    a: Vec<f64>,
    b: Vec<f64>, // d alpha / d x1
}

fn p2_rhs(
    s: &AffineSurface,
    grid: &StripGrid,
    x1: f64,
    xi_level: &[f64],
    st: &P2State,
) -> Result<(Vec<f64>, Vec<f64>), PdeError> {
    let h2 = grid.h2();
    let mut da = vec![0.0; grid.n2];
    let mut db = vec![0.0; grid.n2];
    for j in 0..grid.n2 {
        let a = st.a[j];
        if a.abs() < 1e-6 {
            return Err(PdeError::AlphaVanishes { x1, value: a.abs() });
        }
        let a10 = st.b[j];
        let a01 = ddx2(&st.a, j, h2);
        let a02 = d2dx2(&st.a, j, h2);
        let a11 = ddx2(&st.b, j, h2);
        let x = xi_level[j];
        let x01 = ddx2(xi_level, j, h2);
        let g = gamma_values(s, x1, grid.x2(j), 1)?;
        let gv: [f64; 6] = std::array::from_fn(|s| g[s].value());
        let g10: [f64; 6] = std::array::from_fn(|s| g[s].coeff([1, 0, 0, 0]));
        let g01: [f64; 6] = std::array::from_fn(|s| g[s].coeff([0, 1, 0, 0]));
        let f = p2_lower_order(x, x01, a, a10, a01, &gv, &g10, &g01);
        da[j] = a10;
        db[j] = (2.0 * x * a * a11 - x * x * a * a02 - f) / a;
    }
    Ok((da, db))
}

/// March the second structure equation with state `(alpha, d_x1 alpha)`
/// given a solved (or prescribed) `xi` on the same grid.
pub fn solve_p2(
    s: &AffineSurface,
    xi: &FieldOnGrid,
    alpha0: &Field,
    alpha1: &Field,
    method: MarchMethod,
) -> Result<FieldOnGrid, PdeError> {
    let grid = xi.grid;
    let mut a: Vec<f64> = (0..grid.n2)
        .map(|j| alpha0.value(&Point4::new(0.0, grid.x2(j), 0.0, 0.0)))
        .collect::<Result<_, _>>()?;
    let mut b: Vec<f64> = (0..grid.n2)
        .map(|j| alpha1.value(&Point4::new(0.0, grid.x2(j), 0.0, 0.0)))
        .collect::<Result<_, _>>()?;
    let h = grid.h1();
    let mut values = Vec::with_capacity((grid.n1 + 1) * grid.n2);
    let mut derivs = Vec::with_capacity((grid.n1 + 1) * grid.n2);
    values.extend_from_slice(&a);
    derivs.extend_from_slice(&b);
    for i in 0..grid.n1 {
        let x1 = grid.x1(i);
        let xl0: Vec<f64> = xi.level(i).to_vec();
        let xlh: Vec<f64> = (0..grid.n2).map(|j| xi_at(xi, i, true, j)).collect();
        let xl1: Vec<f64> = xi.level(i + 1).to_vec();
        let axpy = |y: &[f64], k: &[f64], sc: f64| -> Vec<f64> {
            y.iter().zip(k).map(|(p, q)| p + sc * q).collect()
        };
        let (na, nb) = match method {
            MarchMethod::Midpoint => {
                let st = P2State { a: a.clone(), b: b.clone() };
                let (ka1, kb1) = p2_rhs(s, &grid, x1, &xl0, &st)?;
                let st2 = P2State {
                    a: axpy(&a, &ka1, h / 2.0),
                    b: axpy(&b, &kb1, h / 2.0),
                };
                let (ka2, kb2) = p2_rhs(s, &grid, x1 + h / 2.0, &xlh, &st2)?;
                (axpy(&a, &ka2, h), axpy(&b, &kb2, h))
            }
            MarchMethod::ClassicalFourth => {
                let st1 = P2State { a: a.clone(), b: b.clone() };
                let (ka1, kb1) = p2_rhs(s, &grid, x1, &xl0, &st1)?;
                let st2 = P2State {
                    a: axpy(&a, &ka1, h / 2.0),
                    b: axpy(&b, &kb1, h / 2.0),
                };
                let (ka2, kb2) = p2_rhs(s, &grid, x1 + h / 2.0, &xlh, &st2)?;
                let st3 = P2State {
                    a: axpy(&a, &ka2, h / 2.0),
                    b: axpy(&b, &kb2, h / 2.0),
                };
                let (ka3, kb3) = p2_rhs(s, &grid, x1 + h / 2.0, &xlh, &st3)?;
                let st4 = P2State {
                    a: axpy(&a, &ka3, h),
                    b: axpy(&b, &kb3, h),
                };
                let (ka4, kb4) = p2_rhs(s, &grid, x1 + h, &xl1, &st4)?;
                let comb = |y: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| {
                    y.iter()
                        .enumerate()
                        .map(|(j, v)| v + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
                        .collect::<Vec<f64>>()
                };
                (comb(&a, &ka1, &ka2, &ka3, &ka4), comb(&b, &kb1, &kb2, &kb3, &kb4))
            }
        };
        a = na;
        b = nb;
        check_level(&a, &grid, x1 + h, "alpha")?;
        values.extend_from_slice(&a);
        derivs.extend_from_slice(&b);
    }
    Ok(FieldOnGrid {
        grid,
        values,
        deriv_x1: Some(derivs),
    })
}

/// Max residual of the full second structure operator on interior nodes
/// (all derivatives by fourth-order stencils).
pub fn p2_residual(s: &AffineSurface, xi: &FieldOnGrid, alpha: &FieldOnGrid) -> Result<f64, PdeError> {
    let grid = &alpha.grid;
    let (h1, h2) = (grid.h1(), grid.h2());
    let d10 = |f: &FieldOnGrid, i: usize, j: usize| {
        (-f.at(i + 2, j) + 8.0 * f.at(i + 1, j) - 8.0 * f.at(i - 1, j) + f.at(i - 2, j))
            / (12.0 * h1)
    };
    let d20 = |f: &FieldOnGrid, i: usize, j: usize| {
        (-f.at(i + 2, j) + 16.0 * f.at(i + 1, j) - 30.0 * f.at(i, j) + 16.0 * f.at(i - 1, j)
            - f.at(i - 2, j))
            / (12.0 * h1 * h1)
    };
    let mut worst = 0.0f64;
    for i in 2..=grid.n1.saturating_sub(2) {
        for j in 0..grid.n2 {
            let x = xi.at(i, j);
            let x01 = ddx2(xi.level(i), j, h2);
            let a = alpha.at(i, j);
            let a10 = d10(alpha, i, j);
            let a01 = ddx2(alpha.level(i), j, h2);
            let a20 = d20(alpha, i, j);
            let a02 = d2dx2(alpha.level(i), j, h2);
            // mixed derivative: x2 stencil applied to the x1 stencil
            let lvl: Vec<f64> = (0..grid.n2).map(|jj| d10(alpha, i, jj)).collect();
            let a11 = ddx2(&lvl, j, h2);
            let g = gamma_values(s, grid.x1(i), grid.x2(j), 1)?;
            let gv: [f64; 6] = std::array::from_fn(|s| g[s].value());
            let g10: [f64; 6] = std::array::from_fn(|s| g[s].coeff([1, 0, 0, 0]));
            let g01: [f64; 6] = std::array::from_fn(|s| g[s].coeff([0, 1, 0, 0]));
            let p2 = a * a20 + x * x * a * a02 - 2.0 * x * a * a11
                + p2_lower_order(x, x01, a, a10, a01, &gv, &g10, &g01);
            worst = worst.max(p2.abs());
        }
    }
    Ok(worst)
}

/// Degree-4 least-squares fit of a 5x5 node neighborhood, returning a
/// local polynomial centered on the node. The pseudo-inverse depends
/// only on the spacings and is computed once per grid.
pub struct StencilFitter {
    pinv: nalgebra::DMatrix<f64>,
    h1: f64,
    h2: f64,
}

const FIT_DEG: u8 = 4;

impl StencilFitter {
    pub fn new(grid: &StripGrid) -> StencilFitter {
        let mut rows = Vec::new();
        for di in -2i32..=2 {
            for dj in -2i32..=2 {
                let (u, v) = (di as f64, dj as f64);
                let mut row = Vec::new();
                for a in 0..=FIT_DEG {
                    for b in 0..=(FIT_DEG - a) {
                        row.push(u.powi(a as i32) * v.powi(b as i32));
                    }
                }
                rows.push(row);
            }
        }
        let ncols = rows[0].len();
        let m = nalgebra::DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]);
        let pinv = m.pseudo_inverse(1e-12).expect("fixed stencil matrix");
        StencilFitter {
            pinv,
            h1: grid.h1(),
            h2: grid.h2(),
        }
    }

    /// Fit the field around interior node `(i, j)`; `i` must be at least
    /// 2 levels from either end.
    pub fn fit(&self, f: &FieldOnGrid, i: usize, j: usize) -> PolyField {
        let n2 = f.grid.n2 as isize;
        let mut vals = nalgebra::DVector::zeros(25);
        let mut r = 0;
        for di in -2i32..=2 {
            for dj in -2i32..=2 {
                let jj = ((j as isize + dj as isize).rem_euclid(n2)) as usize;
                vals[r] = f.at((i as i32 + di) as usize, jj);
                r += 1;
            }
        }
        let c = &self.pinv * vals;
        let mut coeffs = Vec::new();
        let mut k = 0;
        for a in 0..=FIT_DEG {
            for b in 0..=(FIT_DEG - a) {
                let scale = self.h1.powi(a as i32) * self.h2.powi(b as i32);
                coeffs.push(((a, b), c[k] / scale));
                k += 1;
            }
        }
        PolyField {
            center: (f.grid.x1(i), f.grid.x2(j)),
            coeffs,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BachGridReport {
    pub max_bach: f64,
    pub nodes_checked: usize,
    pub h1: f64,
    pub h2: f64,
}

/// Evaluate the Bach tensor of the extension built from grid fields `xi`,
/// `alpha` at a subsample of interior nodes, bridging grid data into the
/// jet engine by local polynomial fits.
pub fn verify_bach_on_grid(
    s: &AffineSurface,
    xi: &FieldOnGrid,
    alpha: &FieldOnGrid,
    phi: &Deformation,
    fiber_samples: &[(f64, f64)],
    max_nodes: usize,
) -> Result<BachGridReport, PdeError> {
    let grid = alpha.grid;
    if grid.n1 < 5 {
        return Err(PdeError::Grid("need at least 5 levels for the fit stencil".into()));
    }
    let fitter = StencilFitter::new(&grid);
    let i_range: Vec<usize> = (2..=grid.n1 - 2).collect();
    let target = max_nodes.max(1);
    let total = i_range.len() * grid.n2;
    let stride = (total / target).max(1);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut idx = 0usize;
    for &i in &i_range {
        for j in 0..grid.n2 {
            if idx % stride != 0 {
                idx += 1;
                continue;
            }
            idx += 1;
            let xi_poly = fitter.fit(xi, i, j);
            let a_poly = fitter.fit(alpha, i, j);
            let endo = EndoField::nilpotent(Field::Poly(a_poly), Field::Poly(xi_poly));
            let m = MetricField::extension(ExtensionMetric::new(
                s.clone(),
                endo,
                phi.clone(),
            ));
            for &(y1, y2) in fiber_samples {
                let p = Point4::new(grid.x1(i), grid.x2(j), y1, y2);
                let b = crate::curvature::bach_values(&m, &p)?;
                worst = worst.max(crate::curvature::max_abs2(&b));
            }
            checked += 1;
        }
    }
    Ok(BachGridReport {
        max_bach: worst,
        nodes_checked: checked,
        h1: grid.h1(),
        h2: grid.h2(),
    })
}
