//! Points, bound constants, and scalar fields on the chart.

use crate::expr::{ExprError, ScalarExpr};
use crate::jet::{Jet, JetError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

/// A point of the cotangent bundle chart: base coordinates `(x1, x2)` and
/// fiber coordinates `(y1, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point4 {
    pub x1: f64,
    pub x2: f64,
    pub y1: f64,
    pub y2: f64,
}

impl Point4 {
    pub fn new(x1: f64, x2: f64, y1: f64, y2: f64) -> Point4 {
        Point4 { x1, x2, y1, y2 }
    }

    pub fn base(x1: f64, x2: f64) -> Point4 {
        Point4::new(x1, x2, 0.0, 0.0)
    }

    pub fn coord(&self, i: usize) -> f64 {
        match i {
            0 => self.x1,
            1 => self.x2,
            2 => self.y1,
            3 => self.y2,
            _ => panic!("coordinate index {i} out of range"),
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.x2, self.y1, self.y2]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Coordinate relabeling x1<->x2, y1<->y2 used by the mirrored
    /// endomorphism pipeline.
    pub fn swapped(&self) -> Point4 {
        Point4::new(self.x2, self.x1, self.y2, self.y1)
    }
}

/// Named constants bound by a scenario config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstTable(BTreeMap<String, f64>);

impl ConstTable {
    pub fn new() -> ConstTable {
        ConstTable::default()
    }

    pub fn set(&mut self, name: &str, v: f64) -> &mut Self {
        self.0.insert(name.to_string(), v);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Rectangular base domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
}

impl Rect {
    pub fn whole_plane() -> Rect {
        Rect {
            x1_min: f64::NEG_INFINITY,
            x1_max: f64::INFINITY,
            x2_min: f64::NEG_INFINITY,
            x2_max: f64::INFINITY,
        }
    }

    pub fn positive_x1() -> Rect {
        Rect {
            x1_min: 0.0,
            x1_max: f64::INFINITY,
            x2_min: f64::NEG_INFINITY,
            x2_max: f64::INFINITY,
        }
    }

    /// Open on the x1 lower edge when it is finite (the Type B singular
    /// locus sits there).
    pub fn contains(&self, p: &Point4) -> bool {
        let x1_ok = if self.x1_min.is_finite() {
            p.x1 > self.x1_min
        } else {
            true
        };
        x1_ok && p.x1 <= self.x1_max && p.x2 >= self.x2_min && p.x2 <= self.x2_max
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("point ({x1}, {x2}) outside the surface domain")]
    OutOfDomain { x1: f64, x2: f64 },
    #[error("{0}")]
    Invalid(String),
}

/// Bivariate polynomial in `(x1 - c1, x2 - c2)`; the carrier for
/// grid-to-engine bridging by local least-squares fits.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyField {
    pub center: (f64, f64),
    /// coefficients keyed by (deg_x1, deg_x2)
    pub coeffs: Vec<((u8, u8), f64)>,
}

impl PolyField {
    fn jet(&self, p: &Point4, order: usize) -> Jet {
        let u = Jet::variable(order, 0, p.x1 - self.center.0);
        let v = Jet::variable(order, 1, p.x2 - self.center.1);
        let mut acc = Jet::zero(order);
        for ((a, b), c) in &self.coeffs {
            if *c == 0.0 {
                continue;
            }
            let term = u
                .powi(*a as i64)
                .unwrap()
                .mul(&v.powi(*b as i64).unwrap())
                .scale(*c);
            acc = acc.add(&term);
        }
        acc
    }
}

/// A scalar field evaluable as a jet at a point.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Const(f64),
    Expr(ScalarExpr, Arc<ConstTable>),
    Poly(PolyField),
}

impl Field {
    pub fn zero() -> Field {
        Field::Const(0.0)
    }

    pub fn constant(v: f64) -> Field {
        Field::Const(v)
    }

    pub fn expr(e: ScalarExpr) -> Field {
        Field::Expr(e, Arc::new(ConstTable::new()))
    }

    pub fn expr_with(e: ScalarExpr, consts: Arc<ConstTable>) -> Field {
        Field::Expr(e, consts)
    }

    pub fn jet(&self, p: &Point4, order: usize) -> Result<Jet, FieldError> {
        Ok(match self {
            Field::Const(v) => Jet::constant(order, *v),
            Field::Expr(e, consts) => e.eval_jet(p, order, consts)?,
            Field::Poly(poly) => poly.jet(p, order),
        })
    }

    pub fn value(&self, p: &Point4) -> Result<f64, FieldError> {
        Ok(self.jet(p, 0)?.value())
    }
}
