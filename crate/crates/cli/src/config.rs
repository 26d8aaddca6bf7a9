//! Scenario configuration: one TOML file describes the surface, the
//! endomorphism, the deformation, and how to evaluate the resulting
//! metric. Unknown keys are rejected so typos fail loudly.

use crate::error::CliError;
use bachex_core::{
    parse_expr_consts, AffineSurface, ConstTable, Deformation, EndoField, ExtensionMetric, Field,
    MetricField, Point4, Rect,
};
use rand::{Rng, SeedableRng};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub surface: SurfaceSection,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    #[serde(default)]
    pub endomorphism: EndoSection,
    #[serde(default)]
    pub deformation: DeformationSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub conformal: Option<ConformalSection>,
    #[serde(default)]
    pub normalize: Option<NormalizeSection>,
    #[serde(default)]
    pub pde: Option<PdeSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    /// "typeA" | "typeB" | "remark12" | "explicit"
    pub kind: String,
    /// constant entries for typeA / typeB, order
    /// G11^1, G11^2, G12^1, G12^2, G22^1, G22^2
    pub gamma: Option<[f64; 6]>,
    pub g11_1: Option<String>,
    pub g11_2: Option<String>,
    pub g12_1: Option<String>,
    pub g12_2: Option<String>,
    pub g22_1: Option<String>,
    pub g22_2: Option<String>,
    /// remark12 potential and slope
    pub phi: Option<String>,
    pub c: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EndoSection {
    /// "explicit" | "nilpotent_spec" | "canonical" | "piecewise_s23";
    /// empty means canonical
    #[serde(default)]
    pub kind: Option<String>,
    pub alpha: Option<String>,
    pub xi: Option<String>,
    pub t11: Option<String>,
    pub t12: Option<String>,
    pub t21: Option<String>,
    pub t22: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DeformationSection {
    pub phi11: Option<String>,
    pub phi12: Option<String>,
    pub phi22: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    #[serde(default)]
    pub points: Vec<[f64; 4]>,
    pub grid: Option<GridSection>,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_order() -> usize {
    4
}
fn default_tol() -> f64 {
    1e-8
}
fn default_samples() -> usize {
    20
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            points: Vec::new(),
            grid: None,
            order: default_order(),
            tol: default_tol(),
            seed: 0,
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x1_min: f64,
    pub x1_max: f64,
    pub n1: usize,
    pub x2_min: f64,
    pub x2_max: f64,
    pub n2: usize,
    #[serde(default)]
    pub y1: f64,
    #[serde(default)]
    pub y2: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformalSection {
    /// each candidate is (A, B, psi) for the factor A*y1 + B*y2 + psi
    pub candidates: Vec<[String; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizeSection {
    #[serde(default)]
    pub p0: [f64; 2],
    #[serde(default = "default_z_half_width")]
    pub z_half_width: f64,
    #[serde(default = "default_z_n")]
    pub n: usize,
    #[serde(default = "default_out_half_width")]
    pub out_half_width: f64,
    #[serde(default = "default_out_n")]
    pub out_n: usize,
}

fn default_z_half_width() -> f64 {
    0.4
}
fn default_z_n() -> usize {
    32
}
fn default_out_half_width() -> f64 {
    0.15
}
fn default_out_n() -> usize {
    2
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub xi0: String,
    pub alpha0: Option<String>,
    pub alpha1: Option<String>,
    pub length: f64,
    pub n1: usize,
    pub n2: usize,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<ScenarioConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(format!("config: {e}")))
    }

    pub fn const_table(&self) -> Arc<ConstTable> {
        let mut t = ConstTable::new();
        for (k, v) in &self.constants {
            t.set(k, *v);
        }
        Arc::new(t)
    }

    pub fn parse_field(&self, text: &str) -> Result<Field, CliError> {
        let consts = self.const_table();
        let expr = parse_expr_consts(text, &consts)
            .map_err(|e| CliError::Parse(format!("expression `{text}`: {e}")))?;
        Ok(Field::expr_with(expr, consts))
    }

    fn field_or_zero(&self, text: &Option<String>) -> Result<Field, CliError> {
        match text {
            Some(t) => self.parse_field(t),
            None => Ok(Field::zero()),
        }
    }

    pub fn build_surface(&self) -> Result<AffineSurface, CliError> {
        let s = &self.surface;
        match s.kind.as_str() {
            "typeA" => {
                let g = s.gamma.ok_or_else(|| {
                    CliError::Parse("surface kind typeA needs `gamma = [..6 entries..]`".into())
                })?;
                Ok(AffineSurface::type_a(g))
            }
            "typeB" => {
                let g = s.gamma.ok_or_else(|| {
                    CliError::Parse("surface kind typeB needs `gamma = [..6 entries..]`".into())
                })?;
                Ok(AffineSurface::type_b(g))
            }
            "explicit" => {
                let entries = [
                    &s.g11_1, &s.g11_2, &s.g12_1, &s.g12_2, &s.g22_1, &s.g22_2,
                ];
                let mut fields: [Field; 6] = std::array::from_fn(|_| Field::zero());
                for (i, e) in entries.into_iter().enumerate() {
                    fields[i] = self.field_or_zero(e)?;
                }
                Ok(AffineSurface::from_fields(fields, Rect::whole_plane()))
            }
            "remark12" => {
                let phi = s.phi.as_ref().ok_or_else(|| {
                    CliError::Parse("surface kind remark12 needs `phi`".into())
                })?;
                let c = s.c.as_ref().ok_or_else(|| {
                    CliError::Parse("surface kind remark12 needs `c`".into())
                })?;
                Ok(AffineSurface::potential_family(
                    self.parse_field(phi)?,
                    self.parse_field(c)?,
                    self.field_or_zero(&s.g12_1)?,
                    self.field_or_zero(&s.g22_1)?,
                    self.field_or_zero(&s.g22_2)?,
                ))
            }
            other => Err(CliError::Parse(format!(
                "unknown surface kind `{other}` (expected typeA, typeB, remark12, explicit)"
            ))),
        }
    }

    pub fn build_endo(&self) -> Result<EndoField, CliError> {
        let e = &self.endomorphism;
        match e.kind.as_deref().unwrap_or("canonical") {
            "canonical" => Ok(EndoField::Canonical),
            "nilpotent_spec" => {
                let alpha = e.alpha.as_ref().ok_or_else(|| {
                    CliError::Parse("endomorphism kind nilpotent_spec needs `alpha`".into())
                })?;
                let xi = e.xi.as_ref().ok_or_else(|| {
                    CliError::Parse("endomorphism kind nilpotent_spec needs `xi`".into())
                })?;
                Ok(EndoField::nilpotent(
                    self.parse_field(alpha)?,
                    self.parse_field(xi)?,
                ))
            }
            "explicit" => Ok(EndoField::Explicit {
                t: [
                    [self.field_or_zero(&e.t11)?, self.field_or_zero(&e.t12)?],
                    [self.field_or_zero(&e.t21)?, self.field_or_zero(&e.t22)?],
                ],
            }),
            "piecewise_s23" => {
                let alpha = e.alpha.as_ref().ok_or_else(|| {
                    CliError::Parse("endomorphism kind piecewise_s23 needs `alpha`".into())
                })?;
                Ok(EndoField::PiecewiseScalarNilpotent {
                    alpha: self.parse_field(alpha)?,
                })
            }
            other => Err(CliError::Parse(format!(
                "unknown endomorphism kind `{other}`"
            ))),
        }
    }

    pub fn build_deformation(&self) -> Result<Deformation, CliError> {
        let d = &self.deformation;
        Ok(Deformation::new(
            self.field_or_zero(&d.phi11)?,
            self.field_or_zero(&d.phi12)?,
            self.field_or_zero(&d.phi22)?,
        ))
    }

    pub fn build_metric(&self) -> Result<MetricField, CliError> {
        Ok(MetricField::extension(ExtensionMetric::new(
            self.build_surface()?,
            self.build_endo()?,
            self.build_deformation()?,
        )))
    }

    /// Explicit points if given, otherwise a seeded random sample inside
    /// the surface domain.
    pub fn eval_points(&self, seed_override: Option<u64>) -> Vec<Point4> {
        if !self.evaluation.points.is_empty() {
            return self
                .evaluation
                .points
                .iter()
                .map(|p| Point4::new(p[0], p[1], p[2], p[3]))
                .collect();
        }
        let seed = seed_override.unwrap_or(self.evaluation.seed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x1_range = if self.surface.kind == "typeB" {
            0.6..1.8
        } else {
            -1.0..1.0
        };
        (0..self.evaluation.samples)
            .map(|_| {
                Point4::new(
                    rng.gen_range(x1_range.clone()),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-0.8..0.8),
                    rng.gen_range(-0.8..0.8),
                )
            })
            .collect()
    }

    pub fn grid_points(&self) -> Option<Vec<Point4>> {
        let g = self.evaluation.grid.as_ref()?;
        let mut pts = Vec::new();
        for i in 0..=g.n1 {
            let x1 = g.x1_min + (g.x1_max - g.x1_min) * i as f64 / g.n1.max(1) as f64;
            for j in 0..=g.n2 {
                let x2 = g.x2_min + (g.x2_max - g.x2_min) * j as f64 / g.n2.max(1) as f64;
                pts.push(Point4::new(x1, x2, g.y1, g.y2));
            }
        }
        Some(pts)
    }
}
