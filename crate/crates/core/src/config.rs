//! Run configuration: JSON-serializable specs for the curve, section,
//! material, loads, boundary condition, discretization, and the check
//! commands, plus resolution into compiled objects.

use serde::{Deserialize, Serialize};

use crate::analytic::Scalar;
use crate::energy::{LoadCase, LoadSpec};
use crate::error::{Error, Result};
use crate::gamma::{SmoothStateSpec, TubeQuadrature, WarpSpec};
use crate::geometry::{Curve, CurveSpec};
use crate::material::{IsotropicMaterial, MaterialField};
use crate::section::{PolygonSection, SectionTransform, TriMesh};
use crate::solver::{BoundaryCondition, SolveOptions};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionShape {
    Disk { r: f64, #[serde(default = "default_disk_vertices")] vertices: usize },
    Rect { a: f64, b: f64 },
    Ellipse { a: f64, b: f64, #[serde(default = "default_disk_vertices")] vertices: usize },
    Vertices(Vec<[f64; 2]>),
}

fn default_disk_vertices() -> usize {
    512
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionConfig {
    pub shape: SectionShape,
    pub target_edge: f64,
}

impl SectionConfig {
    pub fn polygon(&self) -> Result<PolygonSection> {
        match &self.shape {
            SectionShape::Disk { r, vertices } => PolygonSection::disk(*r, *vertices),
            SectionShape::Rect { a, b } => PolygonSection::rectangle(*a, *b),
            SectionShape::Ellipse { a, b, vertices } => {
                PolygonSection::ellipse(*a, *b, *vertices)
            }
            SectionShape::Vertices(v) => PolygonSection::new(v.clone()),
        }
    }
}

/// Accepts (lambda, mu) directly or (e, nu); exactly one pair.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct MaterialPoint {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

impl MaterialPoint {
    pub fn resolve(&self) -> Result<IsotropicMaterial> {
        match (self.lambda, self.mu, self.e, self.nu) {
            (Some(l), Some(m), None, None) => IsotropicMaterial::new(l, m),
            (None, None, Some(e), Some(nu)) => IsotropicMaterial::from_e_nu(e, nu),
            _ => Err(Error::Config(
                "material needs either {lambda, mu} or {e, nu}".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialConfig {
    #[serde(flatten)]
    pub point: MaterialPoint,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axial_piecewise: Option<AxialMaterial>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxialMaterial {
    pub breaks: Vec<f64>,
    pub materials: Vec<MaterialPoint>,
}

impl MaterialConfig {
    pub fn resolve(&self) -> Result<MaterialField> {
        if let Some(ax) = &self.axial_piecewise {
            let materials = ax
                .materials
                .iter()
                .map(|m| m.resolve())
                .collect::<Result<Vec<_>>>()?;
            let field =
                MaterialField::AxialPiecewise { breaks: ax.breaks.clone(), materials };
            field.validate()?;
            Ok(field)
        } else {
            Ok(MaterialField::Homogeneous(self.point.resolve()?))
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Discretization {
    #[serde(default = "default_elements")]
    pub elements: usize,
    #[serde(default = "default_quadrature")]
    pub quadrature: usize,
}

fn default_elements() -> usize {
    64
}

fn default_quadrature() -> usize {
    5
}

impl Default for Discretization {
    fn default() -> Self {
        Self { elements: 64, quadrature: 5 }
    }
}

/// How the per-station stiffness is obtained.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum Condensation {
    /// Closed form (exact for per-section isotropic materials).
    #[default]
    ClosedForm,
    /// FEM cell condensation per quadrature station.
    Fem,
}

/// Options of the check commands (h-lists, test state and warp, quadrature,
/// seeds).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckConfig {
    #[serde(default = "default_h_list")]
    pub h_list: Vec<f64>,
    #[serde(default)]
    pub state: SmoothStateSpec,
    #[serde(default)]
    pub warp: WarpSpec,
    #[serde(default)]
    pub quadrature: TubeQuadrature,
    #[serde(default = "default_gradcheck_samples")]
    pub gradcheck_samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Section half-width ρ used by the expansion sampling.
    #[serde(default = "default_halfwidth")]
    pub section_halfwidth: f64,
}

fn default_h_list() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}

fn default_gradcheck_samples() -> usize {
    20
}

fn default_seed() -> u64 {
    20240901
}

fn default_halfwidth() -> f64 {
    0.5
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            h_list: default_h_list(),
            state: SmoothStateSpec {
                u: Scalar::Zero,
                v2: Scalar::Zero,
                v3: Scalar::Zero,
                w: Scalar::Zero,
            },
            warp: WarpSpec::default(),
            quadrature: TubeQuadrature::default(),
            gradcheck_samples: default_gradcheck_samples(),
            seed: default_seed(),
            section_halfwidth: default_halfwidth(),
        }
    }
}

impl Default for SmoothStateSpec {
    fn default() -> Self {
        Self { u: Scalar::Zero, v2: Scalar::Zero, v3: Scalar::Zero, w: Scalar::Zero }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub curve: CurveSpec,
    pub section: SectionConfig,
    pub material: MaterialConfig,
    #[serde(default)]
    pub loads: LoadSpec,
    #[serde(default = "default_bc")]
    pub boundary: BoundaryCondition,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub condensation: Condensation,
    /// Rotations (p₂, p₃) reported by the `section` command.
    #[serde(default = "default_rotations")]
    pub rotations: Vec<[f64; 2]>,
    #[serde(default)]
    pub check: CheckConfig,
}

fn default_bc() -> BoundaryCondition {
    BoundaryCondition::ClampedBoth
}

fn default_rotations() -> Vec<[f64; 2]> {
    vec![[1.0, 0.0]]
}

impl Default for LoadSpec {
    fn default() -> Self {
        Self { f2: Scalar::Zero, f3: Scalar::Zero }
    }
}

/// Everything a command needs, compiled and validated.
pub struct Resolved {
    pub config: RunConfig,
    pub curve: Curve,
    pub section: PolygonSection,
    pub transform: SectionTransform,
    pub mesh: TriMesh,
    pub material: MaterialField,
    pub loads: LoadCase,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Validate, normalize the section, and compile all pieces. The returned
    /// config has the material normalized to (lambda, mu) form so reports
    /// embed fully resolved inputs.
    pub fn resolve(&self) -> Result<Resolved> {
        let curve = Curve::new(&self.curve)?;
        let raw = self.section.polygon()?;
        let (section, transform) = raw.normalized()?;
        if !(self.section.target_edge > 0.0) {
            return Err(Error::Config("section.target_edge must be positive".into()));
        }
        let mesh = section.triangulate(self.section.target_edge)?;
        let material = self.material.resolve()?;
        let loads = LoadCase::from_spec(&self.loads)?;
        for r in &self.rotations {
            if (r[0] * r[0] + r[1] * r[1] - 1.0).abs() > 1e-10 {
                return Err(Error::Config(format!(
                    "rotation ({}, {}) is not a unit vector",
                    r[0], r[1]
                )));
            }
        }
        if self.discretization.elements == 0 {
            return Err(Error::Config("discretization.elements must be positive".into()));
        }
        if !(1..=10).contains(&self.discretization.quadrature) {
            return Err(Error::Config("discretization.quadrature must be 1..=10".into()));
        }
        let mut config = self.clone();
        config.material = normalize_material(&material);
        Ok(Resolved { config, curve, section, transform, mesh, material, loads })
    }
}

fn normalize_material(field: &MaterialField) -> MaterialConfig {
    let point = |m: &IsotropicMaterial| MaterialPoint {
        lambda: Some(m.lambda),
        mu: Some(m.mu),
        e: None,
        nu: None,
    };
    match field {
        MaterialField::Homogeneous(m) => {
            MaterialConfig { point: point(m), axial_piecewise: None }
        }
        MaterialField::AxialPiecewise { breaks, materials } => MaterialConfig {
            point: MaterialPoint::default(),
            axial_piecewise: Some(AxialMaterial {
                breaks: breaks.clone(),
                materials: materials.iter().map(point).collect(),
            }),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "curve": {
            "length": 1.0,
            "theta2": {"poly": [0.0, 0.0, 0.5]},
            "theta3": "zero"
        },
        "section": {"shape": {"rect": {"a": 1.0, "b": 1.0}}, "target_edge": 0.1},
        "material": {"e": 1.0, "nu": 0.3},
        "loads": {"f2": {"poly": [0.01]}},
        "boundary": "clamped-both",
        "discretization": {"elements": 32, "quadrature": 5}
    }"#;

    #[test]
    fn parse_and_resolve_example() {
        let cfg = RunConfig::from_json(EXAMPLE).unwrap();
        let resolved = cfg.resolve().unwrap();
        assert!(resolved.mesh.triangles.len() > 10);
        // Material normalized to lambda/mu in the embedded config.
        assert!(resolved.config.material.point.lambda.is_some());
        assert!(resolved.config.material.point.e.is_none());
        let m = resolved.material.at(0.0);
        assert!((m.mu - 1.0 / 2.6).abs() < 1e-12);
    }

    #[test]
    fn bad_material_rejected() {
        let mut cfg = RunConfig::from_json(EXAMPLE).unwrap();
        cfg.material = MaterialConfig {
            point: MaterialPoint { lambda: Some(1.0), mu: None, e: None, nu: None },
            axial_piecewise: None,
        };
        assert!(matches!(cfg.resolve(), Err(Error::Config(_)) | Err(Error::Material(_))));
    }

    #[test]
    fn disk_shape_default_vertices() {
        let json = r#"{"shape": {"disk": {"r": 1.0}}, "target_edge": 0.2}"#;
        let sc: SectionConfig = serde_json::from_str(json).unwrap();
        match sc.shape {
            SectionShape::Disk { vertices, .. } => assert_eq!(vertices, 512),
            _ => panic!("wrong shape"),
        }
    }

    #[test]
    fn config_roundtrip_is_stable() {
        let cfg = RunConfig::from_json(EXAMPLE).unwrap();
        let resolved = cfg.resolve().unwrap();
        let text = serde_json::to_string_pretty(&resolved.config).unwrap();
        let cfg2 = RunConfig::from_json(&text).unwrap();
        let resolved2 = cfg2.resolve().unwrap();
        let t1 = serde_json::to_string(&resolved.config).unwrap();
        let t2 = serde_json::to_string(&resolved2.config).unwrap();
        assert_eq!(t1, t2);
    }
}
