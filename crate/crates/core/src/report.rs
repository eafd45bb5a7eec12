//! Machine-readable reports emitted by the CLI commands. Every report embeds
//! the fully resolved configuration.

use serde::{Deserialize, Serialize};

use crate::cell::CondensedStiffness;
use crate::config::RunConfig;
use crate::gamma::GammaTable;
use crate::geometry::ExpansionReport;
use crate::section::{SectionProperties, SectionTransform};
use crate::solver::{CompatibilityReport, ConvergenceReport};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshStats {
    pub nodes: usize,
    pub triangles: usize,
    pub min_angle_deg: f64,
    pub max_edge_length: f64,
    pub total_area: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StiffnessEntry {
    pub rotation: [f64; 2],
    /// Row-major 4×4 matrix over (t, κ₂, κ₃, ϑ).
    pub matrix: [[f64; 4]; 4],
    pub min_eigenvalue: f64,
}

impl StiffnessEntry {
    pub fn new(rotation: [f64; 2], m: &CondensedStiffness) -> Self {
        let mut matrix = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                matrix[i][j] = m.m[(i, j)];
            }
        }
        Self { rotation, matrix, min_eigenvalue: m.min_eigenvalue() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionReport {
    pub config: RunConfig,
    pub normalization: SectionTransform,
    pub properties: SectionProperties,
    pub mesh: MeshStats,
    pub torsion_rigidity: f64,
    pub stiffness: Vec<StiffnessEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub config: RunConfig,
    pub compatibility: CompatibilityReport,
    pub convergence: ConvergenceReport,
    pub state_csv: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrenetReport {
    pub config: RunConfig,
    pub expansion: ExpansionReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub config: RunConfig,
    pub samples: usize,
    pub seed: u64,
    pub max_gradient_relative_error: f64,
    pub max_hessian_relative_error: f64,
    pub max_hessian_asymmetry: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaReport {
    pub config: RunConfig,
    pub table: GammaTable,
}

/// Serialize a report as pretty JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> crate::Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| crate::Error::Config(format!("report serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}
