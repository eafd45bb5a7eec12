//! Weakly curved centerline: curvature frame (p₂, p₃), exact Frenet frames of
//! the scaled curve, the exact tube-map Jacobian, and numerical validation of
//! their first-order expansions.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::analytic::{Jet, Scalar, ScalarFn};
use crate::error::{Error, Result};

/// How the cross-section frame (p₂, p₃) is obtained.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum FrameSpec {
    /// p_k = θ_k″ / |θ″|; requires nonvanishing curvature.
    Curvature,
    /// User-supplied constant unit frame, for curves with vanishing
    /// curvature (straight rods in particular).
    Constant { p2: f64, p3: f64 },
}

/// Scaled centerline data: θ₂, θ₃ with derivatives through order 3.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSpec {
    pub length: f64,
    pub theta2: Scalar,
    pub theta3: Scalar,
    #[serde(default = "default_frame")]
    pub frame: FrameSpec,
}

fn default_frame() -> FrameSpec {
    FrameSpec::Curvature
}

/// Compiled centerline.
#[derive(Debug, Clone)]
pub struct Curve {
    pub length: f64,
    theta2: ScalarFn,
    theta3: ScalarFn,
    frame: FrameSpec,
}

/// Frame data at a station: (p₂, p₃), their derivatives, p = p₂p₃′ − p₂′p₃.
#[derive(Debug, Clone, Copy)]
pub struct FrameData {
    pub p2: f64,
    pub p3: f64,
    pub dp2: f64,
    pub dp3: f64,
    pub p: f64,
}

impl FrameData {
    pub fn r_e(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0, 0.0, 0.0, //
            0.0, self.p2, -self.p3, //
            0.0, self.p3, self.p2,
        )
    }

    /// Rotate section coordinates: (x₂′, x₃′) = R (x₂, x₃).
    pub fn rotate(&self, x2: f64, x3: f64) -> (f64, f64) {
        (self.p2 * x2 - self.p3 * x3, self.p3 * x2 + self.p2 * x3)
    }
}

/// Frenet frame of the scaled curve and its x₁-derivatives.
#[derive(Debug, Clone, Copy)]
pub struct FrenetFrame {
    pub t: Vector3<f64>,
    pub n: Vector3<f64>,
    pub b: Vector3<f64>,
    pub dt: Vector3<f64>,
    pub dn: Vector3<f64>,
    pub db: Vector3<f64>,
}

impl Curve {
    pub fn new(spec: &CurveSpec) -> Result<Self> {
        if !(spec.length > 0.0) {
            return Err(Error::Config("curve length must be positive".into()));
        }
        if let FrameSpec::Constant { p2, p3 } = spec.frame {
            if (p2 * p2 + p3 * p3 - 1.0).abs() > 1e-10 {
                return Err(Error::Config(format!(
                    "constant frame ({p2}, {p3}) must be a unit vector"
                )));
            }
        }
        Ok(Self {
            length: spec.length,
            theta2: spec.theta2.compile()?,
            theta3: spec.theta3.compile()?,
            frame: spec.frame,
        })
    }

    pub fn straight(length: f64) -> Self {
        Self {
            length,
            theta2: ScalarFn::Zero,
            theta3: ScalarFn::Zero,
            frame: FrameSpec::Constant { p2: 1.0, p3: 0.0 },
        }
    }

    pub fn frame_spec(&self) -> FrameSpec {
        self.frame
    }

    pub fn is_straight(&self) -> bool {
        matches!((&self.theta2, &self.theta3), (ScalarFn::Zero, ScalarFn::Zero))
    }

    pub fn theta2_jet(&self, x1: f64) -> Jet {
        self.theta2.jet(x1)
    }

    pub fn theta3_jet(&self, x1: f64) -> Jet {
        self.theta3.jet(x1)
    }

    /// (p₂, p₃) and derivatives at a station.
    pub fn frame_data(&self, x1: f64) -> Result<FrameData> {
        match self.frame {
            FrameSpec::Constant { p2, p3 } => {
                Ok(FrameData { p2, p3, dp2: 0.0, dp3: 0.0, p: 0.0 })
            }
            FrameSpec::Curvature => {
                let t2 = self.theta2.jet(x1);
                let t3 = self.theta3.jet(x1);
                let rho2 = t2[2] * t2[2] + t3[2] * t3[2];
                if rho2 < 1e-28 {
                    return Err(Error::DegenerateCurvature { x1 });
                }
                let rho = rho2.sqrt();
                let drho = (t2[2] * t2[3] + t3[2] * t3[3]) / rho;
                let p2 = t2[2] / rho;
                let p3 = t3[2] / rho;
                let dp2 = (t2[3] * rho - t2[2] * drho) / rho2;
                let dp3 = (t3[3] * rho - t3[2] * drho) / rho2;
                Ok(FrameData { p2, p3, dp2, dp3, p: p2 * dp3 - dp2 * p3 })
            }
        }
    }

    /// Exact Frenet trihedron of the scaled curve (x₁, hθ₂, hθ₃) with
    /// analytic x₁-derivatives.
    ///
    /// For the identically straight curve with a constant user frame, the
    /// constant adapted frame e₁, (0, p₂, p₃), (0, −p₃, p₂) is returned.
    pub fn exact_frenet(&self, h: f64, x1: f64) -> Result<FrenetFrame> {
        if self.is_straight() {
            let f = self.frame_data(x1)?;
            return Ok(FrenetFrame {
                t: Vector3::x(),
                n: Vector3::new(0.0, f.p2, f.p3),
                b: Vector3::new(0.0, -f.p3, f.p2),
                dt: Vector3::zeros(),
                dn: Vector3::zeros(),
                db: Vector3::zeros(),
            });
        }
        if let FrameSpec::Constant { .. } = self.frame {
            return Err(Error::GeometryRegime(
                "exact 3D frames with a user-supplied frame are only available for straight curves"
                    .into(),
            ));
        }
        let t2 = self.theta2.jet(x1);
        let t3 = self.theta3.jet(x1);
        // c(x₁) = (x₁, hθ₂, hθ₃); tangent from c′, normal from the direction
        // of t′, all derivatives analytic through θ‴.
        let c1 = Vector3::new(1.0, h * t2[1], h * t3[1]);
        let c2 = Vector3::new(0.0, h * t2[2], h * t3[2]);
        let c3 = Vector3::new(0.0, h * t2[3], h * t3[3]);
        let s2 = c1.dot(&c1);
        let s = s2.sqrt();
        let ds = c1.dot(&c2) / s;
        let dds = (c2.dot(&c2) + c1.dot(&c3)) / s - (c1.dot(&c2)).powi(2) / (s2 * s);
        let t = c1 / s;
        let dt = c2 / s - c1 * (ds / s2);
        let ddt =
            c3 / s - c2 * (2.0 * ds / s2) - c1 * (dds / s2) + c1 * (2.0 * ds * ds / (s2 * s));
        let u = dt.norm();
        if u < 1e-300 {
            return Err(Error::DegenerateCurvature { x1 });
        }
        let du = dt.dot(&ddt) / u;
        let n = dt / u;
        let dn = ddt / u - dt * (du / (u * u));
        let b = t.cross(&n);
        let db = dt.cross(&n) + t.cross(&dn);
        Ok(FrenetFrame { t, n, b, dt, dn, db })
    }

    /// Exact Jacobian of the tube map at a physical point (x₁, x₂ʰ, x₃ʰ),
    /// columns (c′ + x₂ʰ n′ + x₃ʰ b′ | n | b), and its determinant.
    pub fn theta_jacobian(
        &self,
        h: f64,
        x1: f64,
        x2h: f64,
        x3h: f64,
    ) -> Result<(Matrix3<f64>, f64)> {
        let fr = self.exact_frenet(h, x1)?;
        let t2 = self.theta2_jet(x1);
        let t3 = self.theta3_jet(x1);
        let c1 = Vector3::new(1.0, h * t2[1], h * t3[1]);
        let col0 = c1 + fr.dn * x2h + fr.db * x3h;
        let mut j = Matrix3::<f64>::zeros();
        j.set_column(0, &col0);
        j.set_column(1, &fr.n);
        j.set_column(2, &fr.b);
        let det = j.determinant();
        if det <= 0.0 {
            return Err(Error::GeometryRegime(format!(
                "tube map not orientation-preserving at x1={x1} (det = {det}); reduce h"
            )));
        }
        Ok((j, det))
    }
}

/// Per-h maximum residuals of the first-order expansions, and fitted slopes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub h_list: Vec<f64>,
    pub residual_t: Vec<f64>,
    pub residual_n: Vec<f64>,
    pub residual_b: Vec<f64>,
    pub residual_jacobian: Vec<f64>,
    pub residual_inverse: Vec<f64>,
    pub slope_t: f64,
    pub slope_n: f64,
    pub slope_b: f64,
    pub slope_jacobian: f64,
    pub slope_inverse: f64,
    /// Fitted constant in |det ∇Θʰ − 1| ≤ C·h over the sample grid.
    pub det_deviation_constant: f64,
}

/// Validate the expansions of tʰ, nʰ, bʰ, ∇Θʰ: residuals after removing the
/// terms through order h (and the x₂ʰD + x₃ʰE terms for ∇Θʰ) decay as O(h²),
/// and (∇Θʰ)⁻¹ agrees with R_eᵀ to O(h). Sampled on a uniform x₁ grid with
/// section offsets x_kʰ ∈ h·{−ρ, ρ}.
pub fn expansion_report(
    curve: &Curve,
    h_list: &[f64],
    section_halfwidth: f64,
) -> Result<ExpansionReport> {
    let n_x1 = 161;
    let rho = section_halfwidth;
    let mut res_t = Vec::new();
    let mut res_n = Vec::new();
    let mut res_b = Vec::new();
    let mut res_j = Vec::new();
    let mut res_i = Vec::new();
    let mut det_c: f64 = 0.0;
    for &h in h_list {
        let (mut rt, mut rn, mut rb, mut rj, mut ri): (f64, f64, f64, f64, f64) =
            (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..n_x1 {
            // Stay inside the open interval: the curvature frame may be
            // singular exactly at the ends.
            let x1 = curve.length * (k as f64 + 0.5) / n_x1 as f64;
            let fr = curve.exact_frenet(h, x1)?;
            let fd = curve.frame_data(x1)?;
            let t2 = curve.theta2_jet(x1);
            let t3 = curve.theta3_jet(x1);
            // tʰ = e₁ + hθ₂′e₂ + hθ₃′e₃ + O(h²)
            let t_lin = Vector3::new(1.0, h * t2[1], h * t3[1]);
            rt = rt.max((fr.t - t_lin).norm());
            // nʰ = p₂e₂ + p₃e₃ − h(θ₂′p₂ + θ₃′p₃)e₁ + O(h²)
            let n_lin = Vector3::new(-h * (t2[1] * fd.p2 + t3[1] * fd.p3), fd.p2, fd.p3);
            rn = rn.max((fr.n - n_lin).norm());
            // bʰ = −p₃e₂ + p₂e₃ + h(θ₂′p₃ − θ₃′p₂)e₁ + O(h²)
            let b_lin = Vector3::new(h * (t2[1] * fd.p3 - t3[1] * fd.p2), -fd.p3, fd.p2);
            rb = rb.max((fr.b - b_lin).norm());
            // ∇Θʰ = R_e + hC + x₂ʰD + x₃ʰE + O(h²)
            let r_e = fd.r_e();
            let c_mat = Matrix3::new(
                0.0,
                -(t2[1] * fd.p2 + t3[1] * fd.p3),
                -(t3[1] * fd.p2 - t2[1] * fd.p3),
                t2[1],
                0.0,
                0.0,
                t3[1],
                0.0,
                0.0,
            );
            let d_mat = Matrix3::new(0.0, 0.0, 0.0, fd.dp2, 0.0, 0.0, fd.dp3, 0.0, 0.0);
            let e_mat = Matrix3::new(0.0, 0.0, 0.0, -fd.dp3, 0.0, 0.0, fd.dp2, 0.0, 0.0);
            for &sx in &[-rho, rho] {
                for &sy in &[-rho, rho] {
                    let (x2h, x3h) = (h * sx, h * sy);
                    let (j, det) = curve.theta_jacobian(h, x1, x2h, x3h)?;
                    let j_lin = r_e + c_mat * h + d_mat * x2h + e_mat * x3h;
                    rj = rj.max((j - j_lin).norm());
                    let inv = j.try_inverse().ok_or_else(|| {
                        Error::GeometryRegime("tube Jacobian not invertible".into())
                    })?;
                    ri = ri.max((inv - r_e.transpose()).norm());
                    det_c = det_c.max((det - 1.0).abs() / h);
                }
            }
        }
        res_t.push(rt);
        res_n.push(rn);
        res_b.push(rb);
        res_j.push(rj);
        res_i.push(ri);
    }
    Ok(ExpansionReport {
        h_list: h_list.to_vec(),
        slope_t: slope_or_exact(h_list, &res_t),
        slope_n: slope_or_exact(h_list, &res_n),
        slope_b: slope_or_exact(h_list, &res_b),
        slope_jacobian: slope_or_exact(h_list, &res_j),
        slope_inverse: slope_or_exact(h_list, &res_i),
        residual_t: res_t,
        residual_n: res_n,
        residual_b: res_b,
        residual_jacobian: res_j,
        residual_inverse: res_i,
        det_deviation_constant: det_c,
    })
}

/// Slope of a residual sequence; a sequence at machine zero (an expansion
/// that is exact, e.g. the binormal of a planar curve) reports 99.
fn slope_or_exact(h: &[f64], e: &[f64]) -> f64 {
    if e.iter().all(|&v| v < 1e-13) {
        99.0
    } else {
        log_slope(h, e)
    }
}

/// Least-squares slope of log(err) against log(h).
pub fn log_slope(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&hi, &ei) in h.iter().zip(e) {
        let (x, y) = (hi.ln(), ei.max(1e-300).ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
