//! Numerical witness of the dimension-reduction identity: the normalized 3D
//! energy of the explicit recovery deformation of the thin tube converges,
//! as the thickness h → 0, to the limit density ½ ∫ Q₃(G̃) built from the
//! limit strain G̃ = sym(J − ½A² + K); and the per-section minimization over
//! warps reproduces the condensed 1D energy (absorption of constant shifts).

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{Scalar, ScalarFn};
use crate::cell::{self, CellSolver, GeneralizedStrain};
use crate::error::{Error, Result};
use crate::geometry::{log_slope, Curve, FrameData};
use crate::material::{IsotropicMaterial, MaterialField, UniformSection};
use crate::quadrature::{triangle_rule_3, GaussRule};
use crate::section::{PolygonSection, TriMesh};

/// Smooth rod state (analytic components), the admissible inputs of the
/// recovery construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothStateSpec {
    #[serde(default = "Scalar::default_zero")]
    pub u: Scalar,
    #[serde(default = "Scalar::default_zero")]
    pub v2: Scalar,
    #[serde(default = "Scalar::default_zero")]
    pub v3: Scalar,
    #[serde(default = "Scalar::default_zero")]
    pub w: Scalar,
}

#[derive(Debug, Clone)]
pub struct SmoothState {
    pub u: ScalarFn,
    pub v2: ScalarFn,
    pub v3: ScalarFn,
    pub w: ScalarFn,
}

impl SmoothState {
    pub fn from_spec(spec: &SmoothStateSpec) -> Result<Self> {
        Ok(Self {
            u: spec.u.compile()?,
            v2: spec.v2.compile()?,
            v3: spec.v3.compile()?,
            w: spec.w.compile()?,
        })
    }

    pub fn zero() -> Self {
        Self { u: ScalarFn::Zero, v2: ScalarFn::Zero, v3: ScalarFn::Zero, w: ScalarFn::Zero }
    }

    /// Generalized strain of the smooth state at x₁.
    pub fn strain(&self, curve: &Curve, x1: f64) -> GeneralizedStrain {
        let u = self.u.jet(x1);
        let v2 = self.v2.jet(x1);
        let v3 = self.v3.jet(x1);
        let w = self.w.jet(x1);
        let t2 = curve.theta2_jet(x1);
        let t3 = curve.theta3_jet(x1);
        GeneralizedStrain::new(
            u[1] + v2[1] * t2[1] + v3[1] * t3[1] + 0.5 * (v2[1] * v2[1] + v3[1] * v3[1]),
            v2[2],
            v3[2],
            w[1],
        )
    }
}

/// Warp field η on Ω = (0,L) × ω and its first partial derivatives.
#[derive(Debug, Clone, Copy)]
pub struct WarpJet {
    pub eta: Vector3<f64>,
    pub d1: Vector3<f64>,
    pub d2: Vector3<f64>,
    pub d3: Vector3<f64>,
}

impl WarpJet {
    fn zero() -> Self {
        Self {
            eta: Vector3::zeros(),
            d1: Vector3::zeros(),
            d2: Vector3::zeros(),
            d3: Vector3::zeros(),
        }
    }
}

/// Polynomial-in-section warp: η_i = Σ c_{i,jk}(x₁) x₂^j x₃^k.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct WarpSpec {
    #[serde(default)]
    pub terms: Vec<WarpTermSpec>,
    /// Project onto the admissible space (per-section mean zero and zero
    /// rotation moment) at construction.
    #[serde(default)]
    pub projected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WarpTermSpec {
    pub x2_power: usize,
    pub x3_power: usize,
    #[serde(default = "Scalar::default_zero")]
    pub c1: Scalar,
    #[serde(default = "Scalar::default_zero")]
    pub c2: Scalar,
    #[serde(default = "Scalar::default_zero")]
    pub c3: Scalar,
}

#[derive(Debug, Clone)]
struct CompiledTerm {
    j: usize,
    k: usize,
    c: [ScalarFn; 3],
}

#[derive(Debug, Clone)]
pub enum Warp {
    Zero,
    Poly(PolyWarp),
    Projected(ProjectedWarp),
}

#[derive(Debug, Clone)]
pub struct PolyWarp {
    terms: Vec<CompiledTerm>,
}

/// Monomial section moments ∫ x₂^j x₃^k needed by the projection.
#[derive(Debug, Clone)]
pub struct MomentTable {
    max_deg: usize,
    m: Vec<f64>,
}

impl MomentTable {
    pub fn build(poly: &PolygonSection, max_deg: usize) -> Self {
        let mut m = vec![0.0; (max_deg + 1) * (max_deg + 1)];
        for j in 0..=max_deg {
            for k in 0..=max_deg {
                if j + k <= max_deg {
                    m[j * (max_deg + 1) + k] = poly.monomial_moment(j, k);
                }
            }
        }
        Self { max_deg, m }
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        assert!(j + k <= self.max_deg, "moment degree out of table");
        self.m[j * (self.max_deg + 1) + k]
    }
}

#[derive(Debug, Clone)]
pub struct ProjectedWarp {
    inner: PolyWarp,
    curve: Curve,
    table: MomentTable,
    area: f64,
    mu_omega: f64,
}

impl Warp {
    pub fn compile(spec: &WarpSpec, section: &PolygonSection, curve: &Curve) -> Result<Self> {
        if spec.terms.is_empty() {
            return Ok(Warp::Zero);
        }
        let mut terms = Vec::with_capacity(spec.terms.len());
        for t in &spec.terms {
            if t.x2_power + t.x3_power > 3 {
                return Err(Error::Config(
                    "warp monomials are supported up to total degree 3".into(),
                ));
            }
            terms.push(CompiledTerm {
                j: t.x2_power,
                k: t.x3_power,
                c: [t.c1.compile()?, t.c2.compile()?, t.c3.compile()?],
            });
        }
        let poly = PolyWarp { terms };
        if spec.projected {
            let props = section.moments();
            Ok(Warp::Projected(ProjectedWarp {
                inner: poly,
                curve: curve.clone(),
                table: MomentTable::build(section, 4),
                area: props.area,
                mu_omega: props.polar,
            }))
        } else {
            Ok(Warp::Poly(poly))
        }
    }

    pub fn jet(&self, x1: f64, x2: f64, x3: f64) -> Result<WarpJet> {
        match self {
            Warp::Zero => Ok(WarpJet::zero()),
            Warp::Poly(p) => Ok(p.jet(x1, x2, x3)),
            Warp::Projected(p) => p.jet(x1, x2, x3),
        }
    }

    /// Cross-section derivatives of κ = η in rotated coordinates:
    /// ∂₂′κ = p₂∂₂η − p₃∂₃η, ∂₃′κ = p₃∂₂η + p₂∂₃η.
    pub fn kappa_gradients(
        &self,
        frame: &FrameData,
        x1: f64,
        x2: f64,
        x3: f64,
    ) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let j = self.jet(x1, x2, x3)?;
        Ok((
            j.d2 * frame.p2 - j.d3 * frame.p3,
            j.d2 * frame.p3 + j.d3 * frame.p2,
        ))
    }
}

impl PolyWarp {
    fn jet(&self, x1: f64, x2: f64, x3: f64) -> WarpJet {
        let mut out = WarpJet::zero();
        for t in &self.terms {
            let mono = x2.powi(t.j as i32) * x3.powi(t.k as i32);
            let d2 = if t.j == 0 {
                0.0
            } else {
                t.j as f64 * x2.powi(t.j as i32 - 1) * x3.powi(t.k as i32)
            };
            let d3 = if t.k == 0 {
                0.0
            } else {
                t.k as f64 * x2.powi(t.j as i32) * x3.powi(t.k as i32 - 1)
            };
            for i in 0..3 {
                let c = t.c[i].jet(x1);
                out.eta[i] += c[0] * mono;
                out.d1[i] += c[1] * mono;
                out.d2[i] += c[0] * d2;
                out.d3[i] += c[0] * d3;
            }
        }
        out
    }

    /// Per-section mean of η and its x₁-derivative.
    fn mean(&self, table: &MomentTable, area: f64, x1: f64) -> (Vector3<f64>, Vector3<f64>) {
        let mut m = Vector3::zeros();
        let mut dm = Vector3::zeros();
        for t in &self.terms {
            let mom = table.get(t.j, t.k);
            for i in 0..3 {
                let c = t.c[i].jet(x1);
                m[i] += c[0] * mom;
                dm[i] += c[1] * mom;
            }
        }
        (m / area, dm / area)
    }

    /// Rotation moment ∫ (x₃′η₂ − x₂′η₃) and its x₁-derivative.
    fn rotation_moment(&self, table: &MomentTable, f: &FrameData, x1: f64) -> (f64, f64) {
        let mut mom = 0.0;
        let mut dmom = 0.0;
        for t in &self.terms {
            let m1 = table.get(t.j + 1, t.k); // ∫ x₂^{j+1} x₃^k
            let m2 = table.get(t.j, t.k + 1); // ∫ x₂^j x₃^{k+1}
            // x₃′ = p₃x₂ + p₂x₃, x₂′ = p₂x₂ − p₃x₃.
            let a2 = f.p3 * m1 + f.p2 * m2;
            let a3 = f.p2 * m1 - f.p3 * m2;
            let da2 = f.dp3 * m1 + f.dp2 * m2;
            let da3 = f.dp2 * m1 - f.dp3 * m2;
            let c2 = t.c[1].jet(x1);
            let c3 = t.c[2].jet(x1);
            mom += c2[0] * a2 - c3[0] * a3;
            dmom += c2[1] * a2 + c2[0] * da2 - c3[1] * a3 - c3[0] * da3;
        }
        (mom, dmom)
    }
}

impl ProjectedWarp {
    fn jet(&self, x1: f64, x2: f64, x3: f64) -> Result<WarpJet> {
        let mut j = self.inner.jet(x1, x2, x3);
        let f = self.curve.frame_data(x1)?;
        let (mean, dmean) = self.inner.mean(&self.table, self.area, x1);
        let (mom, dmom) = self.inner.rotation_moment(&self.table, &f, x1);
        // ζ = (0, −x₃′, x₂′) has moment −μω, so η − c ζ with c = −mom/μω
        // zeroes the rotation moment; ζ is mean-free on a normalized section.
        let c = -mom / self.mu_omega;
        let dc = -dmom / self.mu_omega;
        let (x2p, x3p) = f.rotate(x2, x3);
        let zeta = Vector3::new(0.0, -x3p, x2p);
        let dzeta1 = Vector3::new(
            0.0,
            -(f.dp3 * x2 + f.dp2 * x3),
            f.dp2 * x2 - f.dp3 * x3,
        );
        let dzeta2 = Vector3::new(0.0, -f.p3, f.p2);
        let dzeta3 = Vector3::new(0.0, -f.p2, -f.p3);
        j.eta -= mean + zeta * c;
        j.d1 -= dmean + zeta * dc + dzeta1 * c;
        j.d2 -= dzeta2 * c;
        j.d3 -= dzeta3 * c;
        Ok(j)
    }
}

/// Limit strain G̃ = sym(J − ½A² + K) at a point of Ω.
pub fn limit_strain(
    state: &SmoothState,
    curve: &Curve,
    warp: &Warp,
    x1: f64,
    x2: f64,
    x3: f64,
) -> Result<Matrix3<f64>> {
    let u = state.u.jet(x1);
    let v2 = state.v2.jet(x1);
    let v3 = state.v3.jet(x1);
    let w = state.w.jet(x1);
    let t2 = curve.theta2_jet(x1);
    let t3 = curve.theta3_jet(x1);
    let f = curve.frame_data(x1)?;
    let (x2p, x3p) = f.rotate(x2, x3);
    let j_mat = Matrix3::new(
        u[1] + v2[1] * t2[1] + v3[1] * t3[1],
        0.0,
        0.0,
        w[0] * t3[1],
        v2[1] * t2[1],
        v2[1] * t3[1],
        -w[0] * t2[1],
        v3[1] * t2[1],
        v3[1] * t3[1],
    );
    let a_mat = Matrix3::new(
        0.0, -v2[1], -v3[1], //
        v2[1], 0.0, -w[0], //
        v3[1], w[0], 0.0,
    );
    let (dk2, dk3) = warp.kappa_gradients(&f, x1, x2, x3)?;
    let mut k_mat = Matrix3::zeros();
    k_mat.set_column(
        0,
        &Vector3::new(-x2p * v2[2] - x3p * v3[2], -x3p * w[1], x2p * w[1]),
    );
    k_mat.set_column(1, &dk2);
    k_mat.set_column(2, &dk3);
    let g = j_mat - a_mat * a_mat * 0.5 + k_mat;
    Ok((g + g.transpose()) * 0.5)
}

/// Quadrature specification for the tube integrals: panels along x₁ with a
/// Gauss rule on each, and the triangle 3-point rule over the section mesh.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TubeQuadrature {
    pub x1_panels: usize,
    pub x1_order: usize,
}

impl Default for TubeQuadrature {
    fn default() -> Self {
        Self { x1_panels: 32, x1_order: 6 }
    }
}

/// (1/h⁴) ∫_Ω W(x, (∇ŷʰ)∘Θʰ∘Pʰ) dx for the explicit recovery deformation:
/// centerline displacement (h²u, hv₂, hv₃), the rotation coupling
/// h²(−x₂′v₂′ − x₃′v₃′, −x₃′w, x₂′w) in rotated coordinates, and the warp
/// h³η. The deformation gradient is transported by the exact inverse tube
/// Jacobian.
pub fn recovery_energy(
    curve: &Curve,
    material: &MaterialField,
    state: &SmoothState,
    warp: &Warp,
    h: f64,
    mesh: &TriMesh,
    quad: &TubeQuadrature,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Config("thickness must be positive".into()));
    }
    let rule = GaussRule::new(quad.x1_order);
    let d = curve.length / quad.x1_panels as f64;
    // Panels are independent; partial sums are collected in panel order so
    // the reduction is deterministic under any thread count.
    let partials: Result<Vec<f64>> = (0..quad.x1_panels)
        .into_par_iter()
        .map(|panel| {
            let mut total = 0.0;
            let a = panel as f64 * d;
            for (x1, w1) in rule.mapped(a, a + d) {
            let f = curve.frame_data(x1)?;
            let u = state.u.jet(x1);
            let v2 = state.v2.jet(x1);
            let v3 = state.v3.jet(x1);
            let wt = state.w.jet(x1);
            let mat = material.at(x1);
            // Rotation-coupling coefficients and their x₁-derivatives.
            let ca = v2[1] * f.p2 + v3[1] * f.p3;
            let cb = v3[1] * f.p2 - v2[1] * f.p3;
            let dca = v2[2] * f.p2 + v2[1] * f.dp2 + v3[2] * f.p3 + v3[1] * f.dp3;
            let dcb = v3[2] * f.p2 + v3[1] * f.dp2 - v2[2] * f.p3 - v2[1] * f.dp3;
            let p3w = f.p3 * wt[0];
            let p2w = f.p2 * wt[0];
            let dp3w = f.dp3 * wt[0] + f.p3 * wt[1];
            let dp2w = f.dp2 * wt[0] + f.p2 * wt[1];
            for tri in &mesh.triangles {
                for (pt, w2) in triangle_rule_3(
                    mesh.nodes[tri[0]],
                    mesh.nodes[tri[1]],
                    mesh.nodes[tri[2]],
                ) {
                    let (x2, x3) = (pt[0], pt[1]);
                    let (jac, _) = curve.theta_jacobian(h, x1, h * x2, h * x3)?;
                    let wj = warp.jet(x1, x2, x3)?;
                    let mut grad = jac;
                    // ∇_h of the added displacement, column by column.
                    let col0 = Vector3::new(
                        h * h * u[1] + h * h * (-x2 * dca - x3 * dcb),
                        h * v2[1] + h * h * (-x2 * dp3w - x3 * dp2w),
                        h * v3[1] + h * h * (x2 * dp2w - x3 * dp3w),
                    ) + wj.d1 * h * h * h;
                    let col1 =
                        Vector3::new(-h * ca, -h * p3w, h * p2w) + wj.d2 * h * h;
                    let col2 =
                        Vector3::new(-h * cb, -h * p2w, -h * p3w) + wj.d3 * h * h;
                    grad.set_column(0, &(jac.column(0) + col0));
                    grad.set_column(1, &(jac.column(1) + col1));
                    grad.set_column(2, &(jac.column(2) + col2));
                    let inv = jac.try_inverse().ok_or_else(|| {
                        Error::GeometryRegime("tube Jacobian not invertible".into())
                    })?;
                    let def = grad * inv;
                    let det = def.determinant();
                    if det <= 0.5 {
                        return Err(Error::GeometryRegime(format!(
                            "deformation gradient determinant {det:.3} at x1={x1}; h too large"
                        )));
                    }
                    total += w1 * w2 * mat.svk_energy(&def);
                }
            }
            }
            Ok(total)
        })
        .collect();
    Ok(partials?.iter().sum::<f64>() / (h * h * h * h))
}

/// ½ ∫_Ω Q₃(x, G̃(x)) dx with the same tensor quadrature.
pub fn limit_density(
    curve: &Curve,
    material: &MaterialField,
    state: &SmoothState,
    warp: &Warp,
    mesh: &TriMesh,
    quad: &TubeQuadrature,
) -> Result<f64> {
    let rule = GaussRule::new(quad.x1_order);
    let d = curve.length / quad.x1_panels as f64;
    let partials: Result<Vec<f64>> = (0..quad.x1_panels)
        .into_par_iter()
        .map(|panel| {
            let mut total = 0.0;
            let a = panel as f64 * d;
            for (x1, w1) in rule.mapped(a, a + d) {
                let mat = material.at(x1);
                for tri in &mesh.triangles {
                    for (pt, w2) in triangle_rule_3(
                        mesh.nodes[tri[0]],
                        mesh.nodes[tri[1]],
                        mesh.nodes[tri[2]],
                    ) {
                        let g = limit_strain(state, curve, warp, x1, pt[0], pt[1])?;
                        total += 0.5 * w1 * w2 * mat.q3(&g);
                    }
                }
            }
            Ok(total)
        })
        .collect();
    Ok(partials?.iter().sum())
}

/// I⁰ of a smooth state: ½ ∫ e·M e with the closed-form stiffness per
/// station (per-section isotropic material).
pub fn i0_smooth(
    curve: &Curve,
    props: &crate::section::SectionProperties,
    material: &MaterialField,
    tau: f64,
    state: &SmoothState,
    quad: &TubeQuadrature,
) -> Result<f64> {
    let rule = GaussRule::new(quad.x1_order);
    let d = curve.length / quad.x1_panels as f64;
    let mut total = 0.0;
    for panel in 0..quad.x1_panels {
        let a = panel as f64 * d;
        for (x1, w1) in rule.mapped(a, a + d) {
            let f = curve.frame_data(x1)?;
            let m = cell::closed_form_q(props, &material.at(x1), tau, (f.p2, f.p3));
            let e = state.strain(curve, x1);
            total += 0.5 * w1 * m.energy_density(&e);
        }
    }
    Ok(total)
}

/// ½ ∫ Q(x₁, t, ∂₁A) dx₁ with the warp chosen per section as the FEM cell
/// minimizer of the shifted problem (the optimal κ for the full G̃). By the
/// absorption identity this equals I⁰ up to FEM error.
pub fn limit_density_cell_optimal(
    curve: &Curve,
    material: &MaterialField,
    state: &SmoothState,
    mesh: &TriMesh,
    x1_panels: usize,
    x1_order: usize,
) -> Result<f64> {
    let rule = GaussRule::new(x1_order);
    let d = curve.length / x1_panels as f64;
    let mut total = 0.0;
    let mut cache: Option<((f64, f64, u64, u64), CellSolver)> = None;
    for panel in 0..x1_panels {
        let a = panel as f64 * d;
        for (x1, w1) in rule.mapped(a, a + d) {
            let f = curve.frame_data(x1)?;
            let mat = material.at(x1);
            let key = (
                (f.p2 * 1e12).round() / 1e12,
                (f.p3 * 1e12).round() / 1e12,
                mat.lambda.to_bits(),
                mat.mu.to_bits(),
            );
            let rebuild = match &cache {
                Some((k, _)) => *k != key,
                None => true,
            };
            if rebuild {
                let solver = CellSolver::new(mesh, &UniformSection(mat), (f.p2, f.p3))?;
                cache = Some((key, solver));
            }
            let solver = &cache.as_ref().unwrap().1;
            let e = state.strain(curve, x1);
            let shift = constant_shift(state, curve, x1)?;
            let sol = solver.solve(&|x2p, x3p| {
                cell::first_column(e.section_strain(x2p, x3p)) + shift
            });
            total += 0.5 * w1 * sol.value;
        }
    }
    Ok(total)
}

/// The section-constant part of J − ½A² with the extension removed: S₁₁ = 0,
/// and G̃ = sym(S + (g | ∂₂κ | ∂₃κ)).
fn constant_shift(state: &SmoothState, curve: &Curve, x1: f64) -> Result<Matrix3<f64>> {
    let u = state.u.jet(x1);
    let v2 = state.v2.jet(x1);
    let v3 = state.v3.jet(x1);
    let w = state.w.jet(x1);
    let t2 = curve.theta2_jet(x1);
    let t3 = curve.theta3_jet(x1);
    let j_mat = Matrix3::new(
        u[1] + v2[1] * t2[1] + v3[1] * t3[1],
        0.0,
        0.0,
        w[0] * t3[1],
        v2[1] * t2[1],
        v2[1] * t3[1],
        -w[0] * t2[1],
        v3[1] * t2[1],
        v3[1] * t3[1],
    );
    let a_mat = Matrix3::new(
        0.0, -v2[1], -v3[1], //
        v2[1], 0.0, -w[0], //
        v3[1], w[0], 0.0,
    );
    let mut s = j_mat - a_mat * a_mat * 0.5;
    let e = state.strain(curve, x1);
    s[(0, 0)] -= e.t;
    debug_assert!(s[(0, 0)].abs() < 1e-12 * (1.0 + e.t.abs()));
    Ok(s)
}

/// Residual of the absorption identity on a fresh solver (convenience
/// wrapper; batch runs should reuse a [`CellSolver`]).
pub fn absorption_check(
    mesh: &TriMesh,
    mat: &IsotropicMaterial,
    s: &Matrix3<f64>,
    e: &GeneralizedStrain,
) -> Result<f64> {
    let solver = CellSolver::new(mesh, &UniformSection(*mat), (1.0, 0.0))?;
    let (m, _) = solver.condense();
    Ok(cell::absorption_residual(&solver, &m, s, e))
}

/// One row of the convergence table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaRow {
    pub h: f64,
    pub energy_3d: f64,
    pub energy_limit: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaTable {
    pub rows: Vec<GammaRow>,
    pub fitted_slope: f64,
    pub limit_density: f64,
}

/// Evaluate the recovery energy across the h-list against the (h-independent)
/// limit density on the same quadrature, with the fitted log-log slope of the
/// difference.
pub fn gamma_table(
    curve: &Curve,
    material: &MaterialField,
    state: &SmoothState,
    warp: &Warp,
    h_list: &[f64],
    mesh: &TriMesh,
    quad: &TubeQuadrature,
) -> Result<GammaTable> {
    let e_limit = limit_density(curve, material, state, warp, mesh, quad)?;
    let mut rows = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let e3d = recovery_energy(curve, material, state, warp, h, mesh, quad)?;
        rows.push(GammaRow {
            h,
            energy_3d: e3d,
            energy_limit: e_limit,
            difference: (e3d - e_limit).abs(),
        });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let ds: Vec<f64> = rows.iter().map(|r| r.difference).collect();
    Ok(GammaTable { rows, fitted_slope: log_slope(&hs, &ds), limit_density: e_limit })
}
