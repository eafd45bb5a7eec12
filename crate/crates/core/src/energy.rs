//! Discrete 1D rod energy: Hermite cubics for the transversal deflections
//! v₂, v₃ (C¹), linear elements for the stretch u and twist w, the shallow
//! extension measure t = u′ + v₂′θ₂′ + v₃′θ₃′ + ½((v₂′)² + (v₃′)²), and
//! exact analytic gradient and Hessian of the quartic energy.

use nalgebra::{DVector, Matrix4};
use nalgebra_sparse::CooMatrix;
use serde::{Deserialize, Serialize};

use crate::analytic::{Scalar, ScalarFn};
use crate::cell::{CellSolver, CondensedStiffness, GeneralizedStrain};
use crate::error::{Error, Result};
use crate::geometry::Curve;
use crate::material::{MaterialField, UniformSection};
use crate::quadrature::GaussRule;
use crate::section::TriMesh;

pub const DOFS_PER_NODE: usize = 6;

/// Discrete rod fields. Per node: u and w values (piecewise linear), and
/// (value, derivative) pairs for the Hermite-cubic v₂, v₃.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodState {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub v2: Vec<[f64; 2]>,
    pub v3: Vec<[f64; 2]>,
}

impl RodState {
    pub fn zeros(n_nodes: usize) -> Self {
        Self {
            u: vec![0.0; n_nodes],
            w: vec![0.0; n_nodes],
            v2: vec![[0.0; 2]; n_nodes],
            v3: vec![[0.0; 2]; n_nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.u.len()
    }

    pub fn dof_count(&self) -> usize {
        DOFS_PER_NODE * self.n_nodes()
    }

    /// Flat layout per node: [u, w, v₂, v₂′, v₃, v₃′].
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.n_nodes();
        let mut q = DVector::zeros(DOFS_PER_NODE * n);
        for i in 0..n {
            q[6 * i] = self.u[i];
            q[6 * i + 1] = self.w[i];
            q[6 * i + 2] = self.v2[i][0];
            q[6 * i + 3] = self.v2[i][1];
            q[6 * i + 4] = self.v3[i][0];
            q[6 * i + 5] = self.v3[i][1];
        }
        q
    }

    pub fn from_vector(q: &DVector<f64>) -> Self {
        let n = q.len() / DOFS_PER_NODE;
        let mut s = Self::zeros(n);
        for i in 0..n {
            s.u[i] = q[6 * i];
            s.w[i] = q[6 * i + 1];
            s.v2[i] = [q[6 * i + 2], q[6 * i + 3]];
            s.v3[i] = [q[6 * i + 4], q[6 * i + 5]];
        }
        s
    }
}

/// Transversal load densities (per unit length of the axis).
#[derive(Debug, Clone)]
pub struct LoadCase {
    pub f2: ScalarFn,
    pub f3: ScalarFn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadSpec {
    #[serde(default = "Scalar::default_zero")]
    pub f2: Scalar,
    #[serde(default = "Scalar::default_zero")]
    pub f3: Scalar,
}

impl LoadCase {
    pub fn from_spec(spec: &LoadSpec) -> Result<Self> {
        Ok(Self { f2: spec.f2.compile()?, f3: spec.f3.compile()? })
    }

    pub fn zero() -> Self {
        Self { f2: ScalarFn::Zero, f3: ScalarFn::Zero }
    }
}

/// One quadrature station of the assembled model.
#[derive(Debug, Clone)]
struct Station {
    x1: f64,
    weight: f64,
    theta2p: f64,
    theta3p: f64,
    m: Matrix4<f64>,
}

/// Discretized rod: uniform 1D mesh, per-station condensed stiffness, and the
/// curve reference.
pub struct DiscreteModel {
    pub curve: Curve,
    pub n_elements: usize,
    pub quad: GaussRule,
    stations: Vec<Station>,
}

impl DiscreteModel {
    /// Build with an arbitrary per-station stiffness rule.
    pub fn with_stiffness_fn(
        curve: Curve,
        n_elements: usize,
        quad_order: usize,
        stiffness: &mut dyn FnMut(f64) -> Result<Matrix4<f64>>,
    ) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::Config("need at least one element".into()));
        }
        let quad = GaussRule::new(quad_order);
        let d = curve.length / n_elements as f64;
        let mut stations = Vec::with_capacity(n_elements * quad_order);
        for el in 0..n_elements {
            let a = el as f64 * d;
            for (x1, w) in quad.mapped(a, a + d) {
                let t2 = curve.theta2_jet(x1);
                let t3 = curve.theta3_jet(x1);
                stations.push(Station {
                    x1,
                    weight: w,
                    theta2p: t2[1],
                    theta3p: t3[1],
                    m: stiffness(x1)?,
                });
            }
        }
        Ok(Self { curve, n_elements, quad, stations })
    }

    /// Closed-form stiffness per station: exact whenever the material is
    /// isotropic on each cross-section (Young modulus and shear from the
    /// local (λ, μ), rotated section moments from the frame).
    pub fn with_closed_form(
        curve: Curve,
        props: &crate::section::SectionProperties,
        material: &MaterialField,
        tau: f64,
        n_elements: usize,
        quad_order: usize,
    ) -> Result<Self> {
        let props = *props;
        let material = material.clone();
        let curve2 = curve.clone();
        Self::with_stiffness_fn(curve, n_elements, quad_order, &mut move |x1| {
            let f = curve2.frame_data(x1)?;
            let mat = material.at(x1);
            Ok(crate::cell::closed_form_q(&props, &mat, tau, (f.p2, f.p3)).m)
        })
    }

    /// FEM condensation per station (one cell solve chain per quadrature
    /// point; stations with equal frame and material reuse the cache).
    pub fn with_fem_condensation(
        curve: Curve,
        mesh: &TriMesh,
        material: &MaterialField,
        n_elements: usize,
        quad_order: usize,
    ) -> Result<Self> {
        let mut cache: Vec<((f64, f64, u64, u64), Matrix4<f64>)> = Vec::new();
        let curve2 = curve.clone();
        Self::with_stiffness_fn(curve, n_elements, quad_order, &mut move |x1| {
            let f = curve2.frame_data(x1)?;
            let mat = material.at(x1);
            let key = (
                (f.p2 * 1e12).round() / 1e12,
                (f.p3 * 1e12).round() / 1e12,
                mat.lambda.to_bits(),
                mat.mu.to_bits(),
            );
            if let Some((_, m)) = cache.iter().find(|(k, _)| *k == key) {
                return Ok(*m);
            }
            let solver = CellSolver::new(mesh, &UniformSection(mat), (f.p2, f.p3))?;
            let m = solver.condense().0.m;
            cache.push((key, m));
            Ok(m)
        })
    }

    pub fn length(&self) -> f64 {
        self.curve.length
    }

    pub fn n_nodes(&self) -> usize {
        self.n_elements + 1
    }

    pub fn element_length(&self) -> f64 {
        self.curve.length / self.n_elements as f64
    }

    pub fn node_positions(&self) -> Vec<f64> {
        let d = self.element_length();
        (0..self.n_nodes()).map(|i| i as f64 * d).collect()
    }

    pub fn stiffness_at_stations(&self) -> impl Iterator<Item = (f64, CondensedStiffness)> + '_ {
        self.stations.iter().map(|s| (s.x1, CondensedStiffness { m: s.m }))
    }

    /// Field values (u, u′, v₂, v₂′, v₂″, v₃, v₃′, v₃″, w, w′) at x₁.
    pub fn evaluate(&self, state: &RodState, x1: f64) -> FieldValues {
        let d = self.element_length();
        let el = ((x1 / d).floor() as usize).min(self.n_elements - 1);
        let xi = (x1 - el as f64 * d) / d;
        let sh = ElementShapes::at(xi, d);
        sh.evaluate(state, el)
    }

    /// Generalized strain at x₁.
    pub fn strain_measures(&self, state: &RodState, x1: f64) -> GeneralizedStrain {
        let t2 = self.curve.theta2_jet(x1);
        let t3 = self.curve.theta3_jet(x1);
        let f = self.evaluate(state, x1);
        strain_from_fields(&f, t2[1], t3[1])
    }

    /// I⁰ = ½ ∫ e·M e.
    pub fn energy(&self, state: &RodState) -> f64 {
        let mut total = 0.0;
        for s in &self.stations {
            let f = self.eval_at_station(state, s);
            let e = strain_from_fields(&f, s.theta2p, s.theta3p).as_vector();
            total += 0.5 * s.weight * (s.m * e).dot(&e);
        }
        total
    }

    /// J⁰ = I⁰ − ∫ (f₂ v₂ + f₃ v₃).
    pub fn total_energy(&self, state: &RodState, loads: &LoadCase) -> f64 {
        let mut work = 0.0;
        for s in &self.stations {
            let f = self.eval_at_station(state, s);
            work += s.weight * (loads.f2.value(s.x1) * f.v2 + loads.f3.value(s.x1) * f.v3);
        }
        self.energy(state) - work
    }

    fn eval_at_station(&self, state: &RodState, s: &Station) -> FieldValues {
        self.evaluate(state, s.x1)
    }

    /// Exact gradient of I⁰ in the flat coefficient layout.
    pub fn gradient(&self, state: &RodState) -> DVector<f64> {
        let mut g = DVector::zeros(state.dof_count());
        let d = self.element_length();
        for s in &self.stations {
            let el = ((s.x1 / d).floor() as usize).min(self.n_elements - 1);
            let xi = (s.x1 - el as f64 * d) / d;
            let sh = ElementShapes::at(xi, d);
            let f = sh.evaluate(state, el);
            let e = strain_from_fields(&f, s.theta2p, s.theta3p).as_vector();
            let me = s.m * e;
            let rows = sh.strain_rows(&f, s.theta2p, s.theta3p);
            for (r, row) in rows.iter().enumerate() {
                let c = s.weight * me[r];
                for k in 0..12 {
                    g[global_dof(el, k)] += c * row[k];
                }
            }
        }
        g
    }

    /// Exact Hessian of I⁰ as symmetric COO triplets.
    pub fn hessian(&self, state: &RodState) -> CooMatrix<f64> {
        let n = state.dof_count();
        let mut coo = CooMatrix::new(n, n);
        let d = self.element_length();
        let mut local = [[0.0f64; 12]; 12];
        let mut current_el = usize::MAX;
        let flush = |coo: &mut CooMatrix<f64>, local: &mut [[f64; 12]; 12], el: usize| {
            for i in 0..12 {
                for j in 0..12 {
                    if local[i][j] != 0.0 {
                        coo.push(global_dof(el, i), global_dof(el, j), local[i][j]);
                    }
                }
            }
            *local = [[0.0; 12]; 12];
        };
        for s in &self.stations {
            let el = ((s.x1 / d).floor() as usize).min(self.n_elements - 1);
            if el != current_el {
                if current_el != usize::MAX {
                    flush(&mut coo, &mut local, current_el);
                }
                current_el = el;
            }
            let xi = (s.x1 - el as f64 * d) / d;
            let sh = ElementShapes::at(xi, d);
            let f = sh.evaluate(state, el);
            let e = strain_from_fields(&f, s.theta2p, s.theta3p).as_vector();
            let me = s.m * e;
            let rows = sh.strain_rows(&f, s.theta2p, s.theta3p);
            for a in 0..4 {
                for b in 0..4 {
                    let mab = s.m[(a, b)];
                    if mab == 0.0 {
                        continue;
                    }
                    for i in 0..12 {
                        let ri = rows[a][i];
                        if ri == 0.0 {
                            continue;
                        }
                        let c = s.weight * mab * ri;
                        for j in 0..12 {
                            local[i][j] += c * rows[b][j];
                        }
                    }
                }
            }
            // Geometric term: (M e)_t · (∂²t) with ∂²t = Dv₂′⊗Dv₂′ + Dv₃′⊗Dv₃′.
            let c = s.weight * me[0];
            for i in 0..12 {
                for j in 0..12 {
                    local[i][j] +=
                        c * (sh.dv2p[i] * sh.dv2p[j] + sh.dv3p[i] * sh.dv3p[j]);
                }
            }
        }
        if current_el != usize::MAX {
            flush(&mut coo, &mut local, current_el);
        }
        coo
    }

    /// Work functional of the loads as a vector: J⁰ = I⁰ − loadᵀ·q.
    pub fn load_vector(&self, loads: &LoadCase) -> DVector<f64> {
        let n = DOFS_PER_NODE * self.n_nodes();
        let mut l = DVector::zeros(n);
        let d = self.element_length();
        for s in &self.stations {
            let el = ((s.x1 / d).floor() as usize).min(self.n_elements - 1);
            let xi = (s.x1 - el as f64 * d) / d;
            let sh = ElementShapes::at(xi, d);
            let f2 = loads.f2.value(s.x1);
            let f3 = loads.f3.value(s.x1);
            for k in 0..12 {
                l[global_dof(el, k)] += s.weight * (f2 * sh.v2_row[k] + f3 * sh.v3_row[k]);
            }
        }
        l
    }

    /// Sample (x₁, u, v₂, v₃, w, t, κ₂, κ₃, ϑ) at uniform points.
    pub fn profile(&self, state: &RodState, n_samples: usize) -> Vec<[f64; 9]> {
        (0..n_samples)
            .map(|i| {
                let x1 = self.length() * i as f64 / (n_samples - 1).max(1) as f64;
                let x1 = x1.min(self.length() * (1.0 - 1e-12));
                let f = self.evaluate(state, x1);
                let e = self.strain_measures(state, x1);
                [x1, f.u, f.v2, f.v3, f.w, e.t, e.kappa2, e.kappa3, e.twist]
            })
            .collect()
    }
}

/// Evaluated fields at one station.
#[derive(Debug, Clone, Copy)]
pub struct FieldValues {
    pub u: f64,
    pub up: f64,
    pub v2: f64,
    pub v2p: f64,
    pub v2pp: f64,
    pub v3: f64,
    pub v3p: f64,
    pub v3pp: f64,
    pub w: f64,
    pub wp: f64,
}

pub fn strain_from_fields(f: &FieldValues, theta2p: f64, theta3p: f64) -> GeneralizedStrain {
    GeneralizedStrain::new(
        f.up + f.v2p * theta2p + f.v3p * theta3p + 0.5 * (f.v2p * f.v2p + f.v3p * f.v3p),
        f.v2pp,
        f.v3pp,
        f.wp,
    )
}

fn global_dof(el: usize, local: usize) -> usize {
    let node = el + local / DOFS_PER_NODE;
    DOFS_PER_NODE * node + local % DOFS_PER_NODE
}

/// Shape-function rows over the 12 local dofs
/// [u, w, v₂, v₂′, v₃, v₃′] × {left node, right node} at one local point.
struct ElementShapes {
    u_row: [f64; 12],
    du: [f64; 12],
    dwp: [f64; 12],
    v2_row: [f64; 12],
    dv2p: [f64; 12],
    dv2pp: [f64; 12],
    v3_row: [f64; 12],
    dv3p: [f64; 12],
    dv3pp: [f64; 12],
    w_row: [f64; 12],
}

impl ElementShapes {
    fn at(xi: f64, d: f64) -> Self {
        let lin = [1.0 - xi, xi];
        let dlin = [-1.0 / d, 1.0 / d];
        // Hermite basis on [0,1] with slope dofs scaled by d.
        let h = [
            1.0 - 3.0 * xi * xi + 2.0 * xi * xi * xi,
            d * (xi - 2.0 * xi * xi + xi * xi * xi),
            3.0 * xi * xi - 2.0 * xi * xi * xi,
            d * (-xi * xi + xi * xi * xi),
        ];
        let hp = [
            (-6.0 * xi + 6.0 * xi * xi) / d,
            1.0 - 4.0 * xi + 3.0 * xi * xi,
            (6.0 * xi - 6.0 * xi * xi) / d,
            -2.0 * xi + 3.0 * xi * xi,
        ];
        let hpp = [
            (-6.0 + 12.0 * xi) / (d * d),
            (-4.0 + 6.0 * xi) / d,
            (6.0 - 12.0 * xi) / (d * d),
            (-2.0 + 6.0 * xi) / d,
        ];
        let mut s = Self {
            u_row: [0.0; 12],
            du: [0.0; 12],
            dwp: [0.0; 12],
            v2_row: [0.0; 12],
            dv2p: [0.0; 12],
            dv2pp: [0.0; 12],
            v3_row: [0.0; 12],
            dv3p: [0.0; 12],
            dv3pp: [0.0; 12],
            w_row: [0.0; 12],
        };
        for side in 0..2 {
            let o = 6 * side;
            s.u_row[o] = lin[side];
            s.du[o] = dlin[side];
            s.w_row[o + 1] = lin[side];
            s.dwp[o + 1] = dlin[side];
            for k in 0..2 {
                s.v2_row[o + 2 + k] = h[2 * side + k];
                s.dv2p[o + 2 + k] = hp[2 * side + k];
                s.dv2pp[o + 2 + k] = hpp[2 * side + k];
                s.v3_row[o + 4 + k] = h[2 * side + k];
                s.dv3p[o + 4 + k] = hp[2 * side + k];
                s.dv3pp[o + 4 + k] = hpp[2 * side + k];
            }
        }
        s
    }

    fn evaluate(&self, state: &RodState, el: usize) -> FieldValues {
        let q = self.local_dofs(state, el);
        let dot = |row: &[f64; 12]| -> f64 { row.iter().zip(q.iter()).map(|(a, b)| a * b).sum() };
        FieldValues {
            u: dot(&self.u_row),
            up: dot(&self.du),
            v2: dot(&self.v2_row),
            v2p: dot(&self.dv2p),
            v2pp: dot(&self.dv2pp),
            v3: dot(&self.v3_row),
            v3p: dot(&self.dv3p),
            v3pp: dot(&self.dv3pp),
            w: dot(&self.w_row),
            wp: dot(&self.dwp),
        }
    }

    fn local_dofs(&self, state: &RodState, el: usize) -> [f64; 12] {
        let mut q = [0.0; 12];
        for side in 0..2 {
            let i = el + side;
            let o = 6 * side;
            q[o] = state.u[i];
            q[o + 1] = state.w[i];
            q[o + 2] = state.v2[i][0];
            q[o + 3] = state.v2[i][1];
            q[o + 4] = state.v3[i][0];
            q[o + 5] = state.v3[i][1];
        }
        q
    }

    /// Rows ∂e/∂q of the four strain measures.
    fn strain_rows(&self, f: &FieldValues, theta2p: f64, theta3p: f64) -> [[f64; 12]; 4] {
        let mut row_t = [0.0; 12];
        for k in 0..12 {
            row_t[k] = self.du[k]
                + (theta2p + f.v2p) * self.dv2p[k]
                + (theta3p + f.v3p) * self.dv3p[k];
        }
        [row_t, self.dv2pp, self.dv3pp, self.dwp]
    }
}

/// The six-parameter family leaving the strain measures invariant at the
/// continuum level: v_k ↦ v_k + c_k + b_k x₁, w ↦ w + c_w, and u absorbs
/// −b₂θ₂ − b₃θ₃ − b₂v₂ − b₃v₃ − ½(b₂² + b₃²)x₁ + c_u.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaugeParams {
    pub cu: f64,
    pub c2: f64,
    pub c3: f64,
    pub cw: f64,
    pub b2: f64,
    pub b3: f64,
}

/// Apply the gauge family at the nodes. Exact in the coefficient space when
/// θ and v₂, v₃ are affine in x₁; for general fields the interpolation of
/// the u-shift is approximate.
pub fn gauge_transformed(
    state: &RodState,
    model: &DiscreteModel,
    g: &GaugeParams,
) -> RodState {
    let mut out = state.clone();
    let xs = model.node_positions();
    let half = 0.5 * (g.b2 * g.b2 + g.b3 * g.b3);
    for (i, &x) in xs.iter().enumerate() {
        let th2 = model.curve.theta2_jet(x)[0];
        let th3 = model.curve.theta3_jet(x)[0];
        out.u[i] += g.cu
            - g.b2 * th2
            - g.b3 * th3
            - g.b2 * state.v2[i][0]
            - g.b3 * state.v3[i][0]
            - half * x;
        out.v2[i][0] += g.c2 + g.b2 * x;
        out.v2[i][1] += g.b2;
        out.v3[i][0] += g.c3 + g.b3 * x;
        out.v3[i][1] += g.b3;
        out.w[i] += g.cw;
    }
    out
}

/// Write the sampled profile as CSV.
pub fn write_profile_csv(
    path: &std::path::Path,
    model: &DiscreteModel,
    state: &RodState,
    n_samples: usize,
) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "x1,u,v2,v3,w,t,kappa2,kappa3,twist")?;
    for row in model.profile(state, n_samples) {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            row[0], row[1], row[2], row[3], row[4], row[5], row[6], row[7], row[8]
        )?;
    }
    Ok(())
}

impl Scalar {
    pub fn default_zero() -> Self {
        Scalar::Zero
    }
}

pub use crate::cell::closed_form_q;
