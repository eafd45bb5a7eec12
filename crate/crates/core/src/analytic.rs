//! Scalar functions of one variable with closed-form derivatives.
//!
//! Centerline components need third derivatives, rod states need second,
//! loads need values; one representation serves all of them. The spline
//! variant interpolates tabulated data with a piecewise-quintic that is C³
//! (in fact C⁴) across knots, so it is admissible as a centerline component.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Derivatives f, f', f'', f''' at a point.
pub type Jet = [f64; 4];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Scalar {
    Zero,
    /// Σ c_k x^k.
    Poly(Vec<f64>),
    /// Σ_j (a_j sin(ω_j x) + b_j cos(ω_j x)).
    Trig(Vec<TrigTerm>),
    /// Clamped C³ quintic spline through tabulated data.
    Spline(SplineData),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TrigTerm {
    #[serde(default)]
    pub sin: f64,
    #[serde(default)]
    pub cos: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SplineData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Prescribed (f', f'') at the left end.
    #[serde(default)]
    pub clamp_left: (f64, f64),
    /// Prescribed (f', f'') at the right end.
    #[serde(default)]
    pub clamp_right: (f64, f64),
}

impl Scalar {
    pub fn poly(coeffs: &[f64]) -> Self {
        Scalar::Poly(coeffs.to_vec())
    }

    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            Scalar::Zero
        } else {
            Scalar::Poly(vec![c])
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Zero => true,
            Scalar::Poly(c) => c.iter().all(|&x| x == 0.0),
            Scalar::Trig(t) => t.iter().all(|t| t.sin == 0.0 && t.cos == 0.0),
            Scalar::Spline(_) => false,
        }
    }

    /// Compile into an evaluator (splines solve their coefficient system here).
    pub fn compile(&self) -> Result<ScalarFn> {
        Ok(match self {
            Scalar::Zero => ScalarFn::Zero,
            Scalar::Poly(c) => ScalarFn::Poly(c.clone()),
            Scalar::Trig(t) => ScalarFn::Trig(t.clone()),
            Scalar::Spline(d) => ScalarFn::Spline(QuinticSpline::interpolate(d)?),
        })
    }
}

/// Evaluatable form of [`Scalar`].
#[derive(Debug, Clone)]
pub enum ScalarFn {
    Zero,
    Poly(Vec<f64>),
    Trig(Vec<TrigTerm>),
    Spline(QuinticSpline),
}

impl ScalarFn {
    pub fn jet(&self, x: f64) -> Jet {
        match self {
            ScalarFn::Zero => [0.0; 4],
            ScalarFn::Poly(c) => poly_jet(c, x),
            ScalarFn::Trig(terms) => {
                let mut out = [0.0; 4];
                for t in terms {
                    let (s, co) = (t.omega * x).sin_cos();
                    // d/dx (a sin + b cos) cycles through (aω cos - bω sin), ...
                    let mut a = t.sin;
                    let mut b = t.cos;
                    for d in out.iter_mut() {
                        *d += a * s + b * co;
                        let (na, nb) = (-b * t.omega, a * t.omega);
                        a = na;
                        b = nb;
                    }
                }
                out
            }
            ScalarFn::Spline(sp) => sp.jet(x),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(x)[0]
    }
}

fn poly_jet(c: &[f64], x: f64) -> Jet {
    // Horner for the polynomial and its first three derivatives.
    let mut f = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    let mut d3 = 0.0;
    for &ck in c.iter().rev() {
        d3 = d3 * x + 3.0 * d2;
        d2 = d2 * x + 2.0 * d1;
        d1 = d1 * x + f;
        f = f * x + ck;
    }
    [f, d1, d2, d3]
}

/// Piecewise-quintic Hermite interpolant with nodal (value, slope, curvature)
/// chosen so the result is C⁴; clamped ends on (f', f'').
#[derive(Debug, Clone)]
pub struct QuinticSpline {
    knots: Vec<f64>,
    /// Per-piece monomial coefficients on the local variable ξ ∈ [0, 1].
    pieces: Vec<[f64; 6]>,
}

impl QuinticSpline {
    pub fn interpolate(data: &SplineData) -> Result<Self> {
        let n = data.x.len();
        if n < 2 || data.y.len() != n {
            return Err(Error::Config(
                "spline needs at least two knots and matching x/y lengths".into(),
            ));
        }
        for w in data.x.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config("spline knots must be strictly increasing".into()));
            }
        }
        let m = n - 1; // pieces
        let basis = quintic_hermite_basis();
        // Unknowns: (s_i, σ_i) per knot; v_i given. Equations: clamped ends
        // plus C³ and C⁴ continuity at interior knots.
        let nu = 2 * n;
        let mut mat = DMatrix::<f64>::zeros(nu, nu);
        let mut rhs = DMatrix::<f64>::zeros(nu, 1);
        let mut row = 0;
        // Clamps.
        mat[(row, 0)] = 1.0;
        rhs[(row, 0)] = data.clamp_left.0;
        row += 1;
        mat[(row, 1)] = 1.0;
        rhs[(row, 0)] = data.clamp_left.1;
        row += 1;
        mat[(row, 2 * (n - 1))] = 1.0;
        rhs[(row, 0)] = data.clamp_right.0;
        row += 1;
        mat[(row, 2 * (n - 1) + 1)] = 1.0;
        rhs[(row, 0)] = data.clamp_right.1;
        row += 1;
        // Piece i has local dof vector
        //   [v_i, s_i Δ_i, σ_i Δ_i², v_{i+1}, s_{i+1} Δ_i, σ_{i+1} Δ_i²]
        // and f^{(k)} at ξ = e is (1/Δ_i^k) Σ_j dof_j B_j^{(k)}(e).
        for i in 1..n - 1 {
            let dl = data.x[i] - data.x[i - 1];
            let dr = data.x[i + 1] - data.x[i];
            for (deriv, b_end, b_start) in [(3usize, 3usize, 3usize), (4, 4, 4)] {
                // left piece at ξ=1 minus right piece at ξ=0.
                let bl = eval_basis_deriv(&basis, b_end, 1.0);
                let br = eval_basis_deriv(&basis, b_start, 0.0);
                let sl = dl.powi(deriv as i32);
                let sr = dr.powi(deriv as i32);
                // left piece dofs: v_{i-1}, s_{i-1}, σ_{i-1}, v_i, s_i, σ_i
                let scale_l = [1.0, dl, dl * dl, 1.0, dl, dl * dl];
                let scale_r = [1.0, dr, dr * dr, 1.0, dr, dr * dr];
                let idx_l = [
                    None,
                    Some(2 * (i - 1)),
                    Some(2 * (i - 1) + 1),
                    None,
                    Some(2 * i),
                    Some(2 * i + 1),
                ];
                let idx_r = [
                    None,
                    Some(2 * i),
                    Some(2 * i + 1),
                    None,
                    Some(2 * (i + 1)),
                    Some(2 * (i + 1) + 1),
                ];
                let vals_l = [data.y[i - 1], 0.0, 0.0, data.y[i], 0.0, 0.0];
                let vals_r = [data.y[i], 0.0, 0.0, data.y[i + 1], 0.0, 0.0];
                for j in 0..6 {
                    match idx_l[j] {
                        Some(col) => mat[(row, col)] += bl[j] * scale_l[j] / sl,
                        None => rhs[(row, 0)] -= bl[j] * vals_l[j] / sl,
                    }
                }
                for j in 0..6 {
                    match idx_r[j] {
                        Some(col) => mat[(row, col)] -= br[j] * scale_r[j] / sr,
                        None => rhs[(row, 0)] += br[j] * vals_r[j] / sr,
                    }
                }
                row += 1;
            }
        }
        debug_assert_eq!(row, nu);
        let sol = mat
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Config("singular spline system".into()))?;
        // Assemble per-piece monomial coefficients in ξ.
        let mut pieces = Vec::with_capacity(m);
        for i in 0..m {
            let d = data.x[i + 1] - data.x[i];
            let dof = [
                data.y[i],
                sol[(2 * i, 0)] * d,
                sol[(2 * i + 1, 0)] * d * d,
                data.y[i + 1],
                sol[(2 * i + 2, 0)] * d,
                sol[(2 * i + 3, 0)] * d * d,
            ];
            let mut coeff = [0.0; 6];
            for (j, &dj) in dof.iter().enumerate() {
                for k in 0..6 {
                    coeff[k] += dj * basis[j][k];
                }
            }
            pieces.push(coeff);
        }
        Ok(Self { knots: data.x.clone(), pieces })
    }

    pub fn jet(&self, x: f64) -> Jet {
        let n = self.knots.len();
        let i = match self.knots[..n - 1].binary_search_by(|k| k.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let d = self.knots[i + 1] - self.knots[i];
        let xi = (x - self.knots[i]) / d;
        let c = &self.pieces[i];
        let mut f = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        let mut d3 = 0.0;
        for k in (0..6).rev() {
            d3 = d3 * xi + 3.0 * d2;
            d2 = d2 * xi + 2.0 * d1;
            d1 = d1 * xi + f;
            f = f * xi + c[k];
        }
        [f, d1 / d, d2 / (d * d), d3 / (d * d * d)]
    }
}

/// Monomial coefficients of the six quintic Hermite basis functions on [0, 1]
/// matching (value, slope, curvature) at both ends.
fn quintic_hermite_basis() -> [[f64; 6]; 6] {
    // Solve the 6x6 collocation system once.
    let mut a = DMatrix::<f64>::zeros(6, 6);
    // Rows: f(0), f'(0), f''(0), f(1), f'(1), f''(1) as functionals on
    // monomial coefficients c_0..c_5.
    a[(0, 0)] = 1.0;
    a[(1, 1)] = 1.0;
    a[(2, 2)] = 2.0;
    for k in 0..6 {
        let kf = k as f64;
        a[(3, k)] = 1.0;
        a[(4, k)] = kf;
        a[(5, k)] = kf * (kf - 1.0);
    }
    let inv = a.try_inverse().expect("Hermite collocation matrix is invertible");
    let mut basis = [[0.0; 6]; 6];
    for j in 0..6 {
        for k in 0..6 {
            basis[j][k] = inv[(k, j)];
        }
    }
    basis
}

fn eval_basis_deriv(basis: &[[f64; 6]; 6], deriv: usize, xi: f64) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (j, c) in basis.iter().enumerate() {
        let mut v = 0.0;
        for k in deriv..6 {
            let mut fall = 1.0;
            for d in 0..deriv {
                fall *= (k - d) as f64;
            }
            v += fall * c[k] * xi.powi((k - deriv) as i32);
        }
        out[j] = v;
    }
    out
}
