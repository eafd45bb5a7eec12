//! Stored-energy density, its quadratic form at the identity, and the
//! fourth-order tensor driving the cross-section cell problems.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct IsotropicMaterial {
    pub lambda: f64,
    pub mu: f64,
}

impl IsotropicMaterial {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !(3.0 * lambda + 2.0 * mu > 0.0) {
            return Err(Error::Material(format!(
                "need mu > 0 and 3 lambda + 2 mu > 0, got lambda={lambda}, mu={mu}"
            )));
        }
        Ok(Self { lambda, mu })
    }

    pub fn from_e_nu(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0) || !(-1.0 < nu && nu < 0.5) {
            return Err(Error::Material(format!(
                "need E > 0 and -1 < nu < 1/2, got E={e}, nu={nu}"
            )));
        }
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        Self::new(lambda, mu)
    }

    /// Young modulus μ(3λ+2μ)/(λ+μ), the stretch/bending stiffness scale of
    /// the condensed form.
    pub fn young(&self) -> f64 {
        self.mu * (3.0 * self.lambda + 2.0 * self.mu) / (self.lambda + self.mu)
    }

    /// Quadratic form 2μ|sym G|² + λ(tr G)².
    pub fn q3(&self, g: &Matrix3<f64>) -> f64 {
        let sym = (g + g.transpose()) * 0.5;
        2.0 * self.mu * sym.norm_squared() + self.lambda * g.trace().powi(2)
    }

    /// Symmetric bilinear form with q3_bilinear(G, G) = q3(G).
    pub fn q3_bilinear(&self, g: &Matrix3<f64>, h: &Matrix3<f64>) -> f64 {
        let sg = (g + g.transpose()) * 0.5;
        let sh = (h + h.transpose()) * 0.5;
        2.0 * self.mu * sg.dot(&sh) + self.lambda * g.trace() * h.trace()
    }

    /// Saint-Venant-Kirchhoff density W(F) = (λ/8)(tr(FᵀF−I))² + (μ/4)|FᵀF−I|².
    /// Frame-indifferent, vanishes on SO(3), and W(I+εG) = (ε²/2) q3(G) + O(ε³).
    pub fn svk_energy(&self, f: &Matrix3<f64>) -> f64 {
        let c = f.transpose() * f - Matrix3::identity();
        self.lambda / 8.0 * c.trace().powi(2) + self.mu / 4.0 * c.norm_squared()
    }

    /// Second derivative of the quadratic form: b^{hk}_{ij} = ∂²q3/∂G_ih ∂G_jk
    /// = 2λ δ_ih δ_jk + 2μ (δ_ij δ_hk + δ_ik δ_jh).
    pub fn b_tensor(&self) -> ElasticityTensor {
        let mut b = [[Matrix3::zeros(); 3]; 3];
        for h in 0..3 {
            for k in 0..3 {
                let mut m = Matrix3::zeros();
                for i in 0..3 {
                    for j in 0..3 {
                        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                        m[(i, j)] = 2.0 * self.lambda * d(i, h) * d(j, k)
                            + 2.0 * self.mu * (d(i, j) * d(h, k) + d(i, k) * d(j, h));
                    }
                }
                b[h][k] = m;
            }
        }
        ElasticityTensor { b }
    }
}

/// Fourth-order tensor stored as nine 3×3 blocks B^{hk}. The induced energy
/// is the half contraction ½ Σ b^{hk}_{ij} G_ih G_jk, equal to q3 for the
/// tensor built by [`IsotropicMaterial::b_tensor`].
#[derive(Debug, Clone)]
pub struct ElasticityTensor {
    pub b: [[Matrix3<f64>; 3]; 3],
}

impl ElasticityTensor {
    pub fn block(&self, h: usize, k: usize) -> &Matrix3<f64> {
        &self.b[h][k]
    }

    pub fn entry(&self, h: usize, k: usize, i: usize, j: usize) -> f64 {
        self.b[h][k][(i, j)]
    }

    /// ½ Σ b^{hk}_{ij} G_ih H_jk (bilinear; the quadratic form at H = G).
    pub fn contract(&self, g: &Matrix3<f64>, h: &Matrix3<f64>) -> f64 {
        let mut acc = 0.0;
        for hh in 0..3 {
            for kk in 0..3 {
                // columns of G and H
                let gc = g.column(hh);
                let hc = h.column(kk);
                acc += (self.b[hh][kk] * hc).dot(&gc);
            }
        }
        0.5 * acc
    }

    pub fn apply(&self, g: &Matrix3<f64>) -> f64 {
        self.contract(g, g)
    }

    /// Major symmetry b^{hk}_{ij} = b^{kh}_{ji}.
    pub fn is_major_symmetric(&self, tol: f64) -> bool {
        for h in 0..3 {
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        if (self.b[h][k][(i, j)] - self.b[k][h][(j, i)]).abs() > tol {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// Material varying along the rod axis; constant on each cross-section.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum MaterialField {
    Homogeneous(IsotropicMaterial),
    /// Piecewise-constant in x₁: material i applies on [breaks[i-1], breaks[i]).
    AxialPiecewise {
        breaks: Vec<f64>,
        materials: Vec<IsotropicMaterial>,
    },
}

impl MaterialField {
    pub fn validate(&self) -> Result<()> {
        match self {
            MaterialField::Homogeneous(m) => {
                IsotropicMaterial::new(m.lambda, m.mu)?;
            }
            MaterialField::AxialPiecewise { breaks, materials } => {
                if materials.len() != breaks.len() + 1 {
                    return Err(Error::Material(
                        "axial_piecewise needs exactly one more material than breaks".into(),
                    ));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Material("breaks must be strictly increasing".into()));
                }
                for m in materials {
                    IsotropicMaterial::new(m.lambda, m.mu)?;
                }
            }
        }
        Ok(())
    }

    pub fn at(&self, x1: f64) -> IsotropicMaterial {
        match self {
            MaterialField::Homogeneous(m) => *m,
            MaterialField::AxialPiecewise { breaks, materials } => {
                let idx = breaks.partition_point(|&b| b <= x1);
                materials[idx]
            }
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self, MaterialField::Homogeneous(_))
    }
}

/// Material sampled over one cross-section, in the unrotated (x₂, x₃) axes.
/// The cell solver evaluates it at pre-rotated coordinates of its quadrature
/// points, so full in-section heterogeneity is supported there.
pub trait SectionMaterial {
    fn at(&self, x2: f64, x3: f64) -> IsotropicMaterial;
}

/// Uniform material on the section.
pub struct UniformSection(pub IsotropicMaterial);

impl SectionMaterial for UniformSection {
    fn at(&self, _x2: f64, _x3: f64) -> IsotropicMaterial {
        self.0
    }
}

impl<F: Fn(f64, f64) -> IsotropicMaterial> SectionMaterial for F {
    fn at(&self, x2: f64, x3: f64) -> IsotropicMaterial {
        self(x2, x3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn q3_zero_identity_skew() {
        let m = IsotropicMaterial::new(0.0, 1.0).unwrap();
        assert_eq!(m.q3(&Matrix3::zeros()), 0.0);
        assert!((m.q3(&Matrix3::identity()) - 6.0).abs() < 1e-15);
        let skew = Matrix3::new(0.0, 1.0, -2.0, -1.0, 0.0, 0.5, 2.0, -0.5, 0.0);
        assert!(m.q3(&skew).abs() < 1e-15);
    }

    #[test]
    fn q3_depends_only_on_symmetric_part() {
        let m = IsotropicMaterial::new(1.3, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let g = random_matrix(&mut rng);
            let sym = (g + g.transpose()) * 0.5;
            assert!((m.q3(&g) - m.q3(&sym)).abs() < 1e-12);
        }
    }

    #[test]
    fn q3_coercive_on_symmetric_part() {
        let m = IsotropicMaterial::new(2.0, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let g = random_matrix(&mut rng);
            let sym = (g + g.transpose()) * 0.5;
            assert!(m.q3(&g) >= 2.0 * m.mu * sym.norm_squared() - 1e-12);
        }
    }

    #[test]
    fn svk_vanishes_on_rotations() {
        let m = IsotropicMaterial::new(1.0, 1.0).unwrap();
        assert_eq!(m.svk_energy(&Matrix3::identity()), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let axis = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let r = Rotation3::new(axis);
            assert!(m.svk_energy(r.matrix()) < 1e-25);
        }
    }

    #[test]
    fn svk_frame_indifference() {
        let m = IsotropicMaterial::new(0.9, 1.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let f = Matrix3::identity() + random_matrix(&mut rng) * 0.3;
            let axis = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let r = Rotation3::new(axis);
            let w1 = m.svk_energy(&f);
            let w2 = m.svk_energy(&(r.matrix() * f));
            assert!((w1 - w2).abs() <= 1e-12 * (1.0 + w1));
        }
    }

    #[test]
    fn svk_double_stretch() {
        // F = 2I, lambda = 0, mu = 1: (1/4) |3 I|^2 = 27/4.
        let m = IsotropicMaterial::new(0.0, 1.0).unwrap();
        let w = m.svk_energy(&(Matrix3::identity() * 2.0));
        assert!((w - 27.0 / 4.0).abs() < 1e-13);
    }

    #[test]
    fn svk_taylor_matches_q3() {
        let m = IsotropicMaterial::new(1.1, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = 1e-4;
        for _ in 0..50 {
            let g = random_matrix(&mut rng);
            let f = Matrix3::identity() + g * eps;
            let w = m.svk_energy(&f);
            let q = 0.5 * eps * eps * m.q3(&g);
            if q.abs() > 1e-12 {
                assert!(
                    ((w - q) / q).abs() < 1e-3,
                    "Taylor mismatch: {w} vs {q}"
                );
            }
        }
    }

    #[test]
    fn svk_central_second_difference_equals_q3() {
        let m = IsotropicMaterial::new(0.8, 1.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let g = random_matrix(&mut rng);
            let eps = 1e-5;
            let wp = m.svk_energy(&(Matrix3::identity() + g * eps));
            let wm = m.svk_energy(&(Matrix3::identity() - g * eps));
            let w0 = 0.0;
            let second = (wp - 2.0 * w0 + wm) / (eps * eps);
            let q = m.q3(&g);
            assert!(((second - q) / q.max(1e-30)).abs() < 1e-6);
        }
    }

    #[test]
    fn b_tensor_entries() {
        // lambda = 1, mu = 0: b^{11}_{11} = 2.
        let m1 = IsotropicMaterial { lambda: 1.0, mu: 0.0 };
        assert!((m1.b_tensor().entry(0, 0, 0, 0) - 2.0).abs() < 1e-15);
        // lambda = 0, mu = 1: b^{22}_{11} = 2 from the δ_ij δ_hk term.
        let m2 = IsotropicMaterial { lambda: 0.0, mu: 1.0 };
        assert!((m2.b_tensor().entry(1, 1, 0, 0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn b_tensor_contraction_matches_q3() {
        let m = IsotropicMaterial::new(1.7, 0.9).unwrap();
        let b = m.b_tensor();
        assert!(b.is_major_symmetric(1e-14));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let g = random_matrix(&mut rng);
            assert!((b.apply(&g) - m.q3(&g)).abs() < 1e-14 * (1.0 + m.q3(&g)));
        }
        // Zero on skew, positive definite on nonzero symmetric.
        let skew = Matrix3::new(0.0, 3.0, -1.0, -3.0, 0.0, 2.0, 1.0, -2.0, 0.0);
        assert!(b.apply(&skew).abs() < 1e-14);
        for _ in 0..100 {
            let g = random_matrix(&mut rng);
            let sym = (g + g.transpose()) * 0.5;
            if sym.norm() > 1e-6 {
                assert!(b.apply(&sym) > 0.0);
            }
        }
    }

    #[test]
    fn material_field_axial_lookup() {
        let a = IsotropicMaterial::new(1.0, 1.0).unwrap();
        let b = IsotropicMaterial::new(2.0, 2.0).unwrap();
        let f = MaterialField::AxialPiecewise { breaks: vec![0.5], materials: vec![a, b] };
        f.validate().unwrap();
        assert_eq!(f.at(0.2), a);
        assert_eq!(f.at(0.7), b);
        assert_eq!(f.at(0.5), b);
    }

    #[test]
    fn e_nu_conversion() {
        let m = IsotropicMaterial::from_e_nu(1.0, 0.25).unwrap();
        // lambda = E nu / ((1+nu)(1-2nu)) = 0.25/(1.25*0.5) = 0.4, mu = 0.4.
        assert!((m.lambda - 0.4).abs() < 1e-15);
        assert!((m.mu - 0.4).abs() < 1e-15);
        assert!((m.young() - 1.0).abs() < 1e-12);
    }
}
