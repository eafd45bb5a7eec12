//! Cross-section geometry: polygon normalization to the principal-axes
//! convention, exact polygon moments, and triangulation for cell problems.

mod delaunay;
mod mesher;

pub use mesher::TriMesh;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simple polygon with counterclockwise orientation and positive area.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolygonSection {
    vertices: Vec<[f64; 2]>,
}

/// Exact area moments of a section, in the (x₂, x₃) axes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SectionProperties {
    pub area: f64,
    pub centroid: [f64; 2],
    /// ∫ x₂²
    pub i2: f64,
    /// ∫ x₃²
    pub i3: f64,
    /// ∫ x₂ x₃
    pub i23: f64,
    /// ∫ (x₂² + x₃²) = i2 + i3
    pub polar: f64,
}

/// Rigid transform applied by [`PolygonSection::normalized`]: first the
/// translation, then the rotation about the origin.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SectionTransform {
    pub translation: [f64; 2],
    pub rotation: f64,
}

impl PolygonSection {
    /// Build from a vertex list; enforces simplicity and CCW orientation
    /// (clockwise input is reversed).
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidGeometry("polygon needs at least 3 vertices".into()));
        }
        let area = signed_area(&vertices);
        let diam = diameter(&vertices);
        if area.abs() < 1e-14 * diam * diam {
            return Err(Error::InvalidGeometry("polygon is degenerate (zero area)".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let poly = Self { vertices };
        poly.check_simple()?;
        Ok(poly)
    }

    /// Axis-aligned rectangle of width `a` (x₂) and height `b` (x₃), centered
    /// at the origin.
    pub fn rectangle(a: f64, b: f64) -> Result<Self> {
        if a <= 0.0 || b <= 0.0 {
            return Err(Error::InvalidGeometry("rectangle sides must be positive".into()));
        }
        let (ha, hb) = (0.5 * a, 0.5 * b);
        Self::new(vec![[-ha, -hb], [ha, -hb], [ha, hb], [-ha, hb]])
    }

    /// Regular `n`-gon approximating the disk of radius `r`.
    pub fn disk(r: f64, n: usize) -> Result<Self> {
        Self::ellipse(r, r, n)
    }

    /// `n`-gon approximating the ellipse with semi-axes `a`, `b`.
    pub fn ellipse(a: f64, b: f64, n: usize) -> Result<Self> {
        if a <= 0.0 || b <= 0.0 {
            return Err(Error::InvalidGeometry("ellipse semi-axes must be positive".into()));
        }
        if n < 3 {
            return Err(Error::InvalidGeometry("ellipse needs at least 3 vertices".into()));
        }
        let verts = (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [a * t.cos(), b * t.sin()]
            })
            .collect();
        Self::new(verts)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.vertices)
    }

    /// Exact closed-form polygon moments (Green's theorem); no mesh involved.
    pub fn moments(&self) -> SectionProperties {
        let m00 = self.monomial_moment(0, 0);
        let m10 = self.monomial_moment(1, 0);
        let m01 = self.monomial_moment(0, 1);
        let m20 = self.monomial_moment(2, 0);
        let m02 = self.monomial_moment(0, 2);
        let m11 = self.monomial_moment(1, 1);
        SectionProperties {
            area: m00,
            centroid: [m10 / m00, m01 / m00],
            i2: m20,
            i3: m02,
            i23: m11,
            polar: m20 + m02,
        }
    }

    /// Exact ∫∫ x₂^p x₃^q over the polygon, via the boundary integral
    /// (1/(p+1)) ∮ x^{p+1} y^q dy with per-edge Gauss quadrature of the exact
    /// polynomial degree.
    pub fn monomial_moment(&self, p: usize, q: usize) -> f64 {
        let deg = p + 1 + q;
        let gauss = crate::quadrature::GaussRule::new(deg / 2 + 1);
        let n = self.vertices.len();
        let mut total = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let dy = b[1] - a[1];
            if dy == 0.0 {
                continue;
            }
            let mut edge = 0.0;
            for (t, w) in gauss.mapped(0.0, 1.0) {
                let x = a[0] + t * (b[0] - a[0]);
                let y = a[1] + t * (b[1] - a[1]);
                edge += w * x.powi(p as i32 + 1) * y.powi(q as i32);
            }
            total += edge * dy;
        }
        total / (p as f64 + 1.0)
    }

    /// Translate to the centroid and rotate to principal axes so that
    /// ∫x₂ = ∫x₃ = ∫x₂x₃ = 0. Returns the applied transform.
    ///
    /// The rotation angle is the representative in (-π/4, π/4] that
    /// diagonalizes the inertia tensor; an already-principal section maps to
    /// the identity transform.
    pub fn normalized(&self) -> Result<(PolygonSection, SectionTransform)> {
        let props = self.moments();
        let [cx, cy] = props.centroid;
        let shifted: Vec<[f64; 2]> = self
            .vertices
            .iter()
            .map(|v| [v[0] - cx, v[1] - cy])
            .collect();
        let shifted = PolygonSection { vertices: shifted };
        let p = shifted.moments();
        // Zero of ∫x₂'x₃' under rotation by -φ: tan 2φ = 2 i23 / (i2 - i3),
        // reduced into (-π/4, π/4]; the atan2(0, 0) tie keeps the identity.
        let scale = p.area * self.diameter() * self.diameter();
        let (num, den) = (2.0 * p.i23, p.i2 - p.i3);
        let mut phi = if num.abs() < 1e-14 * scale && den.abs() < 1e-14 * scale {
            0.0
        } else {
            0.5 * f64::atan2(num, den)
        };
        let quarter = std::f64::consts::FRAC_PI_4;
        while phi > quarter {
            phi -= 2.0 * quarter;
        }
        while phi <= -quarter {
            phi += 2.0 * quarter;
        }
        let (s, c) = phi.sin_cos();
        let rotated: Vec<[f64; 2]> = shifted
            .vertices
            .iter()
            .map(|v| [c * v[0] + s * v[1], -s * v[0] + c * v[1]])
            .collect();
        let out = PolygonSection { vertices: rotated };
        let check = out.moments();
        let tol = 1e-12 * check.area * out.diameter() * out.diameter().max(1.0);
        if check.i23.abs() > tol.max(1e-10 * scale) {
            return Err(Error::InvalidGeometry(format!(
                "principal-axis rotation failed: residual product moment {}",
                check.i23
            )));
        }
        Ok((out, SectionTransform { translation: [-cx, -cy], rotation: -phi }))
    }

    /// Conforming triangulation with roughly uniform interior spacing.
    pub fn triangulate(&self, target_edge_length: f64) -> Result<TriMesh> {
        mesher::triangulate(self, target_edge_length)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        // Crossing-number test; boundary points are implementation-defined.
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let vi = self.vertices[i];
            let vj = self.vertices[j];
            if (vi[1] > p[1]) != (vj[1] > p[1]) {
                let x = vj[0] + (p[1] - vj[1]) / (vi[1] - vj[1]) * (vi[0] - vj[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Shortest distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        let n = self.vertices.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            best = best.min(point_segment_distance(p, a, b));
        }
        best
    }

    fn check_simple(&self) -> Result<()> {
        let n = self.vertices.len();
        for i in 0..n {
            let (a1, a2) = (self.vertices[i], self.vertices[(i + 1) % n]);
            for j in i + 1..n {
                // Skip adjacent edges (they share a vertex).
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (b1, b2) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_intersect(a1, a2, b1, b2) {
                    return Err(Error::InvalidGeometry(format!(
                        "polygon is self-intersecting (edges {i} and {j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl SectionProperties {
    /// Asserts the normalized-section invariants within tolerance.
    pub fn is_normalized(&self, diam: f64) -> bool {
        let tol = 1e-12 * self.area * diam * diam.max(1.0);
        self.centroid[0].abs() * self.area <= tol.max(1e-12 * self.area * diam)
            && self.centroid[1].abs() * self.area <= tol.max(1e-12 * self.area * diam)
            && self.i23.abs() <= tol.max(1e-10 * self.area * diam * diam)
    }
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = v[i];
        let q = v[(i + 1) % n];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

fn diameter(v: &[[f64; 2]]) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in v {
        lo[0] = lo[0].min(p[0]);
        lo[1] = lo[1].min(p[1]);
        hi[0] = hi[0].max(p[0]);
        hi[1] = hi[1].max(p[1]);
    }
    ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect(a1: [f64; 2], a2: [f64; 2], b1: [f64; 2], b2: [f64; 2]) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_moments() {
        let sq = PolygonSection::rectangle(1.0, 1.0).unwrap();
        let p = sq.moments();
        assert!((p.area - 1.0).abs() < 1e-14);
        assert!((p.i2 - 1.0 / 12.0).abs() < 1e-14);
        assert!((p.i3 - 1.0 / 12.0).abs() < 1e-14);
        assert!(p.i23.abs() < 1e-15);
        assert!((p.polar - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn disk_512gon_moments() {
        let d = PolygonSection::disk(1.0, 512).unwrap();
        let p = d.moments();
        assert!((p.area - std::f64::consts::PI).abs() < 1e-3);
        assert!((p.polar - std::f64::consts::PI / 2.0).abs() < 1e-3);
        assert!((p.polar - (p.i2 + p.i3)).abs() < 1e-14);
    }

    #[test]
    fn triangle_moments_closed_form() {
        // (0,0),(1,0),(0,1): A = 1/2, ∫x² = 1/12, ∫y² = 1/12, ∫xy = 1/24,
        // centroid (1/3, 1/3).
        let t = PolygonSection::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let p = t.moments();
        assert!((p.area - 0.5).abs() < 1e-15);
        assert!((p.i2 - 1.0 / 12.0).abs() < 1e-14);
        assert!((p.i3 - 1.0 / 12.0).abs() < 1e-14);
        assert!((p.i23 - 1.0 / 24.0).abs() < 1e-14);
        assert!((p.centroid[0] - 1.0 / 3.0).abs() < 1e-14);
        // Normalized: centered moments I2 = 1/36, I23 = -1/72, then rotated
        // principal. Check the invariants rather than the angle.
        let (nt, _) = t.normalized().unwrap();
        let np = nt.moments();
        assert!(np.is_normalized(nt.diameter()));
        assert!((np.area - 0.5).abs() < 1e-14);
        // Trace of the inertia tensor is rotation invariant.
        let centered_polar = (1.0 / 12.0 - 0.5 / 9.0) * 2.0;
        assert!((np.polar - centered_polar).abs() < 1e-14);
    }

    #[test]
    fn normalize_identity_on_principal_square() {
        let sq = PolygonSection::rectangle(1.0, 1.0).unwrap();
        let (n, t) = sq.normalized().unwrap();
        assert!(t.translation[0].abs() < 1e-15 && t.translation[1].abs() < 1e-15);
        assert_eq!(t.rotation, 0.0);
        for (a, b) in n.vertices().iter().zip(sq.vertices()) {
            assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_translates_offset_square() {
        let sq = PolygonSection::new(vec![
            [0.5, 1.5],
            [1.5, 1.5],
            [1.5, 2.5],
            [0.5, 2.5],
        ])
        .unwrap();
        let (n, t) = sq.normalized().unwrap();
        assert!((t.translation[0] + 1.0).abs() < 1e-14);
        assert!((t.translation[1] + 2.0).abs() < 1e-14);
        assert_eq!(t.rotation, 0.0);
        assert!(n.moments().is_normalized(n.diameter()));
    }

    #[test]
    fn normalize_rotates_tilted_rectangle() {
        // 2x1 rectangle rotated by 30 degrees about its centroid.
        let ang = 30f64.to_radians();
        let (s, c) = ang.sin_cos();
        let base = PolygonSection::rectangle(2.0, 1.0).unwrap();
        let tilted = PolygonSection::new(
            base.vertices()
                .iter()
                .map(|v| [c * v[0] - s * v[1], s * v[0] + c * v[1]])
                .collect(),
        )
        .unwrap();
        let (n, t) = tilted.normalized().unwrap();
        let p = n.moments();
        assert!(p.is_normalized(n.diameter()));
        assert!(p.i23.abs() < 1e-13);
        // Rotation brings it back to axis alignment: moments match the
        // axis-aligned rectangle (possibly with axes swapped).
        let p0 = base.moments();
        let same = (p.i2 - p0.i2).abs() < 1e-12 && (p.i3 - p0.i3).abs() < 1e-12;
        let swapped = (p.i2 - p0.i3).abs() < 1e-12 && (p.i3 - p0.i2).abs() < 1e-12;
        assert!(same || swapped, "i2={} i3={}", p.i2, p.i3);
        assert!(t.rotation.abs() <= std::f64::consts::FRAC_PI_4 + 1e-12);
    }

    #[test]
    fn normalize_is_idempotent() {
        let t = PolygonSection::new(vec![[0.3, -0.1], [2.1, 0.4], [1.2, 1.9], [-0.4, 1.0]])
            .unwrap();
        let (n1, _) = t.normalized().unwrap();
        let (n2, tr) = n1.normalized().unwrap();
        assert!(tr.translation[0].abs() < 1e-12 && tr.translation[1].abs() < 1e-12);
        assert!(tr.rotation.abs() < 1e-10);
        for (a, b) in n1.vertices().iter().zip(n2.vertices()) {
            assert!((a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_polygon_rejected() {
        assert!(PolygonSection::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        assert!(PolygonSection::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        // Self-intersecting bowtie.
        assert!(PolygonSection::new(vec![
            [0.0, 0.0],
            [1.0, 1.0],
            [1.0, 0.0],
            [0.0, 1.0]
        ])
        .is_err());
    }

    #[test]
    fn coarse_square_mesh_tiles_exactly() {
        let sq = PolygonSection::rectangle(1.0, 1.0).unwrap();
        let mesh = sq.triangulate(0.5).unwrap();
        assert!(mesh.triangles.len() >= 8);
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        assert!(mesh.min_angle_deg() >= 20.0);
        assert!(mesh.max_edge_length() <= 0.75 + 1e-12);
    }

    #[test]
    fn fine_square_mesh_tiles_exactly() {
        let sq = PolygonSection::rectangle(1.0, 1.0).unwrap();
        let mesh = sq.triangulate(0.05).unwrap();
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        assert!(mesh.min_angle_deg() >= 20.0);
    }

    #[test]
    fn disk_mesh_area_converges() {
        let d = PolygonSection::disk(1.0, 512).unwrap();
        let mesh = d.triangulate(0.05).unwrap();
        let err = (mesh.total_area() - std::f64::consts::PI).abs() / std::f64::consts::PI;
        assert!(err < 2e-3, "disk mesh area error {err}");
        assert!(mesh.min_angle_deg() >= 20.0);
    }

    #[test]
    fn mesh_quadrature_matches_exact_moments() {
        use crate::quadrature::triangle_rule_3;
        let d = PolygonSection::disk(0.8, 256).unwrap();
        let mesh = d.triangulate(0.08).unwrap();
        let p = d.moments();
        let mut i2 = 0.0;
        let mut i23 = 0.0;
        for t in &mesh.triangles {
            for (pt, w) in triangle_rule_3(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]) {
                i2 += w * pt[0] * pt[0];
                i23 += w * pt[0] * pt[1];
            }
        }
        // Degree-2 rule integrates both exactly on each triangle, so this
        // measures only the exact tiling.
        assert!((i2 - p.i2).abs() < 1e-12);
        assert!((i23 - p.i23).abs() < 1e-12);
    }

    #[test]
    fn nonconvex_lshape_meshes() {
        let l = PolygonSection::new(vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [0.0, 2.0],
        ])
        .unwrap();
        let mesh = l.triangulate(0.2).unwrap();
        assert!((mesh.total_area() - 3.0).abs() < 1e-10);
        assert!(mesh.min_angle_deg() >= 20.0);
        // All boundary edges lie on the outline.
        for e in &mesh.boundary_edges {
            for &n in e {
                assert!(l.boundary_distance(mesh.nodes[n]) < 1e-9);
            }
        }
    }

    #[test]
    fn bad_target_rejected() {
        let sq = PolygonSection::rectangle(1.0, 1.0).unwrap();
        assert!(sq.triangulate(0.0).is_err());
        assert!(sq.triangulate(-1.0).is_err());
    }
}
