//! Triangulation of a polygon section: boundary subdivision at the target
//! spacing, a hexagonal interior lattice, constrained Delaunay (flip-based
//! segment recovery), Laplacian smoothing, and quality gates.

use serde::{Deserialize, Serialize};

use super::delaunay::Delaunay;
use super::{segments_intersect, PolygonSection};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriMesh {
    pub nodes: Vec<[f64; 2]>,
    /// CCW vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Undirected node pairs lying on the polygon boundary.
    pub boundary_edges: Vec<[usize; 2]>,
}

impl TriMesh {
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        tri_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn min_angle_deg(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&t| min_angle(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_edge_length(&self) -> f64 {
        let mut m: f64 = 0.0;
        for t in &self.triangles {
            for e in 0..3 {
                let a = self.nodes[t[e]];
                let b = self.nodes[t[(e + 1) % 3]];
                m = m.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        m
    }

    /// Nodes on the boundary (endpoints of boundary edges).
    pub fn boundary_nodes(&self) -> Vec<bool> {
        let mut b = vec![false; self.nodes.len()];
        for e in &self.boundary_edges {
            b[e[0]] = true;
            b[e[1]] = true;
        }
        b
    }

    /// Same connectivity with node coordinates rotated by the 2×2 rotation
    /// [[p2, -p3], [p3, p2]] (the cell-problem domain).
    pub fn rotated(&self, p2: f64, p3: f64) -> TriMesh {
        TriMesh {
            nodes: self
                .nodes
                .iter()
                .map(|n| [p2 * n[0] - p3 * n[1], p3 * n[0] + p2 * n[1]])
                .collect(),
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges.clone(),
        }
    }
}

pub fn triangulate(poly: &PolygonSection, target: f64) -> Result<TriMesh> {
    if !(target > 0.0) {
        return Err(Error::Mesh("target edge length must be positive".into()));
    }
    let mut attempt_scale = 1.0;
    let mut last_err = String::new();
    for _ in 0..3 {
        match try_triangulate(poly, target, attempt_scale) {
            Ok(mesh) => return Ok(mesh),
            Err(e) => {
                last_err = e.to_string();
                attempt_scale *= 0.8;
            }
        }
    }
    Err(Error::Mesh(format!(
        "triangulation failed at target {target}: {last_err}"
    )))
}

fn try_triangulate(poly: &PolygonSection, target: f64, scale: f64) -> Result<TriMesh> {
    let verts = poly.vertices();
    let n = verts.len();

    // Boundary chain: subdivide each polygon edge to spacing <= target.
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut chain: Vec<usize> = Vec::new();
    let mut min_spacing = f64::INFINITY;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let segs = (len / target).ceil().max(1.0) as usize;
        min_spacing = min_spacing.min(len / segs as f64);
        for k in 0..segs {
            let t = k as f64 / segs as f64;
            chain.push(nodes.len());
            nodes.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    let n_bnd = nodes.len();

    // Interior pitch: follow the boundary spacing down when the polygon is
    // sampled finer than the target, so grading jumps stay near 2:1.
    let pitch = scale * target.min(2.0 * min_spacing);
    let clearance = 0.62 * pitch;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for v in verts {
        lo[0] = lo[0].min(v[0]);
        lo[1] = lo[1].min(v[1]);
        hi[0] = hi[0].max(v[0]);
        hi[1] = hi[1].max(v[1]);
    }
    let cy = 0.5 * (lo[1] + hi[1]);
    let cx = 0.5 * (lo[0] + hi[0]);
    let dy = pitch * 3.0f64.sqrt() / 2.0;
    let n_rows = ((hi[1] - cy) / dy).ceil() as i64 + 1;
    let n_cols = ((hi[0] - cx) / pitch).ceil() as i64 + 2;
    for j in -n_rows..=n_rows {
        let y = cy + j as f64 * dy;
        let offset = if j.rem_euclid(2) == 0 { 0.0 } else { 0.5 * pitch };
        for i in -n_cols..=n_cols {
            let x = cx + offset + i as f64 * pitch;
            let p = [x, y];
            if poly.contains(p) && poly.boundary_distance(p) >= clearance {
                nodes.push(p);
            }
        }
    }

    let segments: Vec<[usize; 2]> = (0..n_bnd)
        .map(|i| [chain[i], chain[(i + 1) % n_bnd]])
        .collect();

    let mut tris = build_constrained(&nodes, &segments, poly)?;

    // Laplacian smoothing of interior nodes, re-triangulating afterwards.
    for _ in 0..3 {
        let mut acc = vec![[0.0; 2]; nodes.len()];
        let mut cnt = vec![0usize; nodes.len()];
        for t in &tris {
            for e in 0..3 {
                let a = t[e];
                let b = t[(e + 1) % 3];
                acc[a][0] += nodes[b][0];
                acc[a][1] += nodes[b][1];
                cnt[a] += 1;
                acc[b][0] += nodes[a][0];
                acc[b][1] += nodes[a][1];
                cnt[b] += 1;
            }
        }
        for i in n_bnd..nodes.len() {
            if cnt[i] > 0 {
                let p = [acc[i][0] / cnt[i] as f64, acc[i][1] / cnt[i] as f64];
                if poly.contains(p) && poly.boundary_distance(p) >= 0.5 * clearance {
                    nodes[i] = p;
                }
            }
        }
        tris = build_constrained(&nodes, &segments, poly)?;
    }

    // Drop unused nodes (lattice points can lose all triangles near corners),
    // then renumber rows-first for banded factorizations.
    let mut used = vec![false; nodes.len()];
    for t in &tris {
        for &v in t {
            used[v] = true;
        }
    }
    for &c in &chain {
        if !used[c] {
            return Err(Error::Mesh("boundary node lost during triangulation".into()));
        }
    }
    let mut order: Vec<usize> = (0..nodes.len()).filter(|&i| used[i]).collect();
    order.sort_by(|&a, &b| {
        let ka = (quant(nodes[a][1]), quant(nodes[a][0]));
        let kb = (quant(nodes[b][1]), quant(nodes[b][0]));
        ka.cmp(&kb)
    });
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut new_nodes = Vec::with_capacity(order.len());
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
        new_nodes.push(nodes[old]);
    }
    let new_tris: Vec<[usize; 3]> = tris
        .iter()
        .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
        .collect();
    let boundary_edges: Vec<[usize; 2]> = segments
        .iter()
        .map(|s| [remap[s[0]], remap[s[1]]])
        .collect();

    let mesh = TriMesh { nodes: new_nodes, triangles: new_tris, boundary_edges };

    // Quality gates.
    let poly_area = poly.moments().area;
    let mesh_area = mesh.total_area();
    if ((mesh_area - poly_area) / poly_area).abs() > 5e-3 {
        return Err(Error::Mesh(format!(
            "mesh area {mesh_area} does not tile polygon area {poly_area}"
        )));
    }
    let min_ang = mesh.min_angle_deg();
    if min_ang < 20.0 {
        return Err(Error::Mesh(format!("minimum angle {min_ang:.2} below 20 degrees")));
    }
    let max_edge = mesh.max_edge_length();
    if max_edge > 1.5 * target {
        return Err(Error::Mesh(format!(
            "max edge {max_edge} exceeds 1.5 x target {target}"
        )));
    }
    // Every mesh boundary edge must lie on a polygon edge.
    let one_sided = one_sided_edges(&mesh.triangles);
    for &[a, b] in &one_sided {
        if !(on_polygon_boundary(poly, mesh.nodes[a]) && on_polygon_boundary(poly, mesh.nodes[b])) {
            return Err(Error::Mesh("mesh boundary strays from the polygon".into()));
        }
    }
    if one_sided.len() != mesh.boundary_edges.len() {
        return Err(Error::Mesh("boundary edge count mismatch".into()));
    }
    Ok(mesh)
}

fn quant(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

fn build_constrained(
    nodes: &[[f64; 2]],
    segments: &[[usize; 2]],
    poly: &PolygonSection,
) -> Result<Vec<[usize; 3]>> {
    let dt = Delaunay::build(nodes);
    let mut tris = dt.triangles();
    for &[a, b] in segments {
        if !recover_segment(nodes, &mut tris, a, b) {
            return Err(Error::Mesh(format!(
                "could not recover boundary segment {a}-{b}"
            )));
        }
    }
    // Remove triangles outside the polygon.
    tris.retain(|&t| {
        let c = [
            (nodes[t[0]][0] + nodes[t[1]][0] + nodes[t[2]][0]) / 3.0,
            (nodes[t[0]][1] + nodes[t[1]][1] + nodes[t[2]][1]) / 3.0,
        ];
        poly.contains(c)
    });
    if tris.is_empty() {
        return Err(Error::Mesh("no interior triangles".into()));
    }
    Ok(tris)
}

/// Flip crossed edges until segment (a, b) exists in the triangulation.
fn recover_segment(nodes: &[[f64; 2]], tris: &mut Vec<[usize; 3]>, a: usize, b: usize) -> bool {
    let cap = 4 * tris.len() + 64;
    for _ in 0..cap {
        if has_edge(tris, a, b) {
            return true;
        }
        // Find a crossing edge whose quad is convex, flip it.
        let mut flipped = false;
        'search: for ti in 0..tris.len() {
            let t = tris[ti];
            for e in 0..3 {
                let u = t[(e + 1) % 3];
                let v = t[(e + 2) % 3];
                if u == a || u == b || v == a || v == b {
                    continue;
                }
                if !segments_intersect(nodes[a], nodes[b], nodes[u], nodes[v]) {
                    continue;
                }
                // Partner triangle across (u, v).
                let Some(tj) = (0..tris.len()).find(|&j| {
                    j != ti && tris[j].contains(&u) && tris[j].contains(&v)
                }) else {
                    continue;
                };
                let c = t[e];
                let d = *tris[tj].iter().find(|&&x| x != u && x != v).unwrap();
                // Flip is legal only for a strictly convex quad.
                if !segments_intersect(nodes[c], nodes[d], nodes[u], nodes[v]) {
                    continue;
                }
                tris[ti] = ccw(nodes, [c, u, d]);
                tris[tj] = ccw(nodes, [c, d, v]);
                flipped = true;
                break 'search;
            }
        }
        if !flipped {
            return false;
        }
    }
    false
}

fn has_edge(tris: &[[usize; 3]], a: usize, b: usize) -> bool {
    tris.iter().any(|t| t.contains(&a) && t.contains(&b))
}

fn ccw(nodes: &[[f64; 2]], t: [usize; 3]) -> [usize; 3] {
    if tri_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

fn tri_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn min_angle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let la = dist(b, c);
    let lb = dist(a, c);
    let lc = dist(a, b);
    let angle = |opp: f64, s1: f64, s2: f64| -> f64 {
        let cosv = ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0);
        cosv.acos().to_degrees()
    };
    angle(la, lb, lc).min(angle(lb, la, lc)).min(angle(lc, la, lb))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn one_sided_edges(tris: &[[usize; 3]]) -> Vec<[usize; 2]> {
    use std::collections::HashMap;
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in tris {
        for e in 0..3 {
            let a = t[e];
            let b = t[(e + 1) % 3];
            let key = (a.min(b), a.max(b));
            *count.entry(key).or_insert(0) += 1;
        }
    }
    let mut out: Vec<[usize; 2]> = count
        .iter()
        .filter(|&(_, &c)| c == 1)
        .map(|(&(a, b), _)| [a, b])
        .collect();
    out.sort();
    out
}

fn on_polygon_boundary(poly: &PolygonSection, p: [f64; 2]) -> bool {
    poly.boundary_distance(p) < 1e-9 * poly.diameter().max(1.0)
}
