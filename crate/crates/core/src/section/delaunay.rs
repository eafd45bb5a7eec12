//! Incremental Delaunay triangulation (Bowyer-Watson) with triangle
//! adjacency and walk-based point location.

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
struct Tri {
    /// Vertex indices, counterclockwise.
    v: [usize; 3],
    /// Neighbor triangle opposite each vertex; NONE if hull edge.
    nb: [usize; 3],
    alive: bool,
}

pub struct Delaunay {
    points: Vec<[f64; 2]>,
    tris: Vec<Tri>,
    last: usize,
    n_input: usize,
}

impl Delaunay {
    /// Triangulate distinct points. Insertion order follows the input order,
    /// so spatially coherent input keeps the walk short.
    pub fn build(input: &[[f64; 2]]) -> Self {
        let n = input.len();
        assert!(n >= 3, "need at least 3 points");
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in input {
            lo[0] = lo[0].min(p[0]);
            lo[1] = lo[1].min(p[1]);
            hi[0] = hi[0].max(p[0]);
            hi[1] = hi[1].max(p[1]);
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        let m = 50.0 * span;
        let mut points = input.to_vec();
        points.push([cx - 2.0 * m, cy - m]);
        points.push([cx + 2.0 * m, cy - m]);
        points.push([cx, cy + 2.0 * m]);
        let mut dt = Self {
            points,
            tris: vec![Tri { v: [n, n + 1, n + 2], nb: [NONE; 3], alive: true }],
            last: 0,
            n_input: n,
        };
        for i in 0..n {
            dt.insert(i);
        }
        dt
    }

    /// Triangles not touching the super-triangle, as CCW vertex triples.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        self.tris
            .iter()
            .filter(|t| t.alive && t.v.iter().all(|&v| v < self.n_input))
            .map(|t| t.v)
            .collect()
    }

    fn pt(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    fn orient(&self, a: usize, b: usize, p: usize) -> f64 {
        let (pa, pb, pp) = (self.pt(a), self.pt(b), self.pt(p));
        (pb[0] - pa[0]) * (pp[1] - pa[1]) - (pb[1] - pa[1]) * (pp[0] - pa[0])
    }

    fn in_circumcircle(&self, t: &Tri, p: usize) -> bool {
        let [a, b, c] = t.v;
        let (pa, pb, pc, pd) = (self.pt(a), self.pt(b), self.pt(c), self.pt(p));
        let ax = pa[0] - pd[0];
        let ay = pa[1] - pd[1];
        let bx = pb[0] - pd[0];
        let by = pb[1] - pd[1];
        let cx = pc[0] - pd[0];
        let cy = pc[1] - pd[1];
        let det = (ax * ax + ay * ay) * (bx * cy - cx * by)
            - (bx * bx + by * by) * (ax * cy - cx * ay)
            + (cx * cx + cy * cy) * (ax * by - bx * ay);
        det > 0.0
    }

    fn locate(&self, p: usize) -> usize {
        let mut cur = self.last;
        if !self.tris[cur].alive {
            cur = self.tris.iter().rposition(|t| t.alive).expect("alive triangle");
        }
        let mut steps = 0;
        let max_steps = 4 * self.tris.len() + 16;
        'walk: while steps <= max_steps {
            steps += 1;
            let t = self.tris[cur];
            for e in 0..3 {
                let a = t.v[(e + 1) % 3];
                let b = t.v[(e + 2) % 3];
                if self.orient(a, b, p) < 0.0 {
                    if t.nb[e] == NONE {
                        break 'walk;
                    }
                    cur = t.nb[e];
                    continue 'walk;
                }
            }
            return cur;
        }
        // Fallback: linear scan (degenerate walking loops).
        for (i, t) in self.tris.iter().enumerate() {
            if !t.alive {
                continue;
            }
            let inside = (0..3).all(|e| {
                let a = t.v[(e + 1) % 3];
                let b = t.v[(e + 2) % 3];
                self.orient(a, b, p) >= 0.0
            });
            if inside {
                return i;
            }
        }
        panic!("point location failed for point {p}");
    }

    fn insert(&mut self, p: usize) {
        let seed = self.locate(p);
        let mut mark = vec![false; self.tris.len()];
        mark[seed] = true;
        let mut bad = vec![seed];
        let mut stack = vec![seed];
        while let Some(t) = stack.pop() {
            for e in 0..3 {
                let nb = self.tris[t].nb[e];
                if nb != NONE && !mark[nb] && self.tris[nb].alive {
                    let tri = self.tris[nb];
                    if self.in_circumcircle(&tri, p) {
                        mark[nb] = true;
                        bad.push(nb);
                        stack.push(nb);
                    }
                }
            }
        }
        // Cavity boundary: directed edges (a, b) with the outside neighbor.
        let mut boundary: Vec<(usize, usize, usize)> = Vec::new();
        for &t in &bad {
            let tri = self.tris[t];
            for e in 0..3 {
                let nb = tri.nb[e];
                if nb == NONE || !mark[nb] {
                    boundary.push((tri.v[(e + 1) % 3], tri.v[(e + 2) % 3], nb));
                }
            }
        }
        for &t in &bad {
            self.tris[t].alive = false;
        }
        let base = self.tris.len();
        let k = boundary.len();
        // Fan from p. New triangle for boundary edge (a, b) is [p, a, b];
        // its nb[0] (opposite p) is the old outside neighbor.
        for &(a, b, outer) in &boundary {
            let id = self.tris.len();
            self.tris.push(Tri { v: [p, a, b], nb: [outer, NONE, NONE], alive: true });
            if outer != NONE {
                let o = &mut self.tris[outer];
                for e in 0..3 {
                    let oa = o.v[(e + 1) % 3];
                    let ob = o.v[(e + 2) % 3];
                    if (oa == a && ob == b) || (oa == b && ob == a) {
                        o.nb[e] = id;
                    }
                }
            }
        }
        // Link fan triangles: edge (p, b) of [p, a, b] pairs with the fan
        // triangle whose boundary edge starts at b; edge (p, a) with the one
        // ending at a.
        for i in 0..k {
            let (a, b, _) = boundary[i];
            for j in 0..k {
                if i == j {
                    continue;
                }
                let (a2, b2, _) = boundary[j];
                if a2 == b {
                    self.tris[base + i].nb[1] = base + j;
                }
                if b2 == a {
                    self.tris[base + i].nb[2] = base + j;
                }
            }
        }
        self.last = base + k - 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri_area(p: &[[f64; 2]], t: [usize; 3]) -> f64 {
        let (a, b, c) = (p[t[0]], p[t[1]], p[t[2]]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    #[test]
    fn covers_convex_hull_of_grid() {
        let mut pts = Vec::new();
        for j in 0..7 {
            for i in 0..7 {
                pts.push([i as f64 * 0.31, j as f64 * 0.29 + 0.013 * i as f64]);
            }
        }
        let dt = Delaunay::build(&pts);
        let tris = dt.triangles();
        let area: f64 = tris.iter().map(|&t| tri_area(&pts, t)).sum();
        // Convex hull of the sheared grid is a parallelogram-ish region;
        // compute hull area by the shoelace of the known corner path.
        assert!(tris.iter().all(|&t| tri_area(&pts, t) > 0.0), "CCW triangles");
        // Every input point appears.
        let mut seen = vec![false; pts.len()];
        for t in &tris {
            for &v in t {
                seen[v] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert!(area > 0.0);
    }

    #[test]
    fn delaunay_empty_circumcircle_on_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let pts: Vec<[f64; 2]> = (0..120)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let dt = Delaunay::build(&pts);
        let tris = dt.triangles();
        // Spot-check the empty circumcircle property with a small slack.
        for t in &tris {
            let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
            let (cx, cy, r2) = circumcircle(a, b, c);
            for (i, p) in pts.iter().enumerate() {
                if t.contains(&i) {
                    continue;
                }
                let d2 = (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
                assert!(
                    d2 >= r2 * (1.0 - 1e-9),
                    "point {i} strictly inside circumcircle of {t:?}"
                );
            }
        }
    }

    fn circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> (f64, f64, f64) {
        let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
        let ux = ((a[0] * a[0] + a[1] * a[1]) * (b[1] - c[1])
            + (b[0] * b[0] + b[1] * b[1]) * (c[1] - a[1])
            + (c[0] * c[0] + c[1] * c[1]) * (a[1] - b[1]))
            / d;
        let uy = ((a[0] * a[0] + a[1] * a[1]) * (c[0] - b[0])
            + (b[0] * b[0] + b[1] * b[1]) * (a[0] - c[0])
            + (c[0] * c[0] + c[1] * c[1]) * (b[0] - a[0]))
            / d;
        let r2 = (a[0] - ux).powi(2) + (a[1] - uy).powi(2);
        (ux, uy, r2)
    }
}
