//! Quickhull over a small 3-D point set, followed by merging of coplanar
//! triangles into polygonal facets.

use std::collections::BTreeSet;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Angle/offset tolerance for merging coplanar triangles into one facet.
pub const MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vector3<f64>], v: [usize; 3]) -> Self {
        let n = (points[v[1]] - points[v[0]]).cross(&(points[v[2]] - points[v[0]]));
        let normal = n.normalize();
        let offset = normal.dot(&points[v[0]]);
        Face { v, normal, offset, outside: Vec::new(), alive: true }
    }

    fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }

    fn edges(&self) -> [(usize, usize); 3] {
        [(self.v[0], self.v[1]), (self.v[1], self.v[2]), (self.v[2], self.v[0])]
    }
}

/// Raw hull description: outward unit normals with offsets, plus the indices
/// of input points that are extreme points of the hull.
#[derive(Debug, Clone)]
pub(crate) struct RawHull {
    pub planes: Vec<(Vector3<f64>, f64)>,
    pub vertex_indices: Vec<usize>,
}

pub(crate) fn length_scale(points: &[Vector3<f64>]) -> f64 {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).amax().max(1e-300)
}

fn initial_simplex(points: &[Vector3<f64>], eps: f64) -> Result<[usize; 4]> {
    // Extreme pair along the coordinate axes.
    let mut best = (0, 0, -1.0);
    for axis in 0..3 {
        let (mut imin, mut imax) = (0, 0);
        for (i, p) in points.iter().enumerate() {
            if p[axis] < points[imin][axis] {
                imin = i;
            }
            if p[axis] > points[imax][axis] {
                imax = i;
            }
        }
        let d = points[imax][axis] - points[imin][axis];
        if d > best.2 {
            best = (imin, imax, d);
        }
    }
    let (i0, i1, spread) = best;
    if spread <= eps {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let dir = (points[i1] - points[i0]).normalize();
    let (i2, d2) = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let r = p - points[i0];
            (i, (r - dir * r.dot(&dir)).norm())
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    if d2 <= eps {
        return Err(Error::Degenerate("points are collinear".into()));
    }
    let n = (points[i1] - points[i0]).cross(&(points[i2] - points[i0])).normalize();
    let (i3, d3) = points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, n.dot(&(p - points[i0])).abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    if d3 <= eps {
        return Err(Error::Degenerate("points are coplanar".into()));
    }
    Ok([i0, i1, i2, i3])
}

/// Triangulated hull via quickhull. Returns the live triangles.
fn quickhull(points: &[Vector3<f64>], eps: f64) -> Result<Vec<Face>> {
    let [a, b, c, d] = initial_simplex(points, eps)?;
    let centroid = (points[a] + points[b] + points[c] + points[d]) / 4.0;
    let mut faces: Vec<Face> = Vec::new();
    for tri in [[a, b, c], [a, c, d], [a, d, b], [b, d, c]] {
        let mut f = Face::new(points, tri);
        if f.distance(&centroid) > 0.0 {
            f = Face::new(points, [tri[0], tri[2], tri[1]]);
        }
        faces.push(f);
    }
    let simplex = [a, b, c, d];
    for (i, p) in points.iter().enumerate() {
        if simplex.contains(&i) {
            continue;
        }
        if let Some(f) = faces
            .iter_mut()
            .filter(|f| f.distance(p) > eps)
            .max_by(|x, y| x.distance(p).total_cmp(&y.distance(p)))
        {
            f.outside.push(i);
        }
    }

    let max_rounds = 4 * points.len() + 16;
    for _ in 0..max_rounds {
        let Some(fi) = faces.iter().position(|f| f.alive && !f.outside.is_empty()) else {
            return Ok(faces.into_iter().filter(|f| f.alive).collect());
        };
        let apex = *faces[fi]
            .outside
            .iter()
            .max_by(|&&x, &&y| {
                faces[fi].distance(&points[x]).total_cmp(&faces[fi].distance(&points[y]))
            })
            .unwrap();
        let p = points[apex];

        let visible: Vec<usize> = (0..faces.len())
            .filter(|&i| faces[i].alive && faces[i].distance(&p) > eps)
            .collect();
        let visible_edges: BTreeSet<(usize, usize)> =
            visible.iter().flat_map(|&i| faces[i].edges()).collect();
        let horizon: Vec<(usize, usize)> = visible_edges
            .iter()
            .copied()
            .filter(|&(u, v)| !visible_edges.contains(&(v, u)))
            .collect();

        let mut orphans = Vec::new();
        for &i in &visible {
            faces[i].alive = false;
            orphans.append(&mut faces[i].outside);
        }
        let first_new = faces.len();
        for (u, v) in horizon {
            faces.push(Face::new(points, [u, v, apex]));
        }
        for o in orphans {
            if o == apex {
                continue;
            }
            let q = points[o];
            if let Some(f) = faces[first_new..]
                .iter_mut()
                .filter(|f| f.distance(&q) > eps)
                .max_by(|x, y| x.distance(&q).total_cmp(&y.distance(&q)))
            {
                f.outside.push(o);
            }
        }
    }
    Err(Error::Degenerate("quickhull did not terminate".into()))
}

/// Builds the hull and merges coplanar triangles into facets.
pub(crate) fn build(points: &[Vector3<f64>]) -> Result<RawHull> {
    if points.len() < 4 {
        return Err(Error::Degenerate(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::Degenerate("non-finite point".into()));
    }
    let scale = length_scale(points);
    let eps = 1e-12 * scale;
    let triangles = quickhull(points, eps)?;

    // Largest triangles first so each merged facet keeps the best-conditioned normal.
    let mut order: Vec<usize> = (0..triangles.len()).collect();
    let area = |f: &Face| {
        (points[f.v[1]] - points[f.v[0]])
            .cross(&(points[f.v[2]] - points[f.v[0]]))
            .norm()
    };
    order.sort_by(|&i, &j| area(&triangles[j]).total_cmp(&area(&triangles[i])));
    let mut planes: Vec<(Vector3<f64>, f64)> = Vec::new();
    for i in order {
        let t = &triangles[i];
        let dup = planes.iter().any(|(n, d)| {
            (n - t.normal).norm() <= MERGE_TOL && (d - t.offset).abs() <= MERGE_TOL * scale
        });
        if !dup {
            planes.push((t.normal, t.offset));
        }
    }

    let on_plane_tol = 1e-10 * scale;
    let vertex_indices: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let normals: Vec<Vector3<f64>> = planes
                .iter()
                .filter(|(n, d)| (n.dot(&points[i]) - d).abs() <= on_plane_tol)
                .map(|(n, _)| *n)
                .collect();
            spans_three_dims(&normals)
        })
        .collect();
    // Drop duplicated input points so every extreme point is listed once.
    let mut unique: Vec<usize> = Vec::new();
    for i in vertex_indices {
        if !unique
            .iter()
            .any(|&j| (points[j] - points[i]).norm() <= on_plane_tol)
        {
            unique.push(i);
        }
    }

    // Re-fit each offset so that it passes through its hull vertices.
    for (n, d) in planes.iter_mut() {
        let on: Vec<f64> = unique
            .iter()
            .map(|&i| n.dot(&points[i]))
            .filter(|v| (v - *d).abs() <= on_plane_tol)
            .collect();
        if !on.is_empty() {
            *d = on.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
    }
    Ok(RawHull { planes, vertex_indices: unique })
}

pub(crate) fn spans_three_dims(normals: &[Vector3<f64>]) -> bool {
    if normals.len() < 3 {
        return false;
    }
    for i in 0..normals.len() {
        for j in i + 1..normals.len() {
            for k in j + 1..normals.len() {
                let m = Matrix3::from_columns(&[normals[i], normals[j], normals[k]]);
                if m.determinant().abs() > 1e-9 {
                    return true;
                }
            }
        }
    }
    false
}
