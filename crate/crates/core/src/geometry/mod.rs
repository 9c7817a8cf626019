//! Convex hull of the body's vertex set as linear inequalities in the body
//! frame, the supporting halfspace, and world-frame evaluation of both.

mod hull;

use nalgebra::{SVector, Vector3};

use crate::error::{Error, Result};
use crate::se3::{rotation, rotation_derivatives, RigidState};


/// One facet inequality `n·x_b - d ≤ 0` in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facet {
    /// Unit outward normal, body frame.
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Facet {
    pub fn value_body(&self, x_body: &Vector3<f64>) -> f64 {
        self.normal.dot(x_body) - self.offset
    }
}

/// Value and gradients of a facet inequality evaluated at a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetEval {
    pub value: f64,
    pub grad_x: Vector3<f64>,
    /// Gradient w.r.t. `(position, orientation)`.
    pub grad_q: SVector<f64, 7>,
}

/// Convex hull of a point set, described by its facets and extreme points.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolytope {
    pub facets: Vec<Facet>,
    pub vertices: Vec<Vector3<f64>>,
    /// Indices into `vertices` lying on each facet.
    pub facet_vertices: Vec<Vec<usize>>,
}

impl ConvexPolytope {
    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    /// Largest facet value at a body-frame point (`≤ 0` inside).
    pub fn max_violation_body(&self, x_body: &Vector3<f64>) -> f64 {
        self.facets
            .iter()
            .map(|f| f.value_body(x_body))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains_body(&self, x_body: &Vector3<f64>, tol: f64) -> bool {
        self.max_violation_body(x_body) <= tol
    }

    /// Facets incident to a given vertex.
    pub fn facets_at_vertex(&self, vertex: usize) -> impl Iterator<Item = usize> + '_ {
        self.facet_vertices
            .iter()
            .enumerate()
            .filter(move |(_, vs)| vs.contains(&vertex))
            .map(|(i, _)| i)
    }

    /// World position of every hull vertex.
    pub fn world_vertices(&self, state: &RigidState) -> Vec<Vector3<f64>> {
        let r = state.rotation();
        self.vertices.iter().map(|v| r * v + state.position).collect()
    }

    /// Centroid of the hull vertices (not the volume centroid).
    pub fn vertex_centroid(&self) -> Vector3<f64> {
        self.vertices.iter().sum::<Vector3<f64>>() / self.vertices.len() as f64
    }
}

/// Quickhull of `points` with coplanar triangles merged into facets.
pub fn convex_hull(points: &[Vector3<f64>]) -> Result<ConvexPolytope> {
    let raw = hull::build(points)?;
    let vertices: Vec<Vector3<f64>> = raw.vertex_indices.iter().map(|&i| points[i]).collect();
    let scale = hull::length_scale(points);
    let tol = 1e-10 * scale;
    let facets: Vec<Facet> = raw
        .planes
        .iter()
        .map(|(n, d)| Facet { normal: *n, offset: *d })
        .collect();
    let facet_vertices: Vec<Vec<usize>> = facets
        .iter()
        .map(|f| {
            (0..vertices.len())
                .filter(|&i| f.value_body(&vertices[i]).abs() <= tol)
                .collect()
        })
        .collect();
    if let Some(bad) = facet_vertices.iter().position(|vs| vs.len() < 3) {
        return Err(Error::Degenerate(format!(
            "facet {bad} has fewer than three vertices"
        )));
    }
    Ok(ConvexPolytope { facets, vertices, facet_vertices })
}

/// Evaluates facet `facet` at world point `x` for the body in `state`.
///
/// `value = n·(Rᵀ(x - p)) - d`, with derivatives w.r.t. `x`, `p` and the
/// (not necessarily unit) quaternion.
pub fn world_facet(facet: &Facet, state: &RigidState, x: &Vector3<f64>) -> FacetEval {
    let q = &state.orientation;
    let rel = x - state.position;
    let r = rotation(q);
    let grad_x = r * facet.normal;
    let value = grad_x.dot(&rel) - facet.offset;
    let dr = rotation_derivatives(q);
    let mut grad_q = SVector::<f64, 7>::zeros();
    grad_q.fixed_rows_mut::<3>(0).copy_from(&(-grad_x));
    for j in 0..4 {
        grad_q[3 + j] = (dr[j] * facet.normal).dot(&rel);
    }
    FacetEval { value, grad_x, grad_q }
}

/// Supporting halfspace `{x : n·x ≤ offset}` with fixed tangent basis.
///
/// The gap `g(x) = n·x - offset` is positive strictly above the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportPlane {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub tangent: Vector3<f64>,
    pub bitangent: Vector3<f64>,
}

impl SupportPlane {
    pub fn new(normal: Vector3<f64>, offset: f64) -> Result<Self> {
        let len = normal.norm();
        if !(len.is_finite() && (len - 1.0).abs() <= 1e-12) || !offset.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "plane normal must be a unit vector, got |n| = {len}"
            )));
        }
        // Project the world x axis (y if nearly parallel) to get t, then o = n × t.
        let seed = if normal.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let tangent = (seed - normal * normal.dot(&seed)).normalize();
        let bitangent = normal.cross(&tangent);
        Ok(Self { normal, offset, tangent, bitangent })
    }

    /// The plane `z = 0` with `t = x`, `o = y`.
    pub fn ground() -> Self {
        Self::new(Vector3::z(), 0.0).expect("unit normal")
    }

    pub fn gap(&self, x: &Vector3<f64>) -> f64 {
        self.normal.dot(x) - self.offset
    }

    pub fn project(&self, x: &Vector3<f64>) -> Vector3<f64> {
        x - self.normal * self.gap(x)
    }
}

/// Hull vertex of smallest gap above `plane` and that gap.
pub fn min_gap_vertex(
    poly: &ConvexPolytope,
    state: &RigidState,
    plane: &SupportPlane,
) -> (usize, f64) {
    poly.world_vertices(state)
        .iter()
        .map(|w| plane.gap(w))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("polytope has vertices")
}

/// Axis-aligned box centred at the origin.
pub fn box_vertices(half: Vector3<f64>) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                out.push(Vector3::new(sx * half.x, sy * half.y, sz * half.z));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::axis_angle;
    use std::f64::consts::FRAC_PI_4;

    fn unit_cube() -> ConvexPolytope {
        convex_hull(&box_vertices(Vector3::new(0.5, 0.5, 0.5))).unwrap()
    }

    #[test]
    fn tetrahedron_has_four_facets() {
        let s = 1.0 / 2f64.sqrt();
        let pts = [
            Vector3::new(1.0, 0.0, -s),
            Vector3::new(-1.0, 0.0, -s),
            Vector3::new(0.0, 1.0, s),
            Vector3::new(0.0, -1.0, s),
        ];
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.facets.len(), 4);
        assert_eq!(hull.vertices.len(), 4);
        assert!(hull.facet_vertices.iter().all(|v| v.len() == 3));
    }

    #[test]
    fn cube_merges_to_six_facets() {
        let hull = unit_cube();
        assert_eq!(hull.facets.len(), 6);
        assert_eq!(hull.vertices.len(), 8);
        for f in &hull.facets {
            assert!((f.normal.norm() - 1.0).abs() < 1e-12);
            assert!((f.offset - 0.5).abs() < 1e-12);
        }
        assert!(hull.facet_vertices.iter().all(|v| v.len() == 4));
    }

    #[test]
    fn interior_and_duplicate_points_are_dropped() {
        let mut pts = box_vertices(Vector3::new(1.0, 2.0, 3.0));
        pts.push(Vector3::zeros());
        pts.push(Vector3::new(1.0, 0.0, 0.0)); // face centre
        pts.push(Vector3::new(1.0, 2.0, 0.0)); // edge midpoint
        pts.push(pts[0]);
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.facets.len(), 6);
        assert_eq!(hull.vertices.len(), 8);
    }

    #[test]
    fn degenerate_inputs() {
        let planar = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
        ];
        assert!(matches!(convex_hull(&planar), Err(Error::Degenerate(_))));
        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(convex_hull(&line), Err(Error::Degenerate(_))));
        assert!(matches!(convex_hull(&planar[..3]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn world_facet_on_plane_and_translation() {
        let hull = unit_cube();
        let top = hull.facets.iter().find(|f| f.normal.z > 0.9).unwrap();
        let s = RigidState::at_rest(Vector3::zeros());
        let e = world_facet(top, &s, &Vector3::new(0.1, -0.2, 0.5));
        assert!(e.value.abs() < 1e-15);

        let t = Vector3::new(0.3, -1.0, 2.0);
        let moved = RigidState::at_rest(t);
        let x = Vector3::new(0.2, 0.1, 0.9);
        let a = world_facet(top, &moved, &(x + t)).value;
        assert!((a - top.value_body(&x)).abs() < 1e-14);
    }

    #[test]
    fn world_facet_gradients_match_finite_differences() {
        let hull = unit_cube();
        let mut s = RigidState::at_rest(Vector3::new(0.2, 0.1, -0.3));
        s.orientation = axis_angle(Vector3::new(0.3, -1.0, 0.4), 1.1) * 1.05;
        let x = Vector3::new(0.4, 0.6, -0.1);
        let eps = 1e-6;
        for f in &hull.facets {
            let e = world_facet(f, &s, &x);
            for j in 0..7 {
                let mut sp = s;
                let mut sm = s;
                if j < 3 {
                    sp.position[j] += eps;
                    sm.position[j] -= eps;
                } else {
                    sp.orientation[j - 3] += eps;
                    sm.orientation[j - 3] -= eps;
                }
                let fd = (world_facet(f, &sp, &x).value - world_facet(f, &sm, &x).value)
                    / (2.0 * eps);
                assert!((fd - e.grad_q[j]).abs() < 1e-6, "q component {j}");
            }
            for j in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += eps;
                xm[j] -= eps;
                let fd = (world_facet(f, &s, &xp).value - world_facet(f, &s, &xm).value)
                    / (2.0 * eps);
                assert!((fd - e.grad_x[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn min_gap_cases() {
        let hull = unit_cube();
        let plane = SupportPlane::ground();
        let flat = RigidState::at_rest(Vector3::new(0.0, 0.0, 0.5));
        let (i, gap) = min_gap_vertex(&hull, &flat, &plane);
        assert!(gap.abs() < 1e-15);
        assert!(hull.vertices[i].z < 0.0);

        let lifted = RigidState::at_rest(Vector3::new(0.0, 0.0, 0.6));
        assert!((min_gap_vertex(&hull, &lifted, &plane).1 - 0.1).abs() < 1e-15);

        // 45° about x: the lowest edge is parallel to x at depth √2/2 below the centre.
        let mut tilted = RigidState::at_rest(Vector3::new(0.0, 0.0, 1.0));
        tilted.orientation = axis_angle(Vector3::x(), FRAC_PI_4);
        let (i, gap) = min_gap_vertex(&hull, &tilted, &plane);
        assert!((gap - (1.0 - 0.5f64.sqrt())).abs() < 1e-12);
        let lowest: Vec<usize> = hull
            .world_vertices(&tilted)
            .iter()
            .enumerate()
            .filter(|(_, w)| (plane.gap(w) - gap).abs() < 1e-12)
            .map(|(j, _)| j)
            .collect();
        assert_eq!(lowest.len(), 2);
        assert!(lowest.contains(&i));
    }

    #[test]
    fn plane_frame_is_orthonormal() {
        let p = SupportPlane::ground();
        assert_eq!(p.tangent, Vector3::x());
        assert_eq!(p.bitangent, Vector3::y());
        let q = SupportPlane::new(Vector3::new(1.0, 1.0, 1.0).normalize(), 0.2).unwrap();
        assert!(q.tangent.dot(&q.normal).abs() < 1e-15);
        assert!((q.normal.cross(&q.tangent) - q.bitangent).norm() < 1e-15);
        assert!(SupportPlane::new(Vector3::new(0.0, 0.0, 2.0), 0.0).is_err());
        assert!(q.gap(&(q.normal * 1.2)) > 0.0);
    }
}
