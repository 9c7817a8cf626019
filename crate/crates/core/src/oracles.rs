//! Independent reference computations: closed-form friction decay,
//! brute-force hulls and closest points, and a grid search for the
//! maximum-dissipation friction impulse.
//!
//! Nothing here calls the solver, the residual assembly or the quickhull
//! code, so these references cannot share their bugs.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::geometry::{ConvexPolytope, SupportPlane};
use crate::se3::RigidState;

/// Tagged oracle output, as printed by the command-line tool.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub method: &'static str,
    pub values: Vec<f64>,
}

/// Speed of a block sliding on a flat patch under Coulomb friction with an
/// implicit Euler step: `v_{k+1} = max(0, v_k - h μ g)`. Entry 0 is `v0`.
pub fn sliding_block_velocity(v0: f64, mu: f64, g: f64, h: f64, n_steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut v = v0;
    out.push(v);
    for _ in 0..n_steps {
        v = (v - h * mu * g).max(0.0);
        out.push(v);
    }
    out
}

/// Spin rate of a flat patch turning about its normal through the centre of
/// mass: `ω_{k+1} = max(0, ω_k - h μ e_r m g / I_zz)`. Entry 0 is `w0`.
#[allow(clippy::too_many_arguments)]
pub fn spinning_patch_rate(
    w0: f64,
    mu: f64,
    e_r: f64,
    m: f64,
    g: f64,
    izz: f64,
    h: f64,
    n_steps: usize,
) -> Vec<f64> {
    let decel = h * mu * e_r * m * g / izz;
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut w = w0;
    out.push(w);
    for _ in 0..n_steps {
        w = (w - decel).max(0.0);
        out.push(w);
    }
    out
}

/// Closest points between a posed polytope and a halfspace.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosestPoints {
    /// Centroid of the tied lowest vertices (world frame).
    pub a1: Vector3<f64>,
    /// Projection of `a1` onto the plane.
    pub a2: Vector3<f64>,
    pub gap: f64,
    /// Indices of the hull vertices attaining the minimum gap.
    pub ties: Vec<usize>,
}

fn world_points(poly: &ConvexPolytope, state: &RigidState) -> Vec<Vector3<f64>> {
    let q = state.orientation;
    let rot = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
    poly.vertices.iter().map(|v| rot * v + state.position).collect()
}

/// Vertex enumeration: the minimizer over a polytope of the signed distance
/// to a plane is attained at a vertex; tied vertices span the optimal face.
pub fn closest_point_bruteforce(
    poly: &ConvexPolytope,
    state: &RigidState,
    plane: &SupportPlane,
) -> ClosestPoints {
    let pts = world_points(poly, state);
    let gaps: Vec<f64> = pts.iter().map(|p| plane.normal.dot(p) - plane.offset).collect();
    let gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let ties: Vec<usize> = (0..pts.len()).filter(|&i| gaps[i] <= gap + 1e-12).collect();
    let a1 = ties.iter().map(|&i| pts[i]).sum::<Vector3<f64>>() / ties.len() as f64;
    let a2 = a1 - plane.normal * (plane.normal.dot(&a1) - plane.offset);
    ClosestPoints { a1, a2, gap, ties }
}

/// Maximizes `-(v_t p_t + v_o p_o + v_r p_r)` over the boundary of the
/// friction ellipsoid by sampling `grid_n × grid_n` spherical angles.
/// Returns zeros when the relative velocity vanishes.
#[allow(clippy::too_many_arguments)]
pub fn dissipation_grid_max(
    v_t: f64,
    v_o: f64,
    v_r: f64,
    mu: f64,
    p_n: f64,
    e_t: f64,
    e_o: f64,
    e_r: f64,
    grid_n: usize,
) -> [f64; 3] {
    if v_t == 0.0 && v_o == 0.0 && v_r == 0.0 {
        return [0.0; 3];
    }
    let radius = mu * p_n;
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for i in 0..=grid_n {
        let theta = PI * i as f64 / grid_n as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..grid_n {
            let phi = TAU * j as f64 / grid_n as f64;
            let (sp, cp) = phi.sin_cos();
            let p = [radius * e_t * st * cp, radius * e_o * st * sp, radius * e_r * ct];
            let power = -(v_t * p[0] + v_o * p[1] + v_r * p[2]);
            if power > best.0 {
                best = (power, p);
            }
        }
    }
    best.1
}

/// Angular spacing of [`dissipation_grid_max`] samples, `(Δθ, Δφ)`.
pub fn grid_spacing(grid_n: usize) -> (f64, f64) {
    (PI / grid_n as f64, TAU / grid_n as f64)
}

/// Hull facets and extreme points found by testing every point triple as a
/// candidate supporting plane. `O(n⁴)`; only for small sets.
pub fn hull_bruteforce(points: &[Vector3<f64>], tol: f64) -> (Vec<(Vector3<f64>, f64)>, Vec<usize>) {
    let n = points.len();
    let mut planes: Vec<(Vector3<f64>, f64)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let c = (points[j] - points[i]).cross(&(points[k] - points[i]));
                if c.norm() <= tol {
                    continue;
                }
                let mut normal = c.normalize();
                let mut d = normal.dot(&points[i]);
                let above = points.iter().filter(|p| normal.dot(p) - d > tol).count();
                let below = points.iter().filter(|p| normal.dot(p) - d < -tol).count();
                if above > 0 && below > 0 {
                    continue;
                }
                if above > 0 {
                    normal = -normal;
                    d = -d;
                }
                if !planes
                    .iter()
                    .any(|(m, e)| (m - normal).norm() <= 1e-9 && (e - d).abs() <= 1e-9)
                {
                    planes.push((normal, d));
                }
            }
        }
    }
    let mut extreme: Vec<usize> = Vec::new();
    for i in 0..n {
        let active: Vec<Vector3<f64>> = planes
            .iter()
            .filter(|(m, e)| (m.dot(&points[i]) - e).abs() <= tol)
            .map(|(m, _)| *m)
            .collect();
        let full_rank = active.iter().enumerate().any(|(a, x)| {
            active[a + 1..].iter().enumerate().any(|(b, y)| {
                active[a + 2 + b..]
                    .iter()
                    .any(|z| Matrix3::from_columns(&[*x, *y, *z]).determinant().abs() > 1e-9)
            })
        });
        if full_rank && !extreme.iter().any(|&j| (points[j] - points[i]).norm() <= tol) {
            extreme.push(i);
        }
    }
    (planes, extreme)
}

/// Whether `x` is a convex combination of `points`, by searching all
/// tetrahedra (Carathéodory) for non-negative barycentric coordinates.
pub fn in_hull_barycentric(points: &[Vector3<f64>], x: &Vector3<f64>, tol: f64) -> bool {
    let n = points.len();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let m = Matrix3::from_columns(&[
                        points[b] - points[a],
                        points[c] - points[a],
                        points[d] - points[a],
                    ]);
                    let Some(inv) = m.try_inverse() else { continue };
                    if m.determinant().abs() < 1e-14 {
                        continue;
                    }
                    let l = inv * (x - points[a]);
                    if l.iter().all(|&w| w >= -tol) && l.sum() <= 1.0 + tol {
                        return true;
                    }
                }
            }
        }
    }
    false
}
