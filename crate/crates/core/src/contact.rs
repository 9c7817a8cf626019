//! Per-step mixed nonlinear complementarity residual: discretized
//! Newton-Euler equations, kinematic update, equivalent-contact-point
//! constraints on the convex hull and the elliptic friction law.
//!
//! The unknown vector has `25 + m` entries (`m` hull facets), laid out as
//! `[v, ω, p, q, a1, a2, p_n, p_t, p_o, p_r, σ, l_1..l_m, l_plane]`.
//! Rows are the 23 equations followed by `m + 2` complementarity pairs, each
//! stored as an `(x, y)` pair of rows with `0 ≤ x ⊥ y ≥ 0`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector4, Vector6};

use crate::error::{Error, Result};
use crate::geometry::{world_facet, ConvexPolytope, SupportPlane};
use crate::se3::{
    kinematic_map_unchecked, rotation, rotation_derivatives, InertialProperties, RigidState,
};
use crate::solver::MncpEval;

pub const V: usize = 0;
pub const W: usize = 3;
pub const POS: usize = 6;
pub const QUAT: usize = 9;
pub const A1: usize = 13;
pub const A2: usize = 16;
pub const PN: usize = 19;
pub const PT: usize = 20;
pub const PO: usize = 21;
pub const PR: usize = 22;
pub const SIGMA: usize = 23;
pub const L_HULL: usize = 24;

/// Number of plain equation rows.
pub const NUM_EQUATIONS: usize = 23;

pub fn num_unknowns(num_facets: usize) -> usize {
    25 + num_facets
}

pub fn l_plane_index(num_facets: usize) -> usize {
    L_HULL + num_facets
}

/// Coulomb friction coefficient and ellipsoid semi-axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionParams {
    pub mu: f64,
    pub e_t: f64,
    pub e_o: f64,
    /// Length scale of the torsional axis (m).
    pub e_r: f64,
}

impl FrictionParams {
    pub fn new(mu: f64, e_t: f64, e_o: f64, e_r: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be non-negative, got {mu}")));
        }
        for (name, v) in [("e_t", e_t), ("e_o", e_o), ("e_r", e_r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { mu, e_t, e_o, e_r })
    }

    /// `μ²p_n² - p_t²/e_t² - p_o²/e_o² - p_r²/e_r²`, non-negative inside the cone.
    pub fn cone_slack(&self, p_n: f64, p_t: f64, p_o: f64, p_r: f64) -> f64 {
        self.mu * self.mu * p_n * p_n
            - (p_t / self.e_t).powi(2)
            - (p_o / self.e_o).powi(2)
            - (p_r / self.e_r).powi(2)
    }
}

/// Equivalent contact points, contact impulses and multipliers of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactVariables {
    /// Contact point on the body's hull (world frame).
    pub a1: Vector3<f64>,
    /// Contact point on the support plane (world frame).
    pub a2: Vector3<f64>,
    pub p_n: f64,
    pub p_t: f64,
    pub p_o: f64,
    pub p_r: f64,
    pub sigma: f64,
    /// One multiplier per hull facet. The entry of the active facet is the
    /// scaling unknown of the separation direction.
    pub l_hull: Vec<f64>,
    pub l_plane: f64,
}

impl ContactVariables {
    pub fn zeros(num_facets: usize) -> Self {
        Self {
            a1: Vector3::zeros(),
            a2: Vector3::zeros(),
            p_n: 0.0,
            p_t: 0.0,
            p_o: 0.0,
            p_r: 0.0,
            sigma: 0.0,
            l_hull: vec![0.0; num_facets],
            l_plane: 0.0,
        }
    }
}

/// All end-of-step unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct StepUnknowns {
    pub state_next: RigidState,
    pub contact: ContactVariables,
}

impl StepUnknowns {
    pub fn dim(&self) -> usize {
        num_unknowns(self.contact.l_hull.len())
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let m = self.contact.l_hull.len();
        let mut z = DVector::zeros(num_unknowns(m));
        let s = &self.state_next;
        let c = &self.contact;
        z.fixed_rows_mut::<3>(V).copy_from(&s.linear_velocity);
        z.fixed_rows_mut::<3>(W).copy_from(&s.angular_velocity);
        z.fixed_rows_mut::<3>(POS).copy_from(&s.position);
        z.fixed_rows_mut::<4>(QUAT).copy_from(&s.orientation);
        z.fixed_rows_mut::<3>(A1).copy_from(&c.a1);
        z.fixed_rows_mut::<3>(A2).copy_from(&c.a2);
        z[PN] = c.p_n;
        z[PT] = c.p_t;
        z[PO] = c.p_o;
        z[PR] = c.p_r;
        z[SIGMA] = c.sigma;
        z.rows_mut(L_HULL, m).copy_from_slice(&c.l_hull);
        z[l_plane_index(m)] = c.l_plane;
        z
    }

    pub fn from_vector(z: &DVector<f64>, num_facets: usize) -> Result<Self> {
        let n = num_unknowns(num_facets);
        if z.len() != n {
            return Err(Error::Dimension { expected: n, got: z.len() });
        }
        let v3 = |i: usize| Vector3::new(z[i], z[i + 1], z[i + 2]);
        Ok(Self {
            state_next: RigidState {
                position: v3(POS),
                orientation: Vector4::new(z[QUAT], z[QUAT + 1], z[QUAT + 2], z[QUAT + 3]),
                linear_velocity: v3(V),
                angular_velocity: v3(W),
            },
            contact: ContactVariables {
                a1: v3(A1),
                a2: v3(A2),
                p_n: z[PN],
                p_t: z[PT],
                p_o: z[PO],
                p_r: z[PR],
                sigma: z[SIGMA],
                l_hull: z.rows(L_HULL, num_facets).iter().copied().collect(),
                l_plane: z[l_plane_index(num_facets)],
            },
        })
    }
}

/// Contact wrench directions `(W_n, W_t, W_o, W_r)` at contact point `a1`.
pub fn wrench_basis(
    state_next: &RigidState,
    a1: &Vector3<f64>,
    plane: &SupportPlane,
) -> [Vector6<f64>; 4] {
    let r = a1 - state_next.position;
    let stack = |f: Vector3<f64>, m: Vector3<f64>| {
        Vector6::new(f.x, f.y, f.z, m.x, m.y, m.z)
    };
    [
        stack(plane.normal, r.cross(&plane.normal)),
        stack(plane.tangent, r.cross(&plane.tangent)),
        stack(plane.bitangent, r.cross(&plane.bitangent)),
        stack(Vector3::zeros(), plane.normal),
    ]
}

/// Everything about a step that is fixed while its unknowns are solved for.
#[derive(Debug, Clone)]
pub struct StepContext<'a> {
    pub poly: &'a ConvexPolytope,
    pub plane: SupportPlane,
    pub friction: FrictionParams,
    pub props: InertialProperties,
    pub prev: RigidState,
    pub h: f64,
    /// `h` times the applied wrench (gravity included) at the start of the step.
    pub applied_impulse: Vector6<f64>,
    /// Gyroscopic impulse at the start of the step.
    pub velocity_product: Vector6<f64>,
    /// Index of the active facet whose gradient carries unit weight.
    pub active_facet: usize,
    /// Characteristic impulse dividing impulse-valued rows.
    pub impulse_scale: f64,
}

/// Values and Jacobian of a group of residual rows.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub values: DVector<f64>,
    pub jacobian: DMatrix<f64>,
}

impl ResidualBlock {
    fn new(rows: usize, cols: usize) -> Self {
        Self { values: DVector::zeros(rows), jacobian: DMatrix::zeros(rows, cols) }
    }
}

/// A complementarity pair `0 ≤ x ⊥ y ≥ 0` with gradients.
#[derive(Debug, Clone)]
pub struct PairBlock {
    pub label: PairLabel,
    pub x: f64,
    pub grad_x: DVector<f64>,
    pub y: f64,
    pub grad_y: DVector<f64>,
}

/// Which constraint a complementarity pair encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    /// `l_i ⊥ -f_i(a1)`
    Facet(usize),
    /// `l_plane ⊥ -g(a2)`
    Plane,
    /// `p_n ⊥ g(a1)`
    NonPenetration,
    /// `σ ⊥ friction cone slack`
    FrictionCone,
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    v.cross_matrix()
}

fn split(z: &DVector<f64>, m: usize) -> Result<StepUnknowns> {
    StepUnknowns::from_vector(z, m)
}

/// Discretized Newton-Euler (6 rows, impulse rows divided by the impulse
/// scale) and kinematic update (7 rows).
pub fn dynamics_residual(ctx: &StepContext<'_>, z: &DVector<f64>) -> Result<ResidualBlock> {
    let m = ctx.poly.num_facets();
    let u = split(z, m)?;
    let n = z.len();
    let s = &u.state_next;
    let c = &u.contact;
    let plane = &ctx.plane;
    let mut out = ResidualBlock::new(13, n);
    let scale = 1.0 / ctx.impulse_scale;

    let q = s.orientation;
    let rot = rotation(&q);
    let dr = rotation_derivatives(&q);
    let inertia = ctx.props.body_inertia;
    let spatial = rot * inertia * rot.transpose();
    let dw = s.angular_velocity - ctx.prev.angular_velocity;
    let dv = s.linear_velocity - ctx.prev.linear_velocity;
    let r = c.a1 - s.position;
    let force = plane.normal * c.p_n + plane.tangent * c.p_t + plane.bitangent * c.p_o;
    let moment = r.cross(&force) + plane.normal * c.p_r;

    let lin = -dv * ctx.props.mass
        + force
        + ctx.applied_impulse.fixed_rows::<3>(0)
        + ctx.velocity_product.fixed_rows::<3>(0);
    let ang = -spatial * dw
        + moment
        + ctx.applied_impulse.fixed_rows::<3>(3)
        + ctx.velocity_product.fixed_rows::<3>(3);
    out.values.fixed_rows_mut::<3>(0).copy_from(&(lin * scale));
    out.values.fixed_rows_mut::<3>(3).copy_from(&(ang * scale));

    let j = &mut out.jacobian;
    j.fixed_view_mut::<3, 3>(0, V)
        .copy_from(&(Matrix3::identity() * (-ctx.props.mass * scale)));
    for (col, dir) in [(PN, plane.normal), (PT, plane.tangent), (PO, plane.bitangent)] {
        j.fixed_view_mut::<3, 1>(0, col).copy_from(&(dir * scale));
        j.fixed_view_mut::<3, 1>(3, col).copy_from(&(r.cross(&dir) * scale));
    }
    j.fixed_view_mut::<3, 1>(3, PR).copy_from(&(plane.normal * scale));
    j.fixed_view_mut::<3, 3>(3, W).copy_from(&(-spatial * scale));
    j.fixed_view_mut::<3, 3>(3, A1).copy_from(&(-skew(&force) * scale));
    j.fixed_view_mut::<3, 3>(3, POS).copy_from(&(skew(&force) * scale));
    for k in 0..4 {
        let d_spatial = dr[k] * inertia * rot.transpose() + rot * inertia * dr[k].transpose();
        j.fixed_view_mut::<3, 1>(3, QUAT + k)
            .copy_from(&(-d_spatial * dw * scale));
    }

    // -q⁺ + q + h G(q) ν⁺
    let g = kinematic_map_unchecked(&ctx.prev.orientation);
    let nu = s.velocity();
    let step = g * nu * ctx.h;
    for i in 0..3 {
        out.values[6 + i] = -s.position[i] + ctx.prev.position[i] + step[i];
    }
    for i in 0..4 {
        out.values[9 + i] = -q[i] + ctx.prev.orientation[i] + step[3 + i];
    }
    let j = &mut out.jacobian;
    j.view_mut((6, V), (7, 6)).copy_from(&(g * ctx.h));
    for i in 0..7 {
        j[(6 + i, POS + i)] = -1.0;
    }
    Ok(out)
}

/// Hull/plane closest-point conditions: 7 equation rows and `m + 1` pairs
/// (inactive facet multipliers, plane multiplier, non-penetration).
///
/// The active facet contributes the equation `f_k(a1) = 0` rather than a
/// pair. As a pair, `l_k = 0` would admit any `a1` strictly inside the hull
/// once the plane is touched, i.e. a body sinking through the plane.
pub fn ecp_residual(
    ctx: &StepContext<'_>,
    z: &DVector<f64>,
) -> Result<(ResidualBlock, Vec<PairBlock>)> {
    let m = ctx.poly.num_facets();
    let k = ctx.active_facet;
    if k >= m {
        return Err(Error::Configuration(format!(
            "active facet index {k} out of range for {m} facets"
        )));
    }
    let u = split(z, m)?;
    let n = z.len();
    let s = &u.state_next;
    let c = &u.contact;
    let plane = &ctx.plane;
    let lp_idx = l_plane_index(m);

    let q = s.orientation;
    let rot = rotation(&q);
    let dr = rotation_derivatives(&q);

    // ñ = n_k + Σ_{i≠k} l_i n_i in the body frame; ∇C = R ñ.
    let mut weighted = ctx.poly.facets[k].normal;
    for (i, f) in ctx.poly.facets.iter().enumerate() {
        if i != k {
            weighted += f.normal * c.l_hull[i];
        }
    }
    let grad_c = rot * weighted;
    let l_k = c.l_hull[k];

    let mut eqs = ResidualBlock::new(7, n);
    let sep = c.a1 - c.a2 + grad_c * l_k;
    eqs.values.fixed_rows_mut::<3>(0).copy_from(&sep);
    let align = grad_c + plane.normal * c.l_plane;
    eqs.values.fixed_rows_mut::<3>(3).copy_from(&align);

    let j = &mut eqs.jacobian;
    j.fixed_view_mut::<3, 3>(0, A1).copy_from(&Matrix3::identity());
    j.fixed_view_mut::<3, 3>(0, A2).copy_from(&(-Matrix3::identity()));
    j.fixed_view_mut::<3, 1>(0, L_HULL + k).copy_from(&grad_c);
    for (i, f) in ctx.poly.facets.iter().enumerate() {
        if i != k {
            let g = rot * f.normal;
            j.fixed_view_mut::<3, 1>(0, L_HULL + i).copy_from(&(g * l_k));
            j.fixed_view_mut::<3, 1>(3, L_HULL + i).copy_from(&g);
        }
    }
    for a in 0..4 {
        let d = dr[a] * weighted;
        j.fixed_view_mut::<3, 1>(0, QUAT + a).copy_from(&(d * l_k));
        j.fixed_view_mut::<3, 1>(3, QUAT + a).copy_from(&d);
    }
    j.fixed_view_mut::<3, 1>(3, lp_idx).copy_from(&plane.normal);

    let on_k = world_facet(&ctx.poly.facets[k], s, &c.a1);
    eqs.values[6] = on_k.value;
    j.fixed_view_mut::<1, 3>(6, A1).copy_from(&on_k.grad_x.transpose());
    j.fixed_view_mut::<1, 7>(6, POS).copy_from(&on_k.grad_q.transpose());

    let mut pairs = Vec::with_capacity(m + 1);
    for (i, f) in ctx.poly.facets.iter().enumerate() {
        if i == k {
            continue;
        }
        let e = world_facet(f, s, &c.a1);
        let mut gx = DVector::zeros(n);
        gx[L_HULL + i] = 1.0;
        let mut gy = DVector::zeros(n);
        gy.fixed_rows_mut::<3>(A1).copy_from(&(-e.grad_x));
        gy.fixed_rows_mut::<7>(POS).copy_from(&(-e.grad_q));
        pairs.push(PairBlock {
            label: PairLabel::Facet(i),
            x: c.l_hull[i],
            grad_x: gx,
            y: -e.value,
            grad_y: gy,
        });
    }

    let mut gx = DVector::zeros(n);
    gx[lp_idx] = 1.0;
    let mut gy = DVector::zeros(n);
    gy.fixed_rows_mut::<3>(A2).copy_from(&(-plane.normal));
    pairs.push(PairBlock {
        label: PairLabel::Plane,
        x: c.l_plane,
        grad_x: gx,
        y: -plane.gap(&c.a2),
        grad_y: gy,
    });

    let mut gx = DVector::zeros(n);
    gx[PN] = 1.0 / ctx.impulse_scale;
    let mut gy = DVector::zeros(n);
    gy.fixed_rows_mut::<3>(A1).copy_from(&plane.normal);
    pairs.push(PairBlock {
        label: PairLabel::NonPenetration,
        x: c.p_n / ctx.impulse_scale,
        grad_x: gx,
        y: plane.gap(&c.a1),
        grad_y: gy,
    });
    Ok((eqs, pairs))
}

/// Elliptic friction law: three rows `e²μ p_n Wᵀν + p σ = 0` (divided by the
/// impulse scale) and the pair `σ ⊥ cone slack` (slack divided by the squared
/// impulse scale).
pub fn friction_residual(
    ctx: &StepContext<'_>,
    z: &DVector<f64>,
) -> Result<(ResidualBlock, PairBlock)> {
    let m = ctx.poly.num_facets();
    let u = split(z, m)?;
    let n = z.len();
    let s = &u.state_next;
    let c = &u.contact;
    let plane = &ctx.plane;
    let fp = &ctx.friction;
    let scale = 1.0 / ctx.impulse_scale;
    let omega = s.angular_velocity;
    let r = c.a1 - s.position;

    let mut eqs = ResidualBlock::new(3, n);
    for (row, (dir, e, p, col)) in [
        (plane.tangent, fp.e_t, c.p_t, PT),
        (plane.bitangent, fp.e_o, c.p_o, PO),
    ]
    .into_iter()
    .enumerate()
    {
        // Wᵀν = dir·v + (r × dir)·ω
        let slip = dir.dot(&s.linear_velocity) + r.cross(&dir).dot(&omega);
        let coef = e * e * fp.mu;
        eqs.values[row] = (coef * c.p_n * slip + p * c.sigma) * scale;
        let j = &mut eqs.jacobian;
        let w = coef * c.p_n * scale;
        j.fixed_view_mut::<1, 3>(row, V).copy_from(&(dir.transpose() * w));
        j.fixed_view_mut::<1, 3>(row, W)
            .copy_from(&(r.cross(&dir).transpose() * w));
        let dr = dir.cross(&omega);
        j.fixed_view_mut::<1, 3>(row, A1).copy_from(&(dr.transpose() * w));
        j.fixed_view_mut::<1, 3>(row, POS).copy_from(&(-dr.transpose() * w));
        j[(row, PN)] = coef * slip * scale;
        j[(row, col)] = c.sigma * scale;
        j[(row, SIGMA)] = p * scale;
    }
    let spin = plane.normal.dot(&omega);
    let coef = fp.e_r * fp.e_r * fp.mu;
    eqs.values[2] = (coef * c.p_n * spin + c.p_r * c.sigma) * scale;
    let j = &mut eqs.jacobian;
    j.fixed_view_mut::<1, 3>(2, W)
        .copy_from(&(plane.normal.transpose() * (coef * c.p_n * scale)));
    j[(2, PN)] = coef * spin * scale;
    j[(2, PR)] = c.sigma * scale;
    j[(2, SIGMA)] = c.p_r * scale;

    let s2 = scale * scale;
    let mut gx = DVector::zeros(n);
    gx[SIGMA] = 1.0;
    let mut gy = DVector::zeros(n);
    gy[PN] = 2.0 * fp.mu * fp.mu * c.p_n * s2;
    gy[PT] = -2.0 * c.p_t / (fp.e_t * fp.e_t) * s2;
    gy[PO] = -2.0 * c.p_o / (fp.e_o * fp.e_o) * s2;
    gy[PR] = -2.0 * c.p_r / (fp.e_r * fp.e_r) * s2;
    let pair = PairBlock {
        label: PairLabel::FrictionCone,
        x: c.sigma,
        grad_x: gx,
        y: fp.cone_slack(c.p_n, c.p_t, c.p_o, c.p_r) * s2,
        grad_y: gy,
    };
    Ok((eqs, pair))
}

/// Full residual of one step together with the meaning of every pair.
#[derive(Debug, Clone)]
pub struct AssembledResidual {
    pub eval: MncpEval,
    pub pair_labels: Vec<PairLabel>,
}

/// Concatenates dynamics, contact-point and friction rows. Equation rows come
/// first (23 of them), then one `(x, y)` row pair per complementarity pair.
pub fn assemble(ctx: &StepContext<'_>, z: &DVector<f64>) -> Result<AssembledResidual> {
    let m = ctx.poly.num_facets();
    let n = num_unknowns(m);
    if z.len() != n {
        return Err(Error::Dimension { expected: n, got: z.len() });
    }
    let dyn_block = dynamics_residual(ctx, z)?;
    let (ecp_block, mut pairs) = ecp_residual(ctx, z)?;
    let (fric_block, cone) = friction_residual(ctx, z)?;
    pairs.push(cone);

    let rows = NUM_EQUATIONS + 2 * pairs.len();
    let mut values = DVector::zeros(rows);
    let mut jacobian = DMatrix::zeros(rows, n);
    let mut row = 0;
    for b in [&dyn_block, &ecp_block, &fric_block] {
        let r = b.values.len();
        values.rows_mut(row, r).copy_from(&b.values);
        jacobian.view_mut((row, 0), (r, n)).copy_from(&b.jacobian);
        row += r;
    }
    debug_assert_eq!(row, NUM_EQUATIONS);
    for p in &pairs {
        values[row] = p.x;
        jacobian.row_mut(row).copy_from(&p.grad_x.transpose());
        values[row + 1] = p.y;
        jacobian.row_mut(row + 1).copy_from(&p.grad_y.transpose());
        row += 2;
    }
    let num_pairs = pairs.len();
    if NUM_EQUATIONS + num_pairs != n {
        return Err(Error::Dimension { expected: n, got: NUM_EQUATIONS + num_pairs });
    }
    Ok(AssembledResidual {
        eval: MncpEval { values, jacobian, num_equations: NUM_EQUATIONS },
        pair_labels: pairs.iter().map(|p| p.label).collect(),
    })
}

/// Chooses the active facet for a step: among facets incident to the lowest
/// hull vertices at `state`, the one whose world normal points most against
/// the plane normal.
pub fn select_active_facet(
    poly: &ConvexPolytope,
    state: &RigidState,
    plane: &SupportPlane,
) -> usize {
    let rot = state.rotation();
    let gaps: Vec<f64> = poly
        .world_vertices(state)
        .iter()
        .map(|w| plane.gap(w))
        .collect();
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (1.0 + min_gap.abs());
    let mut candidates: Vec<usize> = gaps
        .iter()
        .enumerate()
        .filter(|(_, g)| **g <= min_gap + tol)
        .flat_map(|(v, _)| poly.facets_at_vertex(v).collect::<Vec<_>>())
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    candidates
        .into_iter()
        .min_by(|&a, &b| {
            let da = (rot * poly.facets[a].normal).dot(&plane.normal);
            let db = (rot * poly.facets[b].normal).dot(&plane.normal);
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .expect("every hull vertex lies on a facet")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_vertices, convex_hull};
    use crate::se3::{axis_angle, velocity_product_impulse};
    use crate::solver::reformulate;

    const G: f64 = 9.8;

    fn cube() -> ConvexPolytope {
        convex_hull(&box_vertices(Vector3::new(0.5, 0.5, 0.5))).unwrap()
    }

    fn context(poly: &ConvexPolytope, prev: RigidState, h: f64, mass: f64) -> StepContext<'_> {
        let props = InertialProperties::diagonal(mass, 0.2, 0.3, 0.4).unwrap();
        let plane = SupportPlane::ground();
        let mut applied = Vector6::zeros();
        applied[2] = -mass * G * h;
        StepContext {
            poly,
            plane,
            friction: FrictionParams::new(0.3, 1.0, 1.0, 0.1).unwrap(),
            props,
            prev,
            h,
            applied_impulse: applied,
            velocity_product: velocity_product_impulse(&prev, &props, h),
            active_facet: select_active_facet(poly, &prev, &plane),
            impulse_scale: mass * G * h,
        }
    }

    fn static_point(poly: &ConvexPolytope, h: f64, mass: f64) -> StepUnknowns {
        let prev = RigidState::at_rest(Vector3::new(0.0, 0.0, 0.5));
        let mut c = ContactVariables::zeros(poly.num_facets());
        c.p_n = h * mass * G;
        c.l_plane = 1.0;
        StepUnknowns { state_next: prev, contact: c }
    }

    #[test]
    fn wrench_basis_cases() {
        let plane = SupportPlane::ground();
        let s = RigidState::at_rest(Vector3::new(0.0, 0.0, 0.5));
        let [wn, _, _, wr] = wrench_basis(&s, &Vector3::zeros(), &plane);
        assert_eq!(wn, Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0));
        assert_eq!(wr.fixed_rows::<3>(0).norm(), 0.0);

        let s = RigidState::at_rest(Vector3::zeros());
        let [wn, wt, wo, wr] = wrench_basis(&s, &Vector3::new(1.0, 0.0, 0.0), &plane);
        assert_eq!(wn.fixed_rows::<3>(3).into_owned(), Vector3::new(0.0, -1.0, 0.0));
        for w in [wt, wo] {
            assert_eq!(w.fixed_rows::<3>(0).dot(&plane.normal), 0.0);
        }
        assert_eq!(wr, Vector6::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn static_equilibrium_residual_vanishes() {
        let poly = cube();
        let (h, mass) = (0.01, 15.0);
        let z = static_point(&poly, h, mass);
        let ctx = context(&poly, z.state_next, h, mass);
        assert!(ctx.poly.facets[ctx.active_facet].normal.z < -0.99);
        let res = assemble(&ctx, &z.to_vector()).unwrap();
        assert_eq!(res.eval.values.len(), 23 + 2 * (5 + 3));
        let (phi, _) = reformulate(&res.eval);
        assert_eq!(phi.len(), 31);
        assert!(phi.amax() < 1e-12, "{phi}");
        // p_n balances gravity exactly: 15 · 9.8 · 0.01
        assert!((z.contact.p_n - 1.47).abs() < 1e-12);
    }

    #[test]
    fn perturbing_normal_impulse_touches_only_momentum_and_gap_rows() {
        let poly = cube();
        let z0 = static_point(&poly, 0.01, 15.0);
        let ctx = context(&poly, z0.state_next, 0.01, 15.0);
        let mut z = z0.clone();
        z.contact.p_n += 1e-3;
        let a = assemble(&ctx, &z0.to_vector()).unwrap();
        let b = assemble(&ctx, &z.to_vector()).unwrap();
        let (pa, _) = reformulate(&a.eval);
        let (pb, _) = reformulate(&b.eval);
        let changed: Vec<usize> =
            (0..pa.len()).filter(|&i| (pa[i] - pb[i]).abs() > 0.0).collect();
        // Only z-momentum: with zero gap and σ = 0 both affected pairs stay
        // on the complementarity set.
        assert_eq!(changed, vec![2]);
    }

    #[test]
    fn ecp_resting_cube_zero() {
        let poly = cube();
        let z = static_point(&poly, 0.01, 1.0);
        let ctx = context(&poly, z.state_next, 0.01, 1.0);
        let (eqs, pairs) = ecp_residual(&ctx, &z.to_vector()).unwrap();
        assert!(eqs.values.amax() < 1e-15);
        for p in &pairs {
            assert!(p.x >= 0.0 && p.y >= -1e-15 && (p.x * p.y).abs() < 1e-15, "{:?}", p.label);
        }
    }

    #[test]
    fn separated_cube_closest_points() {
        let poly = cube();
        let prev = RigidState::at_rest(Vector3::new(0.0, 0.0, 0.6));
        let ctx = context(&poly, prev, 0.01, 1.0);
        let mut c = ContactVariables::zeros(poly.num_facets());
        c.a1 = Vector3::new(0.5, 0.5, 0.1);
        c.a2 = Vector3::new(0.5, 0.5, 0.0);
        c.l_plane = 1.0;
        c.l_hull[ctx.active_facet] = 0.1;
        let z = StepUnknowns { state_next: prev, contact: c };
        let (eqs, pairs) = ecp_residual(&ctx, &z.to_vector()).unwrap();
        assert!(eqs.values.amax() < 1e-15);
        let np = pairs.iter().find(|p| p.label == PairLabel::NonPenetration).unwrap();
        assert_eq!(np.x, 0.0);
        assert!((np.y - 0.1).abs() < 1e-15);
    }

    #[test]
    fn penetrating_point_is_rejected() {
        let poly = cube();
        let mut z = static_point(&poly, 0.01, 1.0);
        z.contact.a1.z = -0.01;
        let ctx = context(&poly, z.state_next, 0.01, 1.0);
        let res = assemble(&ctx, &z.to_vector()).unwrap();
        let (phi, _) = reformulate(&res.eval);
        let idx = NUM_EQUATIONS + poly.num_facets();
        assert!(phi[idx].abs() > 1e-3);
    }

    #[test]
    fn bad_active_facet() {
        let poly = cube();
        let z = static_point(&poly, 0.01, 1.0);
        let mut ctx = context(&poly, z.state_next, 0.01, 1.0);
        ctx.active_facet = 17;
        assert!(matches!(ecp_residual(&ctx, &z.to_vector()), Err(Error::Configuration(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let poly = cube();
        let z = static_point(&poly, 0.01, 1.0);
        let ctx = context(&poly, z.state_next, 0.01, 1.0);
        let short = DVector::zeros(30);
        assert!(matches!(assemble(&ctx, &short), Err(Error::Dimension { .. })));
    }

    #[test]
    fn friction_sticking_and_sliding() {
        let poly = cube();
        let (h, mass) = (0.01, 1.0);
        let mut z = static_point(&poly, h, mass);
        let ctx = context(&poly, z.state_next, h, mass);
        let (eqs, cone) = friction_residual(&ctx, &z.to_vector()).unwrap();
        assert!(eqs.values.amax() == 0.0);
        assert!(cone.y > 0.0 && cone.x == 0.0);

        // Sliding in +t at 0.5 m/s with contact under the centre.
        let v = 0.5;
        z.state_next.linear_velocity = Vector3::new(v, 0.0, 0.0);
        z.contact.p_t = -ctx.friction.mu * z.contact.p_n;
        z.contact.sigma = v;
        let (eqs, cone) = friction_residual(&ctx, &z.to_vector()).unwrap();
        assert!(eqs.values.amax() < 1e-15);
        assert!(cone.y.abs() < 1e-12);

        // Spin about the normal: |p_r| = e_r μ p_n, σ = e_r |ω|.
        let w = 2.0;
        z.state_next.linear_velocity = Vector3::zeros();
        z.state_next.angular_velocity = Vector3::new(0.0, 0.0, w);
        z.contact.p_t = 0.0;
        z.contact.p_r = -ctx.friction.e_r * ctx.friction.mu * z.contact.p_n;
        z.contact.sigma = ctx.friction.e_r * w;
        let (eqs, cone) = friction_residual(&ctx, &z.to_vector()).unwrap();
        assert!(eqs.values.amax() < 1e-15);
        assert!(cone.y.abs() < 1e-12);
    }

    #[test]
    fn zero_step_pins_configuration() {
        let poly = cube();
        let mut z = static_point(&poly, 0.0, 1.0);
        z.state_next.linear_velocity = Vector3::new(3.0, -1.0, 2.0);
        z.state_next.angular_velocity = Vector3::new(0.1, 0.2, 0.3);
        let prev = RigidState::at_rest(Vector3::new(0.0, 0.0, 0.5));
        let mut ctx = context(&poly, prev, 0.01, 1.0);
        ctx.h = 0.0;
        let block = dynamics_residual(&ctx, &z.to_vector()).unwrap();
        assert!(block.values.rows(6, 7).amax() == 0.0);
    }

    #[test]
    fn free_fall_momentum_row() {
        let poly = cube();
        let (h, mass) = (0.01, 2.0);
        let prev = RigidState::at_rest(Vector3::new(0.0, 0.0, 3.0));
        let ctx = context(&poly, prev, h, mass);
        let mut next = prev;
        next.linear_velocity.z = -G * h;
        next.position.z += h * next.linear_velocity.z;
        let z = StepUnknowns { state_next: next, contact: ContactVariables::zeros(6) };
        let block = dynamics_residual(&ctx, &z.to_vector()).unwrap();
        assert!(block.values.amax() < 1e-15);
    }

    #[test]
    fn active_facet_for_tilted_cube() {
        let poly = cube();
        let plane = SupportPlane::ground();
        let mut s = RigidState::at_rest(Vector3::new(0.0, 0.0, 1.0));
        s.orientation = axis_angle(Vector3::x(), 0.3);
        let k = select_active_facet(&poly, &s, &plane);
        assert!(poly.facets[k].normal.z < -0.99);
    }
}
