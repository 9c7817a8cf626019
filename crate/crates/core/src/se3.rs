//! Rigid body configuration, quaternion kinematics and the Newton-Euler
//! mass and velocity-product terms.
//!
//! Quaternions are stored scalar-first `(w, x, y, z)` and angular velocity is
//! expressed in the world (spatial) frame, so `q̇ = ½ (0, ω) ⊗ q`.

use nalgebra::{Matrix3, Matrix6, SMatrix, Vector3, Vector4, Vector6};

use crate::error::{Error, Result};

/// Tolerance on `|q| - 1` accepted by [`kinematic_map`].
pub const UNIT_QUATERNION_TOL: f64 = 1e-9;

pub type KinematicMap = SMatrix<f64, 7, 6>;

/// Position and orientation of the centre of mass plus the generalized
/// velocity `ν = (v, ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidState {
    pub position: Vector3<f64>,
    /// Unit quaternion, scalar first.
    pub orientation: Vector4<f64>,
    pub linear_velocity: Vector3<f64>,
    /// World-frame angular velocity.
    pub angular_velocity: Vector3<f64>,
}

impl RigidState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            orientation: Vector4::new(1.0, 0.0, 0.0, 0.0),
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
        }
    }

    pub fn velocity(&self) -> Vector6<f64> {
        let mut nu = Vector6::zeros();
        nu.fixed_rows_mut::<3>(0).copy_from(&self.linear_velocity);
        nu.fixed_rows_mut::<3>(3).copy_from(&self.angular_velocity);
        nu
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation(&self.orientation)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.orientation.iter().all(|v| v.is_finite())
            && self.linear_velocity.iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite())
    }

    /// Checks finiteness and that the orientation is a unit quaternion.
    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidState("non-finite state component".into()));
        }
        let drift = (self.orientation.norm() - 1.0).abs();
        if drift > UNIT_QUATERNION_TOL {
            return Err(Error::InvalidState(format!(
                "orientation is not a unit quaternion (| |q| - 1 | = {drift:e})"
            )));
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Self {
        self.orientation /= self.orientation.norm();
        self
    }

    /// Translational plus rotational kinetic energy.
    pub fn kinetic_energy(&self, props: &InertialProperties) -> f64 {
        let inertia = spatial_inertia(&self.orientation, &props.body_inertia);
        0.5 * props.mass * self.linear_velocity.norm_squared()
            + 0.5 * self.angular_velocity.dot(&(inertia * self.angular_velocity))
    }
}

/// Mass and body-frame inertia about the centre of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertialProperties {
    pub mass: f64,
    pub body_inertia: Matrix3<f64>,
}

impl InertialProperties {
    pub fn new(mass: f64, body_inertia: Matrix3<f64>) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        let asym = (body_inertia - body_inertia.transpose()).abs().max();
        if !asym.is_finite() || asym > 1e-12 * body_inertia.abs().max().max(1.0) {
            return Err(Error::InvalidParameter("inertia matrix is not symmetric".into()));
        }
        let eig = body_inertia.symmetric_eigenvalues();
        if eig.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "inertia matrix is not positive definite (eigenvalues {:?})",
                eig.as_slice()
            )));
        }
        Ok(Self { mass, body_inertia })
    }

    pub fn diagonal(mass: f64, ixx: f64, iyy: f64, izz: f64) -> Result<Self> {
        Self::new(mass, Matrix3::from_diagonal(&Vector3::new(ixx, iyy, izz)))
    }
}

fn quadratic_rotation(q: &Vector4<f64>) -> Matrix3<f64> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Matrix3::new(
        w * w + x * x - y * y - z * z,
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        w * w - x * x + y * y - z * z,
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        w * w - x * x - y * y + z * z,
    )
}

/// Rotation matrix (body to world) of `q / |q|`.
///
/// Accepting non-unit quaternions keeps the map smooth for the Newton solve,
/// and the rotation is unchanged by the renormalization applied afterwards.
pub fn rotation(q: &Vector4<f64>) -> Matrix3<f64> {
    quadratic_rotation(q) / q.norm_squared()
}

/// Partial derivatives of [`rotation`] with respect to `w, x, y, z`.
pub fn rotation_derivatives(q: &Vector4<f64>) -> [Matrix3<f64>; 4] {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let s = q.norm_squared();
    let a = quadratic_rotation(q);
    let da = [
        Matrix3::new(w, -z, y, z, w, -x, -y, x, w) * 2.0,
        Matrix3::new(x, y, z, y, -x, -w, z, w, -x) * 2.0,
        Matrix3::new(-y, x, w, x, y, z, -w, z, -y) * 2.0,
        Matrix3::new(-z, -w, x, w, -z, y, x, y, z) * 2.0,
    ];
    let mut out = [Matrix3::zeros(); 4];
    for j in 0..4 {
        out[j] = da[j] / s - a * (2.0 * q[j] / (s * s));
    }
    out
}

/// The 4×3 block `E(q)` with `q̇ = ½ E(q) ω`.
pub fn quaternion_rate_matrix(q: &Vector4<f64>) -> SMatrix<f64, 4, 3> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    SMatrix::<f64, 4, 3>::new(-x, -y, -z, w, z, -y, -z, w, x, y, -x, w) * 0.5
}

/// `G(q)` such that `q̇ = G(q) ν`.
pub fn kinematic_map(state: &RigidState) -> Result<KinematicMap> {
    state.validate()?;
    Ok(kinematic_map_unchecked(&state.orientation))
}

pub(crate) fn kinematic_map_unchecked(q: &Vector4<f64>) -> KinematicMap {
    let mut g = KinematicMap::zeros();
    g.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    g.fixed_view_mut::<4, 3>(3, 3).copy_from(&quaternion_rate_matrix(q));
    g
}

/// `R I_cm Rᵀ`.
pub fn spatial_inertia(q: &Vector4<f64>, body_inertia: &Matrix3<f64>) -> Matrix3<f64> {
    let r = rotation(q);
    r * body_inertia * r.transpose()
}

/// Block-diagonal generalized mass matrix `[m I₃, R I_cm Rᵀ]`.
pub fn mass_matrix(state: &RigidState, props: &InertialProperties) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(Matrix3::identity() * props.mass));
    m.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&spatial_inertia(&state.orientation, &props.body_inertia));
    m
}

/// Gyroscopic impulse `h [0; -ω × (ˢI ω)]` over a step of length `h`.
pub fn velocity_product_impulse(
    state: &RigidState,
    props: &InertialProperties,
    h: f64,
) -> Vector6<f64> {
    let w = state.angular_velocity;
    let inertia = spatial_inertia(&state.orientation, &props.body_inertia);
    let moment = -w.cross(&(inertia * w)) * h;
    let mut p = Vector6::zeros();
    p.fixed_rows_mut::<3>(3).copy_from(&moment);
    p
}

/// Quaternion for a rotation of `angle` radians about `axis`.
pub fn axis_angle(axis: Vector3<f64>, angle: f64) -> Vector4<f64> {
    let a = axis.normalize() * (0.5 * angle).sin();
    Vector4::new((0.5 * angle).cos(), a.x, a.y, a.z)
}

/// Hamilton product of scalar-first quaternions.
pub fn quat_mul(a: &Vector4<f64>, b: &Vector4<f64>) -> Vector4<f64> {
    let av = Vector3::new(a[1], a[2], a[3]);
    let bv = Vector3::new(b[1], b[2], b[3]);
    let s = a[0] * b[0] - av.dot(&bv);
    let v = bv * a[0] + av * b[0] + av.cross(&bv);
    Vector4::new(s, v.x, v.y, v.z)
}

/// Explicit Euler configuration update `q + h G(q) ν` followed by quaternion
/// renormalization.
pub fn euler_update(state: &RigidState, velocity: &Vector6<f64>, h: f64) -> RigidState {
    let g = kinematic_map_unchecked(&state.orientation);
    let dq = g * velocity * h;
    let mut next = *state;
    next.position += dq.fixed_rows::<3>(0);
    next.orientation += dq.fixed_rows::<4>(3);
    next.linear_velocity = velocity.fixed_rows::<3>(0).into_owned();
    next.angular_velocity = velocity.fixed_rows::<3>(3).into_owned();
    next.normalized()
}
