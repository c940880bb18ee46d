//! Block tilting: a point finger presses on the top face of a cube and tips
//! it about one bottom edge, with every contact sticking.
//!
//! Configuration `q = [p_O; quat_O; p_H] ∈ ℝ¹⁰` (object position, object
//! orientation as a `(w, x, y, z)` quaternion, hand position, all in the
//! world frame). Generalized velocity `v = [object body twist; hand linear
//! velocity] ∈ ℝ⁹`; the object twist is unactuated (`n_u = 6`), the hand is
//! actuated (`n_a = 3`).
//!
//! The table line contact is modelled by two sticking point contacts at the
//! ends of the edge. Reaction forces are `λ = [λ_hc; λ_tc1; λ_tc2]` in the
//! world frame:
//!
//! * `λ_tc,i` is the force the table applies to the object (`Φ_tc,i =
//!   R p_tc,i + p − p_tc,i^W`), so its `z` component is the normal force.
//! * `λ_hc` is the force the object applies to the hand (`Φ_hc = p_H − (R
//!   p_hc + p)`), so a finger pressing on the top face has a positive
//!   component along the object's `z` axis.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::{GuardConditions, SystemInstance};

/// Allowed deviation of a quaternion norm from one.
pub const UNIT_TOL: f64 = 1e-9;

/// Number of ridges of the polyhedral friction cone.
pub const CONE_RIDGES: usize = 8;

/// Rows of `Λ` for one contact's friction cone.
const CONTACT_ROWS: usize = CONE_RIDGES;

pub const N_U: usize = 6;
pub const N_A: usize = 3;
pub const N_Q: usize = 10;
pub const N_PHI: usize = 9;

#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    /// Orientation quaternion in `(w, x, y, z)` order.
    pub quat: [f64; 4],
}

impl Pose {
    pub fn identity_at(position: Vector3<f64>) -> Self {
        Self {
            position,
            quat: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn quat_norm(&self) -> f64 {
        self.quat.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_matrix(&self.quat)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TiltingState {
    pub object: Pose,
    pub hand: Vector3<f64>,
}

impl TiltingState {
    pub fn configuration(&self) -> Vector {
        let p = &self.object.position;
        let q = &self.object.quat;
        Vector::from_vec(vec![
            p.x,
            p.y,
            p.z,
            q[0],
            q[1],
            q[2],
            q[3],
            self.hand.x,
            self.hand.y,
            self.hand.z,
        ])
    }

    pub fn from_configuration(q: &Vector) -> Self {
        Self {
            object: Pose {
                position: Vector3::new(q[0], q[1], q[2]),
                quat: [q[3], q[4], q[5], q[6]],
            },
            hand: Vector3::new(q[7], q[8], q[9]),
        }
    }
}

/// Geometry, friction and motion parameters of the tilting task.
#[derive(Clone, Debug, PartialEq)]
pub struct TiltingScenario {
    /// Cube edge length (m).
    pub edge_length: f64,
    pub mu_hand: f64,
    pub mu_table: f64,
    /// Minimum normal force at every contact (N).
    pub n_min: f64,
    /// Object weight in the world frame (N).
    pub gravity_object: Vector3<f64>,
    /// Hand weight in the hand frame (N), zero when the arm compensates it.
    pub gravity_hand: Vector3<f64>,
    /// Finger contact in the object frame (m).
    pub hand_contact_obj: Vector3<f64>,
    /// Ends of the table line contact in the world frame (m).
    pub table_contacts: [Vector3<f64>; 2],
    /// Unit rotation axis in the world frame.
    pub rotation_axis: Vector3<f64>,
    /// Planned rotation speed (rad/s).
    pub tilt_rate: f64,
    /// Duration of one time step (s).
    pub step_duration: f64,
    pub num_steps: usize,
}

impl Default for TiltingScenario {
    fn default() -> Self {
        Self::with_edge_length(0.075)
    }
}

impl TiltingScenario {
    /// Default scenario for a cube of the given size: object frame at the
    /// cube centre, finger at the centre of the top face, tilting about the
    /// `+x` bottom edge by 90° over 15 steps of one second.
    pub fn with_edge_length(a: f64) -> Self {
        let h = a / 2.0;
        let num_steps = 15;
        Self {
            edge_length: a,
            mu_hand: 0.8,
            mu_table: 0.8,
            n_min: 0.5,
            gravity_object: Vector3::new(0.0, 0.0, -2.5),
            gravity_hand: Vector3::zeros(),
            hand_contact_obj: Vector3::new(0.0, 0.0, h),
            table_contacts: [Vector3::new(h, -h, 0.0), Vector3::new(h, h, 0.0)],
            rotation_axis: Vector3::new(0.0, 1.0, 0.0),
            tilt_rate: (PI / 2.0) / num_steps as f64,
            step_duration: 1.0,
            num_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.edge_length > 0.0) {
            return bad("edge_length must be positive");
        }
        if !(self.mu_hand >= 0.0 && self.mu_table >= 0.0) {
            return bad("friction coefficients must be non-negative");
        }
        if !(self.n_min > 0.0) {
            return bad("n_min must be positive");
        }
        if ((self.rotation_axis.norm() - 1.0).abs()) > 1e-9 {
            return bad("rotation_axis must be a unit vector");
        }
        let line = self.table_contacts[1] - self.table_contacts[0];
        if line.norm() < 1e-9 {
            return bad("table contacts must be distinct");
        }
        if line.normalize().cross(&self.rotation_axis).norm() > 1e-9 {
            return bad("rotation_axis must run along the table contact line");
        }
        if !(self.step_duration > 0.0) || !self.tilt_rate.is_finite() {
            return bad("step_duration must be positive and tilt_rate finite");
        }
        let vectors = [self.gravity_object, self.gravity_hand, self.hand_contact_obj];
        if vectors.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return bad("non-finite scenario vector");
        }
        Ok(())
    }

    /// Object resting on the table with identity orientation, finger on the
    /// contact point.
    pub fn initial_state(&self) -> TiltingState {
        let object = Pose::identity_at(Vector3::new(0.0, 0.0, self.edge_length / 2.0));
        let hand = object.rotation() * self.hand_contact_obj + object.position;
        TiltingState { object, hand }
    }

    /// Table contact points in the object frame (fixed by the initial pose).
    pub fn table_contacts_obj(&self) -> [Vector3<f64>; 2] {
        let p0 = self.initial_state().object.position;
        [self.table_contacts[0] - p0, self.table_contacts[1] - p0]
    }

    /// States at every time step of the planned roll-out, starting from
    /// [`TiltingScenario::initial_state`].
    pub fn rollout(&self) -> Vec<TiltingState> {
        let mut states = Vec::with_capacity(self.num_steps);
        let mut state = self.initial_state();
        for _ in 0..self.num_steps {
            let next = advance_state(&state, self, self.step_duration);
            states.push(state);
            state = next;
        }
        states
    }
}

/// Rotation matrix of a `(w, x, y, z)` quaternion, as the homogeneous
/// quadratic form `(w² − |v|²) I + 2 v vᵀ + 2 w [v]×`.
pub fn rotation_matrix(q: &[f64; 4]) -> Matrix3<f64> {
    let w = q[0];
    let v = Vector3::new(q[1], q[2], q[3]);
    Matrix3::identity() * (w * w - v.dot(&v)) + v * v.transpose() * 2.0 + v.cross_matrix() * (2.0 * w)
}

/// `∂(R(q) x)/∂q`, a 3×4 block.
fn rotated_point_jacobian(q: &[f64; 4], x: &Vector3<f64>) -> nalgebra::Matrix3x4<f64> {
    let w = q[0];
    let v = Vector3::new(q[1], q[2], q[3]);
    let d_w = x * (2.0 * w) + v.cross(x) * 2.0;
    let d_v = -(x * v.transpose()) * 2.0 + Matrix3::identity() * (2.0 * v.dot(x)) + v * x.transpose() * 2.0
        - x.cross_matrix() * (2.0 * w);
    let mut out = nalgebra::Matrix3x4::zeros();
    out.set_column(0, &d_w);
    out.fixed_view_mut::<3, 3>(0, 1).copy_from(&d_v);
    out
}

fn check_unit(q: &[f64; 4]) -> Result<()> {
    let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitQuaternion(norm));
    }
    Ok(())
}

/// Map `E(q)` from body angular velocity to quaternion rate, `q̇ = E(q) ω`.
pub fn quat_rate_map(q: &[f64; 4]) -> Result<Matrix> {
    check_unit(q)?;
    let [q0, q1, q2, q3] = *q;
    #[rustfmt::skip]
    let e = Matrix::from_row_slice(4, 3, &[
        -q1, -q2, -q3,
         q0, -q3,  q2,
         q3,  q0, -q1,
        -q2,  q1,  q0,
    ]);
    Ok(e * 0.5)
}

/// `Ω(q) = diag(R, E(quat), I₃)`, mapping `v` to `q̇`.
pub fn omega_map(state: &TiltingState) -> Result<Matrix> {
    let mut omega = Matrix::zeros(N_Q, N_U + N_A);
    let r = state.object.rotation();
    omega.view_mut((0, 0), (3, 3)).copy_from(&r);
    omega.view_mut((3, 3), (4, 3)).copy_from(&quat_rate_map(&state.object.quat)?);
    omega.view_mut((7, 6), (3, 3)).fill_with_identity();
    Ok(omega)
}

/// Adjoint of the inverse object pose, mapping spatial to body twists
/// (`(v, ω)` ordering).
pub fn inverse_adjoint(pose: &Pose) -> Matrix {
    let rt = pose.rotation().transpose();
    let mut ad = Matrix::zeros(6, 6);
    ad.view_mut((0, 0), (3, 3)).copy_from(&rt);
    ad.view_mut((0, 3), (3, 3)).copy_from(&(-rt * pose.position.cross_matrix()));
    ad.view_mut((3, 3), (3, 3)).copy_from(&rt);
    ad
}

/// Goal `G v = b_G`: the object follows the planned rotation about the
/// contact line, the hand is left free.
pub fn goal_twist(state: &TiltingState, scenario: &TiltingScenario) -> (Matrix, Vector) {
    let mut g = Matrix::zeros(6, N_U + N_A);
    g.view_mut((0, 0), (6, 6)).fill_with_identity();

    let w = scenario.rotation_axis;
    let p_tc = scenario.table_contacts[0];
    let lin = -w.cross(&p_tc) * scenario.tilt_rate;
    let ang = w * scenario.tilt_rate;
    let spatial = Vector::from_vec(vec![lin.x, lin.y, lin.z, ang.x, ang.y, ang.z]);
    (g, inverse_adjoint(&state.object) * spatial)
}

/// Holonomic constraint values `Φ(q)` and their Jacobian `J_Φ(q)` (9×10).
pub fn holonomic_jacobian(state: &TiltingState, scenario: &TiltingScenario) -> (Vector, Matrix) {
    let q = &state.object.quat;
    let r = rotation_matrix(q);
    let p = state.object.position;
    let mut phi = Vector::zeros(N_PHI);
    let mut jac = Matrix::zeros(N_PHI, N_Q);

    // Finger: p_H − (R p_hc + p)
    let hc = scenario.hand_contact_obj;
    let v = state.hand - (r * hc + p);
    phi.rows_mut(0, 3).copy_from(&v);
    jac.view_mut((0, 0), (3, 3)).copy_from(&(-Matrix3::identity()));
    jac.view_mut((0, 3), (3, 4)).copy_from(&(-rotated_point_jacobian(q, &hc)));
    jac.view_mut((0, 7), (3, 3)).fill_with_identity();

    // Table: R p_tc,i + p − p_tc,i^W
    let obj = scenario.table_contacts_obj();
    for (i, (o, w)) in obj.iter().zip(&scenario.table_contacts).enumerate() {
        let row = 3 + 3 * i;
        let v = r * o + p - w;
        phi.rows_mut(row, 3).copy_from(&v);
        jac.view_mut((row, 0), (3, 3)).fill_with_identity();
        jac.view_mut((row, 3), (3, 4)).copy_from(&rotated_point_jacobian(q, o));
    }
    (phi, jac)
}

/// Ridge direction `d_i = [sin(πi/4), cos(πi/4), 0]`, `i = 1..=8`.
pub fn ridge(i: usize) -> Vector3<f64> {
    let a = PI * i as f64 / 4.0;
    Vector3::new(a.sin(), a.cos(), 0.0)
}

/// Polyhedral friction cones (8 rows per contact) followed by the three
/// normal-force lower bounds. Rows act on `[λ; f]`; the finger force is
/// expressed in the object frame, the table forces in the world frame.
pub fn guard_conditions(state: &TiltingState, scenario: &TiltingScenario) -> GuardConditions {
    let n = N_U + N_A;
    let rows = 3 * CONTACT_ROWS + 3;
    let mut lambda = Matrix::zeros(rows, N_PHI + n);
    let mut b = Vector::zeros(rows);
    let z = Vector3::z();
    let rt = state.object.rotation().transpose();

    for contact in 0..3 {
        // Maps the contact's λ block to the frame its cone is written in.
        let (frame, mu) = if contact == 0 {
            (rt, scenario.mu_hand)
        } else {
            (Matrix3::identity(), scenario.mu_table)
        };
        for i in 1..=CONE_RIDGES {
            // (d_i − μ z)ᵀ frame λ ≤ 0
            let coeff = ((ridge(i) - z * mu).transpose() * frame).transpose();
            let row = contact * CONTACT_ROWS + i - 1;
            lambda.view_mut((row, 3 * contact), (1, 3)).copy_from(&coeff.transpose());
        }
        // −zᵀ frame λ ≤ −n_min
        let row = 3 * CONTACT_ROWS + contact;
        let coeff = -(z.transpose() * frame);
        lambda.view_mut((row, 3 * contact), (1, 3)).copy_from(&coeff);
        b[row] = -scenario.n_min;
    }
    GuardConditions::inequalities_only(lambda, b)
}

/// External generalized force `[ᴼG_O; 0; ᴴG_H]`; the object frame sits at
/// the centre of mass so gravity exerts no body torque.
pub fn external_force(state: &TiltingState, scenario: &TiltingScenario) -> Vector {
    let g_obj = state.object.rotation().transpose() * scenario.gravity_object;
    let g_hand = scenario.gravity_hand;
    Vector::from_vec(vec![g_obj.x, g_obj.y, g_obj.z, 0.0, 0.0, 0.0, g_hand.x, g_hand.y, g_hand.z])
}

/// Instance and guard conditions for one time step.
pub fn build_instance(state: &TiltingState, scenario: &TiltingScenario) -> Result<(SystemInstance, GuardConditions)> {
    scenario.validate()?;
    let (_, jac) = holonomic_jacobian(state, scenario);
    let omega = omega_map(state)?;
    let (goal, goal_rhs) = goal_twist(state, scenario);
    let instance = SystemInstance::from_factors(N_U, N_A, jac, omega, goal, goal_rhs, external_force(state, scenario))?;
    Ok((instance, guard_conditions(state, scenario)))
}

/// Rotate object and hand about the contact line by `tilt_rate · dt`.
pub fn advance_state(state: &TiltingState, scenario: &TiltingScenario, dt: f64) -> TiltingState {
    let angle = scenario.tilt_rate * dt;
    let rot = UnitQuaternion::from_scaled_axis(scenario.rotation_axis * angle);
    let pivot = scenario.table_contacts[0];
    let q = &state.object.quat;
    let current = Quaternion::new(q[0], q[1], q[2], q[3]);
    let next = (rot.into_inner() * current).normalize();
    TiltingState {
        object: Pose {
            position: pivot + rot * (state.object.position - pivot),
            quat: [next.w, next.i, next.j, next.k],
        },
        hand: pivot + rot * (state.hand - pivot),
    }
}

/// Planned hand velocity along its arc about the rotation axis.
pub fn planned_hand_velocity(state: &TiltingState, scenario: &TiltingScenario) -> Vector3<f64> {
    scenario.rotation_axis.cross(&(state.hand - scenario.table_contacts[0])) * scenario.tilt_rate
}

/// Unit vector from the hand to the closest point on the rotation axis.
pub fn hand_to_axis(state: &TiltingState, scenario: &TiltingScenario) -> Vector3<f64> {
    let w = scenario.rotation_axis;
    let rel = state.hand - scenario.table_contacts[0];
    (w * w.dot(&rel) - rel).normalize()
}
