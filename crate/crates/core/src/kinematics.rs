//! Pose maps of the platform-plus-arm mechanism: forward kinematics, cable
//! geometry, the task Jacobian, and the analytic inverse kinematics.
//!
//! The mechanism is planar. The plane is embedded in 3-D as the XZ plane
//! (X right, Z up); platform rotations act about the Y axis and every
//! planar vector carries a zero Y component. Generalized coordinates are
//! `q = (x_m, z_m, theta_m, theta_1, theta_2)`: platform position and
//! orientation followed by the two relative arm joint angles. The arm base
//! direction is offset a quarter turn from `theta_m`, so at `q = 0` the arm
//! points straight up.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, SMatrix, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::RobotParams;

pub type Vec5 = SVector<f64, 5>;
pub type Vec6 = SVector<f64, 6>;
pub type Mat3x5 = SMatrix<f64, 3, 5>;
pub type Mat3x6 = SMatrix<f64, 3, 6>;

pub const CABLE_COUNT: usize = 6;

/// Length below which a cable direction is numerically undefined [m].
pub const DEGENERATE_CABLE_LENGTH: f64 = 1e-12;

/// Generalized coordinates and their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedState {
    pub q: Vec5,
    pub qdot: Vec5,
}

impl GeneralizedState {
    pub fn new(q: Vec5, qdot: Vec5) -> Self {
        Self { q, qdot }
    }

    pub fn from_position(q: Vec5) -> Self {
        Self {
            q,
            qdot: Vec5::zeros(),
        }
    }

    pub fn at_rest() -> Self {
        Self {
            q: Vec5::zeros(),
            qdot: Vec5::zeros(),
        }
    }
}

/// Planar pose of the arm tip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndEffectorPose {
    pub x_e: f64,
    pub z_e: f64,
    /// Absolute orientation of link 2 [rad].
    pub q_e: f64,
}

/// Joint positions, centers of mass and center-of-mass velocities of the
/// two arm links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkKinematics {
    pub p1: Vector2<f64>,
    pub pc1: Vector2<f64>,
    pub p2: Vector2<f64>,
    pub pc2: Vector2<f64>,
    pub vel_c1: Vector2<f64>,
    pub vel_c2: Vector2<f64>,
    /// Speed of the link-1 center of mass [m/s].
    pub vc1: f64,
    /// Speed of the link-2 center of mass [m/s].
    pub vc2: f64,
}

/// Anchor points, cable vectors, lengths, moment arms and the structure
/// matrix at one platform pose. Cables are indexed 0..=5; the pairs (0, 1)
/// and (4, 5) are the parallelogram pairs that pin the platform
/// orientation, cables 2 and 3 are the force-controlled lower pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CableGeometry {
    /// Anchor positions on the static frame [m].
    pub anchors_frame: [Vector3<f64>; CABLE_COUNT],
    /// Anchor positions on the platform, in world coordinates [m].
    pub anchors_platform: [Vector3<f64>; CABLE_COUNT],
    /// Frame anchor minus platform anchor [m].
    pub cable_vectors: [Vector3<f64>; CABLE_COUNT],
    /// Euclidean lengths of `cable_vectors` [m].
    pub lengths: Vec6,
    /// Unit cable directions (platform toward frame).
    pub unit_vectors: [Vector3<f64>; CABLE_COUNT],
    /// Platform anchor minus platform center of mass [m].
    pub moment_arms: [Vector3<f64>; CABLE_COUNT],
    /// 3x6 map from cable tensions to the planar platform wrench
    /// `(F_x, F_z, M)`.
    pub structure_matrix: Mat3x6,
}

/// Arm base direction: the platform angle offset by a quarter turn.
#[inline]
pub fn theta_bar(theta_m: f64) -> f64 {
    theta_m + FRAC_PI_2
}

/// Rotation about the Y axis (the standard right-handed matrix).
pub fn rotation_y(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Moment of a planar force about the platform axis: the Y component of
/// `r x f` for vectors embedded in the XZ plane. Positive moments drive
/// `theta_m` positive.
#[inline]
pub fn planar_moment(r: &Vector3<f64>, f: &Vector3<f64>) -> f64 {
    r.z * f.x - r.x * f.z
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x - 2.0 * PI
    } else {
        x
    }
}

/// Positions of the arm joints, link centers of mass and the end effector,
/// with center-of-mass velocities when `state.qdot` is non-zero.
pub fn forward_kinematics(
    state: &GeneralizedState,
    params: &RobotParams,
) -> (EndEffectorPose, LinkKinematics) {
    let q = &state.q;
    let qd = &state.qdot;
    let tb = theta_bar(q[2]);
    let a1 = tb + q[3];
    let a2 = tb + q[3] + q[4];
    let (s_b, c_b) = tb.sin_cos();
    let (s_1, c_1) = a1.sin_cos();
    let (s_2, c_2) = a2.sin_cos();

    let p1 = Vector2::new(q[0] + params.l_m * c_b, q[1] + params.l_m * s_b);
    let pc1 = p1 + params.l_c1 * Vector2::new(c_1, s_1);
    let p2 = p1 + params.l_1 * Vector2::new(c_1, s_1);
    let pc2 = p2 + params.l_c2 * Vector2::new(c_2, s_2);
    let pe = p2 + params.l_2 * Vector2::new(c_2, s_2);

    let w_b = qd[2];
    let w_1 = qd[2] + qd[3];
    let w_2 = qd[2] + qd[3] + qd[4];
    let vel_c1 = Vector2::new(
        qd[0] - params.l_c1 * w_1 * s_1 - params.l_m * w_b * s_b,
        qd[1] + params.l_c1 * w_1 * c_1 + params.l_m * w_b * c_b,
    );
    let vel_c2 = Vector2::new(
        qd[0] - params.l_1 * w_1 * s_1 - params.l_m * w_b * s_b - params.l_c2 * w_2 * s_2,
        qd[1] + params.l_1 * w_1 * c_1 + params.l_m * w_b * c_b + params.l_c2 * w_2 * c_2,
    );

    (
        EndEffectorPose {
            x_e: pe.x,
            z_e: pe.y,
            q_e: a2,
        },
        LinkKinematics {
            p1,
            pc1,
            p2,
            pc2,
            vel_c1,
            vel_c2,
            vc1: vel_c1.norm(),
            vc2: vel_c2.norm(),
        },
    )
}

/// Task Jacobian `d p_e / d q` (3x5).
pub fn jacobian(q: &Vec5, params: &RobotParams) -> Mat3x5 {
    let tb = theta_bar(q[2]);
    let a1 = tb + q[3];
    let a2 = tb + q[3] + q[4];
    let (s_b, c_b) = tb.sin_cos();
    let (s_1, c_1) = a1.sin_cos();
    let (s_2, c_2) = a2.sin_cos();
    let l_m = params.l_m;
    let l_1 = params.l_1;
    let l_2 = params.l_2;

    let mut j = Mat3x5::zeros();
    j[(0, 0)] = 1.0;
    j[(1, 1)] = 1.0;
    j[(0, 2)] = -l_1 * s_1 - l_m * s_b - l_2 * s_2;
    j[(0, 3)] = -l_1 * s_1 - l_2 * s_2;
    j[(0, 4)] = -l_2 * s_2;
    j[(1, 2)] = l_1 * c_1 + l_m * c_b + l_2 * c_2;
    j[(1, 3)] = l_1 * c_1 + l_2 * c_2;
    j[(1, 4)] = l_2 * c_2;
    j[(2, 2)] = 1.0;
    j[(2, 3)] = 1.0;
    j[(2, 4)] = 1.0;
    j
}

/// Cable anchor points on the static frame, in world coordinates.
pub fn frame_anchors(params: &RobotParams) -> [Vector3<f64>; CABLE_COUNT] {
    let he = params.l_e / 2.0;
    let hf = params.l_f / 2.0;
    [
        Vector3::new(he - params.l_g, 0.0, hf),
        Vector3::new(he, 0.0, hf - params.l_h),
        Vector3::new(he, 0.0, -hf),
        Vector3::new(-he, 0.0, -hf),
        Vector3::new(-he, 0.0, hf - params.l_h),
        Vector3::new(-he + params.l_g, 0.0, hf),
    ]
}

/// Cable anchor offsets on the platform, in the platform body frame.
pub fn platform_anchor_offsets(params: &RobotParams) -> [Vector3<f64>; CABLE_COUNT] {
    [
        Vector3::new(params.l_b / 2.0, 0.0, params.l_m),
        Vector3::new(params.l_a / 2.0, 0.0, params.l_m - params.l_c),
        Vector3::new(params.l_d / 2.0, 0.0, params.l_m - params.l_bd),
        Vector3::new(-params.l_d / 2.0, 0.0, params.l_m - params.l_bd),
        Vector3::new(-params.l_a / 2.0, 0.0, params.l_m - params.l_c),
        Vector3::new(-params.l_b / 2.0, 0.0, params.l_m),
    ]
}

/// Cable geometry at a pose, with the frame anchors taken from `params`.
pub fn cable_geometry(q: &Vec5, params: &RobotParams) -> Result<CableGeometry> {
    cable_geometry_with_frame_anchors(q, &frame_anchors(params), params)
}

/// Cable geometry against an explicit set of frame anchors. Exposed so the
/// frame can be repositioned without rebuilding the parameter set.
pub fn cable_geometry_with_frame_anchors(
    q: &Vec5,
    anchors_frame: &[Vector3<f64>; CABLE_COUNT],
    params: &RobotParams,
) -> Result<CableGeometry> {
    let p_m = Vector3::new(q[0], 0.0, q[1]);
    let rot = rotation_y(q[2]);
    let offsets = platform_anchor_offsets(params);

    let mut anchors_platform = [Vector3::zeros(); CABLE_COUNT];
    let mut cable_vectors = [Vector3::zeros(); CABLE_COUNT];
    let mut unit_vectors = [Vector3::zeros(); CABLE_COUNT];
    let mut moment_arms = [Vector3::zeros(); CABLE_COUNT];
    let mut lengths = Vec6::zeros();
    let mut a = Mat3x6::zeros();

    for i in 0..CABLE_COUNT {
        let arm = rot * offsets[i];
        let anchor = p_m + arm;
        let cable = anchors_frame[i] - anchor;
        let length = cable.norm();
        if length < DEGENERATE_CABLE_LENGTH {
            return Err(Error::DegenerateGeometry { cable: i, length });
        }
        let unit = cable / length;
        anchors_platform[i] = anchor;
        cable_vectors[i] = cable;
        unit_vectors[i] = unit;
        moment_arms[i] = arm;
        lengths[i] = length;
        a[(0, i)] = unit.x;
        a[(1, i)] = unit.z;
        a[(2, i)] = planar_moment(&arm, &unit);
    }

    Ok(CableGeometry {
        anchors_frame: *anchors_frame,
        anchors_platform,
        cable_vectors,
        lengths,
        unit_vectors,
        moment_arms,
        structure_matrix: a,
    })
}

/// Vertical branch of the platform inverse solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlatformBranch {
    /// Platform below the top anchor line (the working region).
    Lower,
    Upper,
}

/// Recovers the platform pose from the lengths of the two outer top cables,
/// assuming the parallelogram constraints hold (so `theta_m = 0`).
///
/// The top anchors of cables 1 and 6 sit a horizontal distance
/// `l_e - l_b - 2 l_g` apart; the two lengths and that baseline must
/// satisfy the triangle inequality.
pub fn inverse_platform(
    l1: f64,
    l6: f64,
    params: &RobotParams,
    branch: PlatformBranch,
) -> Result<(f64, f64, f64)> {
    if !l1.is_finite() || !l6.is_finite() || l1 <= 0.0 || l6 <= 0.0 {
        return Err(Error::Workspace(format!(
            "cable lengths must be positive, got ({l1}, {l6})"
        )));
    }
    let s = params.l_b - params.l_e + 2.0 * params.l_g;
    let span = -s;
    if span <= 0.0 {
        return Err(Error::Workspace(
            "top anchor baseline is non-positive".to_string(),
        ));
    }
    let x_m = (l1 * l1 - l6 * l6) / (2.0 * s);
    let radicand = (l1 - l6 + s) * (l6 - l1 + s) * (l1 + l6 + s) * (l1 + l6 - s);
    if radicand < 0.0 {
        return Err(Error::Workspace(format!(
            "cable pair ({l1}, {l6}) violates the triangle inequality with baseline {span}"
        )));
    }
    let v = radicand.sqrt() / (2.0 * span);
    let z_anchor = params.l_f / 2.0 - params.l_m;
    let z_m = match branch {
        PlatformBranch::Lower => z_anchor - v,
        PlatformBranch::Upper => z_anchor + v,
    };
    Ok((x_m, z_m, 0.0))
}

/// Elbow branch of the arm inverse solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Elbow {
    /// `theta_2 = +(pi - beta)`.
    Plus,
    /// `theta_2 = -(pi - beta)`.
    Minus,
}

/// Analytic two-link inverse kinematics from a target tip position and the
/// platform pose. Returns `(theta_1, theta_2)` normalized to `(-pi, pi]`.
pub fn inverse_arm(
    target: (f64, f64),
    platform: (f64, f64, f64),
    params: &RobotParams,
    elbow: Elbow,
) -> Result<(f64, f64)> {
    let tb = theta_bar(platform.2);
    let x1 = platform.0 + params.l_m * tb.cos();
    let z1 = platform.1 + params.l_m * tb.sin();
    let dx = target.0 - x1;
    let dz = target.1 - z1;
    let r2 = dx * dx + dz * dz;
    let r = r2.sqrt();
    if r < 1e-12 {
        return Err(Error::SingularConfiguration(
            "target coincides with the arm base joint".to_string(),
        ));
    }
    let l1 = params.l_1;
    let l2 = params.l_2;
    let reach_tol = 1e-9;
    if r > l1 + l2 + reach_tol || r < (l1 - l2).abs() - reach_tol {
        return Err(Error::Workspace(format!(
            "target at distance {r:.6} m outside arm annulus [{:.6}, {:.6}]",
            (l1 - l2).abs(),
            l1 + l2
        )));
    }
    let phi = dz.atan2(dx);
    let cos_alpha = ((r2 + l1 * l1 - l2 * l2) / (2.0 * r * l1)).clamp(-1.0, 1.0);
    let cos_beta = ((l1 * l1 + l2 * l2 - r2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let alpha = cos_alpha.acos();
    let beta = cos_beta.acos();
    let (theta1, theta2) = match elbow {
        Elbow::Plus => (phi - alpha - tb, PI - beta),
        Elbow::Minus => (phi + alpha - tb, -(PI - beta)),
    };
    Ok((normalize_angle(theta1), normalize_angle(theta2)))
}
