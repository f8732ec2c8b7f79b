//! Coupled rigid-body dynamics of the platform and arm.
//!
//! The model carries five generalized coordinates; the platform rows are
//! driven by the cable wrench `A*T` while the two arm rows take joint
//! torques directly. The closed-form inertia, Coriolis and gravity terms
//! below are grouped through the composite moment-mass products
//! `mu_m = l_m (m_1 + m_2)`, `mu_1 = m_1 l_c1 + m_2 l_1`,
//! `mu_2 = m_2 l_c2`; all absolute angles are measured from the arm base
//! direction (`theta_m` plus a quarter turn).

use nalgebra::{Cholesky, SMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{
    forward_kinematics, jacobian, theta_bar, CableGeometry, GeneralizedState, Vec5, Vec6,
};
use crate::params::{EquivalentSprings, RobotParams};

pub type Mat5 = SMatrix<f64, 5, 5>;

/// Inertia matrix, Coriolis matrix, gravity vector and elastic-force vector
/// at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicTerms {
    pub m: Mat5,
    pub c: Mat5,
    pub g: Vec5,
    /// Generalized spring forces; rows 3 and 4 are structurally zero.
    pub p_vs: Vec5,
}

/// External load applied at a point: planar force plus a moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub f_x: f64,
    pub f_z: f64,
    pub m: f64,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench {
        f_x: 0.0,
        f_z: 0.0,
        m: 0.0,
    };

    pub fn new(f_e: Vector2<f64>, m_e: f64) -> Self {
        Self {
            f_x: f_e.x,
            f_z: f_e.y,
            m: m_e,
        }
    }

    /// Stacked `(F_x, F_z, M)` vector.
    pub fn combined(&self) -> Vector3<f64> {
        Vector3::new(self.f_x, self.f_z, self.m)
    }
}

/// Commanded inputs of the real machine: unstretched lengths for the two
/// position-controlled top pairs and direct tensions for the lower pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensionInputs {
    /// Shared unstretched length of cables 1 and 2 [m].
    pub l01: f64,
    /// Commanded tension of cable 3 [N].
    pub t3: f64,
    /// Commanded tension of cable 4 [N].
    pub t4: f64,
    /// Shared unstretched length of cables 5 and 6 [m].
    pub l06: f64,
}

/// Cable tensions together with the unstretched lengths that produced the
/// spring-side entries. Entries 2 and 3 of `l0` are unused placeholders
/// (those cables are force-controlled).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CableTensionState {
    pub t: Vec6,
    pub l0: Vec6,
}

impl CableTensionState {
    /// Copy with the spring-side tensions clamped at zero; a slack cable
    /// pushes nothing. The force-controlled entries pass through.
    pub fn clamped(&self) -> CableTensionState {
        let mut t = self.t;
        for i in [0usize, 1, 4, 5] {
            if t[i] < 0.0 {
                t[i] = 0.0;
            }
        }
        CableTensionState { t, l0: self.l0 }
    }
}

struct Grouped {
    mu_m: f64,
    mu_1: f64,
    mu_2: f64,
}

fn grouped(params: &RobotParams) -> Grouped {
    Grouped {
        mu_m: params.l_m * (params.m_1 + params.m_2),
        mu_1: params.m_1 * params.l_c1 + params.m_2 * params.l_1,
        mu_2: params.m_2 * params.l_c2,
    }
}

/// Closed-form dynamic terms at a state.
pub fn dynamic_terms(
    state: &GeneralizedState,
    params: &RobotParams,
    springs: &EquivalentSprings,
) -> DynamicTerms {
    let q = &state.q;
    let qd = &state.qdot;
    let tb = theta_bar(q[2]);
    let (s_m, c_m) = tb.sin_cos();
    let (s_m1, c_m1) = (tb + q[3]).sin_cos();
    let (s_m12, c_m12) = (tb + q[3] + q[4]).sin_cos();
    let (s_1, c_1) = q[3].sin_cos();
    let (s_2, c_2) = q[4].sin_cos();
    let (s_12, c_12) = (q[3] + q[4]).sin_cos();

    let gp = grouped(params);
    let (mu_m, mu_1, mu_2) = (gp.mu_m, gp.mu_1, gp.mu_2);
    let m_tot = params.m_m + params.m_1 + params.m_2;
    // Arm-only inertia about joint 1 and joint 2 (angle independent parts).
    let j_arm = params.m_1 * params.l_c1 * params.l_c1
        + params.m_2 * (params.l_1 * params.l_1 + params.l_c2 * params.l_c2)
        + params.i_1
        + params.i_2;
    let j_tip = params.m_2 * params.l_c2 * params.l_c2 + params.i_2;
    // Configuration-dependent couplings.
    let a = params.l_m * mu_1; // cos(theta_1)
    let b = params.m_2 * params.l_1 * params.l_c2; // cos(theta_2)
    let cc = params.l_m * mu_2; // cos(theta_1 + theta_2)

    let mut m = Mat5::zeros();
    m[(0, 0)] = m_tot;
    m[(1, 1)] = m_tot;
    m[(0, 2)] = -(mu_m * s_m + mu_1 * s_m1 + mu_2 * s_m12);
    m[(0, 3)] = -(mu_1 * s_m1 + mu_2 * s_m12);
    m[(0, 4)] = -mu_2 * s_m12;
    m[(1, 2)] = mu_m * c_m + mu_1 * c_m1 + mu_2 * c_m12;
    m[(1, 3)] = mu_1 * c_m1 + mu_2 * c_m12;
    m[(1, 4)] = mu_2 * c_m12;
    m[(2, 2)] = params.i_m
        + (params.m_1 + params.m_2) * params.l_m * params.l_m
        + j_arm
        + 2.0 * (a * c_1 + b * c_2 + cc * c_12);
    m[(2, 3)] = j_arm + a * c_1 + 2.0 * b * c_2 + cc * c_12;
    m[(2, 4)] = j_tip + b * c_2 + cc * c_12;
    m[(3, 3)] = j_arm + 2.0 * b * c_2;
    m[(3, 4)] = j_tip + b * c_2;
    m[(4, 4)] = j_tip;
    // Symmetric fill.
    m[(2, 0)] = m[(0, 2)];
    m[(3, 0)] = m[(0, 3)];
    m[(4, 0)] = m[(0, 4)];
    m[(2, 1)] = m[(1, 2)];
    m[(3, 1)] = m[(1, 3)];
    m[(4, 1)] = m[(1, 4)];
    m[(3, 2)] = m[(2, 3)];
    m[(4, 2)] = m[(2, 4)];
    m[(4, 3)] = m[(3, 4)];

    let w_m = qd[2];
    let w_1 = 2.0 * qd[2] + qd[3];
    let w_2 = 2.0 * qd[2] + 2.0 * qd[3] + qd[4];
    let mut c = Mat5::zeros();
    c[(0, 2)] = -w_m * (mu_m * c_m + mu_1 * c_m1 + mu_2 * c_m12);
    c[(0, 3)] = -w_1 * (mu_1 * c_m1 + mu_2 * c_m12);
    c[(0, 4)] = -w_2 * mu_2 * c_m12;
    c[(1, 2)] = -w_m * (mu_m * s_m + mu_1 * s_m1 + mu_2 * s_m12);
    c[(1, 3)] = -w_1 * (mu_1 * s_m1 + mu_2 * s_m12);
    c[(1, 4)] = -w_2 * mu_2 * s_m12;
    c[(2, 3)] = -w_1 * (a * s_1 + cc * s_12);
    c[(2, 4)] = -w_2 * (cc * s_12 + b * s_2);
    c[(3, 2)] = w_m * (a * s_1 + cc * s_12);
    c[(3, 4)] = -w_2 * b * s_2;
    c[(4, 2)] = w_m * (cc * s_12 + b * s_2);
    c[(4, 3)] = w_1 * b * s_2;

    let mut g = Vec5::zeros();
    g[1] = m_tot * params.g;
    g[2] = params.g * (mu_m * c_m + mu_1 * c_m1 + mu_2 * c_m12);
    g[3] = params.g * (mu_1 * c_m1 + mu_2 * c_m12);
    g[4] = params.g * mu_2 * c_m12;

    let tau_s = equivalent_spring_torques(q, springs);
    let p_vs = Vec5::from_column_slice(&[tau_s.x, tau_s.y, tau_s.z, 0.0, 0.0]);

    DynamicTerms { m, c, g, p_vs }
}

/// Gravity rows alone (no springs); used for static force balances.
pub fn gravity_vector(q: &Vec5, params: &RobotParams) -> Vec5 {
    let state = GeneralizedState::from_position(*q);
    dynamic_terms(&state, params, &EquivalentSprings::default()).g
}

/// Generalized restoring forces of the three equivalent platform springs.
pub fn equivalent_spring_torques(q: &Vec5, springs: &EquivalentSprings) -> Vector3<f64> {
    Vector3::new(
        springs.k_x * (q[0] - springs.x_m0),
        springs.k_z * (q[1] - springs.z_m0),
        springs.k_theta * (q[2] - springs.theta_m0),
    )
}

/// Kinetic and potential energy `(K_E, P_E)` [J]. The potential includes
/// gravity of all three bodies plus the equivalent-spring storage.
pub fn energy(
    state: &GeneralizedState,
    params: &RobotParams,
    springs: &EquivalentSprings,
) -> (f64, f64) {
    let (_, links) = forward_kinematics(state, params);
    let qd = &state.qdot;
    let w_m = qd[2];
    let w_1 = qd[2] + qd[3];
    let w_2 = qd[2] + qd[3] + qd[4];
    let kinetic = 0.5 * params.m_m * (qd[0] * qd[0] + qd[1] * qd[1])
        + 0.5 * params.i_m * w_m * w_m
        + 0.5 * params.m_1 * links.vc1 * links.vc1
        + 0.5 * params.i_1 * w_1 * w_1
        + 0.5 * params.m_2 * links.vc2 * links.vc2
        + 0.5 * params.i_2 * w_2 * w_2;
    let dx = state.q[0] - springs.x_m0;
    let dz = state.q[1] - springs.z_m0;
    let dth = state.q[2] - springs.theta_m0;
    let potential = params.m_m * params.g * state.q[1]
        + params.m_1 * params.g * links.pc1.y
        + params.m_2 * params.g * links.pc2.y
        + 0.5 * springs.k_x * dx * dx
        + 0.5 * springs.k_z * dz * dz
        + 0.5 * springs.k_theta * dth * dth;
    (kinetic, potential)
}

/// Cable tensions from the commanded inputs at the current geometry. The
/// position-controlled pairs behave as springs of rate `K_s / L0`; the
/// lower tensions pass through. Spring-side entries may come out negative
/// here; the simulator clamps them via [`CableTensionState::clamped`].
pub fn cable_tensions(
    geometry: &CableGeometry,
    inputs: &TensionInputs,
    params: &RobotParams,
) -> CableTensionState {
    let l01 = inputs.l01.max(crate::kinematics::DEGENERATE_CABLE_LENGTH);
    let l06 = inputs.l06.max(crate::kinematics::DEGENERATE_CABLE_LENGTH);
    let k1 = params.k_s / l01;
    let k6 = params.k_s / l06;
    let l = &geometry.lengths;
    let t = Vec6::from_column_slice(&[
        k1 * (l[0] - l01),
        k1 * (l[1] - l01),
        inputs.t3,
        inputs.t4,
        k6 * (l[4] - l06),
        k6 * (l[5] - l06),
    ]);
    let l0 = Vec6::from_column_slice(&[l01, l01, 0.0, 0.0, l06, l06]);
    CableTensionState { t, l0 }
}

/// Solves for the generalized accelerations under the cable wrench, arm
/// torques and an external load at the end effector.
pub fn forward_dynamics(
    state: &GeneralizedState,
    tensions: &CableTensionState,
    arm_torques: (f64, f64),
    external: &Wrench,
    params: &RobotParams,
) -> Result<Vec5> {
    let geometry = crate::kinematics::cable_geometry(&state.q, params)?;
    forward_dynamics_with_geometry(state, &geometry, tensions, arm_torques, external, params)
}

/// Same as [`forward_dynamics`] with a precomputed geometry, for callers
/// that already hold it.
pub fn forward_dynamics_with_geometry(
    state: &GeneralizedState,
    geometry: &CableGeometry,
    tensions: &CableTensionState,
    arm_torques: (f64, f64),
    external: &Wrench,
    params: &RobotParams,
) -> Result<Vec5> {
    let terms = dynamic_terms(state, params, &EquivalentSprings::default());
    let cable_wrench = geometry.structure_matrix * tensions.t;
    let mut tau = Vec5::zeros();
    tau[0] = cable_wrench.x;
    tau[1] = cable_wrench.y;
    tau[2] = cable_wrench.z;
    tau[3] = arm_torques.0;
    tau[4] = arm_torques.1;
    let j = jacobian(&state.q, params);
    let rhs = tau - terms.c * state.qdot - terms.g - j.transpose() * external.combined();
    solve_spd(&terms.m, &rhs)
}

/// Accelerations of the stand-alone elastic platform model: no cables, the
/// three equivalent springs act on the platform rows and the arm rows take
/// joint torques.
pub fn forward_dynamics_spring(
    state: &GeneralizedState,
    springs: &EquivalentSprings,
    arm_torques: (f64, f64),
    external: &Wrench,
    params: &RobotParams,
) -> Result<Vec5> {
    let terms = dynamic_terms(state, params, springs);
    let mut tau = Vec5::zeros();
    tau[3] = arm_torques.0;
    tau[4] = arm_torques.1;
    let j = jacobian(&state.q, params);
    let rhs =
        tau - terms.c * state.qdot - terms.g - terms.p_vs - j.transpose() * external.combined();
    solve_spd(&terms.m, &rhs)
}

fn solve_spd(m: &Mat5, rhs: &Vec5) -> Result<Vec5> {
    match Cholesky::new(*m) {
        Some(chol) => Ok(chol.solve(rhs)),
        None => Err(Error::SingularInertia),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::cable_geometry;
    use crate::params::default_params;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_full_state(rng: &mut ChaCha8Rng) -> GeneralizedState {
        let q = Vec5::from_fn(|i, _| match i {
            0 => rng.random_range(-0.5..0.5),
            1 => rng.random_range(-0.3..0.3),
            2 => rng.random_range(-0.3..0.3),
            _ => rng.random_range(-2.0..2.0),
        });
        let qdot = Vec5::from_fn(|_, _| rng.random_range(-1.5..1.5));
        GeneralizedState::new(q, qdot)
    }

    #[test]
    fn inertia_entries_at_origin() {
        let p = default_params();
        let terms = dynamic_terms(&GeneralizedState::at_rest(), &p, &Default::default());
        assert_relative_eq!(terms.m[(0, 0)], 50.0, epsilon = 1e-12);
        assert_relative_eq!(terms.m[(4, 4)], 0.4125625, epsilon = 1e-12);
        assert_relative_eq!(terms.g[1], 490.5, epsilon = 1e-12);
        // Arm pointing straight up puts the gravity moment at zero.
        assert_relative_eq!(terms.g[2], 0.0, epsilon = 1e-12);
        assert_eq!(terms.p_vs[3], 0.0);
        assert_eq!(terms.p_vs[4], 0.0);
    }

    #[test]
    fn coriolis_vanishes_at_rest() {
        let p = default_params();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let mut state = random_full_state(&mut rng);
            state.qdot = Vec5::zeros();
            let terms = dynamic_terms(&state, &p, &Default::default());
            assert_eq!(terms.c, Mat5::zeros());
        }
    }

    #[test]
    fn inertia_symmetric_positive_definite() {
        let p = default_params();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..1000 {
            let state = random_full_state(&mut rng);
            let terms = dynamic_terms(&state, &p, &Default::default());
            let asym = (terms.m - terms.m.transpose()).abs().max();
            assert!(asym < 1e-10 * terms.m.abs().max());
            let eig = terms.m.symmetric_eigenvalues();
            assert!(eig.min() > 0.0, "non positive definite at {:?}", state.q);
        }
    }

    #[test]
    fn kinetic_energy_is_inertia_quadratic_form() {
        let p = default_params();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..100 {
            let state = random_full_state(&mut rng);
            let terms = dynamic_terms(&state, &p, &Default::default());
            let (ke, _) = energy(&state, &p, &Default::default());
            let quad = 0.5 * (state.qdot.transpose() * terms.m * state.qdot)[0];
            assert_relative_eq!(ke, quad, max_relative = 1e-9);
        }
    }

    #[test]
    fn energy_reference_cases() {
        let p = default_params();
        let (ke, pe) = energy(&GeneralizedState::at_rest(), &p, &Default::default());
        assert_eq!(ke, 0.0);
        let zc1 = p.l_m + p.l_c1;
        let zc2 = p.l_m + p.l_1 + p.l_c2;
        assert_relative_eq!(
            pe,
            p.m_1 * p.g * zc1 + p.m_2 * p.g * zc2,
            max_relative = 1e-12
        );

        let state = GeneralizedState::new(
            Vec5::zeros(),
            Vec5::from_column_slice(&[1.0, 0.0, 0.0, 0.0, 0.0]),
        );
        let (ke, _) = energy(&state, &p, &Default::default());
        assert_relative_eq!(ke, 25.0, epsilon = 1e-12);
    }

    #[test]
    fn spring_torques_follow_hookes_law() {
        let springs = EquivalentSprings {
            k_x: 100.0,
            k_z: 50.0,
            k_theta: 10.0,
            ..Default::default()
        };
        let at_rest = equivalent_spring_torques(&Vec5::zeros(), &springs);
        assert_eq!(at_rest, Vector3::zeros());
        let q = Vec5::from_column_slice(&[0.01, 0.0, 0.0, 0.0, 0.0]);
        let tau = equivalent_spring_torques(&q, &springs);
        assert_relative_eq!(tau.x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cable_tension_law() {
        let p = default_params();
        let geom = cable_geometry(&Vec5::zeros(), &p).unwrap();
        let l1 = geom.lengths[0];
        let unstretched = cable_tensions(
            &geom,
            &TensionInputs {
                l01: l1,
                t3: 40.0,
                t4: 55.0,
                l06: geom.lengths[5],
            },
            &p,
        );
        assert_relative_eq!(unstretched.t[0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(unstretched.t[5], 0.0, epsilon = 1e-9);
        assert_eq!(unstretched.t[2], 40.0);
        assert_eq!(unstretched.t[3], 55.0);

        // One percent strain produces one percent of the stiffness constant.
        let l01 = l1 / 1.01;
        let strained = cable_tensions(
            &geom,
            &TensionInputs {
                l01,
                t3: 0.0,
                t4: 0.0,
                l06: geom.lengths[5],
            },
            &p,
        );
        assert_relative_eq!(strained.t[0], 0.01 * p.k_s, max_relative = 1e-12);
        assert_relative_eq!(strained.t[0], 110.0, max_relative = 1e-12);
    }

    #[test]
    fn slack_clamp_zeroes_spring_sides_only() {
        let p = default_params();
        let geom = cable_geometry(&Vec5::zeros(), &p).unwrap();
        let state = cable_tensions(
            &geom,
            &TensionInputs {
                l01: geom.lengths[0] * 2.0,
                t3: 40.0,
                t4: 40.0,
                l06: geom.lengths[5] * 2.0,
            },
            &p,
        );
        assert!(state.t[0] < 0.0);
        let clamped = state.clamped();
        assert_eq!(clamped.t[0], 0.0);
        assert_eq!(clamped.t[1], 0.0);
        assert_eq!(clamped.t[4], 0.0);
        assert_eq!(clamped.t[5], 0.0);
        assert_eq!(clamped.t[2], 40.0);
        assert_eq!(clamped.t[3], 40.0);
    }

    #[test]
    fn zero_input_dynamics_match_direct_solve() {
        let p = default_params();
        let state = GeneralizedState::at_rest();
        let geom = cable_geometry(&state.q, &p).unwrap();
        let tensions = cable_tensions(
            &geom,
            &TensionInputs {
                l01: geom.lengths[0],
                t3: 0.0,
                t4: 0.0,
                l06: geom.lengths[5],
            },
            &p,
        );
        let qdd = forward_dynamics(&state, &tensions, (0.0, 0.0), &Wrench::ZERO, &p).unwrap();
        let terms = dynamic_terms(&state, &p, &Default::default());
        let oracle = terms.m.lu().solve(&(-terms.g)).unwrap();
        assert_relative_eq!(qdd, oracle, epsilon = 1e-10);
        // Residual check on the z row: M qdd = -G.
        let residual = terms.m * qdd + terms.g;
        assert_relative_eq!(residual.abs().max(), 0.0, epsilon = 1e-9);
    }

    /// Finite-differences the kinetic energy along trajectories to check
    /// the power identity qd' (M qdd + C qd) = d/dt (qd' M qd / 2).
    #[test]
    fn power_identity_along_trajectories() {
        let p = default_params();
        let springs = EquivalentSprings {
            k_x: 400.0,
            k_z: 300.0,
            k_theta: 50.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..20 {
            let state = random_full_state(&mut rng);
            let qdd = forward_dynamics_spring(&state, &springs, (0.0, 0.0), &Wrench::ZERO, &p)
                .unwrap();
            let terms = dynamic_terms(&state, &p, &springs);
            let lhs = state.qdot.dot(&(terms.m * qdd + terms.c * state.qdot));

            let h = 1e-6;
            let ke_at = |sign: f64| {
                let shifted = GeneralizedState::new(
                    state.q + sign * h * state.qdot,
                    state.qdot + sign * h * qdd,
                );
                energy(&shifted, &p, &springs).0
            };
            let dke = (ke_at(1.0) - ke_at(-1.0)) / (2.0 * h);
            assert_relative_eq!(lhs, dke, max_relative = 1e-4, epsilon = 1e-6);
        }
    }

    /// The platform rows of the cable force must equal the plain
    /// force-and-moment resultant of the individual cable pulls.
    #[test]
    fn cable_wrench_is_newton_euler_resultant() {
        let p = default_params();
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..100 {
            let state = random_full_state(&mut rng);
            let geom = cable_geometry(&state.q, &p).unwrap();
            let t = Vec6::from_fn(|_, _| rng.random_range(0.0..2000.0));
            let wrench = geom.structure_matrix * t;

            let mut force = Vector3::zeros();
            let mut moment = Vector3::zeros();
            for i in 0..6 {
                let pull = t[i] * geom.unit_vectors[i];
                force += pull;
                moment += geom.moment_arms[i].cross(&pull);
            }
            assert!((wrench.x - force.x).abs() < 1e-10);
            assert!((wrench.y - force.z).abs() < 1e-10);
            assert!((wrench.z - moment.y).abs() < 1e-10);
        }
    }

    /// Free motion of the spring-suspended model conserves energy: one
    /// second of hand-rolled RK4 on the spring-path accelerations.
    #[test]
    fn spring_model_energy_balance() {
        let p = default_params();
        let springs = EquivalentSprings {
            k_x: 2.0e3,
            k_z: 3.0e3,
            k_theta: 200.0,
            ..Default::default()
        };
        let mut state = GeneralizedState::new(
            Vec5::from_column_slice(&[0.02, -0.01, 0.01, 0.2, -0.3]),
            Vec5::from_column_slice(&[0.05, 0.04, 0.02, 0.3, -0.2]),
        );
        let accel = |s: &GeneralizedState| {
            forward_dynamics_spring(s, &springs, (0.0, 0.0), &Wrench::ZERO, &p).unwrap()
        };
        let (ke0, pe0) = energy(&state, &p, &springs);
        let e0 = ke0 + pe0;
        let dt = 1e-4;
        for _ in 0..10_000 {
            let k1v = state.qdot;
            let k1a = accel(&state);
            let s2 = GeneralizedState::new(state.q + 0.5 * dt * k1v, state.qdot + 0.5 * dt * k1a);
            let k2v = s2.qdot;
            let k2a = accel(&s2);
            let s3 = GeneralizedState::new(state.q + 0.5 * dt * k2v, state.qdot + 0.5 * dt * k2a);
            let k3v = s3.qdot;
            let k3a = accel(&s3);
            let s4 = GeneralizedState::new(state.q + dt * k3v, state.qdot + dt * k3a);
            let k4v = s4.qdot;
            let k4a = accel(&s4);
            state = GeneralizedState::new(
                state.q + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
                state.qdot + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
            );
        }
        let (ke, pe) = energy(&state, &p, &springs);
        let drift = ((ke + pe - e0) / e0).abs();
        assert!(drift < 1e-5, "relative energy drift {drift}");
    }

    /// Calibrating the three generalized springs to the cable stiffness
    /// diagonal at a pose makes their restoring forces match the change
    /// of the cable wrench for per-axis displacements.
    #[test]
    fn equivalent_springs_match_cable_wrench_linearization() {
        let p = default_params();
        let q0 = Vec5::zeros();
        let geom0 = cable_geometry(&q0, &p).unwrap();
        let pretension = 600.0;
        let l01 = p.k_s * geom0.lengths[0] / (p.k_s + pretension);
        let l06 = p.k_s * geom0.lengths[5] / (p.k_s + pretension);
        let inputs = TensionInputs {
            l01,
            t3: 200.0,
            t4: 200.0,
            l06,
        };
        let wrench_at = |dq: [f64; 3]| {
            let q = Vec5::from_column_slice(&[dq[0], dq[1], dq[2], 0.0, 0.0]);
            let g = cable_geometry(&q, &p).unwrap();
            g.structure_matrix * cable_tensions(&g, &inputs, &p).t
        };

        // Diagonal stiffness by central differences of the wrench map.
        let h = 1e-6;
        let mut diag = [0.0; 3];
        for i in 0..3 {
            let mut plus = [0.0; 3];
            let mut minus = [0.0; 3];
            plus[i] = h;
            minus[i] = -h;
            diag[i] = -(wrench_at(plus)[i] - wrench_at(minus)[i]) / (2.0 * h);
        }
        let w0 = wrench_at([0.0; 3]);
        // Rest pose such that the spring wrench reproduces -w0 at q0.
        let springs = EquivalentSprings {
            k_x: diag[0],
            k_z: diag[1],
            k_theta: diag[2],
            x_m0: w0[0] / diag[0],
            z_m0: w0[1] / diag[1],
            theta_m0: w0[2] / diag[2],
        };

        let step = 1e-4;
        for i in 0..3 {
            let mut dq = [0.0; 3];
            dq[i] = step;
            let q = Vec5::from_column_slice(&[dq[0], dq[1], dq[2], 0.0, 0.0]);
            let spring_tau = equivalent_spring_torques(&q, &springs);
            let cable = -wrench_at(dq);
            let err = (spring_tau[i] - cable[i]).abs();
            assert!(
                err <= 1e-4 * cable[i].abs().max(1.0),
                "axis {i}: spring {} vs cable {}",
                spring_tau[i],
                cable[i]
            );
        }
    }

    #[test]
    fn singular_inertia_not_triggered_on_valid_states() {
        let p = default_params();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..50 {
            let state = random_full_state(&mut rng);
            let geom = cable_geometry(&state.q, &p).unwrap();
            let ts = cable_tensions(
                &geom,
                &TensionInputs {
                    l01: 1.2,
                    t3: 100.0,
                    t4: 100.0,
                    l06: 1.2,
                },
                &p,
            )
            .clamped();
            forward_dynamics(&state, &ts, (1.0, -1.0), &Wrench::ZERO, &p).unwrap();
        }
    }
}
