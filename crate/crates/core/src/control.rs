//! The two closed-loop strategies.
//!
//! Strategy A holds the machine with two decoupled PID loops: one on the
//! outer top cable lengths commanding the winch set lengths, one on the
//! arm joints commanding torques. The lower cable tensions stay at fixed
//! set points.
//!
//! Strategy B runs a single five-channel PID on the generalized
//! coordinates. Its platform rows become a corrective wrench that is added
//! to the gravity wrench and pushed through the tension distribution, so
//! the commanded cables both track the pose and keep the platform stiff;
//! the arm rows are joint torques.

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{TensionInputs, Wrench};
use crate::error::{Error, Result};
use crate::kinematics::{CableGeometry, GeneralizedState, Vec5};
use crate::params::RobotParams;
use crate::tension;

/// Proportional, integral and derivative gains, applied elementwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl GainSet {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Validation {
                    field: name.to_string(),
                    message: format!("gain must be non-negative, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Discrete controller memory: trapezoidal error integral plus the last
/// sample for the backward difference. The first sample after a reset
/// contributes no integral area and no derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct PidState<const N: usize> {
    pub integral: SVector<f64, N>,
    pub prev_error: Option<SVector<f64, N>>,
    pub prev_time: Option<f64>,
}

impl<const N: usize> Default for PidState<N> {
    fn default() -> Self {
        Self::new()
    }
}

impl<const N: usize> PidState<N> {
    pub fn new() -> Self {
        Self {
            integral: SVector::zeros(),
            prev_error: None,
            prev_time: None,
        }
    }

    pub fn reset(&mut self) {
        self.integral = SVector::zeros();
        self.prev_error = None;
        self.prev_time = None;
    }

    fn increments(&self, e: &SVector<f64, N>, t: f64) -> Result<(SVector<f64, N>, SVector<f64, N>)> {
        match (self.prev_time, &self.prev_error) {
            (Some(tp), Some(ep)) => {
                if t <= tp {
                    return Err(Error::Contract(format!(
                        "sample times must strictly increase ({t} after {tp})"
                    )));
                }
                let dt = t - tp;
                Ok(((e + ep) * (0.5 * dt), (e - ep) / dt))
            }
            _ => Ok((SVector::zeros(), SVector::zeros())),
        }
    }

    fn commit(&mut self, e: &SVector<f64, N>, t: f64) {
        self.prev_error = Some(*e);
        self.prev_time = Some(t);
    }
}

/// One PID update: `u = kp e + ki \int e + kd de/dt`.
pub fn pid_step<const N: usize>(
    state: &mut PidState<N>,
    e: &SVector<f64, N>,
    t: f64,
    gains: &GainSet,
) -> Result<SVector<f64, N>> {
    let (di, deriv) = state.increments(e, t)?;
    state.integral += di;
    let out = e * gains.kp + state.integral * gains.ki + deriv * gains.kd;
    state.commit(e, t);
    Ok(out)
}

/// PID update with output limits and conditional integration: a channel
/// whose unclamped output violates a limit while the error keeps pushing
/// it outward does not accumulate integral this step.
pub fn pid_step_clamped<const N: usize>(
    state: &mut PidState<N>,
    e: &SVector<f64, N>,
    t: f64,
    gains: &GainSet,
    lo: &SVector<f64, N>,
    hi: &SVector<f64, N>,
) -> Result<SVector<f64, N>> {
    let (di, deriv) = state.increments(e, t)?;
    let mut integral = state.integral + di;
    let mut out = e * gains.kp + integral * gains.ki + deriv * gains.kd;
    for ch in 0..N {
        let windup_high = out[ch] > hi[ch] && e[ch] > 0.0;
        let windup_low = out[ch] < lo[ch] && e[ch] < 0.0;
        if windup_high || windup_low {
            integral[ch] = state.integral[ch];
            out[ch] = gains.kp * e[ch] + gains.ki * integral[ch] + gains.kd * deriv[ch];
        }
        out[ch] = out[ch].clamp(lo[ch], hi[ch]);
    }
    state.integral = integral;
    state.commit(e, t);
    Ok(out)
}

/// Which loop an error vector feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorChannel {
    /// Outer top cable lengths (dimension 2).
    PlatformCables,
    /// Arm joint angles (dimension 2).
    Arm,
    /// Full generalized coordinates (dimension 5).
    Joint,
}

impl ErrorChannel {
    fn dimension(&self) -> usize {
        match self {
            ErrorChannel::PlatformCables | ErrorChannel::Arm => 2,
            ErrorChannel::Joint => 5,
        }
    }
}

/// Elementwise `desired - actual` with a dimension check.
pub fn error_vector(channel: ErrorChannel, desired: &[f64], actual: &[f64]) -> Result<Vec<f64>> {
    let dim = channel.dimension();
    if desired.len() != dim || actual.len() != dim {
        return Err(Error::Contract(format!(
            "{channel:?} expects dimension {dim}, got desired {} / actual {}",
            desired.len(),
            actual.len()
        )));
    }
    Ok(desired.iter().zip(actual).map(|(d, a)| d - a).collect())
}

/// One controller tick: winch set lengths, lower-cable tensions and arm
/// torques, plus the wrench demand when a distribution ran.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub tension_inputs: TensionInputs,
    /// Arm joint torques `(tau_4, tau_5)` [N·m].
    pub arm_torques: (f64, f64),
    /// Platform wrench demand fed to the distribution (strategy B only).
    pub wrench_demand: Option<(f64, f64, f64)>,
}

/// Winch set-length envelope [m]; commands outside are physically
/// meaningless and get clamped.
const WINCH_MIN: f64 = 0.01;
const WINCH_MAX: f64 = 10.0;

/// Cable-length and arm-joint targets for strategy A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CableArmTargets {
    pub l1: f64,
    pub l6: f64,
    pub theta1: f64,
    pub theta2: f64,
}

/// Cable-length PID plus arm-joint PID; lower tensions held constant.
#[derive(Debug, Clone)]
pub struct StrategyAController {
    pub gains_platform: GainSet,
    pub gains_arm: GainSet,
    /// Fixed set points for the force-controlled pair [N].
    pub t3: f64,
    pub t4: f64,
    pid_platform: PidState<2>,
    pid_arm: PidState<2>,
}

impl StrategyAController {
    pub fn new(gains_platform: GainSet, gains_arm: GainSet, t3: f64, t4: f64) -> Self {
        Self {
            gains_platform,
            gains_arm,
            t3,
            t4,
            pid_platform: PidState::new(),
            pid_arm: PidState::new(),
        }
    }

    pub fn reset(&mut self) {
        self.pid_platform.reset();
        self.pid_arm.reset();
    }

    /// The winch set lengths are the desired cable lengths plus the PID
    /// correction (position-mode winches). A winch refuses set lengths
    /// that would load the cable beyond the rated maximum at its current
    /// measured length; the anti-windup box tracks that limit.
    pub fn step(
        &mut self,
        desired: &CableArmTargets,
        actual: &CableArmTargets,
        t: f64,
        params: &RobotParams,
    ) -> Result<ControlCommand> {
        let e_platform =
            SVector::<f64, 2>::new(desired.l1 - actual.l1, desired.l6 - actual.l6);
        let floor1 = crate::tension::unstretched_for_tension(actual.l1, params.t_max, params)
            .max(WINCH_MIN);
        let floor6 = crate::tension::unstretched_for_tension(actual.l6, params.t_max, params)
            .max(WINCH_MIN);
        let lo = SVector::<f64, 2>::new(floor1 - desired.l1, floor6 - desired.l6);
        let hi = SVector::<f64, 2>::new(WINCH_MAX - desired.l1, WINCH_MAX - desired.l6);
        let u_platform = pid_step_clamped(
            &mut self.pid_platform,
            &e_platform,
            t,
            &self.gains_platform,
            &lo,
            &hi,
        )?;
        let e_arm =
            SVector::<f64, 2>::new(desired.theta1 - actual.theta1, desired.theta2 - actual.theta2);
        let u_arm = pid_step(&mut self.pid_arm, &e_arm, t, &self.gains_arm)?;

        Ok(ControlCommand {
            tension_inputs: TensionInputs {
                l01: (desired.l1 + u_platform[0]).clamp(floor1, WINCH_MAX),
                t3: self.t3.clamp(params.t_min, params.t_max),
                t4: self.t4.clamp(params.t_min, params.t_max),
                l06: (desired.l6 + u_platform[1]).clamp(floor6, WINCH_MAX),
            },
            arm_torques: (u_arm[0], u_arm[1]),
            wrench_demand: None,
        })
    }
}

/// Full joint-space PID with the tension distribution in the loop.
#[derive(Debug, Clone)]
pub struct StrategyBController {
    pub gains: GainSet,
    pid: PidState<5>,
}

impl StrategyBController {
    pub fn new(gains: GainSet) -> Self {
        Self {
            gains,
            pid: PidState::new(),
        }
    }

    pub fn reset(&mut self) {
        self.pid.reset();
    }

    /// PID on `q_d - q`; rows 0..3 turn into a wrench demand resolved by
    /// the stiffness-maximizing distribution, rows 3..5 drive the arm.
    ///
    /// If the demanded wrench is infeasible the integral is held (no
    /// growth into the saturation), and if it stays infeasible the
    /// commanded tensions fall back to the clamped midpoint of the line,
    /// with a warning.
    pub fn step(
        &mut self,
        q_desired: &Vec5,
        feedback: &GeneralizedState,
        geometry: &CableGeometry,
        t: f64,
        params: &RobotParams,
        external: &Wrench,
    ) -> Result<ControlCommand> {
        let e = q_desired - feedback.q;
        let (di, deriv) = self.pid.increments(&e, t)?;
        let gravity = tension::static_wrench(&feedback.q, params, external);
        let gains = self.gains;

        let output =
            |integral: &SVector<f64, 5>| e * gains.kp + integral * gains.ki + deriv * gains.kd;

        let solve = |u: &SVector<f64, 5>| {
            let demand = gravity + nalgebra::Vector3::new(u[0], u[1], u[2]);
            tension::distribute(geometry, &demand, params).map(|sol| (demand, sol))
        };

        let grown = self.pid.integral + di;
        let frozen = self.pid.integral;
        let mut u = output(&grown);
        let attempt = solve(&u);
        let (demand, solution) = match attempt {
            Ok(found) => {
                self.pid.integral = grown;
                found
            }
            Err(Error::InfeasibleTension { .. }) => {
                // Conditional integration: retry with the integral frozen.
                u = output(&frozen);
                match solve(&u) {
                    Ok(found) => {
                        log::warn!("t = {t}: wrench demand saturated, integral held");
                        found
                    }
                    Err(Error::InfeasibleTension { intervals, .. }) => {
                        let (lo, hi) = intervals.iter().fold(
                            (f64::NEG_INFINITY, f64::INFINITY),
                            |(lo, hi), &(l, h)| (lo.max(l), hi.min(h)),
                        );
                        let lambda3 = 0.5 * (lo + hi);
                        let demand = gravity + nalgebra::Vector3::new(u[0], u[1], u[2]);
                        let a = &geometry.structure_matrix;
                        let t_a = tension::particular_solution(a, &demand)?;
                        let n_a = tension::null_basis(a)?;
                        let red = tension::lambda_reduction(
                            &t_a,
                            &n_a,
                            geometry,
                            params,
                            &geometry.lengths,
                        )?;
                        let mut t_fallback = red.tension(lambda3);
                        for i in 0..6 {
                            t_fallback[i] = t_fallback[i].clamp(params.t_min, params.t_max);
                        }
                        log::warn!(
                            "t = {t}: wrench demand infeasible, commanding clamped tensions"
                        );
                        (
                            demand,
                            tension::RedundancySolution {
                                t_a,
                                n_a,
                                lambda: nalgebra::Vector3::new(0.0, 0.0, lambda3),
                                t: t_fallback,
                            },
                        )
                    }
                    Err(other) => return Err(other),
                }
            }
            Err(other) => return Err(other),
        };
        self.pid.commit(&e, t);

        let t_opt = &solution.t;
        Ok(ControlCommand {
            tension_inputs: TensionInputs {
                l01: tension::unstretched_for_tension(geometry.lengths[0], t_opt[0], params),
                t3: t_opt[2].clamp(params.t_min, params.t_max),
                t4: t_opt[3].clamp(params.t_min, params.t_max),
                l06: tension::unstretched_for_tension(geometry.lengths[5], t_opt[5], params),
            },
            arm_torques: (u[3], u[4]),
            wrench_demand: Some((demand.x, demand.y, demand.z)),
        })
    }
}
