//! Fixed-step closed-loop rollouts and the built-in scenario catalog.
//!
//! One scenario is one deterministic job: sample the desired trajectory,
//! tick the controller, hold the command over a classical Runge-Kutta
//! step of the rigid-body model, repeat. Identical inputs reproduce
//! bit-identical records.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::control::{
    CableArmTargets, ControlCommand, GainSet, StrategyAController, StrategyBController,
};
use crate::dynamics::{
    cable_tensions, energy, forward_dynamics_with_geometry, CableTensionState, TensionInputs,
    Wrench,
};
use crate::error::{Error, Result};
use crate::kinematics::{
    cable_geometry, forward_kinematics, EndEffectorPose, GeneralizedState, Vec5, Vec6,
};
use crate::params::RobotParams;

/// Any state magnitude beyond this is treated as a blow-up [SI units].
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Which control structure closes the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    /// Cable-length PID plus arm-joint PID.
    A {
        gains_platform: GainSet,
        gains_arm: GainSet,
    },
    /// Five-channel joint-space PID with in-loop tension distribution.
    B { gains: GainSet },
}

/// Source of the lower-cable tension commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TensionPolicy {
    /// Hold fixed set points [N].
    Constant { t3: f64, t4: f64 },
    /// Stiffness-maximizing distribution in the loop.
    Optimized,
}

/// Desired-value generator, affine in time per channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Trajectory {
    /// Targets `(L1, L6, theta1, theta2)` for strategy A.
    CableRamp { base: [f64; 4], rate: [f64; 4] },
    /// Targets `q_d` for strategy B.
    JointRamp { base: [f64; 5], rate: [f64; 5] },
}

/// Desired values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectorySample {
    Cables(CableArmTargets),
    Joints(Vec5),
}

impl Trajectory {
    pub fn sample(&self, t: f64) -> TrajectorySample {
        match self {
            Trajectory::CableRamp { base, rate } => TrajectorySample::Cables(CableArmTargets {
                l1: base[0] + rate[0] * t,
                l6: base[1] + rate[1] * t,
                theta1: base[2] + rate[2] * t,
                theta2: base[3] + rate[3] * t,
            }),
            Trajectory::JointRamp { base, rate } => {
                let mut q = Vec5::zeros();
                for i in 0..5 {
                    q[i] = base[i] + rate[i] * t;
                }
                TrajectorySample::Joints(q)
            }
        }
    }
}

/// Complete description of one deterministic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub strategy: Strategy,
    pub trajectory: Trajectory,
    pub tension_policy: TensionPolicy,
    /// Total simulated time [s].
    pub duration: f64,
    /// Fixed step [s].
    pub dt: f64,
    /// Initial `(q, qdot)`.
    pub initial_q: [f64; 5],
    pub initial_qdot: [f64; 5],
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::Contract(format!("dt must be positive, got {}", self.dt)));
        }
        if self.duration < self.dt {
            return Err(Error::Contract(format!(
                "duration {} shorter than one step {}",
                self.duration, self.dt
            )));
        }
        match (&self.strategy, &self.tension_policy) {
            (Strategy::B { .. }, TensionPolicy::Constant { .. }) => Err(Error::Contract(
                "joint-space strategy requires the optimized tension policy".to_string(),
            )),
            _ => Ok(()),
        }
    }

    pub fn initial_state(&self) -> GeneralizedState {
        GeneralizedState::new(
            Vec5::from_column_slice(&self.initial_q),
            Vec5::from_column_slice(&self.initial_qdot),
        )
    }
}

/// Everything recorded at one sample instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    pub q: Vec5,
    pub qdot: Vec5,
    pub qddot: Vec5,
    /// Applied cable tensions after slack clamping [N].
    pub tensions: Vec6,
    pub command: ControlCommand,
    /// Tracking errors padded to five channels (strategy A uses the first
    /// four: L1, L6, theta1, theta2).
    pub error: [f64; 5],
    pub pose: EndEffectorPose,
    pub kinetic: f64,
    pub potential: f64,
}

/// Rollout result; on divergence the records up to the failure are kept.
#[derive(Debug)]
pub struct ScenarioRun {
    pub records: Vec<SimRecord>,
    pub failure: Option<Error>,
}

impl ScenarioRun {
    pub fn into_result(self) -> Result<Vec<SimRecord>> {
        match self.failure {
            None => Ok(self.records),
            Some(e) => Err(e),
        }
    }
}

fn applied_tensions(
    state: &GeneralizedState,
    inputs: &TensionInputs,
    params: &RobotParams,
) -> Result<(crate::kinematics::CableGeometry, CableTensionState)> {
    let geometry = cable_geometry(&state.q, params)?;
    let tensions = cable_tensions(&geometry, inputs, params).clamped();
    Ok((geometry, tensions))
}

fn plant_accel(
    state: &GeneralizedState,
    command: &ControlCommand,
    params: &RobotParams,
) -> Result<Vec5> {
    let (geometry, tensions) = applied_tensions(state, &command.tension_inputs, params)?;
    forward_dynamics_with_geometry(
        state,
        &geometry,
        &tensions,
        command.arm_torques,
        &Wrench::ZERO,
        params,
    )
}

fn check_finite(state: &GeneralizedState, t: f64) -> Result<()> {
    for i in 0..5 {
        for (channel, v) in [(i, state.q[i]), (i + 5, state.qdot[i])] {
            if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
                return Err(Error::Divergence {
                    t,
                    channel,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// One classical fourth-order Runge-Kutta step of the closed-loop plant
/// with the command held constant across the internal stages. Cable
/// tensions are re-evaluated from the stage states.
pub fn integrate_step(
    state: &GeneralizedState,
    command: &ControlCommand,
    params: &RobotParams,
    t: f64,
    dt: f64,
) -> Result<GeneralizedState> {
    let f = |s: &GeneralizedState| plant_accel(s, command, params);

    let k1v = state.qdot;
    let k1a = f(state)?;
    let s2 = GeneralizedState::new(state.q + 0.5 * dt * k1v, state.qdot + 0.5 * dt * k1a);
    let k2v = s2.qdot;
    let k2a = f(&s2)?;
    let s3 = GeneralizedState::new(state.q + 0.5 * dt * k2v, state.qdot + 0.5 * dt * k2a);
    let k3v = s3.qdot;
    let k3a = f(&s3)?;
    let s4 = GeneralizedState::new(state.q + dt * k3v, state.qdot + dt * k3a);
    let k4v = s4.qdot;
    let k4a = f(&s4)?;

    let next = GeneralizedState::new(
        state.q + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        state.qdot + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
    );
    check_finite(&next, t + dt)?;
    Ok(next)
}

enum Controller {
    A(StrategyAController),
    B(StrategyBController),
}

/// Closed-loop rollout of one scenario. Emits a record at every sample
/// time `0, dt, ..., duration`; on divergence the partial records are
/// retained alongside the error.
pub fn run_scenario(spec: &ScenarioSpec, params: &RobotParams) -> ScenarioRun {
    let mut records = Vec::new();
    if let Err(e) = spec.validate() {
        return ScenarioRun {
            records,
            failure: Some(e),
        };
    }
    let steps = (spec.duration / spec.dt).round() as usize;
    records.reserve(steps + 1);

    let mut controller = match (&spec.strategy, &spec.tension_policy) {
        (
            Strategy::A {
                gains_platform,
                gains_arm,
            },
            policy,
        ) => {
            let (t3, t4) = match policy {
                TensionPolicy::Constant { t3, t4 } => (*t3, *t4),
                TensionPolicy::Optimized => (params.t_min, params.t_min),
            };
            Controller::A(StrategyAController::new(*gains_platform, *gains_arm, t3, t4))
        }
        (Strategy::B { gains }, _) => Controller::B(StrategyBController::new(*gains)),
    };

    let mut state = spec.initial_state();
    for k in 0..=steps {
        let t = k as f64 * spec.dt;
        if let Err(e) = check_finite(&state, t) {
            return ScenarioRun {
                records,
                failure: Some(e),
            };
        }

        let step_result = (|| -> Result<(ControlCommand, [f64; 5])> {
            let geometry = cable_geometry(&state.q, params)?;
            match (&mut controller, spec.trajectory.sample(t)) {
                (Controller::A(ctrl), TrajectorySample::Cables(desired)) => {
                    let actual = CableArmTargets {
                        l1: geometry.lengths[0],
                        l6: geometry.lengths[5],
                        theta1: state.q[3],
                        theta2: state.q[4],
                    };
                    let cmd = ctrl.step(&desired, &actual, t, params)?;
                    let error = [
                        desired.l1 - actual.l1,
                        desired.l6 - actual.l6,
                        desired.theta1 - actual.theta1,
                        desired.theta2 - actual.theta2,
                        0.0,
                    ];
                    Ok((cmd, error))
                }
                (Controller::B(ctrl), TrajectorySample::Joints(q_d)) => {
                    let cmd = ctrl.step(&q_d, &state, &geometry, t, params, &Wrench::ZERO)?;
                    let e = q_d - state.q;
                    Ok((cmd, [e[0], e[1], e[2], e[3], e[4]]))
                }
                _ => Err(Error::Contract(
                    "trajectory kind does not match the strategy".to_string(),
                )),
            }
        })();
        let (command, error) = match step_result {
            Ok(pair) => pair,
            Err(e) => {
                return ScenarioRun {
                    records,
                    failure: Some(e),
                }
            }
        };

        let record = (|| -> Result<SimRecord> {
            let (_, tensions) = applied_tensions(&state, &command.tension_inputs, params)?;
            let qddot = plant_accel(&state, &command, params)?;
            let (pose, _) = forward_kinematics(&state, params);
            let (kinetic, potential) = energy(&state, params, &Default::default());
            Ok(SimRecord {
                t,
                q: state.q,
                qdot: state.qdot,
                qddot,
                tensions: tensions.t,
                command,
                error,
                pose,
                kinetic,
                potential,
            })
        })();
        match record {
            Ok(r) => records.push(r),
            Err(e) => {
                return ScenarioRun {
                    records,
                    failure: Some(e),
                }
            }
        }

        if k < steps {
            match integrate_step(&state, &command, params, t, spec.dt) {
                Ok(next) => state = next,
                Err(e) => {
                    return ScenarioRun {
                        records,
                        failure: Some(e),
                    }
                }
            }
        }
    }

    ScenarioRun {
        records,
        failure: None,
    }
}

/// The six published case studies, keyed by name.
pub fn builtin_scenarios() -> BTreeMap<String, ScenarioSpec> {
    let gains_platform = GainSet::new(2e2, 10.0, 0.0);
    let gains_arm = GainSet::new(6e2, 20.0, 1e2);
    let gains_joint = GainSet::new(5e5, 3.5e7, 1.1e4);
    let strategy_a = Strategy::A {
        gains_platform,
        gains_arm,
    };
    let strategy_b = Strategy::B { gains: gains_joint };
    let constant = TensionPolicy::Constant { t3: 40.0, t4: 40.0 };
    // The joint-space gains put the sampled-derivative loop gain
    // kd*dt/m_eff near 4 at dt = 1e-4 (m_eff ~ 0.26 kg m^2 for the wrist
    // channel), outside the discrete stability disc; those cases run at
    // 1e-5 s.
    let base = |name: &str, strategy, trajectory, policy| {
        let dt = match strategy {
            Strategy::A { .. } => 1e-4,
            Strategy::B { .. } => 1e-5,
        };
        ScenarioSpec {
            name: name.to_string(),
            strategy,
            trajectory,
            tension_policy: policy,
            duration: 3.0,
            dt,
            initial_q: [0.0; 5],
            initial_qdot: [0.0; 5],
        }
    };

    let mut map = BTreeMap::new();
    map.insert(
        "case1".to_string(),
        base(
            "case1",
            strategy_a,
            Trajectory::CableRamp {
                base: [1.35, 1.35, 0.0, 0.0],
                rate: [0.0; 4],
            },
            constant,
        ),
    );
    map.insert(
        "case2".to_string(),
        base(
            "case2",
            strategy_b,
            Trajectory::JointRamp {
                base: [2e-3, 4e-3, 0.0, 0.0, 0.0],
                rate: [0.0; 5],
            },
            TensionPolicy::Optimized,
        ),
    );
    map.insert(
        "case3a".to_string(),
        base(
            "case3a",
            strategy_a,
            Trajectory::CableRamp {
                base: [1.35, 1.35, 0.0, 0.0],
                rate: [0.0, 0.0, 0.1, 0.1],
            },
            constant,
        ),
    );
    map.insert(
        "case3b".to_string(),
        base(
            "case3b",
            strategy_a,
            Trajectory::CableRamp {
                base: [1.35, 1.35, 0.0, 0.0],
                rate: [-0.01, 0.01, 0.0, 0.0],
            },
            constant,
        ),
    );
    map.insert(
        "case4a".to_string(),
        base(
            "case4a",
            strategy_b,
            Trajectory::JointRamp {
                base: [0.0; 5],
                rate: [0.0, 0.0, 0.0, 1.0, -1.0],
            },
            TensionPolicy::Optimized,
        ),
    );
    map.insert(
        "case4b".to_string(),
        base(
            "case4b",
            strategy_b,
            Trajectory::JointRamp {
                base: [0.0; 5],
                rate: [-0.1, -0.05, 0.0, 0.0, 0.0],
            },
            TensionPolicy::Optimized,
        ),
    );
    map
}

/// Formats a double with 17 significant digits, enough to reparse the
/// exact bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Fixed column set of the time-series file.
pub fn csv_header() -> String {
    let mut cols: Vec<String> = vec!["t".to_string()];
    cols.extend((0..5).map(|i| format!("q{i}")));
    cols.extend((0..5).map(|i| format!("qd{i}")));
    cols.extend((0..5).map(|i| format!("e{i}")));
    cols.extend((0..6).map(|i| format!("T{i}")));
    cols.extend(["tau4", "tau5", "x_e", "z_e", "q_e", "KE", "PE"].map(String::from));
    cols.join(",")
}

pub fn csv_row(r: &SimRecord) -> String {
    let mut fields = Vec::with_capacity(29);
    fields.push(fmt_f64(r.t));
    fields.extend(r.q.iter().map(|v| fmt_f64(*v)));
    fields.extend(r.qdot.iter().map(|v| fmt_f64(*v)));
    fields.extend(r.error.iter().map(|v| fmt_f64(*v)));
    fields.extend(r.tensions.iter().map(|v| fmt_f64(*v)));
    fields.push(fmt_f64(r.command.arm_torques.0));
    fields.push(fmt_f64(r.command.arm_torques.1));
    fields.push(fmt_f64(r.pose.x_e));
    fields.push(fmt_f64(r.pose.z_e));
    fields.push(fmt_f64(r.pose.q_e));
    fields.push(fmt_f64(r.kinetic));
    fields.push(fmt_f64(r.potential));
    fields.join(",")
}

/// Serializes a record sequence as the canonical CSV document.
pub fn records_to_csv(records: &[SimRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 640);
    out.push_str(&csv_header());
    out.push('\n');
    for r in records {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

pub fn write_timeseries<W: Write>(mut w: W, records: &[SimRecord]) -> Result<()> {
    w.write_all(records_to_csv(records).as_bytes())?;
    Ok(())
}

/// Post-run metrics shared by the front end and the verification suite.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    /// Earliest time after which every channel stays within 5 percent of
    /// its own peak magnitude; `None` if some channel never settles.
    pub settling_time: Option<f64>,
    /// Peak absolute error per recorded channel.
    pub peak_error: [f64; 5],
    /// Tensions at the final sample [N].
    pub final_tensions: [f64; 6],
    /// Whether the platform error channels keep ringing: final-quarter
    /// amplitude at or above a tenth of the whole-run amplitude.
    pub sustained_oscillation: bool,
}

/// Channel count that carries tracking errors for a strategy.
fn active_channels(records: &[SimRecord]) -> usize {
    if records.iter().any(|r| r.command.wrench_demand.is_some()) {
        5
    } else {
        4
    }
}

pub fn summarize(records: &[SimRecord]) -> RunSummary {
    let n = records.len();
    let channels = active_channels(records);
    let mut peak = [0.0f64; 5];
    for r in records {
        for (p, e) in peak.iter_mut().zip(r.error.iter()) {
            *p = p.max(e.abs());
        }
    }

    // Settling: last excursion above 5 percent of the channel peak.
    let mut settling_time = Some(0.0f64);
    for (ch, &peak_ch) in peak.iter().enumerate().take(channels) {
        if peak_ch == 0.0 {
            continue;
        }
        let threshold = 0.05 * peak_ch;
        let last_violation = records
            .iter()
            .rev()
            .find(|r| r.error[ch].abs() > threshold)
            .map(|r| r.t);
        if let (Some(t), Some(current)) = (last_violation, &mut settling_time) {
            if t >= records[n - 1].t {
                settling_time = None;
            } else if t > *current {
                *current = t;
            }
        }
    }

    // Oscillation: compare half peak-to-peak amplitudes of the platform
    // channels over the final quarter against the whole run.
    let quarter = &records[n - n / 4..];
    let mut sustained = false;
    for ch in 0..2.min(channels) {
        let amp = |slice: &[SimRecord]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in slice {
                lo = lo.min(r.error[ch]);
                hi = hi.max(r.error[ch]);
            }
            0.5 * (hi - lo)
        };
        let full = amp(records);
        let tail = amp(quarter);
        if full > 0.0 && tail >= 0.1 * full {
            sustained = true;
        }
    }

    let last = &records[n - 1];
    let mut final_tensions = [0.0; 6];
    final_tensions.copy_from_slice(last.tensions.as_slice());

    RunSummary {
        settling_time,
        peak_error: peak,
        final_tensions,
        sustained_oscillation: sustained,
    }
}
