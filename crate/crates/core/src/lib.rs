//! Simulation library for a planar cable-driven platform carrying a
//! two-link serial arm.
//!
//! Six cables suspend a rigid platform inside a fixed frame; the top four
//! run in parallelogram pairs that pin the platform orientation, the
//! bottom two are force-controlled. The crate provides:
//!
//! - analytic forward/inverse kinematics and the cable geometry
//!   ([`kinematics`]),
//! - the coupled platform-arm rigid-body model with cables entering as a
//!   tension wrench ([`dynamics`]),
//! - static tension distribution over the redundant cable set with a
//!   closed-form stiffness-maximizing pick, plus platform stiffness
//!   matrices ([`tension`]),
//! - the two PID control structures ([`control`]),
//! - deterministic fixed-step closed-loop rollouts of the published case
//!   studies ([`sim`]).

pub mod control;
pub mod dynamics;
pub mod error;
pub mod kinematics;
pub mod params;
pub mod sim;
pub mod tension;

pub use control::{ControlCommand, GainSet, PidState, StrategyAController, StrategyBController};
pub use dynamics::{CableTensionState, DynamicTerms, TensionInputs, Wrench};
pub use error::{Error, Result};
pub use kinematics::{
    CableGeometry, Elbow, EndEffectorPose, GeneralizedState, LinkKinematics, PlatformBranch, Vec5,
    Vec6,
};
pub use params::{default_params, load_config, EquivalentSprings, RobotParams};
pub use sim::{builtin_scenarios, run_scenario, ScenarioRun, ScenarioSpec, SimRecord};
pub use tension::{LambdaReduction, RedundancySolution, StiffnessDecomposition};
