//! Physical constants of the robot and configuration ingestion.
//!
//! All values are SI (meters, kilograms, newtons, radians). Every other
//! module reads from [`RobotParams`]; the struct is immutable after
//! construction and freely shareable across threads.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Geometry, masses, inertias, tension limits and cable stiffness of the
/// six-cable platform with its two-link arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotParams {
    /// Spacing of the lower platform anchor pair [m].
    pub l_a: f64,
    /// Spacing of the top platform anchor pair [m].
    pub l_b: f64,
    /// Vertical drop from the top anchors to the mid anchors [m].
    pub l_c: f64,
    /// Spacing of the mid platform anchor pair [m].
    pub l_d: f64,
    /// Width of the static frame [m].
    pub l_e: f64,
    /// Height of the static frame [m].
    pub l_f: f64,
    /// Inset of the top frame anchors from the frame corners [m].
    pub l_g: f64,
    /// Drop of the side frame anchors below the top corners [m].
    pub l_h: f64,
    /// Vertical drop from the top anchors to the lower anchors [m].
    pub l_bd: f64,
    /// Offset from the platform center of mass to the arm base joint [m].
    pub l_m: f64,
    /// Length of arm link 1 [m].
    pub l_1: f64,
    /// Length of arm link 2 [m].
    pub l_2: f64,
    /// Distance from joint 1 to the center of mass of link 1 [m].
    pub l_c1: f64,
    /// Distance from joint 2 to the center of mass of link 2 [m].
    pub l_c2: f64,
    /// Platform mass [kg].
    pub m_m: f64,
    /// Mass of link 1 [kg].
    pub m_1: f64,
    /// Mass of link 2 [kg].
    pub m_2: f64,
    /// Platform moment of inertia [kg·m²].
    pub i_m: f64,
    /// Link 1 moment of inertia [kg·m²].
    pub i_1: f64,
    /// Link 2 moment of inertia [kg·m²].
    pub i_2: f64,
    /// Minimum admissible cable tension [N].
    pub t_min: f64,
    /// Maximum admissible cable tension [N].
    pub t_max: f64,
    /// Cable stiffness constant [N]; a cable of unstretched length `L0`
    /// behaves as a linear spring of rate `K_s / L0`.
    pub k_s: f64,
    /// Gravitational acceleration [m/s²].
    pub g: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            l_a: 0.440,
            l_b: 0.268,
            l_c: 0.105,
            l_d: 0.412,
            l_e: 3.000,
            l_f: 1.000,
            l_g: 0.086,
            l_h: 0.105,
            l_bd: 0.055,
            l_m: 0.052,
            l_1: 0.305,
            l_2: 0.305,
            l_c1: 0.1525,
            l_c2: 0.1525,
            m_m: 30.0,
            m_1: 10.0,
            m_2: 10.0,
            i_m: 0.83,
            i_1: 0.18,
            i_2: 0.18,
            t_min: 40.0,
            t_max: 2000.0,
            k_s: 1.1e4,
            g: 9.810,
        }
    }
}

/// Stock parameter set of the studied robot.
pub fn default_params() -> RobotParams {
    RobotParams::default()
}

macro_rules! for_each_field {
    ($self:ident, $f:ident) => {
        $f!(l_a);
        $f!(l_b);
        $f!(l_c);
        $f!(l_d);
        $f!(l_e);
        $f!(l_f);
        $f!(l_g);
        $f!(l_h);
        $f!(l_bd);
        $f!(l_m);
        $f!(l_1);
        $f!(l_2);
        $f!(l_c1);
        $f!(l_c2);
        $f!(m_m);
        $f!(m_1);
        $f!(m_2);
        $f!(i_m);
        $f!(i_1);
        $f!(i_2);
        $f!(t_min);
        $f!(t_max);
        $f!(k_s);
        $f!(g);
    };
}

impl RobotParams {
    /// Checks the structural invariants: strictly positive lengths, masses,
    /// inertias and stiffness, `0 <= t_min < t_max`, and link centers of
    /// mass lying on their links.
    pub fn validate(&self) -> Result<()> {
        let positive: [(&str, f64); 23] = [
            ("l_a", self.l_a),
            ("l_b", self.l_b),
            ("l_c", self.l_c),
            ("l_d", self.l_d),
            ("l_e", self.l_e),
            ("l_f", self.l_f),
            ("l_g", self.l_g),
            ("l_h", self.l_h),
            ("l_bd", self.l_bd),
            ("l_m", self.l_m),
            ("l_1", self.l_1),
            ("l_2", self.l_2),
            ("l_c1", self.l_c1),
            ("l_c2", self.l_c2),
            ("m_m", self.m_m),
            ("m_1", self.m_1),
            ("m_2", self.m_2),
            ("i_m", self.i_m),
            ("i_1", self.i_1),
            ("i_2", self.i_2),
            ("t_max", self.t_max),
            ("k_s", self.k_s),
            ("g", self.g),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::Validation {
                    field: name.to_string(),
                    message: format!("must be strictly positive, got {value}"),
                });
            }
        }
        if !self.t_min.is_finite() || self.t_min < 0.0 {
            return Err(Error::Validation {
                field: "t_min".to_string(),
                message: format!("must be non-negative, got {}", self.t_min),
            });
        }
        if self.t_min >= self.t_max {
            return Err(Error::Validation {
                field: "t_min".to_string(),
                message: format!("must be below t_max ({} >= {})", self.t_min, self.t_max),
            });
        }
        if self.l_c1 > self.l_1 {
            return Err(Error::Validation {
                field: "l_c1".to_string(),
                message: format!("center of mass beyond link 1 ({} > {})", self.l_c1, self.l_1),
            });
        }
        if self.l_c2 > self.l_2 {
            return Err(Error::Validation {
                field: "l_c2".to_string(),
                message: format!("center of mass beyond link 2 ({} > {})", self.l_c2, self.l_2),
            });
        }
        Ok(())
    }

    fn set_field(&mut self, name: &str, value: f64) -> bool {
        macro_rules! setter {
            ($field:ident) => {
                if name == stringify!($field) {
                    self.$field = value;
                    return true;
                }
            };
        }
        for_each_field!(self, setter);
        false
    }

    /// Serializes the parameter set as a JSON document that
    /// [`parse_config`] reads back bit-identically.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

/// Rest pose and rates of the three generalized springs that stand in for
/// the cables in the stand-alone elastic platform model. The closed-loop
/// simulator never uses them; they exist for energy-accounting tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentSprings {
    /// Translational rate along x [N/m].
    pub k_x: f64,
    /// Translational rate along z [N/m].
    pub k_z: f64,
    /// Rotational rate about the platform axis [N·m/rad].
    pub k_theta: f64,
    /// Rest pose [m, m, rad].
    pub x_m0: f64,
    pub z_m0: f64,
    pub theta_m0: f64,
}

impl Default for EquivalentSprings {
    fn default() -> Self {
        Self {
            k_x: 0.0,
            k_z: 0.0,
            k_theta: 0.0,
            x_m0: 0.0,
            z_m0: 0.0,
            theta_m0: 0.0,
        }
    }
}

impl EquivalentSprings {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("k_x", self.k_x),
            ("k_z", self.k_z),
            ("k_theta", self.k_theta),
        ] {
            if value < 0.0 || !value.is_finite() {
                return Err(Error::Validation {
                    field: name.to_string(),
                    message: format!("spring rate must be non-negative, got {value}"),
                });
            }
        }
        Ok(())
    }
}

/// Run-level knobs that may ride along in the same config document as the
/// robot parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOverrides {
    pub dt: Option<f64>,
    pub duration: Option<f64>,
}

/// Parses the flat key/value config document. Every robot parameter is
/// optional and defaults to the stock value; an empty document yields the
/// defaults. The reserved key `scenario` is left for the run front end.
pub fn parse_config(text: &str) -> Result<RobotParams> {
    let mut params = RobotParams::default();
    if text.trim().is_empty() {
        return Ok(params);
    }
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("parse failure: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::Config("top level must be a JSON object".to_string()))?;
    for (key, value) in obj {
        if key == "scenario" {
            continue;
        }
        let number = value.as_f64().ok_or_else(|| {
            Error::Config(format!("field `{key}` must be a number, got {value}"))
        })?;
        if !params.set_field(key, number) {
            return Err(Error::Config(format!("unknown field `{key}`")));
        }
    }
    params.validate()?;
    Ok(params)
}

/// Reads the scenario overrides from a config document, if any.
pub fn parse_scenario_overrides(text: &str) -> Result<ScenarioOverrides> {
    if text.trim().is_empty() {
        return Ok(ScenarioOverrides::default());
    }
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("parse failure: {e}")))?;
    match doc.get("scenario") {
        None => Ok(ScenarioOverrides::default()),
        Some(section) => serde_json::from_value(section.clone())
            .map_err(|e| Error::Config(format!("scenario section: {e}"))),
    }
}

/// Loads a parameter config file; omitted fields keep their stock values.
pub fn load_config(path: &Path) -> Result<RobotParams> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
