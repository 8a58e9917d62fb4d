//! MPC scenario files for `simulate`.
//!
//! A scenario is either a generated one (`"builtin": {"name": "mpc", "seed": 3}`)
//! or an explicit system with weights, horizons, bounds and setpoints.
//! Missing bounds are infinite.

use gne_core::control::{LinearSystem, MPCGameSpec};
use gne_core::instances::mpc_scenario;
use gne_core::model::PlayerLayout;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::gamefile::{Diagnostics, Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Builtin {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    #[serde(rename = "C")]
    pub c: Matrix,
    /// Input columns per agent.
    pub inputs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    #[serde(rename = "Q_y")]
    pub q_y: Vec<Matrix>,
    #[serde(rename = "Q_du")]
    pub q_du: Vec<Matrix>,
    pub q_eps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub du_min: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub du_max: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_min: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_min: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    /// Setpoint per step; the last one is held.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setpoint: Option<Vec<Vector>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_init: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
}

pub const DEFAULT_STEPS: usize = 40;

pub struct Scenario {
    pub spec: MPCGameSpec,
    pub x0: Vec<f64>,
    pub u_init: Option<Vec<f64>>,
    pub steps: usize,
    pub big_m: Option<f64>,
}

fn mat(errs: &mut Vec<String>, path: &str, m: &Matrix) -> Option<DMatrix<f64>> {
    let cols = m.first().map_or(0, |r| r.len());
    if let Some(r) = m.iter().position(|row| row.len() != cols) {
        errs.push(format!("{path}[{r}]: expected {cols} columns"));
        return None;
    }
    Some(DMatrix::from_fn(m.len(), cols, |r, c| m[r][c].0))
}

fn vec_of(errs: &mut Vec<String>, path: &str, v: Option<&Vector>, len: usize, fill: f64) -> DVector<f64> {
    match v {
        None => DVector::from_element(len, fill),
        Some(v) if v.len() == len => DVector::from_iterator(len, v.iter().map(|a| a.0)),
        Some(v) => {
            errs.push(format!("{path}: expected {len} entries, got {}", v.len()));
            DVector::from_element(len, fill)
        }
    }
}

impl ScenarioFile {
    pub fn load(&self) -> Result<Scenario, Diagnostics> {
        let mut errs = Vec::new();
        if self.version != crate::gamefile::VERSION {
            errs.push(format!("version: unsupported version {}", self.version));
        }
        let spec = match (&self.builtin, &self.system) {
            (Some(_), Some(_)) => {
                errs.push("builtin: cannot be combined with an explicit system".into());
                None
            }
            (None, None) => {
                errs.push("system: need \"system\" or \"builtin\"".into());
                None
            }
            (Some(b), None) => {
                if b.name == "mpc" {
                    let explicit = self.weights.is_some()
                        || self.horizon.is_some()
                        || self.constraint_horizon.is_some()
                        || self.bounds.is_some()
                        || self.setpoint.is_some();
                    if explicit {
                        errs.push("builtin: weights, horizons, bounds and setpoint come from the builtin".into());
                    }
                    Some(mpc_scenario(b.seed))
                } else {
                    errs.push(format!("builtin.name: unknown scenario {:?} (known: \"mpc\")", b.name));
                    None
                }
            }
            (None, Some(s)) => self.explicit(&mut errs, s),
        };
        let spec = match spec {
            Some(s) if errs.is_empty() => s,
            _ => return Err(Diagnostics(errs)),
        };
        if let Err(e) = spec.validate() {
            return Err(Diagnostics(vec![format!("scenario: {e}")]));
        }
        let sys = &spec.system;
        let x0 = vec_of(&mut errs, "x0", self.x0.as_ref(), sys.n_x(), 0.0).as_slice().to_vec();
        let u_init = self
            .u_init
            .as_ref()
            .map(|u| vec_of(&mut errs, "u_init", Some(u), sys.n_u(), 0.0).as_slice().to_vec());
        if self.steps == Some(0) {
            errs.push("steps: must be at least 1".into());
        }
        if !errs.is_empty() {
            return Err(Diagnostics(errs));
        }
        Ok(Scenario {
            spec,
            x0,
            u_init,
            steps: self.steps.unwrap_or(DEFAULT_STEPS),
            big_m: self.big_m,
        })
    }

    fn explicit(&self, errs: &mut Vec<String>, s: &SystemSpec) -> Option<MPCGameSpec> {
        let a = mat(errs, "system.A", &s.a);
        let b = mat(errs, "system.B", &s.b);
        let c = mat(errs, "system.C", &s.c);
        let inputs = PlayerLayout::new(s.inputs.clone()).map_err(|e| errs.push(format!("system.inputs: {e}"))).ok();
        let system = LinearSystem::new(a?, b?, c?, inputs?).map_err(|e| errs.push(format!("system: {e}"))).ok()?;
        let Some(w) = &self.weights else {
            errs.push("weights: required with an explicit system".into());
            return None;
        };
        let q_y = w.q_y.iter().enumerate().map(|(i, m)| mat(errs, &format!("weights.Q_y[{i}]"), m)).collect();
        let q_du = w.q_du.iter().enumerate().map(|(i, m)| mat(errs, &format!("weights.Q_du[{i}]"), m)).collect();
        let (Some(q_y), Some(q_du)) = (q_y, q_du) else { return None };
        let (nu, ny) = (system.n_u(), system.n_y());
        let bd = self.bounds.clone().unwrap_or_default();
        let inf = f64::INFINITY;
        let setpoint = match &self.setpoint {
            Some(list) => list.iter().map(|r| DVector::from_iterator(r.len(), r.iter().map(|a| a.0))).collect(),
            None => vec![DVector::zeros(ny)],
        };
        let Some(horizon) = self.horizon else {
            errs.push("horizon: required with an explicit system".into());
            return None;
        };
        Some(MPCGameSpec {
            q_y,
            q_du,
            q_eps: w.q_eps.clone(),
            horizon,
            constraint_horizon: self.constraint_horizon.unwrap_or(horizon),
            du_min: vec_of(errs, "bounds.du_min", bd.du_min.as_ref(), nu, -inf),
            du_max: vec_of(errs, "bounds.du_max", bd.du_max.as_ref(), nu, inf),
            u_min: vec_of(errs, "bounds.u_min", bd.u_min.as_ref(), nu, -inf),
            u_max: vec_of(errs, "bounds.u_max", bd.u_max.as_ref(), nu, inf),
            y_min: vec_of(errs, "bounds.y_min", bd.y_min.as_ref(), ny, -inf),
            y_max: vec_of(errs, "bounds.y_max", bd.y_max.as_ref(), ny, inf),
            setpoint,
            system,
        })
    }
}
