//! Scenario files.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "scenario_type": "block_tilting",
//!   "params": { "mu_table": 0.8, "num_steps": 15 },
//!   "solver": { "num_starts": 3, "rng_seed": 0, "f_max": 50.0 }
//! }
//! ```
//!
//! `scenario_type` is `"block_tilting"` or `"raw_instance"`. Every field of
//! `params` and `solver` is optional and falls back to its default. Matrices
//! are arrays of rows; an empty array is a matrix with no rows. Units are
//! meters, radians, seconds and Newtons.
//!
//! Block-tilting `params`: `edge_length`, `mu_hand`, `mu_table`, `n_min`,
//! `gravity_object`, `gravity_hand`, `hand_contact_obj`, `table_contacts`
//! (two points), `rotation_axis`, `tilt_rate`, `step_duration`,
//! `num_steps`. Contacts default to the geometry implied by `edge_length`.
//!
//! Raw-instance `params`: `n_u`, `n_a`, either `holonomic` (`N`) or both
//! `jacobian` and `omega`, `goal`, `goal_rhs`, `external_force`, and an
//! optional `guard` with `inequality`, `inequality_rhs`, `equality`,
//! `equality_rhs` acting on `[λ; f]`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::ForceSolverConfig;
use crate::linalg::{Matrix, Vector};
use crate::model::{GuardConditions, SystemInstance};
use crate::tilting::TiltingScenario;
use crate::velocity::VelocitySolverConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioType {
    BlockTilting,
    RawInstance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema: u32,
    scenario_type: ScenarioType,
    #[serde(default)]
    params: serde_json::Value,
    #[serde(default)]
    solver: SolverParams,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_starts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_screen: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_max: Option<f64>,
}

/// Fully resolved solver settings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverSettings {
    pub velocity: VelocitySolverConfig,
    pub force: ForceSolverConfig,
}

impl SolverSettings {
    pub fn from_params(p: &SolverParams) -> Result<Self> {
        let d = VelocitySolverConfig::default();
        let rank_tol = p.rank_tol.unwrap_or(d.rank_tol);
        let velocity = VelocitySolverConfig {
            num_starts: p.num_starts.unwrap_or(d.num_starts),
            step_length: p.step_length.unwrap_or(d.step_length),
            max_iters: p.max_iters.unwrap_or(d.max_iters),
            convergence_tol: p.convergence_tol.unwrap_or(d.convergence_tol),
            rng_seed: p.rng_seed.unwrap_or(d.rng_seed),
            rank_tol,
            rank_screen: p.rank_screen.unwrap_or(d.rank_screen),
        };
        let force = ForceSolverConfig {
            f_max: p.f_max.unwrap_or(ForceSolverConfig::default().f_max),
            rank_tol,
        };
        velocity.validate()?;
        if !(force.f_max > 0.0 && force.f_max.is_finite()) {
            return Err(Error::InvalidConfig("f_max must be positive".into()));
        }
        Ok(Self { velocity, force })
    }

    pub fn to_params(&self) -> SolverParams {
        let v = &self.velocity;
        SolverParams {
            num_starts: Some(v.num_starts),
            step_length: Some(v.step_length),
            max_iters: Some(v.max_iters),
            convergence_tol: Some(v.convergence_tol),
            rng_seed: Some(v.rng_seed),
            rank_tol: Some(v.rank_tol),
            rank_screen: Some(v.rank_screen),
            f_max: Some(self.force.f_max),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltingParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_hand: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_table: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gravity_object: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gravity_hand: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hand_contact_obj: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_contacts: Option<[[f64; 3]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation_axis: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilt_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_steps: Option<usize>,
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn a3(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

impl TiltingParams {
    pub fn resolve(&self) -> Result<TiltingScenario> {
        let mut s = match self.edge_length {
            Some(a) => TiltingScenario::with_edge_length(a),
            None => TiltingScenario::default(),
        };
        if let Some(x) = self.mu_hand {
            s.mu_hand = x;
        }
        if let Some(x) = self.mu_table {
            s.mu_table = x;
        }
        if let Some(x) = self.n_min {
            s.n_min = x;
        }
        if let Some(x) = self.gravity_object {
            s.gravity_object = v3(x);
        }
        if let Some(x) = self.gravity_hand {
            s.gravity_hand = v3(x);
        }
        if let Some(x) = self.hand_contact_obj {
            s.hand_contact_obj = v3(x);
        }
        if let Some([a, b]) = self.table_contacts {
            s.table_contacts = [v3(a), v3(b)];
        }
        if let Some(x) = self.rotation_axis {
            s.rotation_axis = v3(x);
        }
        if let Some(x) = self.tilt_rate {
            s.tilt_rate = x;
        }
        if let Some(x) = self.step_duration {
            s.step_duration = x;
        }
        if let Some(x) = self.num_steps {
            s.num_steps = x;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn from_scenario(s: &TiltingScenario) -> Self {
        Self {
            edge_length: Some(s.edge_length),
            mu_hand: Some(s.mu_hand),
            mu_table: Some(s.mu_table),
            n_min: Some(s.n_min),
            gravity_object: Some(a3(&s.gravity_object)),
            gravity_hand: Some(a3(&s.gravity_hand)),
            hand_contact_obj: Some(a3(&s.hand_contact_obj)),
            table_contacts: Some([a3(&s.table_contacts[0]), a3(&s.table_contacts[1])]),
            rotation_axis: Some(a3(&s.rotation_axis)),
            tilt_rate: Some(s.tilt_rate),
            step_duration: Some(s.step_duration),
            num_steps: Some(s.num_steps),
        }
    }
}

pub type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardParams {
    #[serde(default)]
    pub inequality: Rows,
    #[serde(default)]
    pub inequality_rhs: Vec<f64>,
    #[serde(default)]
    pub equality: Rows,
    #[serde(default)]
    pub equality_rhs: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInstanceParams {
    pub n_u: usize,
    pub n_a: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holonomic: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Rows>,
    #[serde(default)]
    pub goal: Rows,
    #[serde(default)]
    pub goal_rhs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_force: Option<Vec<f64>>,
    #[serde(default)]
    pub guard: GuardParams,
}

/// Matrix from an array of rows; `[]` is the `0 × cols` matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>], cols: usize, name: &str) -> Result<Matrix> {
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::InvalidConfig(format!(
            "{name}: row {bad} has {} entries, expected {cols}",
            rows[bad].len()
        )));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn vector_to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

impl RawInstanceParams {
    pub fn resolve(&self) -> Result<(SystemInstance, GuardConditions)> {
        let n = self.n_u + self.n_a;
        let goal = matrix_from_rows(&self.goal, n, "goal")?;
        let goal_rhs = Vector::from_column_slice(&self.goal_rhs);
        let external_force = match &self.external_force {
            Some(f) => Vector::from_column_slice(f),
            None => Vector::zeros(n),
        };
        let instance = match (&self.holonomic, &self.jacobian, &self.omega) {
            (Some(h), None, None) => {
                let holonomic = matrix_from_rows(h, n, "holonomic")?;
                SystemInstance::new(self.n_u, self.n_a, holonomic, goal, goal_rhs, external_force)
            }
            (None, Some(j), Some(o)) => {
                let omega = matrix_from_rows(o, n, "omega")?;
                let jacobian = matrix_from_rows(j, omega.nrows(), "jacobian")?;
                SystemInstance::from_factors(self.n_u, self.n_a, jacobian, omega, goal, goal_rhs, external_force)?
            }
            (None, None, None) => SystemInstance::new(self.n_u, self.n_a, Matrix::zeros(0, n), goal, goal_rhs, external_force),
            _ => {
                return Err(Error::InvalidConfig(
                    "give either `holonomic` or both `jacobian` and `omega`".into(),
                ))
            }
        };
        let cols = instance.n_phi() + n;
        let g = &self.guard;
        let guard = GuardConditions {
            inequality: matrix_from_rows(&g.inequality, cols, "guard.inequality")?,
            inequality_rhs: Vector::from_column_slice(&g.inequality_rhs),
            equality: matrix_from_rows(&g.equality, cols, "guard.equality")?,
            equality_rhs: Vector::from_column_slice(&g.equality_rhs),
        };
        Ok((instance, guard))
    }

    pub fn from_instance(instance: &SystemInstance, guard: &GuardConditions) -> Self {
        let (holonomic, jacobian, omega) = match (&instance.jacobian, &instance.omega) {
            (Some(j), Some(o)) => (None, Some(matrix_to_rows(j)), Some(matrix_to_rows(o))),
            _ => (Some(matrix_to_rows(&instance.holonomic)), None, None),
        };
        Self {
            n_u: instance.n_u,
            n_a: instance.n_a,
            holonomic,
            jacobian,
            omega,
            goal: matrix_to_rows(&instance.goal),
            goal_rhs: vector_to_vec(&instance.goal_rhs),
            external_force: Some(vector_to_vec(&instance.external_force)),
            guard: GuardParams {
                inequality: matrix_to_rows(&guard.inequality),
                inequality_rhs: vector_to_vec(&guard.inequality_rhs),
                equality: matrix_to_rows(&guard.equality),
                equality_rhs: vector_to_vec(&guard.equality_rhs),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioParams {
    BlockTilting(TiltingParams),
    RawInstance(RawInstanceParams),
}

/// A parsed scenario file.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioFile {
    pub params: ScenarioParams,
    pub solver: SolverParams,
}

impl ScenarioFile {
    pub fn block_tilting(scenario: &TiltingScenario, solver: &SolverSettings) -> Self {
        Self {
            params: ScenarioParams::BlockTilting(TiltingParams::from_scenario(scenario)),
            solver: solver.to_params(),
        }
    }

    pub fn raw_instance(instance: &SystemInstance, guard: &GuardConditions, solver: &SolverSettings) -> Self {
        Self {
            params: ScenarioParams::RawInstance(RawInstanceParams::from_instance(instance, guard)),
            solver: solver.to_params(),
        }
    }

    pub fn scenario_type(&self) -> ScenarioType {
        match self.params {
            ScenarioParams::BlockTilting(_) => ScenarioType::BlockTilting,
            ScenarioParams::RawInstance(_) => ScenarioType::RawInstance,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawFile = serde_json::from_str(text)?;
        if raw.schema != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported schema {}, expected {SCHEMA_VERSION}",
                raw.schema
            )));
        }
        let params = if raw.params.is_null() {
            serde_json::Value::Object(Default::default())
        } else {
            raw.params
        };
        let params = match raw.scenario_type {
            ScenarioType::BlockTilting => ScenarioParams::BlockTilting(serde_json::from_value(params)?),
            ScenarioType::RawInstance => ScenarioParams::RawInstance(serde_json::from_value(params)?),
        };
        Ok(Self {
            params,
            solver: raw.solver,
        })
    }

    pub fn to_json(&self) -> String {
        let params = match &self.params {
            ScenarioParams::BlockTilting(p) => serde_json::to_value(p),
            ScenarioParams::RawInstance(p) => serde_json::to_value(p),
        }
        .expect("plain data serializes");
        let raw = RawFile {
            schema: SCHEMA_VERSION,
            scenario_type: self.scenario_type(),
            params,
            solver: self.solver.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("plain data serializes")
    }

    /// Same scenario with every default written out.
    pub fn canonicalize(&self) -> Result<Self> {
        let params = match &self.params {
            ScenarioParams::BlockTilting(p) => ScenarioParams::BlockTilting(TiltingParams::from_scenario(&p.resolve()?)),
            ScenarioParams::RawInstance(p) => {
                let (inst, guard) = p.resolve()?;
                ScenarioParams::RawInstance(RawInstanceParams::from_instance(&inst, &guard))
            }
        };
        Ok(Self {
            params,
            solver: SolverSettings::from_params(&self.solver)?.to_params(),
        })
    }
}
