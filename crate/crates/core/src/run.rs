//! End-to-end driver: scenario file in, per-step actions and diagnostics
//! out.
//!
//! The JSON output is a pure function of the scenario and solver settings.
//! Wall-clock timings go to the optional CSV only.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::force::solve_force;
use crate::linalg::Vector;
use crate::model::{GuardConditions, HybridAction, SystemInstance};
use crate::scenario::{matrix_to_rows, vector_to_vec, Rows, ScenarioFile, ScenarioParams, SolverParams, SolverSettings};
use crate::tilting::{build_instance, TiltingScenario, TiltingState};
use crate::velocity::solve_velocity;
use crate::verify::{check_action, check_velocity_command, VerificationReport};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario_path: PathBuf,
    pub output_path: PathBuf,
    pub num_starts: Option<usize>,
    pub rng_seed: Option<u64>,
    pub rank_tol: Option<f64>,
    pub f_max: Option<f64>,
    pub emit_csv: bool,
    pub verify: bool,
}

impl RunConfig {
    pub fn new(scenario_path: impl Into<PathBuf>, output_path: impl Into<PathBuf>) -> Self {
        Self {
            scenario_path: scenario_path.into(),
            output_path: output_path.into(),
            num_starts: None,
            rng_seed: None,
            rank_tol: None,
            f_max: None,
            emit_csv: false,
            verify: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario_path.as_os_str().is_empty() || self.output_path.as_os_str().is_empty() {
            return Err(Error::InvalidConfig("scenario and output paths must be non-empty".into()));
        }
        if self.num_starts == Some(0) {
            return Err(Error::InvalidConfig("--starts must be positive".into()));
        }
        if self.rank_tol.is_some_and(|r| !(r > 0.0)) || self.f_max.is_some_and(|f| !(f > 0.0)) {
            return Err(Error::InvalidConfig("--rank-tol and --f-max must be positive".into()));
        }
        Ok(())
    }

    /// CSV path: the output path with a `.csv` extension.
    pub fn csv_path(&self) -> PathBuf {
        self.output_path.with_extension("csv")
    }

    /// Apply command-line overrides on top of the file's solver section.
    pub fn override_solver(&self, file: &SolverParams) -> SolverParams {
        let mut p = file.clone();
        p.num_starts = self.num_starts.or(p.num_starts);
        p.rng_seed = self.rng_seed.or(p.rng_seed);
        p.rank_tol = self.rank_tol.or(p.rank_tol);
        p.f_max = self.f_max.or(p.f_max);
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActionRecord {
    pub n_av: usize,
    pub n_af: usize,
    /// Velocity command rows `C`.
    pub velocity_command: Rows,
    pub w_av: Vec<f64>,
    pub eta_af: Vec<f64>,
    pub r_a: Rows,
    pub transform: Rows,
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    /// Actuated force `f_a` in the original coordinates.
    pub actuated_force: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub r_n: usize,
    pub r_ng: usize,
    pub pgd_cost: f64,
    pub per_start_costs: Vec<f64>,
    pub selected_start: Option<usize>,
    pub rejected_starts: Vec<usize>,
    pub pgd_converged: bool,
    pub lp_margin: f64,
    pub newton_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateRecord {
    pub object_position: [f64; 3],
    /// `(w, x, y, z)`.
    pub object_quat: [f64; 4],
    pub hand_position: [f64; 3],
}

impl From<&TiltingState> for StateRecord {
    fn from(s: &TiltingState) -> Self {
        let p = &s.object.position;
        Self {
            object_position: [p.x, p.y, p.z],
            object_quat: s.object.quat,
            hand_position: [s.hand.x, s.hand.y, s.hand.z],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    /// One-based step number.
    pub step: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<StateRecord>,
    pub action: ActionRecord,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timing {
    pub ms_velocity: f64,
    pub ms_force: f64,
}

impl Timing {
    pub fn total_ms(&self) -> f64 {
        self.ms_velocity + self.ms_force
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub record: StepRecord,
    pub action: HybridAction,
    pub timing: Timing,
}

/// Velocity stage, force stage and (optionally) verification of one
/// instance.
pub fn solve_step(
    step: usize,
    instance: &SystemInstance,
    guard: &GuardConditions,
    settings: &SolverSettings,
    verify: bool,
) -> Result<StepOutcome> {
    let t0 = Instant::now();
    let vel = solve_velocity(instance, &settings.velocity)?;
    let t1 = Instant::now();
    let force = solve_force(instance, guard, &vel.transform, vel.n_av, &settings.force)?;
    let t2 = Instant::now();

    let action = HybridAction {
        n_av: vel.n_av,
        n_af: vel.n_af(),
        transform: vel.transform.clone(),
        r_a: vel.r_a.clone(),
        w_av: vel.b_c.clone(),
        eta_af: force.eta_af.clone(),
        lambda: force.lambda.clone(),
        eta: force.eta.clone(),
    };
    let actuated_force = action.actuated_force(instance.n_u).ok_or(Error::SingularTransform(0.0))?;

    let verification = verify.then(|| {
        let v = check_velocity_command(instance, &vel.c, &vel.b_c, settings.velocity.rank_tol);
        VerificationReport::new(v, check_action(instance, guard, &action))
    });

    let record = StepRecord {
        step,
        state: None,
        action: ActionRecord {
            n_av: action.n_av,
            n_af: action.n_af,
            velocity_command: matrix_to_rows(&vel.c),
            w_av: vector_to_vec(&action.w_av),
            eta_af: vector_to_vec(&action.eta_af),
            r_a: matrix_to_rows(&action.r_a),
            transform: matrix_to_rows(&action.transform),
            lambda: vector_to_vec(&action.lambda),
            eta: vector_to_vec(&action.eta),
            actuated_force: vector_to_vec(&actuated_force),
        },
        diagnostics: Diagnostics {
            r_n: vel.dims.r_n,
            r_ng: vel.dims.r_ng,
            pgd_cost: vel.cost,
            per_start_costs: vel.per_start_costs.clone(),
            selected_start: vel.selected_start,
            rejected_starts: vel.rejected_starts.clone(),
            pgd_converged: vel.converged,
            lp_margin: force.objective_margin,
            newton_residual: force.newton_residual,
        },
        verification,
    };
    Ok(StepOutcome {
        record,
        action,
        timing: Timing {
            ms_velocity: (t1 - t0).as_secs_f64() * 1e3,
            ms_force: (t2 - t1).as_secs_f64() * 1e3,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureRecord {
    pub step: usize,
    pub error: String,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOutput {
    pub schema: u32,
    /// The scenario as solved, with every default written out.
    pub scenario: serde_json::Value,
    pub steps: Vec<StepRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureRecord>,
}

impl RunOutput {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// A failed run; `step` is one-based and absent when the scenario itself
/// could not be loaded.
#[derive(Debug)]
pub struct RunFailure {
    pub step: Option<usize>,
    pub error: Error,
}

impl RunFailure {
    pub fn exit_code(&self) -> i32 {
        self.error.exit_code()
    }
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(k) => write!(f, "step {k}: {}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for RunFailure {}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self { step: None, error }
    }
}

type StepProblem = (SystemInstance, GuardConditions);

/// Output and per-step timings of a run that solved every step.
pub type Completed = (RunOutput, Vec<Timing>);

/// Partial output, timings of the solved steps, and the failure.
pub type Aborted = (RunOutput, Vec<Timing>, RunFailure);

/// Solve every step of a scenario in memory. Solving stops at the first
/// failing step, which is recorded in the output.
pub fn run_scenario(file: &ScenarioFile, settings: &SolverSettings, verify: bool) -> std::result::Result<Completed, Aborted> {
    let canonical = ScenarioFile {
        params: file.params.clone(),
        solver: settings.to_params(),
    };
    let scenario_json =
        |c: &ScenarioFile| -> serde_json::Value { serde_json::from_str(&c.to_json()).expect("own output parses") };
    let mut output = RunOutput {
        schema: crate::scenario::SCHEMA_VERSION,
        scenario: scenario_json(&canonical),
        steps: Vec::new(),
        failure: None,
    };
    let mut timings = Vec::new();

    let problems: Vec<(Option<TiltingState>, Result<StepProblem>)> = match &file.params {
        ScenarioParams::BlockTilting(p) => {
            let scenario: TiltingScenario = match p.resolve() {
                Ok(s) => s,
                Err(e) => return Err((output, timings, e.into())),
            };
            output.scenario = scenario_json(&ScenarioFile::block_tilting(&scenario, settings));
            scenario
                .rollout()
                .into_iter()
                .map(|state| {
                    let built = build_instance(&state, &scenario);
                    (Some(state), built)
                })
                .collect()
        }
        ScenarioParams::RawInstance(p) => match p.resolve() {
            Ok((inst, guard)) => {
                output.scenario = scenario_json(&ScenarioFile::raw_instance(&inst, &guard, settings));
                vec![(None, Ok((inst, guard)))]
            }
            Err(e) => return Err((output, timings, e.into())),
        },
    };

    for (index, (state, built)) in problems.into_iter().enumerate() {
        let step = index + 1;
        let result = built.and_then(|(inst, guard)| solve_step(step, &inst, &guard, settings, verify));
        match result {
            Ok(mut outcome) => {
                outcome.record.state = state.as_ref().map(StateRecord::from);
                output.steps.push(outcome.record);
                timings.push(outcome.timing);
            }
            Err(error) => {
                output.failure = Some(FailureRecord {
                    step,
                    error: error.to_string(),
                    exit_code: error.exit_code(),
                });
                return Err((output, timings, RunFailure { step: Some(step), error }));
            }
        }
    }
    Ok((output, timings))
}

/// CSV with one row per solved step and a closing row of timing medians.
pub fn timing_csv(output: &RunOutput, timings: &[Timing]) -> String {
    let mut csv = String::from("step,n_av,pgd_cost,lp_margin,newton_residual,ms_velocity,ms_force\n");
    for (rec, t) in output.steps.iter().zip(timings) {
        let d = &rec.diagnostics;
        csv.push_str(&format!(
            "{},{},{},{},{},{:.3},{:.3}\n",
            rec.step, rec.action.n_av, d.pgd_cost, d.lp_margin, d.newton_residual, t.ms_velocity, t.ms_force
        ));
    }
    let vel: Vec<f64> = timings.iter().map(|t| t.ms_velocity).collect();
    let force: Vec<f64> = timings.iter().map(|t| t.ms_force).collect();
    csv.push_str(&format!("median,,,,,{:.3},{:.3}\n", median(&vel), median(&force)));
    csv
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn load(config: &RunConfig) -> Result<(ScenarioFile, SolverSettings)> {
    config.validate()?;
    let text = fs::read_to_string(&config.scenario_path)?;
    let file = ScenarioFile::parse(&text)?;
    let settings = SolverSettings::from_params(&config.override_solver(&file.solver))?;
    Ok((file, settings))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)?;
    Ok(())
}

/// Load the scenario, solve every step and write the JSON output (and the
/// CSV when requested). Output files are written even when a step fails.
pub fn run_trajectory(config: &RunConfig) -> std::result::Result<RunOutput, RunFailure> {
    let (file, settings) = load(config)?;
    let (output, timings, failure) = match run_scenario(&file, &settings, config.verify) {
        Ok((o, t)) => (o, t, None),
        Err((o, t, f)) => (o, t, Some(f)),
    };
    write(&config.output_path, &output.to_json())?;
    if config.emit_csv {
        write(&config.csv_path(), &timing_csv(&output, &timings))?;
    }
    match failure {
        Some(f) => Err(f),
        None => Ok(output),
    }
}

/// Solve one raw instance file and return its step record.
pub fn solve_single(
    instance_file: &Path,
    settings: &SolverSettings,
    verify: bool,
) -> std::result::Result<StepRecord, RunFailure> {
    let file = ScenarioFile::parse(&fs::read_to_string(instance_file).map_err(Error::from)?)?;
    let ScenarioParams::RawInstance(p) = &file.params else {
        return Err(Error::InvalidConfig("solve_single expects a raw_instance file".into()).into());
    };
    let (inst, guard) = p.resolve()?;
    solve_step(1, &inst, &guard, settings, verify)
        .map(|o| o.record)
        .map_err(|error| RunFailure { step: Some(1), error })
}

/// Raw-instance scenario reproducing one step of a tilting roll-out.
pub fn export_tilting_step(scenario: &TiltingScenario, index: usize, settings: &SolverSettings) -> Result<ScenarioFile> {
    let states = scenario.rollout();
    let state = states
        .get(index)
        .ok_or_else(|| Error::InvalidConfig(format!("step index {index} outside 0..{}", states.len())))?;
    let (inst, guard) = build_instance(state, scenario)?;
    Ok(ScenarioFile::raw_instance(&inst, &guard, settings))
}

/// Actuated force of a solved step as a vector.
pub fn actuated_force(record: &StepRecord) -> Vector {
    Vector::from_column_slice(&record.action.actuated_force)
}
