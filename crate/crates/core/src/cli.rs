//! Config-file driven commands behind the `adiabatic-swap` binary.
//!
//! Every quantity in a [`RunConfig`] is dimensionless: times in units of the
//! pulse width `Tp`, rates in units of `1/Tp`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::darkstates::{analyze_step, DarkAnalysisOptions, StepDarkReport};
use crate::error::{Error, Result};
use crate::gateanalysis::{
    exposure_metrics, parameter_scan, scan_csv, summarize, target_for, AxisSpec, Exposure, GateResult,
    ScanBase,
};
use crate::hamiltonian::{HamiltonianModel, LossParams};
use crate::hilbert::{Basis, StateVector, DEFAULT_N_MAX};
use crate::propagator::{propagate_partial, run_gate, Integrator, TimeGrid, Trajectory};
use crate::pulses::{build_schedule, schedule_diagnostics, Protocol, Schedule, ScheduleParams, ScheduleReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// States whose population never exceeds this are left out of the trajectory CSV.
pub const POPULATION_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub omega_max_tp: f64,
    pub g1_tp: f64,
    pub g2_tp: f64,
    pub intra_delay: f64,
    pub inter_step_gap: f64,
    pub phases: Option<Vec<f64>>,
}

impl Default for Physics {
    fn default() -> Self {
        let p = ScheduleParams::default();
        Self {
            omega_max_tp: p.omega_max,
            g1_tp: p.g1,
            g2_tp: p.g2,
            intra_delay: p.intra_delay,
            inter_step_gap: p.inter_step_gap,
            phases: None,
        }
    }
}

impl Physics {
    pub fn schedule_params(&self) -> ScheduleParams {
        ScheduleParams {
            omega_max: self.omega_max_tp,
            t_p: 1.0,
            intra_delay: self.intra_delay,
            inter_step_gap: self.inter_step_gap,
            g1: self.g1_tp,
            g2: self.g2_tp,
            phases: self.phases.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    pub n_max: usize,
    /// `None` includes `|u>` exactly when the schedule drives it.
    pub include_u: Option<bool>,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { n_max: DEFAULT_N_MAX, include_u: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Step in units of `Tp`; `None` picks the largest admissible step.
    pub dt: Option<f64>,
    /// Record every `stride`-th step; `None` means 50.
    pub stride: Option<usize>,
    pub integrator: Integrator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Amplitude {
    pub state: String,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Label(String),
    Amplitudes(Vec<Amplitude>),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Label("01;0".into())
    }
}

impl InitialState {
    pub fn build(&self, basis: &Arc<Basis>) -> Result<StateVector> {
        match self {
            InitialState::Label(l) => StateVector::from_label(basis.clone(), l),
            InitialState::Amplitudes(list) => {
                let mut psi = StateVector::zeros(basis.clone());
                for a in list {
                    let i = basis.index_of_label(&a.state)?;
                    psi.amplitudes_mut()[i] += C64::new(a.re, a.im);
                }
                Ok(psi)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub trajectory: String,
    pub report: String,
    pub scan: String,
    pub darkstates: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trajectory: "trajectory.csv".into(),
            report: "report.json".into(),
            scan: "scan.csv".into(),
            darkstates: "darkstates.json".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DarkConfig {
    pub h: f64,
    pub kernel_samples: usize,
}

impl Default for DarkConfig {
    fn default() -> Self {
        let d = DarkAnalysisOptions::default();
        Self { h: d.h, kernel_samples: d.kernel_samples }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub physics: Physics,
    /// Explicit pulse schedule; replaces the one built from `protocol` and
    /// `physics` when present.
    pub schedule: Option<Schedule>,
    pub basis: BasisConfig,
    pub loss: LossParams,
    pub grid: GridConfig,
    pub initial_state: InitialState,
    pub output: OutputConfig,
    pub scan: Vec<AxisSpec>,
    pub darkstates: DarkConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Swap8,
            physics: Physics::default(),
            schedule: None,
            basis: BasisConfig::default(),
            loss: LossParams::NONE,
            grid: GridConfig::default(),
            initial_state: InitialState::default(),
            output: OutputConfig::default(),
            scan: Vec::new(),
            darkstates: DarkConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if let Some(dt) = self.grid.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Parameter { name: "grid.dt", requirement: "> 0", value: dt });
            }
        }
        if self.grid.stride == Some(0) {
            return Err(Error::Parameter { name: "grid.stride", requirement: ">= 1", value: 0.0 });
        }
        if !(self.darkstates.h.is_finite() && self.darkstates.h > 0.0) {
            return Err(Error::Parameter {
                name: "darkstates.h",
                requirement: "> 0",
                value: self.darkstates.h,
            });
        }
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        Ok(())
    }

    pub fn build_schedule(&self) -> Result<Schedule> {
        match &self.schedule {
            Some(s) => {
                s.validate()?;
                Ok(s.clone())
            }
            None => build_schedule(self.protocol, &self.physics.schedule_params()),
        }
    }

    pub fn build_basis(&self, schedule: &Schedule) -> Result<Arc<Basis>> {
        let include_u = self.basis.include_u.unwrap_or_else(|| schedule.uses_upper_level());
        Ok(Arc::new(Basis::new(self.basis.n_max, include_u)?))
    }

    pub fn time_grid(&self, schedule: &Schedule) -> TimeGrid {
        let mut g = TimeGrid::for_schedule(schedule);
        if let Some(dt) = self.grid.dt {
            g.dt = dt;
        }
        if let Some(s) = self.grid.stride {
            g.stride = s;
        }
        g
    }

    /// The gate the schedule is meant to realize.
    pub fn target(&self) -> Protocol {
        self.schedule.as_ref().and_then(|s| s.protocol).unwrap_or(self.protocol)
    }
}

/// Trajectory CSV: time, population of every state that ever exceeds
/// [`POPULATION_THRESHOLD`], and every pulse's Rabi frequency.
pub fn trajectory_csv(traj: &Trajectory, schedule: &Schedule) -> String {
    let shown = traj.significant_states(POPULATION_THRESHOLD);
    let mut out = String::from("t/Tp");
    for &i in &shown {
        write!(out, ",P({})", traj.basis.state(i).label()).unwrap();
    }
    for (j, p) in schedule.pulses.iter().enumerate() {
        write!(out, ",{}#{}*Tp", p.name(), j + 1).unwrap();
    }
    out.push('\n');
    for (k, &t) in traj.times.iter().enumerate() {
        write!(out, "{t:.6}").unwrap();
        for &i in &shown {
            write!(out, ",{:.10e}", traj.population(k, i)).unwrap();
        }
        for p in &schedule.pulses {
            write!(out, ",{:.10e}", p.rabi(t)).unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalPopulation {
    pub state: String,
    pub population: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub version: String,
    pub gate: GateResult,
    pub diagnostics: ScheduleReport,
    /// Exposure of the configured initial state's trajectory.
    pub trajectory_exposure: Exposure,
    pub final_populations: Vec<FinalPopulation>,
    pub config: RunConfig,
}

#[derive(Clone, Debug)]
pub struct SimulationOutput {
    pub csv: String,
    pub report: SimulationReport,
    pub trajectory: Trajectory,
}

/// Runs the configured initial state and the four computational states.
pub fn simulate_cmd(config: &RunConfig) -> Result<SimulationOutput> {
    let (out, err) = simulate_partial(config)?;
    match err {
        None => Ok(out.expect("complete run")),
        Some((e, _)) => Err(e),
    }
}

/// Like [`simulate_cmd`], but when integration aborts the CSV of what was
/// computed before the failure is returned alongside the error.
pub fn simulate_partial(config: &RunConfig) -> Result<(Option<SimulationOutput>, Option<(Error, String)>)> {
    config.validate()?;
    let schedule = config.build_schedule()?;
    let basis = config.build_basis(&schedule)?;
    let grid = config.time_grid(&schedule);
    let model = HamiltonianModel::new(basis.clone(), &schedule, &config.loss)?;
    let psi0 = config.initial_state.build(&basis)?;
    let (traj, failure) = propagate_partial(&psi0, &model, &schedule, &grid, config.grid.integrator)?;
    let csv = trajectory_csv(&traj, &schedule);
    if let Some(e) = failure {
        let flagged = format!("{csv}# INCOMPLETE: {e}\n");
        return Ok((None, Some((e, flagged))));
    }

    let run = run_gate(&basis, &schedule, &grid, &config.loss, config.grid.integrator)?;
    let (name, target) = target_for(config.target());
    let gate = summarize(&run.gate, &run.trajectories, (name, &target));
    let last = traj.final_state();
    let final_populations = traj
        .significant_states(POPULATION_THRESHOLD)
        .into_iter()
        .map(|i| {
            let s = basis.state(i);
            FinalPopulation { state: s.label(), population: last.population(&s) }
        })
        .collect();
    let report = SimulationReport {
        version: VERSION.to_string(),
        gate,
        diagnostics: schedule_diagnostics(&schedule),
        trajectory_exposure: exposure_metrics(&traj),
        final_populations,
        config: config.clone(),
    };
    Ok((Some(SimulationOutput { csv, report, trajectory: traj }), None))
}

pub fn scan_cmd(config: &RunConfig) -> Result<String> {
    config.validate()?;
    if config.schedule.is_some() {
        return Err(Error::Config("scans rebuild the schedule from `physics`; drop `schedule`".into()));
    }
    let base = ScanBase {
        protocol: config.protocol,
        params: config.physics.schedule_params(),
        n_max: config.basis.n_max,
        dt: config.grid.dt,
        integrator: config.grid.integrator,
        loss: config.loss,
    };
    let rows = parameter_scan(&base, &config.scan)?;
    Ok(scan_csv(&config.scan, &rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarkStateReport {
    pub version: String,
    pub steps: Vec<StepDarkReport>,
    pub config: RunConfig,
}

pub fn darkstates_cmd(config: &RunConfig) -> Result<DarkStateReport> {
    config.validate()?;
    let schedule = config.build_schedule()?;
    let basis = config.build_basis(&schedule)?;
    let opts = DarkAnalysisOptions {
        h: config.darkstates.h,
        kernel_samples: config.darkstates.kernel_samples,
        ..DarkAnalysisOptions::default()
    };
    let steps = (0..schedule.steps.len())
        .map(|k| analyze_step(&basis, &schedule, k, &opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(DarkStateReport { version: VERSION.to_string(), steps, config: config.clone() })
}

/// Thresholds checked by `--assert`.
pub mod thresholds {
    pub const SWAP_FIDELITY: f64 = 0.99;
    pub const CNOT_FIDELITY: f64 = 0.98;
    pub const MAX_E_POPULATION: f64 = 0.05;
    pub const MAX_PHOTON_NUMBER: f64 = 0.2;
    pub const KERNEL_RESIDUAL: f64 = 1e-10;
    pub const ENDPOINT_OVERLAP: f64 = 0.999;
    pub const GEOMETRIC_PHASE: f64 = 1e-4;
}

/// Failed `--assert` checks of a simulation, empty when all pass.
pub fn check_simulation(report: &SimulationReport) -> Vec<String> {
    use thresholds::*;
    let mut bad = Vec::new();
    let min_f = match report.config.target() {
        Protocol::Cnot11 => CNOT_FIDELITY,
        _ => SWAP_FIDELITY,
    };
    let g = &report.gate;
    if !(g.fidelity >= min_f) {
        bad.push(format!("fidelity {} < {min_f}", g.fidelity));
    }
    if g.exposure.max_e_population > MAX_E_POPULATION {
        bad.push(format!("max e population {} > {MAX_E_POPULATION}", g.exposure.max_e_population));
    }
    if g.exposure.max_photon_number > MAX_PHOTON_NUMBER {
        bad.push(format!("max photon number {} > {MAX_PHOTON_NUMBER}", g.exposure.max_photon_number));
    }
    bad
}

pub fn check_darkstates(report: &DarkStateReport) -> Vec<String> {
    use thresholds::*;
    let mut bad = Vec::new();
    for s in &report.steps {
        if let Some(r) = s.kernel_residual {
            if r > KERNEL_RESIDUAL {
                bad.push(format!("{}: kernel residual {r:e}", s.step));
            }
        }
        if s.min_endpoint_overlap() < ENDPOINT_OVERLAP {
            bad.push(format!("{}: endpoint overlap {}", s.step, s.min_endpoint_overlap()));
        }
        if s.max_abs_geometric_phase() > GEOMETRIC_PHASE {
            bad.push(format!("{}: geometric phase {:e}", s.step, s.max_abs_geometric_phase()));
        }
    }
    bad
}

pub fn check_scan(csv: &str) -> Vec<String> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.ends_with(",ok"))
        .map(|l| format!("scan point failed: {l}"))
        .collect()
}

/// Exit status of the binary.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}
