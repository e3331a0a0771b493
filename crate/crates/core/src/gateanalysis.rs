//! Gate fidelity, leakage and exposure metrics, parameter scans, and the
//! metastable-helium order-of-magnitude estimates.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::LossParams;
use crate::hilbert::{AtomLevel, Basis};
use crate::propagator::{run_gate, GateMatrix, Integrator, TimeGrid, Trajectory};
use crate::pulses::{build_schedule, Protocol, Schedule, ScheduleParams};

/// Linewidth of the helium 2^3S_1 - 2^3P_0 line, in s^-1.
pub const HELIUM_LINEWIDTH: f64 = 1e7;
/// `Omega ~ RABI_PER_SQRT_INTENSITY * sqrt(I)` with `I` in W/cm^2, s^-1.
pub const RABI_PER_SQRT_INTENSITY: f64 = 1e8;
/// Upper estimate `S ~ STARK_PER_INTENSITY * I`, s^-1.
pub const STARK_PER_INTENSITY: f64 = 100.0;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub fidelity: f64,
    pub leakage: [f64; 4],
}

impl Fidelity {
    pub fn max_leakage(&self) -> f64 {
        self.leakage.iter().copied().fold(0.0, f64::max)
    }
}

/// `|tr(U^dagger G)| / 4` after anchoring `G` to its `|00>` phase, plus the
/// per-column leakage `1 - ||G e_j||^2`.
pub fn gate_fidelity(g: &GateMatrix, target: &GateMatrix) -> Fidelity {
    let a = g.anchored();
    let mut tr = C64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            tr += target.get(i, j).conj() * a.get(i, j);
        }
    }
    Fidelity { fidelity: (tr.norm() / 4.0).clamp(0.0, 1.0), leakage: g.leakage() }
}

pub fn target_for(protocol: Protocol) -> (&'static str, GateMatrix) {
    match protocol {
        Protocol::Swap8 | Protocol::Swap7 => ("swap", GateMatrix::swap()),
        Protocol::Cnot11 => ("cnot", GateMatrix::cnot()),
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    /// Largest total population with some atom in `|e>`.
    pub max_e_population: f64,
    pub max_u_population: f64,
    /// Largest mean photon number.
    pub max_photon_number: f64,
    /// Time integral of the `|e>` population.
    pub integrated_e_population: f64,
}

impl Exposure {
    fn merge(self, o: Exposure) -> Exposure {
        Exposure {
            max_e_population: self.max_e_population.max(o.max_e_population),
            max_u_population: self.max_u_population.max(o.max_u_population),
            max_photon_number: self.max_photon_number.max(o.max_photon_number),
            integrated_e_population: self.integrated_e_population.max(o.integrated_e_population),
        }
    }
}

pub fn exposure_metrics(traj: &Trajectory) -> Exposure {
    let basis = &traj.basis;
    let mut e_pop = Vec::with_capacity(traj.len());
    let mut out = Exposure::default();
    for v in &traj.states {
        let (mut pe, mut pu, mut n) = (0.0, 0.0, 0.0);
        for (s, a) in basis.states().iter().zip(v) {
            let p = a.norm_sqr();
            if s.count(AtomLevel::Excited) > 0 {
                pe += p;
            }
            if s.count(AtomLevel::Upper) > 0 {
                pu += p;
            }
            n += s.n as f64 * p;
        }
        out.max_e_population = out.max_e_population.max(pe);
        out.max_u_population = out.max_u_population.max(pu);
        out.max_photon_number = out.max_photon_number.max(n);
        e_pop.push(pe);
    }
    out.integrated_e_population = traj
        .times
        .windows(2)
        .zip(e_pop.windows(2))
        .map(|(t, p)| 0.5 * (t[1] - t[0]) * (p[0] + p[1]))
        .sum();
    out
}

/// Everything measured for one gate run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub target: String,
    /// Realized matrix, anchored to the `|00>` phase.
    pub gate: GateMatrix,
    pub fidelity: f64,
    pub leakage: [f64; 4],
    pub max_leakage: f64,
    /// Worst case over the four computational inputs.
    pub exposure: Exposure,
    /// Largest `1 - ||psi(t_end)||^2` over the four inputs.
    pub norm_loss: f64,
}

pub fn evaluate_gate(
    basis: &Arc<Basis>,
    schedule: &Schedule,
    grid: &TimeGrid,
    loss: &LossParams,
    integrator: Integrator,
    target: (&str, &GateMatrix),
) -> Result<GateResult> {
    let run = run_gate(basis, schedule, grid, loss, integrator)?;
    Ok(summarize(&run.gate, &run.trajectories, target))
}

pub fn summarize(gate: &GateMatrix, trajectories: &[Trajectory], target: (&str, &GateMatrix)) -> GateResult {
    let f = gate_fidelity(gate, target.1);
    let exposure = trajectories.iter().map(exposure_metrics).fold(Exposure::default(), Exposure::merge);
    let norm_loss = trajectories
        .iter()
        .map(|t| 1.0 - t.norms.last().map_or(1.0, |n| n * n))
        .fold(0.0, f64::max);
    GateResult {
        target: target.0.to_string(),
        gate: gate.anchored(),
        fidelity: f.fidelity,
        leakage: f.leakage,
        max_leakage: f.max_leakage(),
        exposure,
        norm_loss,
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    /// Peak Rabi frequency of every pulse, times `Tp`.
    OmegaMax,
    /// Both cavity couplings, times `Tp`.
    G,
    G1,
    G2,
    /// Intra-step delay in units of `Tp`.
    IntraDelay,
    InterStepGap,
}

impl ScanAxis {
    pub fn column(self) -> &'static str {
        match self {
            ScanAxis::OmegaMax => "omega_max_Tp",
            ScanAxis::G => "g_Tp",
            ScanAxis::G1 => "g1_Tp",
            ScanAxis::G2 => "g2_Tp",
            ScanAxis::IntraDelay => "intra_delay_over_Tp",
            ScanAxis::InterStepGap => "inter_step_gap_over_Tp",
        }
    }

    /// Sets the axis value (dimensionless) on `p`.
    pub fn apply(self, p: &mut ScheduleParams, value: f64) {
        let tp = p.t_p;
        match self {
            ScanAxis::OmegaMax => p.omega_max = value / tp,
            ScanAxis::G => {
                p.g1 = value / tp;
                p.g2 = value / tp;
            }
            ScanAxis::G1 => p.g1 = value / tp,
            ScanAxis::G2 => p.g2 = value / tp,
            ScanAxis::IntraDelay => p.intra_delay = value * tp,
            ScanAxis::InterStepGap => p.inter_step_gap = value * tp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub axis: ScanAxis,
    pub values: Vec<f64>,
}

/// Fixed settings shared by every scan point.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanBase {
    pub protocol: Protocol,
    pub params: ScheduleParams,
    pub n_max: usize,
    /// `None` uses the largest admissible step at each point.
    pub dt: Option<f64>,
    pub integrator: Integrator,
    pub loss: LossParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub values: Vec<f64>,
    pub result: Option<GateResult>,
    pub status: String,
}

pub const MAX_SCAN_AXES: usize = 3;

/// Cartesian product of the axes, last axis fastest.
pub fn grid_points(axes: &[AxisSpec]) -> Vec<Vec<f64>> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Vec::new();
    }
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for ax in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                ax.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

fn scan_point(base: &ScanBase, axes: &[AxisSpec], values: &[f64]) -> Result<GateResult> {
    let mut params = base.params.clone();
    for (ax, &v) in axes.iter().zip(values) {
        ax.axis.apply(&mut params, v);
    }
    let schedule = build_schedule(base.protocol, &params)?;
    let basis = Arc::new(Basis::new(base.n_max, base.protocol.needs_upper_level())?);
    let mut grid = TimeGrid::for_schedule(&schedule);
    if let Some(dt) = base.dt {
        grid.dt = dt;
    }
    let (name, target) = target_for(base.protocol);
    evaluate_gate(&basis, &schedule, &grid, &base.loss, base.integrator, (name, &target))
}

/// One gate evaluation per grid point, in [`grid_points`] order. Points are
/// evaluated in parallel; failures are recorded in the row status.
pub fn parameter_scan(base: &ScanBase, axes: &[AxisSpec]) -> Result<Vec<ScanRow>> {
    if axes.len() > MAX_SCAN_AXES {
        return Err(Error::Config(format!(
            "at most {MAX_SCAN_AXES} scan axes are supported, got {}",
            axes.len()
        )));
    }
    let points = grid_points(axes);
    Ok(points
        .into_par_iter()
        .map(|values| match scan_point(base, axes, &values) {
            Ok(r) => ScanRow { values, result: Some(r), status: "ok".into() },
            Err(e) => ScanRow { values, result: None, status: format!("error: {e}") },
        })
        .collect())
}

/// CSV with one column per axis followed by the metrics and a status.
pub fn scan_csv(axes: &[AxisSpec], rows: &[ScanRow]) -> String {
    let mut out = String::new();
    let mut header: Vec<&str> = axes.iter().map(|a| a.axis.column()).collect();
    header.extend([
        "fidelity",
        "max_leakage",
        "max_e_population",
        "max_photon_number",
        "norm_loss",
        "status",
    ]);
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let mut cells: Vec<String> = row.values.iter().map(|v| v.to_string()).collect();
        match &row.result {
            Some(r) => cells.extend(
                [
                    r.fidelity,
                    r.max_leakage,
                    r.exposure.max_e_population,
                    r.exposure.max_photon_number,
                    r.norm_loss,
                ]
                .map(|v| format!("{v:.10e}")),
            ),
            None => cells.extend(std::iter::repeat(String::new()).take(5)),
        }
        // error messages may contain commas
        let status = row.status.replace('"', "'");
        cells.push(if status.contains(',') { format!("\"{status}\"") } else { status });
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalEstimate {
    /// W/cm^2.
    pub intensity: f64,
    /// Pulse width, s.
    pub t_p: f64,
    /// Peak Rabi frequency, s^-1.
    pub rabi: f64,
    /// Upper estimate of the Stark shift, s^-1.
    pub stark: f64,
    /// Excited-state linewidth, s^-1.
    pub gamma: f64,
    pub omega_tp: f64,
    pub gamma_tp: f64,
    /// `(Omega Tp)^2 / (Gamma Tp)`, must be >> 1 for adiabatic passage.
    pub adiabatic_ratio: f64,
    /// Accumulated Stark phase `S Tp`, must be << 2 pi.
    pub stark_phase: f64,
}

pub fn physical_estimates(intensity: f64, t_p: f64) -> Result<PhysicalEstimate> {
    physical_estimates_with(intensity, t_p, HELIUM_LINEWIDTH)
}

pub fn physical_estimates_with(intensity: f64, t_p: f64, gamma: f64) -> Result<PhysicalEstimate> {
    for (name, value) in [("intensity", intensity), ("t_p", t_p)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Parameter { name, requirement: "positive", value });
        }
    }
    let rabi = RABI_PER_SQRT_INTENSITY * intensity.sqrt();
    let stark = STARK_PER_INTENSITY * intensity;
    let omega_tp = rabi * t_p;
    let gamma_tp = gamma * t_p;
    Ok(PhysicalEstimate {
        intensity,
        t_p,
        rabi,
        stark,
        gamma,
        omega_tp,
        gamma_tp,
        adiabatic_ratio: omega_tp * omega_tp / gamma_tp,
        stark_phase: stark * t_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_swap_has_unit_fidelity() {
        let f = gate_fidelity(&GateMatrix::swap(), &GateMatrix::swap());
        assert_eq!(f.fidelity, 1.0);
        assert_eq!(f.leakage, [0.0; 4]);
        let id = GateMatrix::identity();
        assert_eq!(gate_fidelity(&id, &id).fidelity, 1.0);
    }

    #[test]
    fn quarter_turn_on_one_column() {
        let s = GateMatrix::swap();
        let g = GateMatrix::from_fn(|i, j| {
            if j == 2 { s.get(i, j) * C64::new(0.0, 1.0) } else { s.get(i, j) }
        });
        // trace = 1 + 1 + i + 1
        let f = gate_fidelity(&g, &s);
        assert_relative_eq!(f.fidelity, 10f64.sqrt() / 4.0, max_relative = 1e-15);
        assert!(f.fidelity < 1.0);
    }

    #[test]
    fn global_phase_is_ignored() {
        let s = GateMatrix::swap();
        let g = GateMatrix::from_fn(|i, j| s.get(i, j) * C64::from_polar(1.0, 2.1));
        assert_relative_eq!(gate_fidelity(&g, &s).fidelity, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn leakage_from_short_columns() {
        let s = GateMatrix::swap();
        let g = GateMatrix::from_fn(|i, j| s.get(i, j) * if j == 1 { 0.9 } else { 1.0 });
        let f = gate_fidelity(&g, &s);
        assert_relative_eq!(f.leakage[1], 1.0 - 0.81, max_relative = 1e-14);
        assert_relative_eq!(f.max_leakage(), 0.19, max_relative = 1e-14);
    }

    #[test]
    fn helium_numbers() {
        let e = physical_estimates(1e4, 1e-9).unwrap();
        assert_relative_eq!(e.rabi, 1e10, max_relative = 1e-12);
        assert_relative_eq!(e.omega_tp, 10.0, max_relative = 1e-12);
        assert_relative_eq!(e.stark_phase, 1e-3, max_relative = 1e-12);
        assert_relative_eq!(e.gamma_tp, 0.01, max_relative = 1e-12);
        assert_relative_eq!(e.adiabatic_ratio, 1e4, max_relative = 1e-12);
        assert!(physical_estimates(0.0, 1e-9).is_err());
        assert!(physical_estimates(1e4, -1.0).is_err());
    }

    #[test]
    fn grid_point_order() {
        let axes = vec![
            AxisSpec { axis: ScanAxis::OmegaMax, values: vec![1.0, 2.0] },
            AxisSpec { axis: ScanAxis::G, values: vec![10.0, 20.0, 30.0] },
        ];
        let pts = grid_points(&axes);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![1.0, 10.0]);
        assert_eq!(pts[1], vec![1.0, 20.0]);
        assert_eq!(pts[5], vec![2.0, 30.0]);
        assert!(grid_points(&[]).is_empty());
    }

    #[test]
    fn empty_scan_is_header_only() {
        let base = ScanBase {
            protocol: Protocol::Swap8,
            params: ScheduleParams::default(),
            n_max: 2,
            dt: None,
            integrator: Integrator::Magnus4,
            loss: LossParams::NONE,
        };
        let axes = vec![AxisSpec { axis: ScanAxis::OmegaMax, values: vec![] }];
        let rows = parameter_scan(&base, &axes).unwrap();
        assert!(rows.is_empty());
        let csv = scan_csv(&axes, &rows);
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("omega_max_Tp,fidelity,"));
    }

    #[test]
    fn failing_point_recorded() {
        let base = ScanBase {
            protocol: Protocol::Swap8,
            params: ScheduleParams::default(),
            n_max: 2,
            dt: None,
            integrator: Integrator::Magnus4,
            loss: LossParams::NONE,
        };
        let axes = vec![AxisSpec { axis: ScanAxis::IntraDelay, values: vec![-1.0] }];
        let rows = parameter_scan(&base, &axes).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].result.is_none());
        assert!(rows[0].status.starts_with("error"));
        let csv = scan_csv(&axes, &rows);
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn too_many_axes_rejected() {
        let base = ScanBase {
            protocol: Protocol::Swap8,
            params: ScheduleParams::default(),
            n_max: 2,
            dt: None,
            integrator: Integrator::Magnus4,
            loss: LossParams::NONE,
        };
        let ax = AxisSpec { axis: ScanAxis::G, values: vec![1.0] };
        assert!(parameter_scan(&base, &vec![ax; 4]).is_err());
    }
}
