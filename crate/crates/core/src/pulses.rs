//! Gaussian laser pulses and the step-structured SWAP / CNOT schedules.
//!
//! Times and rates are dimensionless (pulse width `Tp = 1` by default). Each
//! step is a double-STIRAP: two laser pulses in counterintuitive order plus
//! the static cavity couplings `g1`, `g2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::darkstates::StepRoles;
use crate::error::{Error, Result};
use crate::hilbert::{AtomLevel, BasisState};

/// Margin kept before the first and after the last pulse peak, in units of `Tp`.
pub const WINDOW_MARGIN: f64 = 4.0;

/// Pulse-area product below which a schedule is flagged as non-adiabatic.
pub const MIN_PULSE_AREA: f64 = 5.0;

/// Largest normalized overlap tolerated between pulses of consecutive steps.
pub const MAX_STEP_OVERLAP: f64 = 1e-4;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    pub omega_max: f64,
    pub t_center: f64,
    pub t_p: f64,
    /// Length of a flat top at `omega_max` centred on `t_center`; zero for a
    /// plain Gaussian.
    #[serde(default)]
    pub plateau: f64,
}

impl PulseEnvelope {
    pub fn gaussian(omega_max: f64, t_center: f64, t_p: f64) -> Self {
        Self { omega_max, t_center, t_p, plateau: 0.0 }
    }

    /// Flat-top pulse at `omega_max` on `[t_rise, t_fall]` with Gaussian flanks.
    pub fn flat_top(omega_max: f64, t_rise: f64, t_fall: f64, t_p: f64) -> Self {
        Self {
            omega_max,
            t_center: 0.5 * (t_rise + t_fall),
            t_p,
            plateau: (t_fall - t_rise).max(0.0),
        }
    }

    pub fn plateau_bounds(&self) -> (f64, f64) {
        let h = 0.5 * self.plateau;
        (self.t_center - h, self.t_center + h)
    }

    /// `omega_max * exp(-(d / t_p)^2)` with `d` the distance to the plateau.
    pub fn value(&self, t: f64) -> f64 {
        let (lo, hi) = self.plateau_bounds();
        let d = if t < lo {
            lo - t
        } else if t > hi {
            t - hi
        } else {
            0.0
        };
        let x = d / self.t_p;
        self.omega_max * (-x * x).exp()
    }

    /// Time of maximal value closest to `t`.
    pub fn peak_near(&self, t: f64) -> f64 {
        let (lo, hi) = self.plateau_bounds();
        t.clamp(lo, hi)
    }

    fn validate(&self) -> Result<()> {
        non_negative("omega_max", self.omega_max)?;
        positive("t_p", self.t_p)?;
        if !self.plateau.is_finite() || self.plateau < 0.0 {
            return Err(Error::Parameter {
                name: "plateau",
                requirement: "non-negative",
                value: self.plateau,
            });
        }
        Ok(())
    }
}

/// Free function form of [`PulseEnvelope::value`].
pub fn envelope_value(p: &PulseEnvelope, t: f64) -> f64 {
    p.value(t)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transition {
    #[serde(rename = "0-e")]
    ZeroE,
    #[serde(rename = "a-e")]
    AncE,
    #[serde(rename = "1-u")]
    OneU,
    #[serde(rename = "a-u")]
    AncU,
}

impl Transition {
    pub fn lower(self) -> AtomLevel {
        match self {
            Transition::ZeroE => AtomLevel::Zero,
            Transition::AncE | Transition::AncU => AtomLevel::Anc,
            Transition::OneU => AtomLevel::One,
        }
    }

    pub fn upper(self) -> AtomLevel {
        match self {
            Transition::ZeroE | Transition::AncE => AtomLevel::Excited,
            Transition::OneU | Transition::AncU => AtomLevel::Upper,
        }
    }

    /// Transitions through `|u>`, only used by the CNOT shelving steps.
    pub fn is_shelving(self) -> bool {
        matches!(self, Transition::OneU | Transition::AncU)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub envelope: PulseEnvelope,
    /// Addressed atom, 1 or 2.
    pub atom: u8,
    pub transition: Transition,
    /// Constant optical phase in radians.
    #[serde(default)]
    pub phase: f64,
}

impl Pulse {
    /// Column name such as `Omega_a(1)` or `Omega_1u(2)`.
    pub fn name(&self) -> String {
        let tag = match self.transition {
            Transition::ZeroE => "0",
            Transition::AncE => "a",
            Transition::OneU => "1u",
            Transition::AncU => "au",
        };
        format!("Omega_{tag}({})", self.atom)
    }

    pub fn rabi(&self, t: f64) -> f64 {
        self.envelope.value(t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub label: String,
    /// Indices into [`Schedule::pulses`]: the Stokes-like pulse (on first)
    /// and the pump-like pulse.
    pub stokes: usize,
    pub pump: usize,
    pub center: f64,
    /// Time interval attributed to this step.
    pub window: (f64, f64),
    /// Laser-coupled / uncoupled ground states, for cavity-mediated steps.
    #[serde(default)]
    pub roles: Option<StepRoles>,
    /// Product-state map the step implements, `from -> to`.
    #[serde(default)]
    pub transfers: Vec<(BasisState, BasisState)>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Swap8,
    Swap7,
    Cnot11,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Swap8, Protocol::Swap7, Protocol::Cnot11];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Swap8 => "swap8",
            Protocol::Swap7 => "swap7",
            Protocol::Cnot11 => "cnot11",
        }
    }

    pub fn needs_upper_level(self) -> bool {
        self == Protocol::Cnot11
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownProtocol(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleParams {
    pub omega_max: f64,
    pub t_p: f64,
    /// Delay between the two pulse peaks of one step.
    pub intra_delay: f64,
    /// Distance between consecutive step centres.
    pub inter_step_gap: f64,
    pub g1: f64,
    pub g2: f64,
    /// Per-pulse optical phases overriding the protocol defaults; must list
    /// one value per pulse when present.
    pub phases: Option<Vec<f64>>,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            omega_max: 10.0,
            t_p: 1.0,
            intra_delay: 1.2,
            inter_step_gap: 6.0,
            g1: 25.0,
            g2: 25.0,
            phases: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(default)]
    pub protocol: Option<Protocol>,
    pub pulses: Vec<Pulse>,
    pub steps: Vec<Step>,
    pub g1: f64,
    pub g2: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl Schedule {
    pub fn pulse_count(&self) -> usize {
        self.pulses.len()
    }

    pub fn cavity(&self, atom: u8) -> f64 {
        if atom == 1 { self.g1 } else { self.g2 }
    }

    pub fn uses_upper_level(&self) -> bool {
        self.pulses.iter().any(|p| p.transition.is_shelving())
    }

    pub fn max_omega(&self) -> f64 {
        self.pulses.iter().map(|p| p.envelope.omega_max).fold(0.0, f64::max)
    }

    pub fn min_width(&self) -> f64 {
        self.pulses.iter().map(|p| p.envelope.t_p).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }

    /// Copy with every pulse amplitude replaced by `omega_max` (zero allowed).
    pub fn with_omega_max(&self, omega_max: f64) -> Schedule {
        let mut s = self.clone();
        s.pulses.iter_mut().for_each(|p| p.envelope.omega_max = omega_max);
        s
    }

    /// Copy with the two pulses of step `k` exchanged in time, which breaks
    /// the counterintuitive order.
    pub fn with_step_reversed(&self, k: usize) -> Result<Schedule> {
        let step = self.steps.get(k).ok_or(Error::NoSuchStep(k))?;
        let (i, j) = (step.stokes, step.pump);
        let mut s = self.clone();
        let ci = s.pulses[i].envelope.t_center;
        s.pulses[i].envelope.t_center = s.pulses[j].envelope.t_center;
        s.pulses[j].envelope.t_center = ci;
        Ok(s)
    }

    /// Copy keeping only the pulses of step `k`, over that step's window.
    pub fn step_only(&self, k: usize) -> Result<Schedule> {
        let step = self.steps.get(k).ok_or(Error::NoSuchStep(k))?;
        let pulses = vec![self.pulses[step.stokes].clone(), self.pulses[step.pump].clone()];
        let mut local = step.clone();
        local.stokes = 0;
        local.pump = 1;
        Ok(Schedule {
            protocol: self.protocol,
            pulses,
            steps: vec![local],
            g1: self.g1,
            g2: self.g2,
            t_start: step.window.0,
            t_end: step.window.1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        positive("g1", self.g1)?;
        positive("g2", self.g2)?;
        if !(self.t_end > self.t_start) {
            return Err(Error::Config(format!(
                "empty schedule window [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        for p in &self.pulses {
            p.envelope.validate()?;
            if p.atom != 1 && p.atom != 2 {
                return Err(Error::Config(format!("pulse addresses atom {}", p.atom)));
            }
            if !p.phase.is_finite() {
                return Err(Error::Config(format!("non-finite phase on {}", p.name())));
            }
        }
        for s in &self.steps {
            if s.stokes >= self.pulses.len() || s.pump >= self.pulses.len() {
                return Err(Error::Config(format!("step {} refers to a missing pulse", s.label)));
            }
        }
        Ok(())
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter { name, requirement: "positive and finite", value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter { name, requirement: "non-negative and finite", value })
    }
}

struct StepSpec {
    label: &'static str,
    pulses: [(u8, Transition, f64); 2],
    roles: Option<StepRoles>,
    transfers: [(&'static str, &'static str); 4],
    /// The pump of this step and the Stokes pulse of the next one are a
    /// single pulse.
    merge_with_next: bool,
}

fn step_specs(protocol: Protocol) -> Vec<StepSpec> {
    use AtomLevel::{Anc as A, Zero as Z};
    use Transition::*;
    let roles = |l1, l2| Some(StepRoles::new(l1, l2));
    let pi = std::f64::consts::PI;
    let swap = |merge: bool| {
        vec![
            StepSpec {
                label: "1",
                pulses: [(1, AncE, 0.0), (2, ZeroE, 0.0)],
                roles: roles(A, Z),
                transfers: [("00;0", "00;0"), ("01;0", "01;0"), ("10;0", "a1;0"), ("11;0", "11;0")],
                merge_with_next: merge,
            },
            StepSpec {
                label: "2",
                pulses: [(2, ZeroE, 0.0), (1, ZeroE, 0.0)],
                roles: roles(Z, Z),
                transfers: [("00;0", "00;0"), ("01;0", "10;0"), ("a1;0", "a1;0"), ("11;0", "11;0")],
                merge_with_next: false,
            },
            StepSpec {
                label: "3",
                pulses: [(2, AncE, 0.0), (1, AncE, 0.0)],
                roles: roles(A, A),
                transfers: [("00;0", "00;0"), ("a1;0", "1a;0"), ("10;0", "10;0"), ("11;0", "11;0")],
                merge_with_next: false,
            },
            StepSpec {
                label: "4",
                pulses: [(1, ZeroE, 0.0), (2, AncE, 0.0)],
                roles: roles(Z, A),
                transfers: [("00;0", "00;0"), ("1a;0", "01;0"), ("10;0", "10;0"), ("11;0", "11;0")],
                merge_with_next: false,
            },
        ]
    };
    match protocol {
        Protocol::Swap8 => swap(false),
        Protocol::Swap7 => swap(true),
        // The tripod dark state of the shelving transfer is Omega_au|1> - Omega_1u|a>;
        // a pi phase on the 1-u pulses turns the sign into +, so that the
        // shelving round trip carries no relative phase.
        Protocol::Cnot11 => vec![
            StepSpec {
                label: "A",
                pulses: [(2, AncU, 0.0), (2, OneU, pi)],
                roles: None,
                transfers: [("00;0", "00;0"), ("01;0", "0a;0"), ("10;0", "10;0"), ("11;0", "1a;0")],
                merge_with_next: false,
            },
            StepSpec {
                label: "B",
                pulses: [(1, AncE, 0.0), (2, ZeroE, 0.0)],
                roles: roles(A, Z),
                transfers: [("00;0", "00;0"), ("0a;0", "0a;0"), ("10;0", "a1;0"), ("1a;0", "1a;0")],
                merge_with_next: false,
            },
            StepSpec {
                label: "C",
                pulses: [(1, ZeroE, 0.0), (2, AncE, 0.0)],
                roles: roles(Z, A),
                transfers: [("00;0", "00;0"), ("0a;0", "0a;0"), ("a1;0", "a1;0"), ("1a;0", "01;0")],
                merge_with_next: true,
            },
            StepSpec {
                label: "D",
                pulses: [(2, AncE, 0.0), (1, AncE, 0.0)],
                roles: roles(A, A),
                transfers: [("00;0", "00;0"), ("0a;0", "0a;0"), ("a1;0", "1a;0"), ("01;0", "01;0")],
                merge_with_next: false,
            },
            StepSpec {
                label: "E",
                pulses: [(2, ZeroE, 0.0), (1, ZeroE, 0.0)],
                roles: roles(Z, Z),
                transfers: [("00;0", "00;0"), ("0a;0", "0a;0"), ("1a;0", "1a;0"), ("01;0", "10;0")],
                merge_with_next: false,
            },
            StepSpec {
                label: "F",
                pulses: [(2, OneU, pi), (2, AncU, 0.0)],
                roles: None,
                transfers: [("00;0", "00;0"), ("0a;0", "01;0"), ("1a;0", "11;0"), ("10;0", "10;0")],
                merge_with_next: false,
            },
        ],
    }
}

/// Builds the pulse schedule of `protocol`.
///
/// Step `k` is centred at `k * inter_step_gap`; its two pulses peak at
/// `center -/+ intra_delay / 2`. Merged pulses become one flat-top pulse
/// between the two original peaks.
pub fn build_schedule(protocol: Protocol, params: &ScheduleParams) -> Result<Schedule> {
    non_negative("omega_max", params.omega_max)?;
    positive("t_p", params.t_p)?;
    positive("intra_delay", params.intra_delay)?;
    positive("inter_step_gap", params.inter_step_gap)?;
    positive("g1", params.g1)?;
    positive("g2", params.g2)?;

    let specs = step_specs(protocol);
    let half = 0.5 * params.intra_delay;
    let mut pulses: Vec<Pulse> = Vec::new();
    let mut steps: Vec<Step> = Vec::new();
    let mut carried: Option<usize> = None;

    for (k, spec) in specs.iter().enumerate() {
        let center = k as f64 * params.inter_step_gap;
        let [(a1, t1, ph1), (a2, t2, ph2)] = spec.pulses;
        let stokes = match carried.take() {
            Some(i) => {
                let rise = pulses[i].envelope.t_center;
                pulses[i].envelope =
                    PulseEnvelope::flat_top(params.omega_max, rise, center - half, params.t_p);
                i
            }
            None => {
                pulses.push(Pulse {
                    envelope: PulseEnvelope::gaussian(params.omega_max, center - half, params.t_p),
                    atom: a1,
                    transition: t1,
                    phase: ph1,
                });
                pulses.len() - 1
            }
        };
        pulses.push(Pulse {
            envelope: PulseEnvelope::gaussian(params.omega_max, center + half, params.t_p),
            atom: a2,
            transition: t2,
            phase: ph2,
        });
        let pump = pulses.len() - 1;
        if spec.merge_with_next {
            carried = Some(pump);
        }
        let transfers = spec
            .transfers
            .iter()
            .map(|(a, b)| (a.parse().expect("static label"), b.parse().expect("static label")))
            .collect();
        steps.push(Step {
            label: spec.label.to_string(),
            stokes,
            pump,
            center,
            window: (center - 0.5 * params.inter_step_gap, center + 0.5 * params.inter_step_gap),
            roles: spec.roles,
            transfers,
        });
    }

    let t_start = -half - WINDOW_MARGIN * params.t_p;
    let last = steps.last().map_or(0.0, |s| s.center);
    let t_end = last + half + WINDOW_MARGIN * params.t_p;
    if let Some(first) = steps.first_mut() {
        first.window.0 = first.window.0.min(t_start);
    }
    if let Some(last) = steps.last_mut() {
        last.window.1 = last.window.1.max(t_end);
    }

    if let Some(phases) = &params.phases {
        if phases.len() != pulses.len() {
            return Err(Error::Config(format!(
                "{protocol} has {} pulses but {} phases were given",
                pulses.len(),
                phases.len()
            )));
        }
        for (p, &phi) in pulses.iter_mut().zip(phases) {
            p.phase = phi;
        }
    }

    let schedule = Schedule {
        protocol: Some(protocol),
        pulses,
        steps,
        g1: params.g1,
        g2: params.g2,
        t_start,
        t_end,
    };
    schedule.validate()?;
    Ok(schedule)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Flag {
    /// `omega_max * t_p` of a pulse is below [`MIN_PULSE_AREA`].
    PulseArea { pulse: String, value: f64 },
    /// The cavity coupling of an atom does not exceed the strongest laser.
    CavityNotDominant { atom: u8, g: f64, omega_max: f64 },
    /// Pump peaks before (or with) the Stokes pulse.
    Ordering { step: String },
    /// Pulses of consecutive steps overlap more than [`MAX_STEP_OVERLAP`].
    StepOverlap { step: String, overlap: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub label: String,
    pub stokes_peak: f64,
    pub pump_peak: f64,
    pub counterintuitive: bool,
    /// Largest normalized overlap `int O_i O_j / sqrt(int O_i^2 int O_j^2)`
    /// between a pulse of this step and one of the next, shared pulses excluded.
    pub overlap_with_next: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub steps: Vec<StepDiagnostics>,
    /// Smallest `omega_max * t_p` over all pulses.
    pub min_pulse_area: f64,
    /// `g * t_p` per atom, with the smallest pulse width.
    pub g_tp: (f64, f64),
    pub flags: Vec<Flag>,
}

impl ScheduleReport {
    pub fn ordering_ok(&self) -> bool {
        self.steps.iter().all(|s| s.counterintuitive)
    }
}

fn overlap(a: &PulseEnvelope, b: &PulseEnvelope, t0: f64, t1: f64) -> f64 {
    let n = 4000;
    let h = (t1 - t0) / n as f64;
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for k in 0..=n {
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        let t = t0 + k as f64 * h;
        let (x, y) = (a.value(t), b.value(t));
        ab += w * x * y;
        aa += w * x * x;
        bb += w * y * y;
    }
    if aa == 0.0 || bb == 0.0 { 0.0 } else { ab / (aa * bb).sqrt() }
}

pub fn schedule_diagnostics(s: &Schedule) -> ScheduleReport {
    let mut flags = Vec::new();
    let pad = 8.0 * s.min_width().min(1e3);
    let (t0, t1) = (s.t_start - pad, s.t_end + pad);

    let steps: Vec<StepDiagnostics> = s
        .steps
        .iter()
        .enumerate()
        .map(|(k, st)| {
            let stokes_peak = s.pulses[st.stokes].envelope.peak_near(st.center);
            let pump_peak = s.pulses[st.pump].envelope.peak_near(st.center);
            let counterintuitive = stokes_peak < pump_peak;
            if !counterintuitive {
                flags.push(Flag::Ordering { step: st.label.clone() });
            }
            let overlap_with_next = s.steps.get(k + 1).map(|next| {
                let mine = [st.stokes, st.pump];
                let theirs = [next.stokes, next.pump];
                let mut worst: f64 = 0.0;
                for &i in &mine {
                    for &j in &theirs {
                        if !theirs.contains(&i) && !mine.contains(&j) {
                            worst = worst.max(overlap(
                                &s.pulses[i].envelope,
                                &s.pulses[j].envelope,
                                t0,
                                t1,
                            ));
                        }
                    }
                }
                worst
            });
            if let Some(ov) = overlap_with_next {
                if ov > MAX_STEP_OVERLAP {
                    flags.push(Flag::StepOverlap { step: st.label.clone(), overlap: ov });
                }
            }
            StepDiagnostics {
                label: st.label.clone(),
                stokes_peak,
                pump_peak,
                counterintuitive,
                overlap_with_next,
            }
        })
        .collect();

    let mut min_pulse_area = f64::INFINITY;
    for p in &s.pulses {
        let area = p.envelope.omega_max * p.envelope.t_p;
        min_pulse_area = min_pulse_area.min(area);
        if area < MIN_PULSE_AREA {
            flags.push(Flag::PulseArea { pulse: p.name(), value: area });
        }
    }
    let omega_max = s.max_omega();
    for atom in [1u8, 2] {
        let g = s.cavity(atom);
        if g <= omega_max {
            flags.push(Flag::CavityNotDominant { atom, g, omega_max });
        }
    }
    let tp = if s.pulses.is_empty() { 1.0 } else { s.min_width() };
    ScheduleReport { steps, min_pulse_area, g_tp: (s.g1 * tp, s.g2 * tp), flags }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn envelope_peak_and_width() {
        let p = PulseEnvelope::gaussian(10.0, 2.0, 1.0);
        assert_eq!(envelope_value(&p, 2.0), 10.0);
        assert_relative_eq!(p.value(3.0), 10.0 * (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(p.value(1.0), 10.0 * (-1.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn flat_top_is_flat_between_edges() {
        let p = PulseEnvelope::flat_top(10.0, 0.6, 5.4, 1.0);
        for t in [0.6 + 1e-12, 1.0, 3.0, 5.4 - 1e-12] {
            assert_eq!(p.value(t), 10.0);
        }
        let g = PulseEnvelope::gaussian(10.0, 0.6, 1.0);
        assert_relative_eq!(p.value(-0.7), g.value(-0.7), max_relative = 1e-14);
        assert_relative_eq!(p.peak_near(0.0), 0.6, max_relative = 1e-14);
        assert_relative_eq!(p.peak_near(6.0), 5.4, max_relative = 1e-14);
    }

    #[test]
    fn pulse_and_step_counts() {
        let d = ScheduleParams::default();
        let s8 = build_schedule(Protocol::Swap8, &d).unwrap();
        assert_eq!((s8.pulse_count(), s8.steps.len()), (8, 4));
        let s7 = build_schedule(Protocol::Swap7, &d).unwrap();
        assert_eq!((s7.pulse_count(), s7.steps.len()), (7, 4));
        let c = build_schedule(Protocol::Cnot11, &d).unwrap();
        assert_eq!((c.pulse_count(), c.steps.len()), (11, 6));
        assert!(c.uses_upper_level() && !s8.uses_upper_level());
    }

    #[test]
    fn swap8_step_one_order() {
        let s = build_schedule(Protocol::Swap8, &ScheduleParams::default()).unwrap();
        let st = &s.steps[0];
        let (stokes, pump) = (&s.pulses[st.stokes], &s.pulses[st.pump]);
        assert_eq!((stokes.atom, stokes.transition), (1, Transition::AncE));
        assert_eq!((pump.atom, pump.transition), (2, Transition::ZeroE));
        assert!(stokes.envelope.t_center < pump.envelope.t_center);
        assert_relative_eq!(pump.envelope.t_center - stokes.envelope.t_center, 1.2);
    }

    #[test]
    fn window_covers_four_widths() {
        for p in Protocol::ALL {
            let s = build_schedule(p, &ScheduleParams::default()).unwrap();
            for pulse in &s.pulses {
                let (lo, hi) = pulse.envelope.plateau_bounds();
                assert!(lo - s.t_start >= 4.0 - 1e-12);
                assert!(s.t_end - hi >= 4.0 - 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut p = ScheduleParams::default();
        p.t_p = 0.0;
        assert!(build_schedule(Protocol::Swap8, &p).is_err());
        let mut p = ScheduleParams::default();
        p.omega_max = -1.0;
        assert!(build_schedule(Protocol::Swap8, &p).is_err());
        let mut p = ScheduleParams::default();
        p.phases = Some(vec![0.0; 3]);
        assert!(build_schedule(Protocol::Swap8, &p).is_err());
        assert!("swap9".parse::<Protocol>().is_err());
        assert_eq!("SWAP7".parse::<Protocol>().unwrap(), Protocol::Swap7);
    }

    #[test]
    fn default_parameters_raise_no_flags() {
        for p in Protocol::ALL {
            let s = build_schedule(p, &ScheduleParams::default()).unwrap();
            let r = schedule_diagnostics(&s);
            assert!(r.flags.is_empty(), "{p}: {:?}", r.flags);
            assert_eq!(r.min_pulse_area, 10.0);
            assert_eq!(r.g_tp, (25.0, 25.0));
        }
    }

    #[test]
    fn weak_pulses_flagged() {
        let p = ScheduleParams { omega_max: 1.0, ..Default::default() };
        let r = schedule_diagnostics(&build_schedule(Protocol::Swap8, &p).unwrap());
        assert!(r.flags.iter().any(|f| matches!(f, Flag::PulseArea { .. })));
        let p = ScheduleParams { g1: 5.0, ..Default::default() };
        let r = schedule_diagnostics(&build_schedule(Protocol::Swap8, &p).unwrap());
        assert!(r.flags.contains(&Flag::CavityNotDominant { atom: 1, g: 5.0, omega_max: 10.0 }));
    }

    #[test]
    fn reversed_step_flagged() {
        let s = build_schedule(Protocol::Swap8, &ScheduleParams::default()).unwrap();
        let r = schedule_diagnostics(&s.with_step_reversed(2).unwrap());
        assert!(!r.steps[2].counterintuitive);
        assert_eq!(r.flags, vec![Flag::Ordering { step: "3".into() }]);
    }

    #[test]
    fn consecutive_steps_barely_overlap() {
        let s = build_schedule(Protocol::Swap8, &ScheduleParams::default()).unwrap();
        let r = schedule_diagnostics(&s);
        for st in &r.steps[..3] {
            let ov = st.overlap_with_next.unwrap();
            // Gaussians 4.8 widths apart: exp(-4.8^2 / 2)
            assert_relative_eq!(ov, (-4.8f64 * 4.8 / 2.0).exp(), max_relative = 1e-6);
        }
    }

    #[test]
    fn cnot_shelving_steps_use_upper_level() {
        let s = build_schedule(Protocol::Cnot11, &ScheduleParams::default()).unwrap();
        for k in [0, 5] {
            let st = &s.steps[k];
            assert!(s.pulses[st.stokes].transition.is_shelving());
            assert!(s.pulses[st.pump].transition.is_shelving());
            assert!(st.roles.is_none());
        }
        // steps C and D share their Omega_a(2) pulse
        assert_eq!(s.steps[2].pump, s.steps[3].stokes);
    }

    #[test]
    fn schedule_json_round_trip() {
        let s = build_schedule(Protocol::Swap7, &ScheduleParams::default()).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: Schedule = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
