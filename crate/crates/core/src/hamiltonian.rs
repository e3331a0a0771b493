//! Resonant rotating-wave Hamiltonian of two atoms in a single-mode cavity.
//!
//! Convention: a laser pulse of Rabi frequency `Omega(t)` and phase `phi` on
//! atom `k` contributes `Omega e^{i phi} |up>_k<low|_k + h.c.`, and the cavity
//! contributes `g_k sqrt(n+1) |e>_k<1|_k (x) |n><n+1| + h.c.`. Both enter with
//! the same unit weight, which is what makes the analytic dark states exact
//! kernel vectors. All bare diagonal energies vanish (resonance, no Stark
//! shifts); losses add `-i/2` times the decay rates on the diagonal.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{AtomLevel, Basis, BasisState};
use crate::pulses::{Pulse, Schedule};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossParams {
    /// Decay rate of `|e>`.
    pub gamma_e: f64,
    /// Decay rate of `|u>`.
    pub gamma_u: f64,
    /// Cavity photon decay rate.
    pub kappa: f64,
}

impl LossParams {
    pub const NONE: LossParams = LossParams { gamma_e: 0.0, gamma_u: 0.0, kappa: 0.0 };

    pub fn is_lossless(&self) -> bool {
        self.gamma_e == 0.0 && self.gamma_u == 0.0 && self.kappa == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in
            [("gamma_e", self.gamma_e), ("gamma_u", self.gamma_u), ("kappa", self.kappa)]
        {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::Parameter { name, requirement: "non-negative", value });
            }
        }
        Ok(())
    }

    /// Total decay rate of a basis state.
    pub fn rate(&self, s: &BasisState) -> f64 {
        self.gamma_e * s.count(AtomLevel::Excited) as f64
            + self.gamma_u * s.count(AtomLevel::Upper) as f64
            + self.kappa * s.n as f64
    }
}

/// Square complex matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            match merged.last_mut() {
                Some((li, lj, lv)) if (*li, *lj) == (i, j) => *lv += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != ZERO);

        let mut row_ptr = vec![0usize; dim + 1];
        for &(i, _, _) in &merged {
            row_ptr[i + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let cols = merged.iter().map(|&(_, j, _)| j).collect();
        let vals = merged.iter().map(|&(_, _, v)| v).collect();
        let mut m = Self { dim, row_ptr, cols, vals, hermitian: false };
        m.hermitian = m.hermiticity_defect() <= 1e-14 * m.max_abs();
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i).find(|&(c, _)| c == j).map_or(ZERO, |(_, v)| v)
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |H - H^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.entries()
            .map(|(i, j, v)| (v - self.get(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `out = H x`.
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }

    /// Dense sub-matrix on `indices` (rows and columns in the given order).
    pub fn restrict(&self, indices: &[usize]) -> DMatrix<C64> {
        let mut pos = vec![usize::MAX; self.dim];
        for (k, &i) in indices.iter().enumerate() {
            pos[i] = k;
        }
        let mut m = DMatrix::from_element(indices.len(), indices.len(), ZERO);
        for (k, &i) in indices.iter().enumerate() {
            for (j, v) in self.row(i) {
                if pos[j] != usize::MAX {
                    m[(k, pos[j])] = v;
                }
            }
        }
        m
    }
}

/// A coupling `|upper><lower|` between two basis indices.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
struct Link {
    lower: usize,
    upper: usize,
}

/// Precomputed coupling structure of a schedule on a basis; evaluates `H(t)`
/// or its action on a vector without re-deriving the connectivity.
#[derive(Clone, Debug)]
pub struct HamiltonianModel {
    basis: Arc<Basis>,
    pulses: Vec<Pulse>,
    pulse_links: Vec<Vec<Link>>,
    cavity: Vec<(Link, f64)>,
    diagonal: Vec<C64>,
    t_window: (f64, f64),
    lossless: bool,
}

impl HamiltonianModel {
    pub fn new(basis: Arc<Basis>, schedule: &Schedule, loss: &LossParams) -> Result<Self> {
        loss.validate()?;
        let mut pulse_links = Vec::with_capacity(schedule.pulses.len());
        for p in &schedule.pulses {
            let (lo, up) = (p.transition.lower(), p.transition.upper());
            for level in [lo, up] {
                if !basis.contains_level(level) {
                    return Err(Error::MissingLevel(level.symbol()));
                }
            }
            let links = basis
                .states()
                .iter()
                .enumerate()
                .filter(|(_, s)| s.atom(p.atom) == lo)
                .map(|(i, s)| Link {
                    lower: i,
                    upper: basis.index_of(&s.with_atom(p.atom, up)).expect("same photon number"),
                })
                .collect();
            pulse_links.push(links);
        }

        let mut cavity = Vec::new();
        for (i, s) in basis.states().iter().enumerate() {
            for atom in [1u8, 2] {
                if s.atom(atom) == AtomLevel::One && s.n >= 1 {
                    let target = BasisState { n: s.n - 1, ..s.with_atom(atom, AtomLevel::Excited) };
                    let j = basis.index_of(&target).expect("lower photon number in basis");
                    let g = schedule.cavity(atom) * (s.n as f64).sqrt();
                    cavity.push((Link { lower: i, upper: j }, g));
                }
            }
        }

        let diagonal =
            basis.states().iter().map(|s| C64::new(0.0, -0.5 * loss.rate(s))).collect();

        Ok(Self {
            basis,
            pulses: schedule.pulses.clone(),
            pulse_links,
            cavity,
            diagonal,
            t_window: (schedule.t_start, schedule.t_end),
            lossless: loss.is_lossless(),
        })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn window(&self) -> (f64, f64) {
        self.t_window
    }

    pub fn is_lossless(&self) -> bool {
        self.lossless
    }

    /// Adds a static real energy to every basis state with `level` on either
    /// atom (counted per atom). Used for Stark-shift sensitivity studies.
    pub fn add_level_shift(&mut self, level: AtomLevel, shift: f64) {
        for (d, s) in self.diagonal.iter_mut().zip(self.basis.states()) {
            d.re += shift * s.count(level) as f64;
        }
    }

    /// Complex laser amplitudes `Omega_p(t) e^{i phi_p}`.
    pub fn laser_amplitudes(&self, t: f64) -> Vec<C64> {
        self.pulses.iter().map(|p| C64::from_polar(p.rabi(t), p.phase)).collect()
    }

    /// `out = H(t) x` given the amplitudes from [`Self::laser_amplitudes`].
    pub fn apply_with(&self, amps: &[C64], x: &[C64], out: &mut [C64]) {
        for ((o, d), xi) in out.iter_mut().zip(&self.diagonal).zip(x) {
            *o = d * xi;
        }
        for &(Link { lower, upper }, g) in &self.cavity {
            out[upper] += g * x[lower];
            out[lower] += g * x[upper];
        }
        for (links, &c) in self.pulse_links.iter().zip(amps) {
            if c == ZERO {
                continue;
            }
            let cc = c.conj();
            for &Link { lower, upper } in links {
                out[upper] += c * x[lower];
                out[lower] += cc * x[upper];
            }
        }
    }

    pub fn apply(&self, t: f64, x: &[C64], out: &mut [C64]) {
        let amps = self.laser_amplitudes(t);
        self.apply_with(&amps, x, out);
    }

    /// Explicit matrix at time `t` (no window check).
    pub fn matrix(&self, t: f64) -> OperatorMatrix {
        let amps = self.laser_amplitudes(t);
        let mut trip: Vec<(usize, usize, C64)> = self
            .diagonal
            .iter()
            .enumerate()
            .filter(|(_, d)| **d != ZERO)
            .map(|(i, &d)| (i, i, d))
            .collect();
        for &(Link { lower, upper }, g) in &self.cavity {
            trip.push((upper, lower, C64::new(g, 0.0)));
            trip.push((lower, upper, C64::new(g, 0.0)));
        }
        for (links, &c) in self.pulse_links.iter().zip(&amps) {
            if c == ZERO {
                continue;
            }
            for &Link { lower, upper } in links {
                trip.push((upper, lower, c));
                trip.push((lower, upper, c.conj()));
            }
        }
        OperatorMatrix::from_triplets(self.dim(), trip)
    }

    /// Matrix with every laser at unit amplitude: the full coupling graph.
    pub fn matrix_with_unit_lasers(&self) -> OperatorMatrix {
        let mut probe = self.clone();
        for p in &mut probe.pulses {
            p.envelope.omega_max = 1.0;
            p.envelope.plateau = f64::INFINITY;
        }
        probe.matrix(0.0)
    }

    /// Upper bound on the largest coupling, used for step-size limits.
    pub fn coupling_scale(&self) -> f64 {
        let omega = self.pulses.iter().map(|p| p.envelope.omega_max).fold(0.0, f64::max);
        let g = self.cavity.iter().map(|&(_, g)| g).fold(0.0, f64::max);
        omega.max(g)
    }
}

/// `H(t)` of `schedule` on `basis`.
pub fn assemble(
    basis: &Arc<Basis>,
    schedule: &Schedule,
    t: f64,
    loss: &LossParams,
) -> Result<OperatorMatrix> {
    if !schedule.contains(t) {
        return Err(Error::OutsideWindow { t, start: schedule.t_start, end: schedule.t_end });
    }
    Ok(HamiltonianModel::new(basis.clone(), schedule, loss)?.matrix(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{charge_of, StateVector};
    use crate::pulses::{build_schedule, Protocol, ScheduleParams};

    fn setup(p: Protocol) -> (Arc<Basis>, Schedule) {
        let b = Arc::new(Basis::new(3, p.needs_upper_level()).unwrap());
        (b, build_schedule(p, &ScheduleParams::default()).unwrap())
    }

    #[test]
    fn lossless_hamiltonian_is_hermitian() {
        for p in Protocol::ALL {
            let (b, s) = setup(p);
            for t in [s.t_start, -0.3, 2.9, 7.0, s.t_end] {
                let h = assemble(&b, &s, t, &LossParams::NONE).unwrap();
                assert!(h.is_hermitian());
                assert!(h.hermiticity_defect() <= 1e-14 * h.max_abs());
            }
        }
    }

    #[test]
    fn couplings_preserve_charge() {
        let (b, s) = setup(Protocol::Swap8);
        let h = assemble(&b, &s, 0.0, &LossParams::NONE).unwrap();
        for (i, j, _) in h.entries() {
            assert_eq!(charge_of(&b.state(i)), charge_of(&b.state(j)));
        }
    }

    #[test]
    fn two_ones_vacuum_is_stationary() {
        let (b, s) = setup(Protocol::Swap8);
        let quiet = s.with_omega_max(0.0);
        let h = assemble(&b, &quiet, 0.0, &LossParams::NONE).unwrap();
        let psi = StateVector::from_label(b.clone(), "11;0").unwrap();
        let mut out = vec![ZERO; b.dim()];
        h.apply(psi.amplitudes(), &mut out);
        assert!(out.iter().all(|z| *z == ZERO));
        // only cavity couplings remain
        for (i, j, _) in h.entries() {
            let (si, sj) = (b.state(i), b.state(j));
            assert_eq!((si.n as i64 - sj.n as i64).abs(), 1);
        }
    }

    #[test]
    fn cavity_elements_scale_with_sqrt_n() {
        let (b, s) = setup(Protocol::Swap8);
        let h = assemble(&b, &s.with_omega_max(0.0), 0.0, &LossParams::NONE).unwrap();
        let i = b.index_of_label("11;2").unwrap();
        let j = b.index_of_label("e1;1").unwrap();
        assert!((h.get(j, i).re - 25.0 * 2f64.sqrt()).abs() < 1e-12);
        let i = b.index_of_label("01;1").unwrap();
        let j = b.index_of_label("0e;0").unwrap();
        assert_eq!(h.get(j, i), C64::new(25.0, 0.0));
    }

    #[test]
    fn laser_phase_enters_upper_lower_element() {
        let b = Arc::new(Basis::new(2, true).unwrap());
        let s = build_schedule(Protocol::Cnot11, &ScheduleParams::default()).unwrap();
        let pump = &s.pulses[s.steps[0].pump];
        let t = pump.envelope.t_center;
        let h = assemble(&b, &s, t, &LossParams::NONE).unwrap();
        let lo = b.index_of_label("01;0").unwrap();
        let up = b.index_of_label("0u;0").unwrap();
        let expect = C64::from_polar(pump.rabi(t), std::f64::consts::PI);
        assert!((h.get(up, lo) - expect).norm() < 1e-9);
        assert!((h.get(lo, up) - expect.conj()).norm() < 1e-9);
    }

    #[test]
    fn emission_loss_only_on_excited_states() {
        let (b, s) = setup(Protocol::Swap8);
        let loss = LossParams { gamma_e: 0.3, ..Default::default() };
        let h = assemble(&b, &s, 0.0, &loss).unwrap();
        assert!(!h.is_hermitian());
        let herm = assemble(&b, &s, 0.0, &LossParams::NONE).unwrap();
        for i in 0..b.dim() {
            let anti = h.get(i, i) - herm.get(i, i);
            let st = b.state(i);
            let expect = -0.15 * st.count(AtomLevel::Excited) as f64;
            assert_eq!(anti, C64::new(0.0, expect));
        }
        for (i, j, v) in h.entries().filter(|(i, j, _)| i != j) {
            assert_eq!(v, herm.get(i, j));
        }
    }

    #[test]
    fn shelving_pulse_needs_upper_level() {
        let b = Arc::new(Basis::new(2, false).unwrap());
        let s = build_schedule(Protocol::Cnot11, &ScheduleParams::default()).unwrap();
        assert!(matches!(
            assemble(&b, &s, 0.0, &LossParams::NONE),
            Err(Error::MissingLevel('u'))
        ));
    }

    #[test]
    fn time_outside_window_rejected() {
        let (b, s) = setup(Protocol::Swap8);
        assert!(matches!(
            assemble(&b, &s, s.t_end + 1.0, &LossParams::NONE),
            Err(Error::OutsideWindow { .. })
        ));
    }

    #[test]
    fn matrix_and_matvec_agree() {
        let (b, s) = setup(Protocol::Cnot11);
        let model = HamiltonianModel::new(b.clone(), &s, &LossParams { kappa: 0.1, ..Default::default() })
            .unwrap();
        let x: Vec<C64> = (0..b.dim()).map(|k| C64::new((k as f64).sin(), (k as f64 * 0.7).cos())).collect();
        for t in [-1.0, 0.4, 13.0, 29.5] {
            let m = model.matrix(t);
            let (mut y1, mut y2) = (vec![ZERO; b.dim()], vec![ZERO; b.dim()]);
            m.apply(&x, &mut y1);
            model.apply(t, &x, &mut y2);
            for (a, c) in y1.iter().zip(&y2) {
                assert!((a - c).norm() < 1e-12);
            }
        }
    }
}
