//! Time integration of `i d|psi>/dt = H(t)|psi>` and realized gate matrices.
//!
//! The default integrator is the fourth-order Magnus method with two Gauss
//! nodes; the exponential is applied to the state by a Taylor series summed
//! to round-off, so each step costs a few dozen sparse matrix-vector products
//! and the error is governed by how fast the pulses change rather than by the
//! size of `g`. Classic RK4 is available for comparison.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianModel, LossParams};
use crate::hilbert::{Basis, BasisState, StateVector};
use crate::pulses::Schedule;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `dt` may not exceed `min(Tp, 1/g, 1/Omega_max) / STEPS_PER_SCALE`.
pub const STEPS_PER_SCALE: f64 = 20.0;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Magnus4,
    Rk4,
}

/// Largest step allowed for `schedule`.
pub fn max_step(schedule: &Schedule) -> f64 {
    let g = schedule.g1.max(schedule.g2);
    let omega = schedule.max_omega();
    let tp = if schedule.pulses.is_empty() { f64::INFINITY } else { schedule.min_width() };
    let mut scale = tp;
    if g > 0.0 {
        scale = scale.min(1.0 / g);
    }
    if omega > 0.0 {
        scale = scale.min(1.0 / omega);
    }
    scale / STEPS_PER_SCALE
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Record every `stride`-th step (the final time is always recorded).
    pub stride: usize,
}

impl TimeGrid {
    /// Full schedule window at the largest admissible step.
    pub fn for_schedule(schedule: &Schedule) -> Self {
        Self { t_start: schedule.t_start, t_end: schedule.t_end, dt: max_step(schedule), stride: 50 }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    /// Number of uniform steps; `dt` is shrunk so they tile the window exactly.
    pub fn steps(&self) -> usize {
        let span = self.t_end - self.t_start;
        ((span / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn effective_dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps() as f64
    }

    pub fn validate(&self, schedule: &Schedule) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) || !(self.t_end > self.t_start) {
            return Err(Error::Config(format!(
                "bad time grid: [{}, {}] with dt = {}",
                self.t_start, self.t_end, self.dt
            )));
        }
        let bound = max_step(schedule);
        if self.effective_dt() > bound * (1.0 + 1e-9) {
            return Err(Error::StepSize { dt: self.dt, bound });
        }
        Ok(())
    }
}

/// Sampled solution of one propagation.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub basis: Arc<Basis>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub norms: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> StateVector {
        let amps = self.states.last().cloned().unwrap_or_default();
        StateVector::from_amplitudes(self.basis.clone(), amps).expect("dimension matches")
    }

    pub fn population(&self, sample: usize, index: usize) -> f64 {
        self.states[sample][index].norm_sqr()
    }

    /// Population of `s` at every sample.
    pub fn population_of(&self, s: &BasisState) -> Vec<f64> {
        match self.basis.index_of(s) {
            Some(i) => self.states.iter().map(|v| v[i].norm_sqr()).collect(),
            None => vec![0.0; self.len()],
        }
    }

    /// Basis indices whose population exceeds `threshold` at some sample.
    pub fn significant_states(&self, threshold: f64) -> Vec<usize> {
        (0..self.basis.dim())
            .filter(|&i| self.states.iter().any(|v| v[i].norm_sqr() > threshold))
            .collect()
    }

    /// Largest population found outside `indices` over all samples.
    pub fn max_population_outside(&self, indices: &[usize]) -> f64 {
        let mut inside = vec![false; self.basis.dim()];
        indices.iter().for_each(|&i| inside[i] = true);
        self.states
            .iter()
            .map(|v| {
                v.iter()
                    .enumerate()
                    .filter(|(i, _)| !inside[*i])
                    .map(|(_, a)| a.norm_sqr())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Steps a state vector through a [`HamiltonianModel`].
pub struct Propagator<'a> {
    model: &'a HamiltonianModel,
    integrator: Integrator,
    // scratch
    a: Vec<C64>,
    b: Vec<C64>,
    c: Vec<C64>,
    d: Vec<C64>,
    term: Vec<C64>,
    acc: Vec<C64>,
}

impl<'a> Propagator<'a> {
    pub fn new(model: &'a HamiltonianModel, integrator: Integrator) -> Self {
        let n = model.dim();
        Self {
            model,
            integrator,
            a: vec![ZERO; n],
            b: vec![ZERO; n],
            c: vec![ZERO; n],
            d: vec![ZERO; n],
            term: vec![ZERO; n],
            acc: vec![ZERO; n],
        }
    }

    /// Advances `psi` from `t` to `t + h`.
    pub fn step(&mut self, psi: &mut [C64], t: f64, h: f64) {
        match self.integrator {
            Integrator::Magnus4 => self.magnus4(psi, t, h),
            Integrator::Rk4 => self.rk4(psi, t, h),
        }
    }

    fn magnus4(&mut self, psi: &mut [C64], t: f64, h: f64) {
        let s3 = 3f64.sqrt();
        let amps1 = self.model.laser_amplitudes(t + (0.5 - s3 / 6.0) * h);
        let amps2 = self.model.laser_amplitudes(t + (0.5 + s3 / 6.0) * h);
        let half = C64::new(0.0, -0.5 * h);
        let comm = C64::new(s3 * h * h / 12.0, 0.0);
        let model = self.model;
        let Self { a, b, c, d, term, acc, .. } = self;

        // Omega v = -i h/2 (H1 + H2) v + sqrt3 h^2 / 12 [H1, H2] v
        let mut apply_omega = |v: &[C64], out: &mut [C64]| {
            model.apply_with(&amps1, v, a);
            model.apply_with(&amps2, v, b);
            model.apply_with(&amps1, b, c);
            model.apply_with(&amps2, a, d);
            for i in 0..out.len() {
                out[i] = half * (a[i] + b[i]) + comm * (c[i] - d[i]);
            }
        };

        acc.copy_from_slice(psi);
        term.copy_from_slice(psi);
        let scale = norm_sqr(psi).sqrt().max(f64::MIN_POSITIVE);
        let mut next = vec![ZERO; psi.len()];
        for k in 1..60 {
            apply_omega(term, &mut next);
            let inv = 1.0 / k as f64;
            let mut size = 0.0;
            for (tm, nx) in term.iter_mut().zip(&next) {
                *tm = nx * inv;
                size += tm.norm_sqr();
            }
            acc.iter_mut().zip(term.iter()).for_each(|(x, y)| *x += y);
            if size.sqrt() <= 1e-17 * scale {
                break;
            }
        }
        psi.copy_from_slice(acc);
    }

    fn rk4(&mut self, psi: &mut [C64], t: f64, h: f64) {
        let mi = C64::new(0.0, -1.0);
        let model = self.model;
        let Self { a, b, c, d, term, .. } = self;
        let f = |tt: f64, x: &[C64], out: &mut [C64]| {
            model.apply(tt, x, out);
            out.iter_mut().for_each(|z| *z *= mi);
        };
        f(t, psi, a);
        for i in 0..psi.len() {
            term[i] = psi[i] + a[i] * (0.5 * h);
        }
        f(t + 0.5 * h, term, b);
        for i in 0..psi.len() {
            term[i] = psi[i] + b[i] * (0.5 * h);
        }
        f(t + 0.5 * h, term, c);
        for i in 0..psi.len() {
            term[i] = psi[i] + c[i] * h;
        }
        f(t + h, term, d);
        for i in 0..psi.len() {
            psi[i] += (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]) * (h / 6.0);
        }
    }

    /// Evolves `psi` over `[t0, t1]` in `n` equal steps, calling `record`
    /// after every step with the step index and time.
    pub fn evolve<F>(&mut self, psi: &mut [C64], t0: f64, t1: f64, n: usize, mut record: F) -> Result<()>
    where
        F: FnMut(usize, f64, &[C64]),
    {
        let h = (t1 - t0) / n as f64;
        for k in 0..n {
            let t = t0 + k as f64 * h;
            self.step(psi, t, h);
            if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite { t: t + h });
            }
            record(k + 1, t + h, psi);
        }
        Ok(())
    }
}

/// Integrates `psi0` over `grid` with the default integrator.
pub fn propagate(
    psi0: &StateVector,
    schedule: &Schedule,
    grid: &TimeGrid,
    loss: &LossParams,
) -> Result<Trajectory> {
    let model = HamiltonianModel::new(psi0.basis().clone(), schedule, loss)?;
    propagate_model(psi0, &model, schedule, grid, Integrator::default())
}

pub fn propagate_model(
    psi0: &StateVector,
    model: &HamiltonianModel,
    schedule: &Schedule,
    grid: &TimeGrid,
    integrator: Integrator,
) -> Result<Trajectory> {
    match propagate_partial(psi0, model, schedule, grid, integrator)? {
        (traj, None) => Ok(traj),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`propagate_model`], but an integration failure midway still returns
/// the samples recorded before it, together with the error.
pub fn propagate_partial(
    psi0: &StateVector,
    model: &HamiltonianModel,
    schedule: &Schedule,
    grid: &TimeGrid,
    integrator: Integrator,
) -> Result<(Trajectory, Option<Error>)> {
    grid.validate(schedule)?;
    if psi0.amplitudes().len() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: psi0.amplitudes().len() });
    }
    let n0 = psi0.norm_sqr();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n0));
    }
    let n = grid.steps();
    let stride = grid.stride.max(1);
    let mut psi = psi0.amplitudes().to_vec();
    let mut traj = Trajectory {
        basis: psi0.basis().clone(),
        times: vec![grid.t_start],
        states: vec![psi.clone()],
        norms: vec![n0.sqrt()],
    };
    let mut prop = Propagator::new(model, integrator);
    let outcome = prop.evolve(&mut psi, grid.t_start, grid.t_end, n, |k, t, v| {
        if k % stride == 0 || k == n {
            traj.times.push(t);
            traj.states.push(v.to_vec());
            traj.norms.push(norm_sqr(v).sqrt());
        }
    });
    Ok((traj, outcome.err()))
}

/// Realized 4x4 map on `|00>, |01>, |10>, |11>` (empty cavity); column `j`
/// is the projection of the evolved `j`-th computational state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateMatrix {
    pub entries: [[C64; 4]; 4],
}

impl GateMatrix {
    pub fn from_fn(f: impl Fn(usize, usize) -> C64) -> Self {
        let mut entries = [[ZERO; 4]; 4];
        for (i, row) in entries.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = f(i, j);
            }
        }
        Self { entries }
    }

    pub fn identity() -> Self {
        Self::from_fn(|i, j| if i == j { C64::new(1.0, 0.0) } else { ZERO })
    }

    /// Permutation matrix sending basis state `j` to `perm[j]`.
    pub fn permutation(perm: [usize; 4]) -> Self {
        Self::from_fn(|i, j| if perm[j] == i { C64::new(1.0, 0.0) } else { ZERO })
    }

    pub fn swap() -> Self {
        Self::permutation([0, 2, 1, 3])
    }

    /// CNOT with atom 1 as control.
    pub fn cnot() -> Self {
        Self::permutation([0, 1, 3, 2])
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i][j]
    }

    pub fn column_norm_sqr(&self, j: usize) -> f64 {
        (0..4).map(|i| self.entries[i][j].norm_sqr()).sum()
    }

    /// `1 - ||column_j||^2` per column.
    pub fn leakage(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|j| 1.0 - self.column_norm_sqr(j))
    }

    /// Copy multiplied by the phase that makes the `|00>` diagonal entry
    /// real-positive.
    pub fn anchored(&self) -> Self {
        let z = self.entries[0][0];
        if z.norm() == 0.0 {
            return self.clone();
        }
        let ph = z.conj() / z.norm();
        Self::from_fn(|i, j| self.entries[i][j] * ph)
    }
}

/// Propagations of the four computational states through one schedule.
#[derive(Clone, Debug)]
pub struct GateRun {
    pub gate: GateMatrix,
    pub trajectories: Vec<Trajectory>,
}

pub fn run_gate(
    basis: &Arc<Basis>,
    schedule: &Schedule,
    grid: &TimeGrid,
    loss: &LossParams,
    integrator: Integrator,
) -> Result<GateRun> {
    let model = HamiltonianModel::new(basis.clone(), schedule, loss)?;
    let comp = basis.computational_indices();
    let trajectories: Vec<Trajectory> = comp
        .par_iter()
        .map(|&i| {
            let psi0 = StateVector::basis_state(basis.clone(), &basis.state(i))?;
            propagate_model(&psi0, &model, schedule, grid, integrator)
        })
        .collect::<Result<_>>()?;
    let gate = GateMatrix::from_fn(|i, j| {
        trajectories[j].states.last().expect("at least one sample")[comp[i]]
    });
    Ok(GateRun { gate, trajectories })
}

pub fn gate_matrix(
    basis: &Arc<Basis>,
    schedule: &Schedule,
    grid: &TimeGrid,
    loss: &LossParams,
) -> Result<GateMatrix> {
    Ok(run_gate(basis, schedule, grid, loss, Integrator::default())?.gate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{build_schedule, Protocol, ScheduleParams};

    fn defaults(p: Protocol) -> (Arc<Basis>, Schedule) {
        let b = Arc::new(Basis::new(3, p.needs_upper_level()).unwrap());
        (b, build_schedule(p, &ScheduleParams::default()).unwrap())
    }

    #[test]
    fn default_step_bound() {
        let (_, s) = defaults(Protocol::Swap8);
        assert!((max_step(&s) - 0.002).abs() < 1e-15);
        let g = TimeGrid::for_schedule(&s);
        assert!(g.validate(&s).is_ok());
        assert!(matches!(g.with_dt(0.01).validate(&s), Err(Error::StepSize { .. })));
    }

    #[test]
    fn grid_tiles_window() {
        let g = TimeGrid { t_start: 0.0, t_end: 1.0, dt: 0.3, stride: 1 };
        assert_eq!(g.steps(), 4);
        assert_eq!(g.effective_dt(), 0.25);
        let g = TimeGrid { t_start: 0.0, t_end: 1.0, dt: 0.25, stride: 1 };
        assert_eq!(g.steps(), 4);
    }

    #[test]
    fn free_evolution_is_identity() {
        let (b, s) = defaults(Protocol::Swap8);
        let quiet = s.with_omega_max(0.0);
        let psi0 = StateVector::from_label(b.clone(), "00;0").unwrap();
        let tr = propagate(&psi0, &quiet, &TimeGrid::for_schedule(&quiet), &LossParams::NONE).unwrap();
        let last = tr.final_state();
        assert!((last.inner(&psi0) - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(tr.norms.iter().all(|n| (n - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn unnormalized_start_rejected() {
        let (b, s) = defaults(Protocol::Swap8);
        let mut psi = StateVector::from_label(b, "00;0").unwrap();
        psi.amplitudes_mut()[0] = C64::new(2.0, 0.0);
        assert!(matches!(
            propagate(&psi, &s, &TimeGrid::for_schedule(&s), &LossParams::NONE),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn magnus_and_rk4_agree() {
        let (b, s) = defaults(Protocol::Swap8);
        let model = HamiltonianModel::new(b.clone(), &s, &LossParams::NONE).unwrap();
        let psi0 = StateVector::from_label(b, "01;0").unwrap();
        let grid = TimeGrid::for_schedule(&s).with_dt(0.0005);
        let m = propagate_model(&psi0, &model, &s, &grid, Integrator::Magnus4).unwrap();
        let r = propagate_model(&psi0, &model, &s, &grid, Integrator::Rk4).unwrap();
        let (fm, fr) = (m.final_state(), r.final_state());
        assert!((fm.inner(&fr).norm() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn anchoring_removes_global_phase() {
        let g = GateMatrix::swap();
        let ph = C64::from_polar(1.0, 0.7);
        let rotated = GateMatrix::from_fn(|i, j| g.get(i, j) * ph);
        let back = rotated.anchored();
        for i in 0..4 {
            for j in 0..4 {
                assert!((back.get(i, j) - g.get(i, j)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn permutation_layout() {
        let c = GateMatrix::cnot();
        // |10> -> |11>
        assert_eq!(c.get(3, 2), C64::new(1.0, 0.0));
        assert_eq!(c.get(2, 3), C64::new(1.0, 0.0));
        assert_eq!(GateMatrix::swap().get(1, 2), C64::new(1.0, 0.0));
        assert_eq!(GateMatrix::identity().leakage(), [0.0; 4]);
    }
}
