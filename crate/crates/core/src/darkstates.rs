//! Analytic dark states of the cavity-mediated double-STIRAP steps, block
//! spectra, and adiabatic tracking of the dark manifold.
//!
//! In a step, atom `i` has one ground state `L_i` driven by a laser of Rabi
//! frequency `Omega_i` and one undriven ground state `N_i`. The zero-energy
//! eigenvectors that carry the computational populations are
//!
//! ```text
//! phi7     ~ g1 O2 |L1 1>|0> + g2 O1 |1 L2>|0> - O1 O2 |11>|1>
//! phi16(1) ~ O2 |N1 1>|1> - g2 |N1 L2>|0>
//! phi16(2) ~ sqrt2 g1 g2 |L1 L2>|0> - sqrt2 g2 O1 |1 L2>|1>
//!            - sqrt2 g1 O2 |L1 1>|1> + O1 O2 |11>|2>
//! phi16(3) = |N1 N2>|0>
//! phi16(4) ~ O1 |1 N2>|1> - g1 |L1 N2>|0>
//! ```

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianModel, LossParams, OperatorMatrix};
use crate::hilbert::{AtomLevel, Basis, BasisState, StateVector};
use crate::pulses::Schedule;

/// Eigenvalues with `|lambda| <= ZERO_TOL * ||H||` belong to the dark manifold.
pub const ZERO_TOL: f64 = 1e-10;

/// Smallest overlap between consecutive tracked vectors before tracking is
/// declared lost.
pub const MIN_TRACKING_OVERLAP: f64 = 0.9;

/// Laser-coupled ground state `L_i` of each atom in one step; the other of
/// `{0, a}` is the uncoupled `N_i`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RolesRepr", into = "RolesRepr")]
pub struct StepRoles {
    l1: AtomLevel,
    l2: AtomLevel,
}

#[derive(Serialize, Deserialize)]
struct RolesRepr {
    l1: AtomLevel,
    l2: AtomLevel,
}

impl TryFrom<RolesRepr> for StepRoles {
    type Error = String;

    fn try_from(r: RolesRepr) -> std::result::Result<Self, String> {
        let ok = |l| matches!(l, AtomLevel::Zero | AtomLevel::Anc);
        if ok(r.l1) && ok(r.l2) {
            Ok(StepRoles { l1: r.l1, l2: r.l2 })
        } else {
            Err("laser-coupled levels must be 0 or a".into())
        }
    }
}

impl From<StepRoles> for RolesRepr {
    fn from(r: StepRoles) -> Self {
        RolesRepr { l1: r.l1, l2: r.l2 }
    }
}

fn complement(l: AtomLevel) -> AtomLevel {
    match l {
        AtomLevel::Zero => AtomLevel::Anc,
        AtomLevel::Anc => AtomLevel::Zero,
        other => panic!("no complementary ground state for |{other}>"),
    }
}

impl StepRoles {
    /// # Panics
    /// If either level is not `0` or `a`.
    pub fn new(l1: AtomLevel, l2: AtomLevel) -> Self {
        StepRoles::try_from(RolesRepr { l1, l2 }).expect("roles are 0 or a")
    }

    pub fn l1(&self) -> AtomLevel {
        self.l1
    }

    pub fn l2(&self) -> AtomLevel {
        self.l2
    }

    pub fn n1(&self) -> AtomLevel {
        complement(self.l1)
    }

    pub fn n2(&self) -> AtomLevel {
        complement(self.l2)
    }
}

/// Instantaneous couplings entering the analytic dark states.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Couplings {
    pub omega1: f64,
    pub omega2: f64,
    pub g1: f64,
    pub g2: f64,
}

fn combine(basis: &Arc<Basis>, terms: &[(BasisState, f64)]) -> Result<StateVector> {
    let mut v = StateVector::zeros(basis.clone());
    for (s, c) in terms {
        let i = basis.index_of(s).ok_or_else(|| Error::Label(s.label()))?;
        v.amplitudes_mut()[i] += C64::new(*c, 0.0);
    }
    if v.norm_sqr() == 0.0 {
        return Err(Error::DegenerateDarkState);
    }
    v.normalize();
    Ok(v)
}

/// Normalized cavity-mediated dark state of the `C = -1` block.
pub fn dark7(basis: &Arc<Basis>, roles: &StepRoles, c: &Couplings) -> Result<StateVector> {
    use AtomLevel::One;
    let ket = BasisState::new;
    combine(
        basis,
        &[
            (ket(roles.l1, One, 0), c.g1 * c.omega2),
            (ket(One, roles.l2, 0), c.g2 * c.omega1),
            (ket(One, One, 1), -c.omega1 * c.omega2),
        ],
    )
}

/// The four normalized dark states of the `C = 0` block.
pub fn dark16(basis: &Arc<Basis>, roles: &StepRoles, c: &Couplings) -> Result<[StateVector; 4]> {
    use AtomLevel::One;
    let ket = BasisState::new;
    let (l1, l2, n1, n2) = (roles.l1, roles.l2, roles.n1(), roles.n2());
    let r2 = std::f64::consts::SQRT_2;
    Ok([
        combine(basis, &[(ket(n1, One, 1), c.omega2), (ket(n1, l2, 0), -c.g2)])?,
        combine(
            basis,
            &[
                (ket(l1, l2, 0), r2 * c.g1 * c.g2),
                (ket(One, l2, 1), -r2 * c.g2 * c.omega1),
                (ket(l1, One, 1), -r2 * c.g1 * c.omega2),
                (ket(One, One, 2), c.omega1 * c.omega2),
            ],
        )?,
        combine(basis, &[(ket(n1, n2, 0), 1.0)])?,
        combine(basis, &[(ket(One, n2, 1), c.omega1), (ket(l1, n2, 0), -c.g1)])?,
    ])
}

/// Couplings of a cavity-mediated step at time `t`.
pub fn step_couplings(schedule: &Schedule, step: usize, t: f64) -> Result<Couplings> {
    let st = schedule.steps.get(step).ok_or(Error::NoSuchStep(step))?;
    let mut omega = [0.0f64; 2];
    for i in [st.stokes, st.pump] {
        let p = &schedule.pulses[i];
        omega[(p.atom - 1) as usize] += p.rabi(t);
    }
    Ok(Couplings { omega1: omega[0], omega2: omega[1], g1: schedule.g1, g2: schedule.g2 })
}

/// Eigen-decomposition of one Hermitian block.
#[derive(Clone, Debug)]
pub struct BlockSpectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<C64>,
    /// Spectral norm of the block.
    pub norm: f64,
    /// Indices of eigenvalues in the dark (zero) manifold.
    pub dark: Vec<usize>,
    /// Smallest non-zero `|eigenvalue|`; `None` when the block is entirely dark.
    pub gap: Option<f64>,
}

impl BlockSpectrum {
    pub fn of(h: &DMatrix<C64>) -> Self {
        let n = h.nrows();
        if n == 0 {
            return Self {
                eigenvalues: vec![],
                eigenvectors: DMatrix::zeros(0, 0),
                norm: 0.0,
                dark: vec![],
                gap: None,
            };
        }
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        let norm = eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
        let tol = ZERO_TOL * norm;
        let dark: Vec<usize> = (0..n).filter(|&k| eigenvalues[k].abs() <= tol).collect();
        let gap = eigenvalues
            .iter()
            .map(|l| l.abs())
            .filter(|&l| l > tol)
            .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.min(l))));
        Self { eigenvalues, eigenvectors, norm, dark, gap }
    }

    /// Orthogonal projector onto the dark manifold.
    pub fn dark_projector(&self) -> DMatrix<C64> {
        let n = self.eigenvalues.len();
        let mut p = DMatrix::zeros(n, n);
        for &k in &self.dark {
            let v = self.eigenvectors.column(k);
            p += &v * v.adjoint();
        }
        p
    }
}

/// Spectrum of the lossless `H(t)` restricted to the charge block `charge`.
pub fn spectrum_and_gap(
    basis: &Arc<Basis>,
    schedule: &Schedule,
    t: f64,
    charge: i32,
) -> Result<BlockSpectrum> {
    let blocks = basis.charge_blocks();
    let idx = blocks.get(charge).ok_or(Error::NoSuchBlock(charge))?;
    let h = crate::hamiltonian::assemble(basis, schedule, t, &LossParams::NONE)?;
    Ok(BlockSpectrum::of(&h.restrict(idx)))
}

/// `||H phi|| / (||H||_F ||phi||)`; zero when `H` vanishes.
pub fn kernel_residual(h: &OperatorMatrix, phi: &StateVector) -> f64 {
    let mut out = vec![C64::new(0.0, 0.0); h.dim()];
    h.apply(phi.amplitudes(), &mut out);
    let hn: f64 = h.entries().map(|(_, _, v)| v.norm_sqr()).sum::<f64>().sqrt();
    if hn == 0.0 {
        return 0.0;
    }
    out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / (hn * phi.norm())
}

/// Connected component of `seed` under every coupling the model can switch on.
pub fn coupling_component(model: &HamiltonianModel, seed: usize) -> Vec<usize> {
    // all pulses at once: evaluate with unit amplitudes
    let probe = model.matrix_with_unit_lasers();
    let mut seen = vec![false; probe.dim()];
    let mut queue = VecDeque::from([seed]);
    seen[seed] = true;
    while let Some(i) = queue.pop_front() {
        for (j, _) in probe.row(i) {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..probe.dim()).filter(|&i| seen[i]).collect()
}

/// One dark vector followed through a step.
#[derive(Clone, Debug)]
pub struct TrackedState {
    pub from: BasisState,
    pub to: BasisState,
    pub component: Vec<usize>,
    /// Full-basis vectors at each sample time.
    pub vectors: Vec<DVector<C64>>,
}

fn gauge_fix(v: &mut DVector<C64>, prev: Option<&DVector<C64>>) {
    let big = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm()));
    if let Some(z) = big {
        if z.norm() > 0.0 {
            let ph = z.conj() / z.norm();
            v.iter_mut().for_each(|x| *x *= ph);
        }
    }
    if let Some(p) = prev {
        if p.dotc(v).re < 0.0 {
            v.neg_mut();
        }
    }
}

/// Follows the dark vector connected to each seed over `times`, by projecting
/// the previous vector onto the instantaneous dark manifold of its coupling
/// component (so degenerate manifolds are followed as subspaces).
pub fn track_dark_states(
    model: &HamiltonianModel,
    times: &[f64],
    seeds: &[(BasisState, BasisState)],
) -> Result<Vec<TrackedState>> {
    let basis = model.basis().clone();
    let dim = basis.dim();
    let mut tracked = Vec::with_capacity(seeds.len());
    let mut components: BTreeMap<Vec<usize>, Vec<DMatrix<C64>>> = BTreeMap::new();

    for &(from, to) in seeds {
        let seed = basis.index_of(&from).ok_or_else(|| Error::Label(from.label()))?;
        let comp = coupling_component(model, seed);
        let projectors = components
            .entry(comp.clone())
            .or_insert_with(|| {
                times
                    .iter()
                    .map(|&t| BlockSpectrum::of(&model.matrix(t).restrict(&comp)).dark_projector())
                    .collect()
            })
            .clone();

        let local = comp.iter().position(|&i| i == seed).expect("seed in its component");
        let mut prev = DVector::from_fn(comp.len(), |i, _| {
            if i == local { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
        });
        let mut vectors = Vec::with_capacity(times.len());
        for (k, (&t, p)) in times.iter().zip(&projectors).enumerate() {
            let mut v = p * &prev;
            let n = v.norm();
            // at k == 0 the seed itself may only partly overlap the dark manifold
            if n < MIN_TRACKING_OVERLAP && k > 0 || n == 0.0 {
                return Err(Error::Tracking { t, overlap: n });
            }
            v /= C64::new(n, 0.0);
            gauge_fix(&mut v, (k > 0).then_some(&prev));
            let mut full = DVector::from_element(dim, C64::new(0.0, 0.0));
            for (a, &i) in comp.iter().enumerate() {
                full[i] = v[a];
            }
            vectors.push(full);
            prev = v;
        }
        tracked.push(TrackedState { from, to, component: comp, vectors });
    }
    Ok(tracked)
}

/// `<phi_i | d/dt phi_j>` at the interior samples, by fourth-order central
/// differences on a uniform grid of spacing `h`. Returns the sample times and
/// one matrix per time.
pub fn geometric_phase_integrand(
    tracked: &[TrackedState],
    times: &[f64],
    h: f64,
) -> (Vec<f64>, Vec<DMatrix<C64>>) {
    let m = tracked.len();
    let n = times.len();
    let mut ts = Vec::new();
    let mut out = Vec::new();
    if n < 5 {
        return (ts, out);
    }
    for k in 2..n - 2 {
        let mut a = DMatrix::from_element(m, m, C64::new(0.0, 0.0));
        for (j, sj) in tracked.iter().enumerate() {
            let v = &sj.vectors;
            let d = (&v[k - 2] - &v[k - 1] * C64::new(8.0, 0.0) + &v[k + 1] * C64::new(8.0, 0.0)
                - &v[k + 2])
                / C64::new(12.0 * h, 0.0);
            for (i, si) in tracked.iter().enumerate() {
                a[(i, j)] = si.vectors[k].dotc(&d);
            }
        }
        ts.push(times[k]);
        out.push(a);
    }
    (ts, out)
}

fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    ts.windows(2).zip(ys.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointOverlap {
    pub from: BasisState,
    pub to: BasisState,
    /// `|<from|phi(t_start)>|^2`.
    pub initial: f64,
    /// `|<to|phi(t_end)>|^2`.
    pub final_: f64,
    /// Integrated `<phi|H|phi>` over the step.
    pub dynamical_phase: f64,
    /// `i * integral <phi|d phi/dt>` over the step.
    pub geometric_phase: f64,
}

/// Adiabatic-following diagnostics for one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDarkReport {
    pub step: String,
    pub window: (f64, f64),
    /// Largest relative kernel residual of the analytic dark states over the
    /// sampled times; `None` for steps without cavity-mediated roles.
    pub kernel_residual: Option<f64>,
    /// Smallest gap between the dark manifold and the rest of the spectrum in
    /// the tracked components while a pulse of the step is on.
    pub min_gap: f64,
    pub max_diagonal_integrand: f64,
    /// Off-diagonal integrand, pairs inside one coupling component.
    pub max_cross_integrand_same: f64,
    /// Off-diagonal integrand, pairs in different components.
    pub max_cross_integrand_other: f64,
    /// Whether a pulse of this step is shared with the previous / next step.
    /// The dark state is then not a product state at that end of the window
    /// and the corresponding overlap is not checked.
    pub shared_ends: (bool, bool),
    pub states: Vec<EndpointOverlap>,
}

impl StepDarkReport {
    pub fn max_abs_geometric_phase(&self) -> f64 {
        self.states.iter().map(|s| s.geometric_phase.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_dynamical_phase(&self) -> f64 {
        self.states.iter().map(|s| s.dynamical_phase.abs()).fold(0.0, f64::max)
    }

    /// Smallest endpoint overlap over the ends not shared with a neighbour.
    pub fn min_endpoint_overlap(&self) -> f64 {
        let (start, end) = self.shared_ends;
        self.states
            .iter()
            .flat_map(|s| [(!start).then_some(s.initial), (!end).then_some(s.final_)])
            .flatten()
            .fold(1.0, f64::min)
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DarkAnalysisOptions {
    /// Sample spacing for tracking and finite differences.
    pub h: f64,
    /// Number of times at which the analytic dark states are checked.
    pub kernel_samples: usize,
    /// A pulse counts as on while its Rabi frequency exceeds this fraction
    /// of its peak.
    pub active_fraction: f64,
}

impl Default for DarkAnalysisOptions {
    fn default() -> Self {
        Self { h: 0.01, kernel_samples: 41, active_fraction: 1e-2 }
    }
}

/// Analyses step `k` of `schedule` with only that step's two pulses on, over
/// the step's window.
pub fn analyze_step(
    basis: &Arc<Basis>,
    schedule: &Schedule,
    k: usize,
    opts: &DarkAnalysisOptions,
) -> Result<StepDarkReport> {
    let local = schedule.step_only(k)?;
    let step = &local.steps[0];
    let model = HamiltonianModel::new(basis.clone(), &local, &LossParams::NONE)?;
    let (t0, t1) = step.window;
    let n = ((t1 - t0) / opts.h).round().max(4.0) as usize;
    let h = (t1 - t0) / n as f64;
    let times: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * h).collect();

    let kernel_residual = match step.roles {
        Some(roles) => {
            let mut worst: f64 = 0.0;
            let ns = opts.kernel_samples.max(2);
            for i in 0..ns {
                let t = t0 + (t1 - t0) * i as f64 / (ns - 1) as f64;
                let c = step_couplings(&local, 0, t)?;
                let hm = model.matrix(t);
                worst = worst.max(kernel_residual(&hm, &dark7(basis, &roles, &c)?));
                for phi in dark16(basis, &roles, &c)? {
                    worst = worst.max(kernel_residual(&hm, &phi));
                }
            }
            Some(worst)
        }
        None => None,
    };

    let tracked = track_dark_states(&model, &times, &step.transfers)?;

    let peaks = [local.pulses[0].envelope.omega_max, local.pulses[1].envelope.omega_max];
    let mut min_gap = f64::INFINITY;
    let mut comps: Vec<&Vec<usize>> = tracked.iter().map(|s| &s.component).collect();
    comps.dedup();
    for &t in &times {
        let on = local
            .pulses
            .iter()
            .zip(peaks)
            .any(|(p, peak)| p.rabi(t) >= opts.active_fraction * peak);
        if !on {
            continue;
        }
        let hm = model.matrix(t);
        for comp in &comps {
            if let Some(g) = BlockSpectrum::of(&hm.restrict(comp)).gap {
                min_gap = min_gap.min(g);
            }
        }
    }

    let (its, integrand) = geometric_phase_integrand(&tracked, &times, h);
    let m = tracked.len();
    let (mut diag, mut same, mut other) = (0.0f64, 0.0f64, 0.0f64);
    for a in &integrand {
        for i in 0..m {
            for j in 0..m {
                let v = a[(i, j)].norm();
                if i == j {
                    diag = diag.max(v);
                } else if tracked[i].component == tracked[j].component {
                    same = same.max(v);
                } else {
                    other = other.max(v);
                }
            }
        }
    }

    let mut states = Vec::with_capacity(m);
    for (i, s) in tracked.iter().enumerate() {
        let first = &s.vectors[0];
        let last = s.vectors.last().expect("non-empty grid");
        let fi = basis.index_of(&s.from).expect("seed in basis");
        let ti = basis.index_of(&s.to).ok_or_else(|| Error::Label(s.to.label()))?;
        let berry: Vec<f64> = integrand.iter().map(|a| 0.0 - a[(i, i)].im).collect();
        let energy: Vec<f64> = times
            .iter()
            .zip(&s.vectors)
            .map(|(&t, v)| {
                let mut hv = vec![C64::new(0.0, 0.0); basis.dim()];
                model.apply(t, v.as_slice(), &mut hv);
                v.iter().zip(&hv).map(|(a, b)| a.conj() * b).sum::<C64>().re
            })
            .collect();
        states.push(EndpointOverlap {
            from: s.from,
            to: s.to,
            initial: first[fi].norm_sqr(),
            final_: last[ti].norm_sqr(),
            dynamical_phase: trapezoid(&times, &energy),
            geometric_phase: trapezoid(&its, &berry),
        });
    }

    let pulses_of = |j: usize| schedule.steps.get(j).map(|s| [s.stokes, s.pump]);
    let mine = pulses_of(k).expect("step exists");
    let shares = |j: Option<usize>| {
        j.and_then(pulses_of).is_some_and(|p| p.iter().any(|i| mine.contains(i)))
    };
    Ok(StepDarkReport {
        step: step.label.clone(),
        shared_ends: (shares(k.checked_sub(1)), shares(Some(k + 1))),
        window: step.window,
        kernel_residual,
        min_gap,
        max_diagonal_integrand: diag,
        max_cross_integrand_same: same,
        max_cross_integrand_other: other,
        states,
    })
}
