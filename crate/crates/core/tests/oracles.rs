//! Structural results checked against solvers that share no code with the
//! library: brute-force enumeration, graph search on the coupling pattern,
//! and an SVD null space.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use adiabatic_swap::darkstates::{dark16, dark7, Couplings, StepRoles};
use adiabatic_swap::hamiltonian::{HamiltonianModel, LossParams, OperatorMatrix};
use adiabatic_swap::hilbert::AtomLevel::{self, Anc, Excited, One, Zero};
use adiabatic_swap::pulses::{Pulse, PulseEnvelope, Transition};
use adiabatic_swap::{Basis, BasisState, Schedule, StateVector};

fn charge(s: &BasisState) -> i32 {
    let ones = [s.atom1, s.atom2].iter().filter(|&&l| l == One).count();
    s.n as i32 - ones as i32
}

/// Constant-in-time drive: Gaussians peaking at `t = 0` with the requested
/// heights, probed at `t = 0`.
fn constant_drive(drives: &[(u8, Transition, f64)], g1: f64, g2: f64) -> Schedule {
    let pulses = drives
        .iter()
        .map(|&(atom, transition, omega)| Pulse {
            envelope: PulseEnvelope::gaussian(omega, 0.0, 1.0),
            atom,
            transition,
            phase: 0.0,
        })
        .collect();
    Schedule { protocol: None, pulses, steps: Vec::new(), g1, g2, t_start: -1.0, t_end: 1.0 }
}

fn transition_to_e(l: AtomLevel) -> Transition {
    if l == Zero {
        Transition::ZeroE
    } else {
        Transition::AncE
    }
}

#[test]
fn block_sizes_by_enumeration() {
    let levels = [Zero, Anc, One, Excited];
    let mut sizes: BTreeMap<i32, usize> = BTreeMap::new();
    for a in levels {
        for b in levels {
            for n in 0..=2 {
                *sizes.entry(charge(&BasisState::new(a, b, n))).or_default() += 1;
            }
        }
    }
    let basis = Basis::new(3, false).unwrap();
    let lib = basis.charge_blocks().restricted(&basis, 2).sizes();
    assert_eq!(lib, sizes);
    assert_eq!((sizes[&0], sizes[&-1], sizes[&-2]), (16, 7, 1));
}

#[test]
fn reachable_sets_stay_in_one_charge_block() {
    let basis = Arc::new(Basis::new(3, false).unwrap());
    let drives = [
        (1, Transition::ZeroE, 1.0),
        (1, Transition::AncE, 1.3),
        (2, Transition::ZeroE, 0.7),
        (2, Transition::AncE, 1.1),
    ];
    let model = HamiltonianModel::new(basis.clone(), &constant_drive(&drives, 2.0, 2.5), &LossParams::NONE).unwrap();
    let h = model.matrix(0.0);
    for seed in 0..basis.dim() {
        let mut seen = vec![false; basis.dim()];
        let mut queue = VecDeque::from([seed]);
        seen[seed] = true;
        while let Some(i) = queue.pop_front() {
            for (j, _) in h.row(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let c = charge(&basis.state(seed));
        for (i, _) in seen.iter().enumerate().filter(|(_, &s)| s) {
            assert_eq!(charge(&basis.state(i)), c, "{} reaches {}", basis.state(seed), basis.state(i));
        }
    }
    // |11;0> has nothing to couple to
    let i = basis.index_of_label("11;0").unwrap();
    assert_eq!(h.row(i).filter(|&(j, _)| j != i).count(), 0);
}

/// Orthonormal basis of the numerical null space via SVD.
fn null_space(h: &DMatrix<C64>) -> DMatrix<C64> {
    let n = h.nrows();
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.unwrap();
    let smax = svd.singular_values.max();
    let cols: Vec<_> = (0..n)
        .filter(|&k| svd.singular_values[k] <= 1e-10 * smax)
        .map(|k| v_t.row(k).adjoint())
        .collect();
    DMatrix::from_columns(&cols)
}

fn restricted_vector(phi: &StateVector, idx: &[usize]) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_iterator(idx.len(), idx.iter().map(|&i| phi.amplitudes()[i]))
}

fn check_in_kernel(h: &OperatorMatrix, idx: &[usize], phi: &StateVector) -> f64 {
    // the vector has no weight outside the block
    let outside: f64 = (0..phi.amplitudes().len())
        .filter(|i| !idx.contains(i))
        .map(|i| phi.amplitudes()[i].norm_sqr())
        .sum();
    assert_eq!(outside, 0.0);
    let k = null_space(&h.restrict(idx));
    let v = restricted_vector(phi, idx);
    let proj = &k * (k.adjoint() * &v);
    (v - proj).norm()
}

/// Block states with no coupling at all, and thus trivially dark.
fn isolated(h: &OperatorMatrix, idx: &[usize]) -> Vec<usize> {
    idx.iter().copied().filter(|&i| h.row(i).all(|(j, v)| j == i || v == C64::new(0.0, 0.0))).collect()
}

/// Null-space dimension implied by the analytic vectors plus isolated states
/// they do not already cover.
fn expected_nullity(h: &OperatorMatrix, idx: &[usize], analytic: &[StateVector]) -> usize {
    let covered = |i: usize| analytic.iter().any(|phi| phi.amplitudes()[i].norm() > 0.0);
    analytic.len() + isolated(h, idx).into_iter().filter(|&i| !covered(i)).count()
}

fn level() -> impl Strategy<Value = AtomLevel> {
    prop_oneof![Just(Zero), Just(Anc)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn analytic_dark_states_span_the_null_space(
        l1 in level(),
        l2 in level(),
        omega1 in 0.05f64..20.0,
        omega2 in 0.05f64..20.0,
        g1 in 0.05f64..40.0,
        g2 in 0.05f64..40.0,
    ) {
        let basis = Arc::new(Basis::new(2, false).unwrap());
        let roles = StepRoles::new(l1, l2);
        let drives = [(1, transition_to_e(l1), omega1), (2, transition_to_e(l2), omega2)];
        let model = HamiltonianModel::new(basis.clone(), &constant_drive(&drives, g1, g2), &LossParams::NONE).unwrap();
        let h = model.matrix(0.0);
        let c = Couplings { omega1, omega2, g1, g2 };
        let blocks = basis.charge_blocks();

        let b7 = blocks.get(-1).unwrap();
        prop_assert_eq!(b7.len(), 7);
        let phi = dark7(&basis, &roles, &c).unwrap();
        prop_assert_eq!(null_space(&h.restrict(b7)).ncols(), expected_nullity(&h, b7, std::slice::from_ref(&phi)));
        prop_assert!(check_in_kernel(&h, b7, &phi) <= 1e-10);

        let b16 = blocks.get(0).unwrap();
        prop_assert_eq!(b16.len(), 16);
        let darks = dark16(&basis, &roles, &c).unwrap();
        let nullity = null_space(&h.restrict(b16)).ncols();
        prop_assert_eq!(nullity, 4);
        prop_assert_eq!(nullity, expected_nullity(&h, b16, &darks));
        for phi in &darks {
            prop_assert!(check_in_kernel(&h, b16, phi) <= 1e-10);
        }
        // the four vectors are orthonormal, so they span the whole null space
        for (i, a) in darks.iter().enumerate() {
            for (j, b) in darks.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((a.inner(b) - C64::new(expect, 0.0)).norm() <= 1e-12);
            }
        }
    }
}
