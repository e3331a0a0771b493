use std::sync::Arc;

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use adiabatic_swap::hamiltonian::{HamiltonianModel, LossParams};
use adiabatic_swap::hilbert::{charge_of, AtomLevel};
use adiabatic_swap::pulses::{envelope_value, PulseEnvelope};
use adiabatic_swap::{build_schedule, Basis, BasisState, Protocol, ScheduleParams, StateVector};

fn protocol() -> impl Strategy<Value = Protocol> {
    prop_oneof![Just(Protocol::Swap8), Just(Protocol::Swap7), Just(Protocol::Cnot11)]
}

fn params() -> impl Strategy<Value = ScheduleParams> {
    (1.0f64..30.0, 0.5f64..2.0, 5.0f64..50.0, 5.0f64..50.0, 0.6f64..2.0).prop_map(
        |(omega, delay, g1, g2, tp)| ScheduleParams {
            omega_max: omega,
            t_p: tp,
            intra_delay: delay * tp,
            inter_step_gap: 6.0 * tp,
            g1,
            g2,
            phases: None,
        },
    )
}

fn level() -> impl Strategy<Value = AtomLevel> {
    prop::sample::select(AtomLevel::levels(true).to_vec())
}

proptest! {
    #[test]
    fn envelope_is_symmetric(
        omega in 0.0f64..100.0,
        center in -50.0f64..50.0,
        tp in 0.1f64..10.0,
        plateau in prop_oneof![Just(0.0), 0.0f64..5.0],
        d in 0.0f64..30.0,
    ) {
        let p = PulseEnvelope { omega_max: omega, t_center: center, t_p: tp, plateau };
        let (a, b) = (envelope_value(&p, center + d), envelope_value(&p, center - d));
        prop_assert!((a - b).abs() <= 1e-12 * omega.max(1.0));
        prop_assert!(a <= omega && a >= 0.0);
    }

    #[test]
    fn hamiltonian_is_hermitian(p in protocol(), sp in params(), frac in 0.0f64..=1.0) {
        let s = build_schedule(p, &sp).unwrap();
        let basis = Arc::new(Basis::new(3, p.needs_upper_level()).unwrap());
        let model = HamiltonianModel::new(basis, &s, &LossParams::NONE).unwrap();
        let t = s.t_start + frac * (s.t_end - s.t_start);
        let h = model.matrix(t);
        prop_assert!(h.is_hermitian());
        prop_assert!(h.hermiticity_defect() <= 1e-12 * h.max_abs().max(1.0));
    }

    #[test]
    fn charge_is_conserved_without_shelving(sp in params(), frac in 0.0f64..=1.0, swap7 in any::<bool>()) {
        let p = if swap7 { Protocol::Swap7 } else { Protocol::Swap8 };
        let s = build_schedule(p, &sp).unwrap();
        let basis = Arc::new(Basis::new(3, false).unwrap());
        let model = HamiltonianModel::new(basis.clone(), &s, &LossParams::NONE).unwrap();
        let h = model.matrix(s.t_start + frac * (s.t_end - s.t_start));
        for (i, j, _) in h.entries() {
            prop_assert_eq!(charge_of(&basis.state(i)), charge_of(&basis.state(j)));
        }
    }

    #[test]
    fn normalized_states_have_unit_norm(re in prop::collection::vec(-1.0f64..1.0, 75), im in prop::collection::vec(-1.0f64..1.0, 75)) {
        let basis = Arc::new(Basis::new(2, true).unwrap());
        let amps: Vec<C64> = re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
        prop_assume!(amps.iter().any(|z| z.norm() > 1e-3));
        let mut psi = StateVector::from_amplitudes(basis, amps).unwrap();
        psi.normalize();
        prop_assert!((psi.norm() - 1.0).abs() <= 1e-14);
        prop_assert!((psi.inner(&psi).re - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn labels_round_trip(a in level(), b in level(), n in 0usize..=5) {
        let s = BasisState::new(a, b, n);
        prop_assert_eq!(s.label().parse::<BasisState>().unwrap(), s);
        let basis = Basis::new(5, true).unwrap();
        prop_assert_eq!(basis.state(basis.index_of(&s).unwrap()), s);
    }

    #[test]
    fn built_schedules_keep_counterintuitive_order(p in protocol(), sp in params()) {
        let s = build_schedule(p, &sp).unwrap();
        prop_assert!(adiabatic_swap::pulses::schedule_diagnostics(&s).ordering_ok());
    }
}
