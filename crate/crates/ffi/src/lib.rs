//! C ABI for building pulse schedules, propagating states and evaluating the
//! realized gates. Every function returns an [`AsStatus`]; on failure the
//! message is available from [`as_last_error`] on the same thread.
//!
//! Handles are heap objects owned by the caller and released with the
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use adiabatic_swap::gateanalysis::{evaluate_gate, physical_estimates, target_for};
use adiabatic_swap::hamiltonian::{HamiltonianModel, LossParams};
use adiabatic_swap::propagator::{propagate_model, Integrator, TimeGrid, Trajectory};
use adiabatic_swap::{build_schedule, Basis, Error, Protocol, Schedule, ScheduleParams, StateVector};

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum AsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    OutOfRange = 4,
    Panic = 5,
}

/// Pulse schedule handle.
pub struct AsSchedule(Schedule);

/// Sampled trajectory handle.
pub struct AsTrajectory(Trajectory);

#[repr(C)]
#[derive(Copy, Clone, Debug, Default)]
pub struct AsLoss {
    pub gamma_e: f64,
    pub gamma_u: f64,
    pub kappa: f64,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, Default)]
pub struct AsGateReport {
    pub fidelity: f64,
    pub max_leakage: f64,
    pub max_e_population: f64,
    pub max_photon_number: f64,
    pub norm_loss: f64,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, Default)]
pub struct AsPhysicalEstimate {
    pub rabi: f64,
    pub stark: f64,
    pub omega_tp: f64,
    pub gamma_tp: f64,
    pub stark_phase: f64,
    pub adiabatic_ratio: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> AsStatus {
    match e {
        Error::NoSuchStep(_) | Error::OutsideWindow { .. } => AsStatus::OutOfRange,
        e if e.is_numerical() => AsStatus::Numerical,
        _ => AsStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (AsStatus, String)>) -> AsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AsStatus::Panic
        }
    }
}

fn lift<T>(r: Result<T, Error>) -> Result<T, (AsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (AsStatus, String) {
    (AsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (AsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (AsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (AsStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn as_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn as_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds the schedule of `protocol` ("swap8", "swap7" or "cnot11") with all
/// quantities in units of the pulse width.
///
/// # Safety
/// `protocol` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn as_schedule_new(
    protocol: *const c_char,
    omega_max_tp: f64,
    g_tp: f64,
    intra_delay: f64,
    inter_step_gap: f64,
    out: *mut *mut AsSchedule,
) -> AsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p: Protocol = lift(str_arg(protocol, "protocol")?.parse())?;
        let params = ScheduleParams {
            omega_max: omega_max_tp,
            t_p: 1.0,
            intra_delay,
            inter_step_gap,
            g1: g_tp,
            g2: g_tp,
            phases: None,
        };
        let s = lift(build_schedule(p, &params))?;
        *out = Box::into_raw(Box::new(AsSchedule(s)));
        Ok(())
    })
}

/// Parses a schedule from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn as_schedule_from_json(json: *const c_char, out: *mut *mut AsSchedule) -> AsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let s: Schedule = lift(serde_json::from_str(str_arg(json, "json")?).map_err(Error::from))?;
        lift(s.validate())?;
        *out = Box::into_raw(Box::new(AsSchedule(s)));
        Ok(())
    })
}

/// # Safety
/// `s` must come from `as_schedule_new` or `as_schedule_from_json`, or be null.
#[no_mangle]
pub unsafe extern "C" fn as_schedule_free(s: *mut AsSchedule) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live schedule handle, `count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn as_schedule_pulse_count(s: *const AsSchedule, count: *mut usize) -> AsStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("schedule"))?;
        *out_arg(count, "count")? = s.0.pulse_count();
        Ok(())
    })
}

/// # Safety
/// `s` must be a live schedule handle, `start` and `end` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn as_schedule_window(s: *const AsSchedule, start: *mut f64, end: *mut f64) -> AsStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("schedule"))?;
        *out_arg(start, "start")? = s.0.t_start;
        *out_arg(end, "end")? = s.0.t_end;
        Ok(())
    })
}

/// Rabi frequency of pulse `index` at time `t`.
///
/// # Safety
/// `s` must be a live schedule handle, `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn as_schedule_rabi(s: *const AsSchedule, index: usize, t: f64, value: *mut f64) -> AsStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("schedule"))?;
        let p = s.0.pulses.get(index).ok_or_else(|| {
            (AsStatus::OutOfRange, format!("pulse {index} of {}", s.0.pulse_count()))
        })?;
        *out_arg(value, "value")? = p.rabi(t);
        Ok(())
    })
}

fn basis_for(s: &Schedule, n_max: usize) -> Result<Arc<Basis>, (AsStatus, String)> {
    Ok(Arc::new(lift(Basis::new(n_max, s.uses_upper_level()))?))
}

fn grid_for(s: &Schedule, dt: f64, stride: usize) -> TimeGrid {
    let mut g = TimeGrid::for_schedule(s);
    if dt > 0.0 {
        g.dt = dt;
    }
    if stride > 0 {
        g.stride = stride;
    }
    g
}

fn loss_of(loss: *const AsLoss) -> LossParams {
    // SAFETY: callers pass either null or a valid pointer.
    match unsafe { loss.as_ref() } {
        Some(l) => LossParams { gamma_e: l.gamma_e, gamma_u: l.gamma_u, kappa: l.kappa },
        None => LossParams::NONE,
    }
}

/// Propagates the basis state labelled `initial` (e.g. "01;0"). `dt <= 0`
/// selects the largest admissible step, `stride == 0` the default sampling;
/// `loss` may be null.
///
/// # Safety
/// `s` must be a live schedule handle, `initial` a NUL-terminated string,
/// `loss` null or valid, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn as_simulate(
    s: *const AsSchedule,
    n_max: usize,
    initial: *const c_char,
    dt: f64,
    stride: usize,
    loss: *const AsLoss,
    out: *mut *mut AsTrajectory,
) -> AsStatus {
    guard(|| {
        let s = &s.as_ref().ok_or_else(|| null("schedule"))?.0;
        let out = out_arg(out, "out")?;
        let basis = basis_for(s, n_max)?;
        let psi0 = lift(StateVector::from_label(basis.clone(), str_arg(initial, "initial")?))?;
        let model = lift(HamiltonianModel::new(basis, s, &loss_of(loss)))?;
        let traj = lift(propagate_model(&psi0, &model, s, &grid_for(s, dt, stride), Integrator::default()))?;
        *out = Box::into_raw(Box::new(AsTrajectory(traj)));
        Ok(())
    })
}

/// # Safety
/// `t` must come from `as_simulate`, or be null.
#[no_mangle]
pub unsafe extern "C" fn as_trajectory_free(t: *mut AsTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of recorded samples.
///
/// # Safety
/// `t` must be a live trajectory handle, `len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn as_trajectory_len(t: *const AsTrajectory, len: *mut usize) -> AsStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        *out_arg(len, "len")? = t.0.len();
        Ok(())
    })
}

fn sample(t: &Trajectory, k: usize) -> Result<(), (AsStatus, String)> {
    if k >= t.len() {
        return Err((AsStatus::OutOfRange, format!("sample {k} of {}", t.len())));
    }
    Ok(())
}

/// # Safety
/// `t` must be a live trajectory handle, `time` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn as_trajectory_time(t: *const AsTrajectory, k: usize, time: *mut f64) -> AsStatus {
    guard(|| {
        let t = &t.as_ref().ok_or_else(|| null("trajectory"))?.0;
        sample(t, k)?;
        *out_arg(time, "time")? = t.times[k];
        Ok(())
    })
}

/// Population of the basis state labelled `label` at sample `k`.
///
/// # Safety
/// `t` must be a live trajectory handle, `label` a NUL-terminated string,
/// `population` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn as_trajectory_population(
    t: *const AsTrajectory,
    k: usize,
    label: *const c_char,
    population: *mut f64,
) -> AsStatus {
    guard(|| {
        let t = &t.as_ref().ok_or_else(|| null("trajectory"))?.0;
        sample(t, k)?;
        let i = lift(t.basis.index_of_label(str_arg(label, "label")?))?;
        *out_arg(population, "population")? = t.population(k, i);
        Ok(())
    })
}

/// Evaluates the 4x4 gate realized by `s` against the target of its
/// protocol. Arguments as in [`as_simulate`].
///
/// # Safety
/// `s` must be a live schedule handle, `loss` null or valid, `report` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn as_gate_report(
    s: *const AsSchedule,
    n_max: usize,
    dt: f64,
    loss: *const AsLoss,
    report: *mut AsGateReport,
) -> AsStatus {
    guard(|| {
        let s = &s.as_ref().ok_or_else(|| null("schedule"))?.0;
        let report = out_arg(report, "report")?;
        let protocol = s
            .protocol
            .ok_or_else(|| (AsStatus::InvalidArgument, "schedule names no protocol".to_string()))?;
        let basis = basis_for(s, n_max)?;
        let (name, target) = target_for(protocol);
        let r = lift(evaluate_gate(
            &basis,
            s,
            &grid_for(s, dt, 0),
            &loss_of(loss),
            Integrator::default(),
            (name, &target),
        ))?;
        *report = AsGateReport {
            fidelity: r.fidelity,
            max_leakage: r.max_leakage,
            max_e_population: r.exposure.max_e_population,
            max_photon_number: r.exposure.max_photon_number,
            norm_loss: r.norm_loss,
        };
        Ok(())
    })
}

/// Helium estimates for intensity `intensity` (W/cm^2) and pulse width
/// `t_p` (s).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn as_physical_estimate(intensity: f64, t_p: f64, out: *mut AsPhysicalEstimate) -> AsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let e = lift(physical_estimates(intensity, t_p))?;
        *out = AsPhysicalEstimate {
            rabi: e.rabi,
            stark: e.stark,
            omega_tp: e.omega_tp,
            gamma_tp: e.gamma_tp,
            stark_phase: e.stark_phase,
            adiabatic_ratio: e.adiabatic_ratio,
        };
        Ok(())
    })
}
