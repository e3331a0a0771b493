#ifndef ADIABATIC_SWAP_H
#define ADIABATIC_SWAP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AsStatus {
  AS_STATUS_OK = 0,
  AS_STATUS_NULL_POINTER = 1,
  AS_STATUS_INVALID_ARGUMENT = 2,
  AS_STATUS_NUMERICAL = 3,
  AS_STATUS_OUT_OF_RANGE = 4,
  AS_STATUS_PANIC = 5,
} AsStatus;

// Pulse schedule handle.
typedef struct AsSchedule AsSchedule;

// Sampled trajectory handle.
typedef struct AsTrajectory AsTrajectory;

typedef struct AsLoss {
  double gamma_e;
  double gamma_u;
  double kappa;
} AsLoss;

typedef struct AsGateReport {
  double fidelity;
  double max_leakage;
  double max_e_population;
  double max_photon_number;
  double norm_loss;
} AsGateReport;

typedef struct AsPhysicalEstimate {
  double rabi;
  double stark;
  double omega_tp;
  double gamma_tp;
  double stark_phase;
  double adiabatic_ratio;
} AsPhysicalEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on this thread.
const char *as_last_error(void);

// Library version as a static NUL-terminated string.
const char *as_version(void);

// Builds the schedule of `protocol` ("swap8", "swap7" or "cnot11") with all
// quantities in units of the pulse width.
//
// # Safety
// `protocol` must be a NUL-terminated string and `out` a valid pointer.
enum AsStatus as_schedule_new(const char *protocol,
                              double omega_max_tp,
                              double g_tp,
                              double intra_delay,
                              double inter_step_gap,
                              struct AsSchedule **out);

// Parses a schedule from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum AsStatus as_schedule_from_json(const char *json, struct AsSchedule **out);

// # Safety
// `s` must come from `as_schedule_new` or `as_schedule_from_json`, or be null.
void as_schedule_free(struct AsSchedule *s);

// # Safety
// `s` must be a live schedule handle, `count` a valid pointer.
enum AsStatus as_schedule_pulse_count(const struct AsSchedule *s, uintptr_t *count);

// # Safety
// `s` must be a live schedule handle, `start` and `end` valid pointers.
enum AsStatus as_schedule_window(const struct AsSchedule *s, double *start, double *end);

// Rabi frequency of pulse `index` at time `t`.
//
// # Safety
// `s` must be a live schedule handle, `value` a valid pointer.
enum AsStatus as_schedule_rabi(const struct AsSchedule *s,
                               uintptr_t index,
                               double t,
                               double *value);

// Propagates the basis state labelled `initial` (e.g. "01;0"). `dt <= 0`
// selects the largest admissible step, `stride == 0` the default sampling;
// `loss` may be null.
//
// # Safety
// `s` must be a live schedule handle, `initial` a NUL-terminated string,
// `loss` null or valid, `out` a valid pointer.
enum AsStatus as_simulate(const struct AsSchedule *s,
                          uintptr_t n_max,
                          const char *initial,
                          double dt,
                          uintptr_t stride,
                          const struct AsLoss *loss,
                          struct AsTrajectory **out);

// # Safety
// `t` must come from `as_simulate`, or be null.
void as_trajectory_free(struct AsTrajectory *t);

// Number of recorded samples.
//
// # Safety
// `t` must be a live trajectory handle, `len` a valid pointer.
enum AsStatus as_trajectory_len(const struct AsTrajectory *t, uintptr_t *len);

// # Safety
// `t` must be a live trajectory handle, `time` a valid pointer.
enum AsStatus as_trajectory_time(const struct AsTrajectory *t, uintptr_t k, double *time);

// Population of the basis state labelled `label` at sample `k`.
//
// # Safety
// `t` must be a live trajectory handle, `label` a NUL-terminated string,
// `population` a valid pointer.
enum AsStatus as_trajectory_population(const struct AsTrajectory *t,
                                       uintptr_t k,
                                       const char *label,
                                       double *population);

// Evaluates the 4x4 gate realized by `s` against the target of its
// protocol. Arguments as in [`as_simulate`].
//
// # Safety
// `s` must be a live schedule handle, `loss` null or valid, `report` a
// valid pointer.
enum AsStatus as_gate_report(const struct AsSchedule *s,
                             uintptr_t n_max,
                             double dt,
                             const struct AsLoss *loss,
                             struct AsGateReport *report);

// Helium estimates for intensity `intensity` (W/cm^2) and pulse width
// `t_p` (s).
//
// # Safety
// `out` must be a valid pointer.
enum AsStatus as_physical_estimate(double intensity, double t_p, struct AsPhysicalEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADIABATIC_SWAP_H */
