#ifndef HELMBAL_H
#define HELMBAL_H

/* Generated by cbindgen from the helmbal-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * The call succeeded.
 */
#define HB_OK 0

/**
 * A required pointer argument was null.
 */
#define HB_NULL_POINTER -1

/**
 * An argument was outside its documented domain.
 */
#define HB_INVALID_ARGUMENT -2

/**
 * The source admits no density bounded by rho; the outcome handle still
 * reports the diagnosed reason.
 */
#define HB_INFEASIBLE -3

/**
 * The region fails the coercivity bound: its ground energy lies below
 * the squared wavenumber.
 */
#define HB_NOT_COERCIVE -4

/**
 * The requested radial level cuts no bounded region.
 */
#define HB_NO_BOUNDED_REGION -5

/**
 * The point mass meets or exceeds the kernel threshold, so no bounded
 * saturated region exists.
 */
#define HB_UNBOUNDED -6

/**
 * The queried point lies outside the computational grid.
 */
#define HB_OUT_OF_BOUNDS -7

/**
 * The requested quantity was not computed for this outcome.
 */
#define HB_UNAVAILABLE -8

/**
 * The solver failed to converge or panicked; details in the error message.
 */
#define HB_SOLVER_FAILED -9

/**
 * Writing artifacts to disk failed.
 */
#define HB_IO_FAILED -10

/**
 * An opaque sweep problem under construction: medium, bound, source
 * measure, and grid.
 */
typedef struct HbProblem HbProblem;

/**
 * An opaque sweep outcome, either converged or diagnosed infeasible.
 */
typedef struct HbSweep HbSweep;

/**
 * Closed-form sweep of a weighted sphere, written by [`hb_sphere_sweep`].
 */
typedef struct HbRadialSweep {
  /**
   * Inner radius of the saturated region; zero when it is a full ball.
   */
  double inner;
  /**
   * Outer radius of the saturated region.
   */
  double outer;
  /**
   * Surface density of the sphere source realizing this region.
   */
  double weight;
  /**
   * Level of the radial profile on the free boundary.
   */
  double level;
  /**
   * Dirichlet ground energy of the region.
   */
  double lambda1;
  /**
   * Nonzero when the region is a full ball rather than an annulus.
   */
  int is_ball;
} HbRadialSweep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf`.
 *
 * Returns the length in bytes of the full message including the nul
 * terminator, or `0` if no error has been recorded. If `buf` is non-null
 * and `cap` is positive, up to `cap - 1` bytes are copied and the result
 * is always nul-terminated; a return value greater than `cap` means the
 * message was truncated.
 *
 * # Safety
 *
 * `buf` must be valid for writes of `cap` bytes, or null.
 */
int hb_last_error_message(char *buf, uintptr_t cap);

/**
 * Evaluates the ball mean-value normalizer c_k at radius `r`.
 *
 * `dim` must be 2 or 3 and `k` a nonnegative finite wavenumber.
 *
 * # Safety
 *
 * `out` must be valid for writes of one double.
 */
int hb_c_k(uint32_t dim, double k, double r, double *out);

/**
 * Evaluates the sphere mean-value normalizer d_k at radius `r`.
 *
 * # Safety
 *
 * `out` must be valid for writes of one double.
 */
int hb_d_k(uint32_t dim, double k, double r, double *out);

/**
 * Evaluates the fundamental solution Psi_k at distance `r` from its pole.
 *
 * # Safety
 *
 * `out` must be valid for writes of one double.
 */
int hb_psi(uint32_t dim, double k, double r, double *out);

/**
 * Writes the feasibility threshold radius R_k, beyond which no saturated
 * ball can reach.
 *
 * # Safety
 *
 * `out` must be valid for writes of one double.
 */
int hb_r_k(uint32_t dim, double k, double *out);

/**
 * Writes the radius of the uniform ball that is invisible from outside:
 * the first root of c_k.
 *
 * # Safety
 *
 * `out` must be valid for writes of one double.
 */
int hb_null_ball_radius(uint32_t dim, double k, double *out);

/**
 * Writes the radius of the saturated ball produced by a unit-bound point
 * mass `c` at the origin.
 *
 * Returns [`HB_UNBOUNDED`] when `c` meets or exceeds the threshold
 * c_k(R_k), in which case no bounded region exists.
 *
 * # Safety
 *
 * `out` must be valid for writes of one double.
 */
int hb_point_mass_radius(uint32_t dim, double k, double c, double *out);

/**
 * Writes the radius of the saturated ball produced by the uniform ball of
 * density `c > 1` and radius `big_r` against a unit bound.
 *
 * Returns [`HB_UNBOUNDED`] when the source is too heavy for a bounded
 * region.
 *
 * # Safety
 *
 * `out` must be valid for writes of one double.
 */
int hb_ball_sweep_radius(uint32_t dim, double k, double c, double big_r, double *out);

/**
 * Sweeps the sphere of radius `big_t` so that the saturated region is the
 * level set above `level`, writing the closed-form answer to `out`.
 *
 * Returns [`HB_NO_BOUNDED_REGION`] when the level cuts no bounded region
 * and [`HB_NOT_COERCIVE`] when the region's ground energy falls below the
 * squared wavenumber; in the latter case `out->lambda1` holds the
 * offending energy.
 *
 * # Safety
 *
 * `out` must be valid for writes of one [`HbRadialSweep`].
 */
int hb_sphere_sweep(uint32_t dim, double k, double big_t, double level, struct HbRadialSweep *out);

/**
 * Creates a sweep problem in dimension `dim` with wavenumber `k` and the
 * constant bound `rho`.
 *
 * Returns null if the medium or bound is invalid.
 */
struct HbProblem *hb_problem_new(uint32_t dim, double k, double rho);

/**
 * Frees a problem handle. Passing null is a no-op.
 *
 * # Safety
 *
 * `problem` must be a pointer returned by [`hb_problem_new`] that has not
 * been freed already.
 */
void hb_problem_free(struct HbProblem *problem);

/**
 * Adds a point mass to the source measure.
 *
 * `point` holds `dim` coordinates, where `dim` is the problem dimension.
 *
 * # Safety
 *
 * `point` must be valid for reads of `dim` doubles.
 */
int hb_problem_add_atom(struct HbProblem *problem, const double *point, double mass);

/**
 * Adds a uniform ball to the source measure.
 *
 * # Safety
 *
 * `center` must be valid for reads of `dim` doubles.
 */
int hb_problem_add_ball(struct HbProblem *problem,
                        const double *center,
                        double radius,
                        double density);

/**
 * Adds a weighted sphere to the source measure.
 *
 * # Safety
 *
 * `center` must be valid for reads of `dim` doubles.
 */
int hb_problem_add_shell(struct HbProblem *problem,
                         const double *center,
                         double radius,
                         double weight);

/**
 * Sets the computational box and cell size. Must be called before
 * [`hb_problem_solve`]; the box must contain the region the sweep will
 * reach.
 *
 * # Safety
 *
 * `lo` and `hi` must each be valid for reads of `dim` doubles.
 */
int hb_problem_set_grid(struct HbProblem *problem, const double *lo, const double *hi, double h);

/**
 * Overrides solver tolerances. Nonpositive values keep the defaults:
 * `inner_tol` the density tolerance of the inner obstacle solves,
 * `outer_tol` the fixed-point tolerance of the outer iteration,
 * `max_outer` the outer iteration cap.
 *
 * # Safety
 *
 * `problem` must be a valid problem handle.
 */
int hb_problem_set_solver(struct HbProblem *problem,
                          double inner_tol,
                          double outer_tol,
                          int64_t max_outer);

/**
 * Runs the sweep and returns an outcome handle.
 *
 * Returns a handle even when the source is infeasible; query
 * [`hb_sweep_feasible`] to distinguish. Returns null on error (no grid,
 * empty measure, solver failure), with the cause available through
 * [`hb_last_error_message`].
 *
 * # Safety
 *
 * `problem` must be a valid problem handle.
 */
struct HbSweep *hb_problem_solve(const struct HbProblem *problem);

/**
 * Frees an outcome handle. Passing null is a no-op.
 *
 * # Safety
 *
 * `sweep` must be a pointer returned by [`hb_problem_solve`] that has not
 * been freed already.
 */
void hb_sweep_free(struct HbSweep *sweep);

/**
 * Writes `1` if the sweep converged and `0` if the source was diagnosed
 * infeasible.
 *
 * # Safety
 *
 * `out` must be valid for writes of one int.
 */
int hb_sweep_feasible(const struct HbSweep *sweep, int *out);

/**
 * Writes the number of grid cells in the saturated region.
 *
 * # Safety
 *
 * `out` must be valid for writes of one uintptr_t.
 */
int hb_sweep_region_cells(const struct HbSweep *sweep, uintptr_t *out);

/**
 * Writes the total mass of the swept density.
 *
 * # Safety
 *
 * `out` must be valid for writes of one double.
 */
int hb_sweep_mass(const struct HbSweep *sweep, double *out);

/**
 * Writes the Dirichlet ground energy of the saturated region.
 *
 * Returns [`HB_UNAVAILABLE`] when the estimate was disabled or the region
 * is empty.
 *
 * # Safety
 *
 * `out` must be valid for writes of one double.
 */
int hb_sweep_lambda1(const struct HbSweep *sweep, double *out);

/**
 * Writes the swept density at the grid cell containing `point`.
 *
 * Returns [`HB_OUT_OF_BOUNDS`] when the point lies outside the grid.
 *
 * # Safety
 *
 * `point` must be valid for reads of `dim` doubles and `out` for writes
 * of one double.
 */
int hb_sweep_density_at(const struct HbSweep *sweep, const double *point, double *out);

/**
 * Writes `1` if the grid cell containing `point` belongs to the saturated
 * region and `0` otherwise.
 *
 * Returns [`HB_OUT_OF_BOUNDS`] when the point lies outside the grid.
 *
 * # Safety
 *
 * `point` must be valid for reads of `dim` doubles and `out` for writes
 * of one int.
 */
int hb_sweep_region_contains(const struct HbSweep *sweep, const double *point, int *out);

/**
 * Writes the sweep artifacts into the directory at `dir`: the deficiency
 * `u.f64`, the potential `v.f64`, the swept density `b.f64` (each with a
 * JSON sidecar), and the region mask `omega.pgm`.
 *
 * # Safety
 *
 * `dir` must be a nul-terminated path string.
 */
int hb_sweep_write_artifacts(const struct HbSweep *sweep, const char *dir);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* HELMBAL_H */
