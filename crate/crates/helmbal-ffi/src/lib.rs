//! C API for the helmbal saturation library.
//!
//! # Error handling
//!
//! The API follows the Posix style. Functions return [`HB_OK`] (zero) to
//! indicate success and negative values to indicate failure; constructors
//! return a non-null pointer on success and a null pointer on failure.
//! After any failure, [`hb_last_error_message`] retrieves a human-readable
//! description of the cause for the calling thread.
//!
//! Outcomes that are mathematically meaningful rather than erroneous keep
//! dedicated codes: a source measure with no admissible sweep reports
//! [`HB_INFEASIBLE`], a point mass above the kernel threshold reports
//! [`HB_UNBOUNDED`], and a radial level cutting no bounded region reports
//! [`HB_NO_BOUNDED_REGION`].
//!
//! # Safety
//!
//! Every function checks pointers for null before dereferencing. Beyond
//! null-safety the caller must guarantee the usual C contract: pointers are
//! properly aligned, point to initialized values of the declared type, and
//! handles are not used after being passed to their `_free` function or
//! shared across threads without synchronization.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::{c_char, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use helmbal::balayage::{sweep, Rho, SweepConfig, SweepResult};
use helmbal::grid::{io, GridSpec, Measure};
use helmbal::radial::{
    ball_sweep_radius, c_k, d_k, null_ball_radius, point_mass_radius, psi, r_k, sphere_sweep,
    Medium, RadialOutcome,
};
use helmbal::Error;

/// The call succeeded.
pub const HB_OK: c_int = 0;
/// A required pointer argument was null.
pub const HB_NULL_POINTER: c_int = -1;
/// An argument was outside its documented domain.
pub const HB_INVALID_ARGUMENT: c_int = -2;
/// The source admits no density bounded by rho; the outcome handle still
/// reports the diagnosed reason.
pub const HB_INFEASIBLE: c_int = -3;
/// The region fails the coercivity bound: its ground energy lies below
/// the squared wavenumber.
pub const HB_NOT_COERCIVE: c_int = -4;
/// The requested radial level cuts no bounded region.
pub const HB_NO_BOUNDED_REGION: c_int = -5;
/// The point mass meets or exceeds the kernel threshold, so no bounded
/// saturated region exists.
pub const HB_UNBOUNDED: c_int = -6;
/// The queried point lies outside the computational grid.
pub const HB_OUT_OF_BOUNDS: c_int = -7;
/// The requested quantity was not computed for this outcome.
pub const HB_UNAVAILABLE: c_int = -8;
/// The solver failed to converge or panicked; details in the error message.
pub const HB_SOLVER_FAILED: c_int = -9;
/// Writing artifacts to disk failed.
pub const HB_IO_FAILED: c_int = -10;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn code_for(err: &Error) -> c_int {
    match err {
        Error::NotCoercive { .. } => HB_NOT_COERCIVE,
        Error::Solver(_) => HB_SOLVER_FAILED,
        Error::Io(_) | Error::Json(_) => HB_IO_FAILED,
        _ => HB_INVALID_ARGUMENT,
    }
}

fn fail(err: Error) -> c_int {
    let code = code_for(&err);
    set_error(err.to_string());
    code
}

fn invalid(msg: &str) -> c_int {
    set_error(msg.to_string());
    HB_INVALID_ARGUMENT
}

fn medium(dim: u32, k: f64) -> Result<Medium, c_int> {
    Medium::new(dim as usize, k).map_err(fail)
}

/// Copies the calling thread's last error message into `buf`.
///
/// Returns the length in bytes of the full message including the nul
/// terminator, or `0` if no error has been recorded. If `buf` is non-null
/// and `cap` is positive, up to `cap - 1` bytes are copied and the result
/// is always nul-terminated; a return value greater than `cap` means the
/// message was truncated.
///
/// # Safety
///
/// `buf` must be valid for writes of `cap` bytes, or null.
#[no_mangle]
pub unsafe extern "C" fn hb_last_error_message(buf: *mut c_char, cap: usize) -> c_int {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len() as c_int
    })
}

// ---------------------------------------------------------------------------
// Closed-form radial quantities
// ---------------------------------------------------------------------------

/// Evaluates the ball mean-value normalizer c_k at radius `r`.
///
/// `dim` must be 2 or 3 and `k` a nonnegative finite wavenumber.
///
/// # Safety
///
/// `out` must be valid for writes of one double.
#[no_mangle]
pub unsafe extern "C" fn hb_c_k(dim: u32, k: f64, r: f64, out: *mut f64) -> c_int {
    let Some(out) = (unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    let med = match medium(dim, k) {
        Ok(med) => med,
        Err(code) => return code,
    };
    match c_k(&med, r) {
        Ok(v) => {
            *out = v;
            HB_OK
        }
        Err(e) => fail(e),
    }
}

/// Evaluates the sphere mean-value normalizer d_k at radius `r`.
///
/// # Safety
///
/// `out` must be valid for writes of one double.
#[no_mangle]
pub unsafe extern "C" fn hb_d_k(dim: u32, k: f64, r: f64, out: *mut f64) -> c_int {
    let Some(out) = (unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    let med = match medium(dim, k) {
        Ok(med) => med,
        Err(code) => return code,
    };
    match d_k(&med, r) {
        Ok(v) => {
            *out = v;
            HB_OK
        }
        Err(e) => fail(e),
    }
}

/// Evaluates the fundamental solution Psi_k at distance `r` from its pole.
///
/// # Safety
///
/// `out` must be valid for writes of one double.
#[no_mangle]
pub unsafe extern "C" fn hb_psi(dim: u32, k: f64, r: f64, out: *mut f64) -> c_int {
    let Some(out) = (unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    let med = match medium(dim, k) {
        Ok(med) => med,
        Err(code) => return code,
    };
    match psi(&med, r) {
        Ok(v) => {
            *out = v;
            HB_OK
        }
        Err(e) => fail(e),
    }
}

/// Writes the feasibility threshold radius R_k, beyond which no saturated
/// ball can reach.
///
/// # Safety
///
/// `out` must be valid for writes of one double.
#[no_mangle]
pub unsafe extern "C" fn hb_r_k(dim: u32, k: f64, out: *mut f64) -> c_int {
    let Some(out) = (unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    match medium(dim, k) {
        Ok(med) => {
            if med.k() <= 0.0 {
                return invalid("the threshold radius requires a positive wavenumber");
            }
            *out = r_k(&med);
            HB_OK
        }
        Err(code) => code,
    }
}

/// Writes the radius of the uniform ball that is invisible from outside:
/// the first root of c_k.
///
/// # Safety
///
/// `out` must be valid for writes of one double.
#[no_mangle]
pub unsafe extern "C" fn hb_null_ball_radius(dim: u32, k: f64, out: *mut f64) -> c_int {
    let Some(out) = (unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    match medium(dim, k) {
        Ok(med) => {
            if med.k() <= 0.0 {
                return invalid("the silent ball requires a positive wavenumber");
            }
            *out = null_ball_radius(&med);
            HB_OK
        }
        Err(code) => code,
    }
}

/// Writes the radius of the saturated ball produced by a unit-bound point
/// mass `c` at the origin.
///
/// Returns [`HB_UNBOUNDED`] when `c` meets or exceeds the threshold
/// c_k(R_k), in which case no bounded region exists.
///
/// # Safety
///
/// `out` must be valid for writes of one double.
#[no_mangle]
pub unsafe extern "C" fn hb_point_mass_radius(dim: u32, k: f64, c: f64, out: *mut f64) -> c_int {
    let Some(out) = (unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    let med = match medium(dim, k) {
        Ok(med) => med,
        Err(code) => return code,
    };
    match point_mass_radius(&med, c) {
        Ok(Some(r)) => {
            *out = r;
            HB_OK
        }
        Ok(None) => {
            set_error(format!("mass {c} meets the feasibility threshold"));
            HB_UNBOUNDED
        }
        Err(e) => fail(e),
    }
}

/// Writes the radius of the saturated ball produced by the uniform ball of
/// density `c > 1` and radius `big_r` against a unit bound.
///
/// Returns [`HB_UNBOUNDED`] when the source is too heavy for a bounded
/// region.
///
/// # Safety
///
/// `out` must be valid for writes of one double.
#[no_mangle]
pub unsafe extern "C" fn hb_ball_sweep_radius(
    dim: u32,
    k: f64,
    c: f64,
    big_r: f64,
    out: *mut f64,
) -> c_int {
    let Some(out) = (unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    let med = match medium(dim, k) {
        Ok(med) => med,
        Err(code) => return code,
    };
    match ball_sweep_radius(&med, c, big_r) {
        Ok(Some(r)) => {
            *out = r;
            HB_OK
        }
        Ok(None) => {
            set_error(format!(
                "ball of density {c} and radius {big_r} meets the feasibility threshold"
            ));
            HB_UNBOUNDED
        }
        Err(e) => fail(e),
    }
}

/// Closed-form sweep of a weighted sphere, written by [`hb_sphere_sweep`].
#[repr(C)]
pub struct HbRadialSweep {
    /// Inner radius of the saturated region; zero when it is a full ball.
    pub inner: f64,
    /// Outer radius of the saturated region.
    pub outer: f64,
    /// Surface density of the sphere source realizing this region.
    pub weight: f64,
    /// Level of the radial profile on the free boundary.
    pub level: f64,
    /// Dirichlet ground energy of the region.
    pub lambda1: f64,
    /// Nonzero when the region is a full ball rather than an annulus.
    pub is_ball: c_int,
}

/// Sweeps the sphere of radius `big_t` so that the saturated region is the
/// level set above `level`, writing the closed-form answer to `out`.
///
/// Returns [`HB_NO_BOUNDED_REGION`] when the level cuts no bounded region
/// and [`HB_NOT_COERCIVE`] when the region's ground energy falls below the
/// squared wavenumber; in the latter case `out->lambda1` holds the
/// offending energy.
///
/// # Safety
///
/// `out` must be valid for writes of one [`HbRadialSweep`].
#[no_mangle]
pub unsafe extern "C" fn hb_sphere_sweep(
    dim: u32,
    k: f64,
    big_t: f64,
    level: f64,
    out: *mut HbRadialSweep,
) -> c_int {
    let Some(out) = (unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    let med = match medium(dim, k) {
        Ok(med) => med,
        Err(code) => return code,
    };
    match sphere_sweep(&med, big_t, level) {
        Ok(RadialOutcome::Feasible(s)) => {
            *out = HbRadialSweep {
                inner: s.inner,
                outer: s.outer,
                weight: s.weight,
                level: s.level,
                lambda1: s.lambda1,
                is_ball: s.is_ball() as c_int,
            };
            HB_OK
        }
        Ok(RadialOutcome::NoBoundedRegion) => {
            set_error(format!("level {level} cuts no bounded region"));
            HB_NO_BOUNDED_REGION
        }
        Ok(RadialOutcome::GroundStateBelow { lambda1 }) => {
            *out = HbRadialSweep {
                inner: 0.0,
                outer: 0.0,
                weight: 0.0,
                level,
                lambda1,
                is_ball: 0,
            };
            set_error(format!(
                "ground energy {lambda1} falls below the squared wavenumber {}",
                k * k
            ));
            HB_NOT_COERCIVE
        }
        Err(e) => fail(e),
    }
}

// ---------------------------------------------------------------------------
// Grid sweeps
// ---------------------------------------------------------------------------

/// An opaque sweep problem under construction: medium, bound, source
/// measure, and grid.
pub struct HbProblem {
    med: Medium,
    rho: f64,
    measure: Measure,
    grid: Option<GridSpec>,
    config: SweepConfig,
}

/// An opaque sweep outcome, either converged or diagnosed infeasible.
pub struct HbSweep {
    result: SweepResult,
}

/// Creates a sweep problem in dimension `dim` with wavenumber `k` and the
/// constant bound `rho`.
///
/// Returns null if the medium or bound is invalid.
#[no_mangle]
pub extern "C" fn hb_problem_new(dim: u32, k: f64, rho: f64) -> *mut HbProblem {
    let med = match Medium::new(dim as usize, k) {
        Ok(med) => med,
        Err(e) => {
            set_error(e.to_string());
            return ptr::null_mut();
        }
    };
    if !(rho.is_finite() && rho > 0.0) {
        set_error(format!("bound must be positive and finite, got {rho}"));
        return ptr::null_mut();
    }
    Box::into_raw(Box::new(HbProblem {
        med,
        rho,
        measure: Measure::default(),
        grid: None,
        config: SweepConfig::default(),
    }))
}

/// Frees a problem handle. Passing null is a no-op.
///
/// # Safety
///
/// `problem` must be a pointer returned by [`hb_problem_new`] that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn hb_problem_free(problem: *mut HbProblem) {
    if !problem.is_null() {
        drop(unsafe { Box::from_raw(problem) });
    }
}

unsafe fn point3(p: *const f64, dim: u32) -> Option<[f64; 3]> {
    let slice = unsafe { std::slice::from_raw_parts(p.as_ref()?, dim as usize) };
    let mut point = [0.0; 3];
    point[..slice.len()].copy_from_slice(slice);
    Some(point)
}

/// Adds a point mass to the source measure.
///
/// `point` holds `dim` coordinates, where `dim` is the problem dimension.
///
/// # Safety
///
/// `point` must be valid for reads of `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn hb_problem_add_atom(
    problem: *mut HbProblem,
    point: *const f64,
    mass: f64,
) -> c_int {
    let Some(problem) = (unsafe { problem.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    let dim = problem.med.dim() as u32;
    let Some(point) = (unsafe { point3(point, dim) }) else {
        return HB_NULL_POINTER;
    };
    problem.measure.atoms.push(helmbal::grid::Atom { point, mass });
    match problem.measure.validate(problem.med.dim()) {
        Ok(()) => HB_OK,
        Err(e) => {
            problem.measure.atoms.pop();
            fail(e)
        }
    }
}

/// Adds a uniform ball to the source measure.
///
/// # Safety
///
/// `center` must be valid for reads of `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn hb_problem_add_ball(
    problem: *mut HbProblem,
    center: *const f64,
    radius: f64,
    density: f64,
) -> c_int {
    let Some(problem) = (unsafe { problem.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    let dim = problem.med.dim() as u32;
    let Some(center) = (unsafe { point3(center, dim) }) else {
        return HB_NULL_POINTER;
    };
    problem
        .measure
        .balls
        .push(helmbal::grid::Ball { center, radius, density });
    match problem.measure.validate(problem.med.dim()) {
        Ok(()) => HB_OK,
        Err(e) => {
            problem.measure.balls.pop();
            fail(e)
        }
    }
}

/// Adds a weighted sphere to the source measure.
///
/// # Safety
///
/// `center` must be valid for reads of `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn hb_problem_add_shell(
    problem: *mut HbProblem,
    center: *const f64,
    radius: f64,
    weight: f64,
) -> c_int {
    let Some(problem) = (unsafe { problem.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    let dim = problem.med.dim() as u32;
    let Some(center) = (unsafe { point3(center, dim) }) else {
        return HB_NULL_POINTER;
    };
    problem
        .measure
        .shells
        .push(helmbal::grid::Shell { center, radius, weight });
    match problem.measure.validate(problem.med.dim()) {
        Ok(()) => HB_OK,
        Err(e) => {
            problem.measure.shells.pop();
            fail(e)
        }
    }
}

/// Sets the computational box and cell size. Must be called before
/// [`hb_problem_solve`]; the box must contain the region the sweep will
/// reach.
///
/// # Safety
///
/// `lo` and `hi` must each be valid for reads of `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn hb_problem_set_grid(
    problem: *mut HbProblem,
    lo: *const f64,
    hi: *const f64,
    h: f64,
) -> c_int {
    let Some(problem) = (unsafe { problem.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    let dim = problem.med.dim() as u32;
    let (Some(lo), Some(hi)) = (unsafe { point3(lo, dim) }, unsafe { point3(hi, dim) }) else {
        return HB_NULL_POINTER;
    };
    match GridSpec::from_box(problem.med.dim(), lo, hi, h) {
        Ok(spec) => {
            problem.grid = Some(spec);
            HB_OK
        }
        Err(e) => fail(e),
    }
}

/// Overrides solver tolerances. Nonpositive values keep the defaults:
/// `inner_tol` the density tolerance of the inner obstacle solves,
/// `outer_tol` the fixed-point tolerance of the outer iteration,
/// `max_outer` the outer iteration cap.
///
/// # Safety
///
/// `problem` must be a valid problem handle.
#[no_mangle]
pub unsafe extern "C" fn hb_problem_set_solver(
    problem: *mut HbProblem,
    inner_tol: f64,
    outer_tol: f64,
    max_outer: i64,
) -> c_int {
    let Some(problem) = (unsafe { problem.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    if inner_tol > 0.0 {
        problem.config.inner_tol = inner_tol;
    }
    if outer_tol > 0.0 {
        problem.config.outer_tol = outer_tol;
    }
    if max_outer > 0 {
        problem.config.max_outer = max_outer as usize;
    }
    HB_OK
}

/// Runs the sweep and returns an outcome handle.
///
/// Returns a handle even when the source is infeasible; query
/// [`hb_sweep_feasible`] to distinguish. Returns null on error (no grid,
/// empty measure, solver failure), with the cause available through
/// [`hb_last_error_message`].
///
/// # Safety
///
/// `problem` must be a valid problem handle.
#[no_mangle]
pub unsafe extern "C" fn hb_problem_solve(problem: *const HbProblem) -> *mut HbSweep {
    let Some(problem) = (unsafe { problem.as_ref() }) else {
        set_error("problem handle is null".to_string());
        return ptr::null_mut();
    };
    let Some(spec) = problem.grid else {
        set_error("no grid set; call hb_problem_set_grid first".to_string());
        return ptr::null_mut();
    };
    if problem.measure.is_empty() {
        set_error("source measure is empty".to_string());
        return ptr::null_mut();
    }
    let rho = Rho::Constant(problem.rho);
    let solved = catch_unwind(AssertUnwindSafe(|| {
        sweep(&problem.measure, &rho, &problem.med, &spec, &problem.config)
    }));
    match solved {
        Ok(Ok(result)) => Box::into_raw(Box::new(HbSweep { result })),
        Ok(Err(e)) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
        Err(_) => {
            set_error("solver panicked".to_string());
            ptr::null_mut()
        }
    }
}

/// Frees an outcome handle. Passing null is a no-op.
///
/// # Safety
///
/// `sweep` must be a pointer returned by [`hb_problem_solve`] that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn hb_sweep_free(sweep: *mut HbSweep) {
    if !sweep.is_null() {
        drop(unsafe { Box::from_raw(sweep) });
    }
}

/// Writes `1` if the sweep converged and `0` if the source was diagnosed
/// infeasible.
///
/// # Safety
///
/// `out` must be valid for writes of one int.
#[no_mangle]
pub unsafe extern "C" fn hb_sweep_feasible(sweep: *const HbSweep, out: *mut c_int) -> c_int {
    let (Some(sweep), Some(out)) = (unsafe { sweep.as_ref() }, unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    *out = sweep.result.is_converged() as c_int;
    HB_OK
}

fn converged(sweep: &HbSweep) -> Result<&helmbal::balayage::SweepOutcome, c_int> {
    match &sweep.result {
        SweepResult::Converged(out) => Ok(out),
        SweepResult::Infeasible { reason, .. } => {
            set_error(format!("sweep was infeasible: {reason}"));
            Err(HB_INFEASIBLE)
        }
    }
}

/// Writes the number of grid cells in the saturated region.
///
/// # Safety
///
/// `out` must be valid for writes of one uintptr_t.
#[no_mangle]
pub unsafe extern "C" fn hb_sweep_region_cells(sweep: *const HbSweep, out: *mut usize) -> c_int {
    let (Some(sweep), Some(out)) = (unsafe { sweep.as_ref() }, unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    match converged(sweep) {
        Ok(o) => {
            *out = o.omega.count();
            HB_OK
        }
        Err(code) => code,
    }
}

/// Writes the total mass of the swept density.
///
/// # Safety
///
/// `out` must be valid for writes of one double.
#[no_mangle]
pub unsafe extern "C" fn hb_sweep_mass(sweep: *const HbSweep, out: *mut f64) -> c_int {
    let (Some(sweep), Some(out)) = (unsafe { sweep.as_ref() }, unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    match converged(sweep) {
        Ok(o) => {
            *out = o.swept.integral();
            HB_OK
        }
        Err(code) => code,
    }
}

/// Writes the Dirichlet ground energy of the saturated region.
///
/// Returns [`HB_UNAVAILABLE`] when the estimate was disabled or the region
/// is empty.
///
/// # Safety
///
/// `out` must be valid for writes of one double.
#[no_mangle]
pub unsafe extern "C" fn hb_sweep_lambda1(sweep: *const HbSweep, out: *mut f64) -> c_int {
    let (Some(sweep), Some(out)) = (unsafe { sweep.as_ref() }, unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    match converged(sweep) {
        Ok(o) => match o.lambda1 {
            Some(l1) => {
                *out = l1;
                HB_OK
            }
            None => {
                set_error("ground energy was not computed".to_string());
                HB_UNAVAILABLE
            }
        },
        Err(code) => code,
    }
}

/// Writes the swept density at the grid cell containing `point`.
///
/// Returns [`HB_OUT_OF_BOUNDS`] when the point lies outside the grid.
///
/// # Safety
///
/// `point` must be valid for reads of `dim` doubles and `out` for writes
/// of one double.
#[no_mangle]
pub unsafe extern "C" fn hb_sweep_density_at(
    sweep: *const HbSweep,
    point: *const f64,
    out: *mut f64,
) -> c_int {
    let (Some(sweep), Some(out)) = (unsafe { sweep.as_ref() }, unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    let o = match converged(sweep) {
        Ok(o) => o,
        Err(code) => return code,
    };
    let dim = o.swept.spec.dim as u32;
    let Some(p) = (unsafe { point3(point, dim) }) else {
        return HB_NULL_POINTER;
    };
    match o.swept.spec.pos_to_cell(p) {
        Some(cell) => {
            *out = o.swept.data[o.swept.spec.index(cell)];
            HB_OK
        }
        None => {
            set_error(format!("point {p:?} lies outside the grid"));
            HB_OUT_OF_BOUNDS
        }
    }
}

/// Writes `1` if the grid cell containing `point` belongs to the saturated
/// region and `0` otherwise.
///
/// Returns [`HB_OUT_OF_BOUNDS`] when the point lies outside the grid.
///
/// # Safety
///
/// `point` must be valid for reads of `dim` doubles and `out` for writes
/// of one int.
#[no_mangle]
pub unsafe extern "C" fn hb_sweep_region_contains(
    sweep: *const HbSweep,
    point: *const f64,
    out: *mut c_int,
) -> c_int {
    let (Some(sweep), Some(out)) = (unsafe { sweep.as_ref() }, unsafe { out.as_mut() }) else {
        return HB_NULL_POINTER;
    };
    let o = match converged(sweep) {
        Ok(o) => o,
        Err(code) => return code,
    };
    let dim = o.omega.spec.dim as u32;
    let Some(p) = (unsafe { point3(point, dim) }) else {
        return HB_NULL_POINTER;
    };
    match o.omega.spec.pos_to_cell(p) {
        Some(cell) => {
            *out = o.omega.data[o.omega.spec.index(cell)] as c_int;
            HB_OK
        }
        None => {
            set_error(format!("point {p:?} lies outside the grid"));
            HB_OUT_OF_BOUNDS
        }
    }
}

/// Writes the sweep artifacts into the directory at `dir`: the deficiency
/// `u.f64`, the potential `v.f64`, the swept density `b.f64` (each with a
/// JSON sidecar), and the region mask `omega.pgm`.
///
/// # Safety
///
/// `dir` must be a nul-terminated path string.
#[no_mangle]
pub unsafe extern "C" fn hb_sweep_write_artifacts(
    sweep: *const HbSweep,
    dir: *const c_char,
) -> c_int {
    let Some(sweep) = (unsafe { sweep.as_ref() }) else {
        return HB_NULL_POINTER;
    };
    if dir.is_null() {
        return HB_NULL_POINTER;
    }
    let dir = match unsafe { CStr::from_ptr(dir) }.to_str() {
        Ok(s) => Path::new(s),
        Err(_) => return invalid("path is not valid UTF-8"),
    };
    let o = match converged(sweep) {
        Ok(o) => o,
        Err(code) => return code,
    };
    let write = || -> helmbal::Result<()> {
        std::fs::create_dir_all(dir)?;
        io::write_field(&o.u, &dir.join("u.f64"))?;
        io::write_field(&o.v, &dir.join("v.f64"))?;
        io::write_field(&o.swept, &dir.join("b.f64"))?;
        io::write_mask(&o.omega, &dir.join("omega.pgm"))?;
        Ok(())
    };
    match write() {
        Ok(()) => HB_OK,
        Err(e) => {
            set_error(e.to_string());
            HB_IO_FAILED
        }
    }
}
