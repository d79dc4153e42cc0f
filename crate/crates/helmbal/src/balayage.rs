//! The sweeping engine: projects a measure onto densities bounded by `rho`.
//!
//! The swept measure is characterised by a deficiency field `u >= 0` (the
//! difference between the source potential and the swept potential) that
//! solves the complementarity problem
//!
//! ```text
//!   u >= 0,    -(Delta + k^2) u >= mu - rho,    equality where u > 0.
//! ```
//!
//! For `k > 0` the operator is not monotone, so `k^2 u` is frozen on the
//! right-hand side and updated in an outer loop:
//!
//! ```text
//!   -Delta u_{n+1} >= mu - rho + k^2 u_n
//! ```
//!
//! Each inner problem is an obstacle problem for the plain Laplacian (an
//! M-matrix), solved by projected red-black SOR over a growing active
//! window with warm starts. Starting from `u_0 = 0` the outer iterates
//! increase monotonically; they converge exactly when the problem is
//! solvable, and the failure modes are classified:
//!
//! * growth past a divergence guard,
//! * the saturated region reaching the computational box,
//! * a spectral certificate: the smallest Dirichlet eigenvalue of the
//!   discrete Laplacian on the saturated region below `k^2`, which makes
//!   bounded solutions impossible.

use crate::error::{Error, Result};
use crate::grid::{
    helmholtz_apply, potential, GridSpec, Mask, Measure, PotentialMethod, ScalarField, SINGULAR,
};
use crate::radial::{r_k, Medium};
use rayon::prelude::*;

/// Inner (obstacle-problem) tolerance on the projected residual, in units
/// of the source density scale.
pub const DEFAULT_INNER_TOL: f64 = 1e-11;

/// Outer fixed-point tolerance on the sup-norm change of `u`, relative to
/// its size.
pub const DEFAULT_OUTER_TOL: f64 = 1e-10;

/// Default ceiling on outer iterations. Near-critical problems contract
/// slowly (ratio `k^2 / lambda_1`), hence the generous default.
pub const DEFAULT_MAX_OUTER: usize = 2000;

/// The saturated region is read off as `{ u > OMEGA_THETA * h^2 }`. The
/// projected-SOR tail in `u` sits orders of magnitude below `h^2`, so the
/// factor separates genuine support from solver residue.
pub const OMEGA_THETA: f64 = 0.01;

/// Declare divergence when `sup u` exceeds this multiple of its value
/// after the first outer iteration.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Report a spectral certificate when the smallest Dirichlet eigenvalue of
/// the saturated region falls below this fraction of `k^2`.
pub const SPECTRAL_KILL: f64 = 0.9;

/// Cells within this distance of the box faces count as boundary contact.
pub const CONTACT_CELLS: usize = 2;

/// Density bound the measure is swept onto.
#[derive(Clone, Debug)]
pub enum Rho {
    Constant(f64),
    Field(ScalarField),
}

impl Rho {
    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        match self {
            Rho::Constant(c) => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::Config(format!("rho must be >= 0, got {c}")));
                }
            }
            Rho::Field(f) => {
                if f.spec != *spec {
                    return Err(Error::Config(
                        "rho field must live on the sweep grid".into(),
                    ));
                }
                if f.data.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Config("rho field must be finite and >= 0".into()));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        match self {
            Rho::Constant(c) => *c,
            Rho::Field(f) => f.data[idx],
        }
    }

    /// Smallest value over the grid.
    pub fn floor(&self) -> f64 {
        match self {
            Rho::Constant(c) => *c,
            Rho::Field(f) => f.min(),
        }
    }
}

/// Knobs for the sweeping solver; the defaults fit the test tolerances.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub omega_theta: f64,
    pub divergence_factor: f64,
    pub spectral_kill: f64,
    pub method: PotentialMethod,
    /// Estimate the smallest Dirichlet eigenvalue of the saturated region
    /// after convergence (skippable: it costs a few linear solves).
    pub compute_lambda1: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            inner_tol: DEFAULT_INNER_TOL,
            outer_tol: DEFAULT_OUTER_TOL,
            max_outer: DEFAULT_MAX_OUTER,
            omega_theta: OMEGA_THETA,
            divergence_factor: DIVERGENCE_FACTOR,
            spectral_kill: SPECTRAL_KILL,
            method: PotentialMethod::Auto,
            compute_lambda1: true,
        }
    }
}

/// Why a sweep failed to produce a bounded result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InfeasibleReason {
    /// `sup u` blew past the divergence guard.
    Divergence,
    /// The saturated region reached the computational box; the result
    /// would be clipped, so none is reported.
    BoundaryContact,
    /// The saturated region admits a Dirichlet eigenvalue below `k^2`;
    /// no bounded solution exists regardless of the box.
    SpectralCertificate { lambda1: f64 },
}

impl std::fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InfeasibleReason::Divergence => write!(f, "deficiency growth diverged"),
            InfeasibleReason::BoundaryContact => {
                write!(f, "saturated region reached the computational box")
            }
            InfeasibleReason::SpectralCertificate { lambda1 } => write!(
                f,
                "saturated region carries a Dirichlet eigenvalue {lambda1} below k^2"
            ),
        }
    }
}

/// A converged sweep.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    /// Deficiency `u = U^mu - V`, zero off the saturated region.
    pub u: ScalarField,
    /// Swept potential `V = U^mu - u` (singular sentinels pass through).
    pub v: ScalarField,
    /// Source potential `U^mu`.
    pub potential: ScalarField,
    /// Swept measure as a density: `mu_h - (-(Delta_h + k^2) u)`.
    pub swept: ScalarField,
    /// Rasterized source density.
    pub source: ScalarField,
    /// Saturated region `{ u > theta h^2 }`.
    pub omega: Mask,
    /// Cells where the swept density reaches the bound (within `10 h`).
    pub saturated: Mask,
    pub outer_iterations: usize,
    /// Smallest Dirichlet eigenvalue of `omega`, when requested and
    /// `omega` is nonempty.
    pub lambda1: Option<f64>,
}

/// Result of a sweep: a converged outcome or a classified failure.
#[derive(Clone, Debug)]
pub enum SweepResult {
    Converged(Box<SweepOutcome>),
    Infeasible {
        reason: InfeasibleReason,
        outer_iterations: usize,
        sup_u: f64,
    },
}

impl SweepResult {
    pub fn outcome(&self) -> Option<&SweepOutcome> {
        match self {
            SweepResult::Converged(o) => Some(o),
            SweepResult::Infeasible { .. } => None,
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, SweepResult::Converged(_))
    }
}

/// Sweeps `measure` onto the bound `rho` over the grid.
pub fn sweep(
    measure: &Measure,
    rho: &Rho,
    med: &Medium,
    spec: &GridSpec,
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if spec.dim != med.dim() {
        return Err(Error::Config(format!(
            "grid dimension {} does not match medium dimension {}",
            spec.dim,
            med.dim()
        )));
    }
    measure.validate(spec.dim)?;
    rho.validate(spec)?;
    let mu_h = measure.rasterize(spec)?;
    let (pot, _) = potential(measure, spec, med, cfg.method)?;
    solve(mu_h, pot, rho, med, spec, cfg)
}

/// Sweeps the measure represented by a potential field: the source density
/// is reconstructed as `-(Delta_h + k^2) background`. Used when the source
/// is only available through its potential (sums of swept potentials,
/// harmonic-measure terms). The one-cell rim, where the stencil would see
/// the cut-off exterior, is zeroed; callers must keep the action away from
/// the box.
pub fn sweep_from_potential(
    background: &ScalarField,
    rho: &Rho,
    med: &Medium,
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    let spec = background.spec;
    if spec.dim != med.dim() {
        return Err(Error::Config(format!(
            "grid dimension {} does not match medium dimension {}",
            spec.dim,
            med.dim()
        )));
    }
    if background.data.iter().any(|v| !v.is_finite() || v.abs() >= SINGULAR) {
        return Err(Error::Config(
            "background potential must be finite everywhere".into(),
        ));
    }
    rho.validate(&spec)?;
    let mut mu_h = helmholtz_apply(background, med);
    for idx in 0..spec.len() {
        if spec.cells_to_boundary(spec.decompose(idx)) < 1 {
            mu_h.data[idx] = 0.0;
        }
    }
    solve(mu_h, background.clone(), rho, med, &spec, cfg)
}

fn solve(
    mu_h: ScalarField,
    pot: ScalarField,
    rho: &Rho,
    med: &Medium,
    spec: &GridSpec,
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    let n = spec.len();
    let f_base: Vec<f64> = (0..n).map(|i| mu_h.data[i] - rho.at(i)).collect();
    let f_scale = 1.0 + f_base.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let inner_tol = cfg.inner_tol * f_scale;
    let k2 = med.k() * med.k();

    let mut u = vec![0.0f64; n];
    let mut window = Window::around_positive(spec, &f_base);
    let mut outer_done = 0usize;
    let mut infeasible: Option<InfeasibleReason> = None;
    let mut ref_sup: Option<f64> = None;

    if window.is_some() {
        let mut converged = false;
        let mut rhs = f_base.clone();
        let mut u_prev = u.clone();
        for outer in 1..=cfg.max_outer {
            outer_done = outer;
            let win = window.as_mut().expect("window stays present");
            psor_with_expansion(&mut u, &rhs, spec, win, inner_tol);

            if contact(spec, &u, cfg.omega_theta) {
                infeasible = Some(InfeasibleReason::BoundaryContact);
                break;
            }
            let sup_u = u.iter().fold(0.0f64, |m, v| m.max(*v));
            let delta = u
                .iter()
                .zip(u_prev.iter())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if delta <= cfg.outer_tol * (1.0 + sup_u) {
                converged = true;
                break;
            }
            match ref_sup {
                None => ref_sup = Some(sup_u.max(1e-300)),
                Some(r) => {
                    if sup_u > cfg.divergence_factor * r {
                        infeasible = Some(classify_blowup(spec, &u, med, cfg));
                        break;
                    }
                }
            }
            if k2 == 0.0 {
                // The right-hand side never changes; one more pass only
                // confirms the fixed point.
                converged = true;
                break;
            }
            u_prev.copy_from_slice(&u);
            for i in 0..n {
                rhs[i] = f_base[i] + k2 * u[i];
            }
        }
        if !converged && infeasible.is_none() {
            let reason = classify_blowup(spec, &u, med, cfg);
            if matches!(reason, InfeasibleReason::SpectralCertificate { .. }) {
                infeasible = Some(reason);
            } else {
                return Err(Error::Solver(format!(
                    "sweep did not settle within {} outer iterations",
                    cfg.max_outer
                )));
            }
        }
    }

    if let Some(reason) = infeasible {
        let sup_u = u.iter().fold(0.0f64, |m, v| m.max(*v));
        return Ok(SweepResult::Infeasible {
            reason,
            outer_iterations: outer_done,
            sup_u,
        });
    }

    let u = ScalarField { spec: *spec, data: u };
    let theta = cfg.omega_theta * spec.h * spec.h;
    let omega = Mask {
        spec: *spec,
        data: u.data.iter().map(|&v| v > theta).collect(),
    };
    let lu = helmholtz_apply(&u, med);
    let mut swept = mu_h.clone();
    for i in 0..n {
        swept.data[i] -= lu.data[i];
    }
    let sat_band = 10.0 * spec.h;
    let saturated = Mask {
        spec: *spec,
        data: (0..n).map(|i| swept.data[i] >= rho.at(i) - sat_band).collect(),
    };
    let mut v = pot.clone();
    for i in 0..n {
        if v.data[i].abs() < SINGULAR {
            v.data[i] -= u.data[i];
        }
    }
    let lambda1 = if cfg.compute_lambda1 && omega.count() > 0 {
        Some(lambda1_estimate(&omega, 1e-6)?)
    } else {
        None
    };
    Ok(SweepResult::Converged(Box::new(SweepOutcome {
        u,
        v,
        potential: pot,
        swept,
        source: mu_h,
        omega,
        saturated,
        outer_iterations: outer_done,
        lambda1,
    })))
}

/// True when the deficiency support sits within [`CONTACT_CELLS`] of a box
/// face.
fn contact(spec: &GridSpec, u: &[f64], theta: f64) -> bool {
    let thr = theta * spec.h * spec.h;
    let axes = if spec.dim == 2 { 2 } else { 3 };
    u.iter().enumerate().any(|(idx, &v)| {
        if v <= thr {
            return false;
        }
        let c = spec.decompose(idx);
        (0..axes).any(|a| c[a] < CONTACT_CELLS || c[a] + CONTACT_CELLS >= spec.shape[a])
    })
}

fn classify_blowup(spec: &GridSpec, u: &[f64], med: &Medium, cfg: &SweepConfig) -> InfeasibleReason {
    let thr = cfg.omega_theta * spec.h * spec.h;
    let omega = Mask {
        spec: *spec,
        data: u.iter().map(|&v| v > thr).collect(),
    };
    let k2 = med.k() * med.k();
    if k2 > 0.0 && omega.count() > 0 {
        if let Ok(l1) = lambda1_estimate(&omega, 1e-4) {
            if l1 < cfg.spectral_kill * k2 {
                return InfeasibleReason::SpectralCertificate { lambda1: l1 };
            }
        }
    }
    InfeasibleReason::Divergence
}

/// Active sweep window (half-open cell ranges per axis).
#[derive(Clone, Copy, Debug)]
struct Window {
    lo: [usize; 3],
    hi: [usize; 3],
}

impl Window {
    /// Bounding box of `{ f > 0 }`, dilated by two cells.
    fn around_positive(spec: &GridSpec, f: &[f64]) -> Option<Window> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut seen = false;
        for (idx, &v) in f.iter().enumerate() {
            if v > 0.0 {
                seen = true;
                let c = spec.decompose(idx);
                for a in 0..3 {
                    lo[a] = lo[a].min(c[a]);
                    hi[a] = hi[a].max(c[a] + 1);
                }
            }
        }
        if !seen {
            return None;
        }
        let mut w = Window { lo, hi };
        w.grow(spec, 2);
        Some(w)
    }

    fn grow(&mut self, spec: &GridSpec, cells: usize) {
        let axes = if spec.dim == 2 { 2 } else { 3 };
        for a in 0..axes {
            self.lo[a] = self.lo[a].saturating_sub(cells);
            self.hi[a] = (self.hi[a] + cells).min(spec.shape[a]);
        }
    }

    fn is_full(&self, spec: &GridSpec) -> bool {
        let axes = if spec.dim == 2 { 2 } else { 3 };
        (0..axes).all(|a| self.lo[a] == 0 && self.hi[a] == spec.shape[a])
    }

    fn max_extent(&self) -> usize {
        (0..3).map(|a| self.hi[a] - self.lo[a]).max().unwrap_or(1)
    }
}

#[derive(Copy, Clone)]
struct SendPtr(*mut f64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

/// Solves the obstacle problem `u >= 0`, `-Delta_h u >= rhs` (equality on
/// the support) on the window, expanding it whenever the solution presses
/// against the window edge.
fn psor_with_expansion(
    u: &mut [f64],
    rhs: &[f64],
    spec: &GridSpec,
    window: &mut Window,
    tol: f64,
) {
    loop {
        psor(u, rhs, spec, window, tol);
        if window.is_full(spec) || !ring_violated(u, rhs, spec, window, tol) {
            return;
        }
        window.grow(spec, 4);
    }
}

/// Projected red-black SOR. Deterministic under any thread count: rows are
/// data-disjoint, and within a color pass every read hits the other color.
fn psor(u: &mut [f64], rhs: &[f64], spec: &GridSpec, window: &Window, tol: f64) {
    let h2 = spec.h * spec.h;
    let axes = if spec.dim == 2 { 2 } else { 3 };
    let diag = 2.0 * axes as f64 / h2;
    let m = window.max_extent() as f64;
    let omega_r = (2.0 / (1.0 + (std::f64::consts::PI / m).sin())).clamp(1.0, 1.95);

    let rows: Vec<(usize, usize)> = (window.lo[2]..window.hi[2])
        .flat_map(|z| (window.lo[1]..window.hi[1]).map(move |y| (z, y)))
        .collect();
    let (nx, ny) = (spec.shape[0], spec.shape[1]);
    let nz = spec.shape[2];
    let max_sweeps = 40 * window.max_extent() + 200;

    for sweep_no in 0..max_sweeps {
        for color in 0..2usize {
            let ptr = SendPtr(u.as_mut_ptr());
            rows.par_iter().for_each(|&(z, y)| {
                let base = ptr;
                let row_off = (z * ny + y) * nx;
                let start = window.lo[0] + (window.lo[0] + y + z + color) % 2;
                let mut x = start;
                while x < window.hi[0] {
                    let idx = row_off + x;
                    // Safety: this pass writes only cells of `color`; all
                    // reads are neighbors, which have the other parity.
                    unsafe {
                        let mut nb = 0.0;
                        if x > 0 {
                            nb += *base.0.add(idx - 1);
                        }
                        if x + 1 < nx {
                            nb += *base.0.add(idx + 1);
                        }
                        if y > 0 {
                            nb += *base.0.add(idx - nx);
                        }
                        if y + 1 < ny {
                            nb += *base.0.add(idx + nx);
                        }
                        if axes == 3 {
                            if z > 0 {
                                nb += *base.0.add(idx - nx * ny);
                            }
                            if z + 1 < nz {
                                nb += *base.0.add(idx + nx * ny);
                            }
                        }
                        let cur = *base.0.add(idx);
                        let gs = (rhs[idx] + nb / h2) / diag;
                        let next = (cur + omega_r * (gs - cur)).max(0.0);
                        *base.0.add(idx) = next;
                    }
                    x += 2;
                }
            });
        }
        // Projected-residual check every few sweeps (it costs a full pass).
        if sweep_no % 8 == 7 || sweep_no + 1 == max_sweeps {
            if projected_residual(u, rhs, spec, window) <= tol {
                return;
            }
        }
    }
}

/// Largest violation of the complementarity conditions over the window, in
/// density units: `max |u - max(0, u - (A u - rhs) / diag)| * diag`.
fn projected_residual(u: &[f64], rhs: &[f64], spec: &GridSpec, window: &Window) -> f64 {
    let h2 = spec.h * spec.h;
    let axes = if spec.dim == 2 { 2 } else { 3 };
    let diag = 2.0 * axes as f64 / h2;
    let (nx, ny) = (spec.shape[0], spec.shape[1]);
    let nz = spec.shape[2];
    let rows: Vec<(usize, usize)> = (window.lo[2]..window.hi[2])
        .flat_map(|z| (window.lo[1]..window.hi[1]).map(move |y| (z, y)))
        .collect();
    rows.par_iter()
        .map(|&(z, y)| {
            let row_off = (z * ny + y) * nx;
            let mut worst = 0.0f64;
            for x in window.lo[0]..window.hi[0] {
                let idx = row_off + x;
                let mut nb = 0.0;
                if x > 0 {
                    nb += u[idx - 1];
                }
                if x + 1 < nx {
                    nb += u[idx + 1];
                }
                if y > 0 {
                    nb += u[idx - nx];
                }
                if y + 1 < ny {
                    nb += u[idx + nx];
                }
                if axes == 3 {
                    if z > 0 {
                        nb += u[idx - nx * ny];
                    }
                    if z + 1 < nz {
                        nb += u[idx + nx * ny];
                    }
                }
                let gs = (rhs[idx] + nb / h2) / diag;
                worst = worst.max((u[idx] - gs.max(0.0)).abs());
            }
            worst * diag
        })
        .reduce(|| 0.0, f64::max)
}

/// True if any cell just outside the window wants to become positive.
fn ring_violated(u: &[f64], rhs: &[f64], spec: &GridSpec, window: &Window, tol: f64) -> bool {
    let h2 = spec.h * spec.h;
    let axes = if spec.dim == 2 { 2 } else { 3 };
    let diag = 2.0 * axes as f64 / h2;
    let mut ring: Vec<[usize; 3]> = Vec::new();
    let lo = window.lo;
    let hi = window.hi;
    let push_plane = |ring: &mut Vec<[usize; 3]>, axis: usize, coord: usize| {
        let (a1, a2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let r1 = lo[a1].saturating_sub(1)..(hi[a1] + 1).min(spec.shape[a1]);
        for i1 in r1 {
            let r2 = lo[a2].saturating_sub(1)..(hi[a2] + 1).min(spec.shape[a2]);
            for i2 in r2 {
                let mut c = [0usize; 3];
                c[axis] = coord;
                c[a1] = i1;
                c[a2] = i2;
                ring.push(c);
            }
        }
    };
    let axes_n = if spec.dim == 2 { 2 } else { 3 };
    for a in 0..axes_n {
        if lo[a] > 0 {
            push_plane(&mut ring, a, lo[a] - 1);
        }
        if hi[a] < spec.shape[a] {
            push_plane(&mut ring, a, hi[a]);
        }
    }
    ring.into_iter().any(|c| {
        let idx = spec.index(c);
        let mut nb = 0.0;
        for a in 0..axes {
            if c[a] > 0 {
                let mut q = c;
                q[a] -= 1;
                nb += u[spec.index(q)];
            }
            if c[a] + 1 < spec.shape[a] {
                let mut q = c;
                q[a] += 1;
                nb += u[spec.index(q)];
            }
        }
        (rhs[idx] + nb / h2) / diag > tol / diag
    })
}

/// Residuals of the splitting structure of a converged sweep.
#[derive(Clone, Copy, Debug)]
pub struct StructureReport {
    /// Largest value of `swept - rho` anywhere (should be solver-level).
    pub max_excess: f64,
    /// Largest `|swept - rho|` on the saturated region.
    pub max_omega_residual: f64,
    /// Largest `|swept - source|` outside the one-cell dilation of the
    /// deficiency support `{ u > 0 }`; every stencil there is untouched,
    /// so this is exactly zero up to floating-point identity.
    pub max_exterior_residual: f64,
    /// Mass `sum |swept - source| * cell volume` between the saturated
    /// region and the untouched exterior, where the discrete normal flux
    /// of `u` lands.
    pub ring_mass: f64,
}

/// Measures how well a converged sweep satisfies the splitting
/// `swept = rho` on the region and `swept = source` off it.
pub fn structure_check(out: &SweepOutcome, rho: &Rho) -> StructureReport {
    let spec = out.swept.spec;
    let positive = Mask {
        spec,
        data: out.u.data.iter().map(|&v| v > 0.0).collect(),
    };
    let dilated = positive.dilate(1);
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_omega_residual = 0.0f64;
    let mut max_exterior_residual = 0.0f64;
    let mut ring_mass = 0.0f64;
    for idx in 0..spec.len() {
        let b = out.swept.data[idx];
        let r = rho.at(idx);
        max_excess = max_excess.max(b - r);
        if out.omega.data[idx] {
            max_omega_residual = max_omega_residual.max((b - r).abs());
        } else if dilated.data[idx] {
            ring_mass += (b - out.source.data[idx]).abs();
        } else {
            max_exterior_residual = max_exterior_residual.max((b - out.source.data[idx]).abs());
        }
    }
    ring_mass *= spec.cell_volume();
    StructureReport {
        max_excess,
        max_omega_residual,
        max_exterior_residual,
        ring_mass,
    }
}

/// Smallest eigenvalue of the Dirichlet Laplacian `-Delta_h` restricted to
/// the set cells, by inverse power iteration with conjugate-gradient
/// solves. Deterministic: reductions are sequential.
pub fn lambda1_estimate(mask: &Mask, tol_rel: f64) -> Result<f64> {
    let spec = mask.spec;
    let active: Vec<usize> = (0..spec.len()).filter(|&i| mask.data[i]).collect();
    if active.is_empty() {
        return Err(Error::Domain("eigenvalue of an empty region".into()));
    }
    let mut slot = vec![u32::MAX; spec.len()];
    for (a, &idx) in active.iter().enumerate() {
        slot[idx] = a as u32;
    }
    let n = active.len();
    let h2 = spec.h * spec.h;
    let axes = if spec.dim == 2 { 2 } else { 3 };
    let diag = 2.0 * axes as f64 / h2;

    let apply = |x: &[f64], out: &mut [f64]| {
        out.par_iter_mut().enumerate().for_each(|(a, o)| {
            let c = spec.decompose(active[a]);
            let mut nb = 0.0;
            for ax in 0..axes {
                if c[ax] > 0 {
                    let mut q = c;
                    q[ax] -= 1;
                    let s = slot[spec.index(q)];
                    if s != u32::MAX {
                        nb += x[s as usize];
                    }
                }
                if c[ax] + 1 < spec.shape[ax] {
                    let mut q = c;
                    q[ax] += 1;
                    let s = slot[spec.index(q)];
                    if s != u32::MAX {
                        nb += x[s as usize];
                    }
                }
            }
            *o = diag * x[a] - nb / h2;
        });
    };

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };

    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let mut lambda = diag;
    for _ in 0..60 {
        cg(&apply, &x, &mut y, 1e-10, 40 * spec.shape.iter().max().copied().unwrap_or(1));
        let norm = dot(&y, &y).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Solver("eigenvalue iteration degenerated".into()));
        }
        for v in &mut y {
            *v /= norm;
        }
        apply(&y, &mut ax);
        let next = dot(&y, &ax);
        let done = (next - lambda).abs() <= tol_rel * next.abs();
        lambda = next;
        std::mem::swap(&mut x, &mut y);
        if done {
            break;
        }
    }
    Ok(lambda)
}

/// Conjugate gradients for the SPD operator `apply`, solving
/// `apply(x) = b` in place of `x` (zero initial guess).
fn cg(
    apply: &(impl Fn(&[f64], &mut [f64]) + Sync),
    b: &[f64],
    x: &mut [f64],
    tol_rel: f64,
    max_iter: usize,
) {
    let n = b.len();
    for v in x.iter_mut() {
        *v = 0.0;
    }
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut ap = vec![0.0; n];
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut rr = dot(&r, &r);
    let target = tol_rel * tol_rel * rr;
    for _ in 0..max_iter {
        if rr <= target {
            break;
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
}

/// Brackets the feasibility threshold of a monotone family: `eval(c)` must
/// be feasible at `lo` and infeasible at `hi`; bisection narrows the
/// bracket until it is thinner than `width`.
pub fn feasibility_scan(
    eval: impl Fn(f64) -> Result<bool>,
    mut lo: f64,
    mut hi: f64,
    width: f64,
) -> Result<(f64, f64)> {
    if !(lo < hi && width > 0.0) {
        return Err(Error::Domain(format!("bad scan interval [{lo}, {hi}]")));
    }
    if !eval(lo)? {
        return Err(Error::Domain(format!(
            "scan start {lo} is not feasible; move the interval down"
        )));
    }
    if eval(hi)? {
        return Err(Error::Domain(format!(
            "scan end {hi} is still feasible; move the interval up"
        )));
    }
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Largest distance from a set cell to the support of the measure.
/// `None` when the mask is empty.
pub fn max_support_distance(omega: &Mask, measure: &Measure) -> Option<f64> {
    let spec = omega.spec;
    let density_cells: Vec<[f64; 3]> = match &measure.density {
        Some(d) => (0..d.spec.len())
            .filter(|&i| d.data[i] != 0.0)
            .map(|i| d.spec.center(d.spec.decompose(i)))
            .collect(),
        None => Vec::new(),
    };
    let mut worst: Option<f64> = None;
    for idx in 0..spec.len() {
        if !omega.data[idx] {
            continue;
        }
        let p = spec.center(spec.decompose(idx));
        let mut best = f64::INFINITY;
        for a in &measure.atoms {
            best = best.min(spec.distance(p, a.point));
        }
        for b in &measure.balls {
            best = best.min((spec.distance(p, b.center) - b.radius).max(0.0));
        }
        for s in &measure.shells {
            best = best.min((spec.distance(p, s.center) - s.radius).abs());
        }
        for c in &density_cells {
            best = best.min(spec.distance(p, *c));
        }
        if best.is_finite() {
            worst = Some(worst.map_or(best, |w: f64| w.max(best)));
        }
    }
    worst
}

/// Grid that comfortably contains the sweep of `measure`: the support box
/// padded by twice the critical radius (for `k > 0`) or by the radius of
/// the ball holding the swept mass at density `rho_floor` (for `k = 0`),
/// plus a ten-cell margin.
pub fn auto_grid(measure: &Measure, med: &Medium, rho_floor: f64, h: f64) -> Result<GridSpec> {
    let dim = med.dim();
    let (lo, hi) = measure
        .support_bounds(dim)
        .ok_or_else(|| Error::Config("cannot box an empty measure".into()))?;
    let pad = if med.k() > 0.0 {
        2.0 * r_k(med)
    } else {
        if !(rho_floor > 0.0) {
            return Err(Error::Config(
                "boxing a k = 0 sweep needs a positive density bound".into(),
            ));
        }
        let kappa = if dim == 2 {
            std::f64::consts::PI
        } else {
            4.0 * std::f64::consts::PI / 3.0
        };
        1.5 * (measure.total_mass(dim) / rho_floor / kappa).powf(1.0 / dim as f64)
    } + 10.0 * h;
    let mut blo = lo;
    let mut bhi = hi;
    let axes = if dim == 2 { 2 } else { 3 };
    for a in 0..axes {
        blo[a] -= pad;
        bhi[a] += pad;
    }
    GridSpec::from_box(dim, blo, bhi, h)
}
