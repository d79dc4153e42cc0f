//! Rectangular grids, gridded measures, and discrete Helmholtz operators.
//!
//! Grids are uniform with spacing `h`, cells indexed x-fastest, values
//! attached to cell centers. Dimension 2 is represented as a single-slab
//! 3-axis grid (`shape[2] == 1`, z coordinates pinned to zero), so most code
//! is dimension-agnostic.
//!
//! A [`Measure`] is a finite combination of point masses, uniform balls,
//! uniform spheres (weighted surface measures), and a gridded density.
//! [`Measure::rasterize`] turns it into a cell density: balls by
//! supersampled coverage whose resolution scales with `1/h` (keeping the
//! rasterization error second order), spheres by deterministic surface
//! quadrature, atoms by moment-preserving linear deposit over the
//! bracketing cells.
//!
//! The sign convention for the operator is [`helmholtz_apply`] returning
//! `-(Delta_h + k^2) u` with the 2N+1-point Laplacian and zero extension
//! beyond the grid, so a swept measure is recovered as
//! `mu - helmholtz_apply(u)`.

pub mod io;
mod potential;
pub use potential::{
    potential, potential_at_points, potential_of_density, PotentialMethod,
};

use crate::error::{Error, Result};
use crate::radial::{c_k, Medium};
use serde::{Deserialize, Serialize};

/// Sentinel stored where a field value is genuinely singular (a point mass
/// sits on the cell center). Consumers must treat cells at or above this
/// magnitude as holes, not values.
pub const SINGULAR: f64 = 1e300;

/// Default ceiling on total cells per grid; override with the
/// `HB_MAX_CELLS` environment variable (checked at grid construction).
pub const DEFAULT_MAX_CELLS: usize = 8_000_000;

fn max_cells() -> usize {
    std::env::var("HB_MAX_CELLS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_MAX_CELLS)
}

/// Geometry of a uniform rectangular grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    /// Minimum corner of the box; cell `i` spans
    /// `origin + i h .. origin + (i+1) h` per axis.
    pub origin: [f64; 3],
    /// Cells per axis; `shape[2] == 1` when `dim == 2`.
    pub shape: [usize; 3],
    pub h: f64,
}

impl GridSpec {
    pub fn new(dim: usize, origin: [f64; 3], shape: [usize; 3], h: f64) -> Result<Self> {
        Self::with_cell_cap(dim, origin, shape, h, max_cells())
    }

    pub(crate) fn with_cell_cap(
        dim: usize,
        mut origin: [f64; 3],
        shape: [usize; 3],
        h: f64,
        cap: usize,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Grid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Grid(format!("spacing must be positive, got {h}")));
        }
        if origin.iter().any(|c| !c.is_finite()) {
            return Err(Error::Grid("origin must be finite".into()));
        }
        if shape.iter().any(|&n| n == 0) {
            return Err(Error::Grid(format!("shape must be nonzero, got {shape:?}")));
        }
        if dim == 2 {
            if shape[2] != 1 {
                return Err(Error::Grid(format!(
                    "2-dimensional grids need shape[2] == 1, got {}",
                    shape[2]
                )));
            }
            origin[2] = 0.0;
        }
        let cells = shape[0]
            .checked_mul(shape[1])
            .and_then(|p| p.checked_mul(shape[2]))
            .ok_or_else(|| Error::Grid("cell count overflows".into()))?;
        if cells > cap {
            return Err(Error::Grid(format!(
                "grid of {cells} cells exceeds the cap of {cap} (set HB_MAX_CELLS to raise it)"
            )));
        }
        Ok(Self { dim, origin, shape, h })
    }

    /// Grid covering the box `[lo, hi]` (per axis) with spacing `h`; the
    /// upper face may overshoot by less than one cell.
    pub fn from_box(dim: usize, lo: [f64; 3], hi: [f64; 3], h: f64) -> Result<Self> {
        let mut shape = [1usize; 3];
        let axes = if dim == 2 { 2 } else { 3 };
        for a in 0..axes {
            if !(hi[a] > lo[a]) {
                return Err(Error::Grid(format!(
                    "box must have positive extent on axis {a}: {} .. {}",
                    lo[a], hi[a]
                )));
            }
            shape[a] = (((hi[a] - lo[a]) / h) - 1e-9).ceil().max(1.0) as usize;
        }
        let mut origin = lo;
        if dim == 2 {
            origin[2] = 0.0;
        }
        Self::new(dim, origin, shape, h)
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[2] * self.shape[1] + i[1]) * self.shape[0] + i[0]
    }

    #[inline]
    pub fn decompose(&self, idx: usize) -> [usize; 3] {
        let nx = self.shape[0];
        let ny = self.shape[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Center of cell `i`; the z component is 0 for 2-dimensional grids.
    #[inline]
    pub fn center(&self, i: [usize; 3]) -> [f64; 3] {
        let mut c = [0.0; 3];
        for a in 0..3 {
            c[a] = self.origin[a] + (i[a] as f64 + 0.5) * self.h;
        }
        if self.dim == 2 {
            c[2] = 0.0;
        }
        c
    }

    /// Cell containing the point, or `None` if outside the box. The z
    /// coordinate is ignored for 2-dimensional grids.
    pub fn pos_to_cell(&self, p: [f64; 3]) -> Option<[usize; 3]> {
        let mut i = [0usize; 3];
        let axes = if self.dim == 2 { 2 } else { 3 };
        for a in 0..axes {
            let f = (p[a] - self.origin[a]) / self.h;
            if f < 0.0 || f >= self.shape[a] as f64 {
                return None;
            }
            i[a] = f as usize;
        }
        i
            .iter()
            .zip(self.shape.iter())
            .all(|(&c, &n)| c < n)
            .then_some(i)
    }

    /// Euclidean distance between two points, ignoring z in dimension 2.
    pub fn distance(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        let axes = if self.dim == 2 { 2 } else { 3 };
        let mut s = 0.0;
        for ax in 0..axes {
            let d = a[ax] - b[ax];
            s += d * d;
        }
        s.sqrt()
    }

    /// Smallest distance (in cells) from cell `i` to any grid face,
    /// counting only the active axes.
    pub fn cells_to_boundary(&self, i: [usize; 3]) -> usize {
        let axes = if self.dim == 2 { 2 } else { 3 };
        (0..axes)
            .map(|a| i[a].min(self.shape[a] - 1 - i[a]))
            .min()
            .unwrap_or(0)
    }
}

/// A scalar value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub spec: GridSpec,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self { data: vec![0.0; spec.len()], spec }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let mut data = Vec::with_capacity(spec.len());
        for idx in 0..spec.len() {
            data.push(f(spec.center(spec.decompose(idx))));
        }
        Self { spec, data }
    }

    /// Largest finite magnitude, skipping singular sentinels.
    pub fn max_abs_finite(&self) -> f64 {
        self.data
            .iter()
            .filter(|v| v.abs() < SINGULAR)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Integral of the field over the grid (sum times cell volume).
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.spec.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// A boolean value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub spec: GridSpec,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn empty(spec: GridSpec) -> Self {
        Self { data: vec![false; spec.len()], spec }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn([f64; 3]) -> bool) -> Self {
        let mut data = Vec::with_capacity(spec.len());
        for idx in 0..spec.len() {
            data.push(f(spec.center(spec.decompose(idx))));
        }
        Self { spec, data }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Cells on which exactly one of the two masks is set.
    pub fn sym_diff_count(&self, other: &Mask) -> usize {
        assert_eq!(self.spec, other.spec, "masks live on different grids");
        self.data
            .iter()
            .zip(other.data.iter())
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Face-neighbor dilation by `steps` cells.
    pub fn dilate(&self, steps: usize) -> Mask {
        let mut cur = self.clone();
        let axes = if self.spec.dim == 2 { 2 } else { 3 };
        for _ in 0..steps {
            let mut next = cur.data.clone();
            for idx in 0..self.spec.len() {
                if cur.data[idx] {
                    continue;
                }
                let c = self.spec.decompose(idx);
                'nb: for a in 0..axes {
                    for dir in [-1isize, 1] {
                        let v = c[a] as isize + dir;
                        if v < 0 || v >= self.spec.shape[a] as isize {
                            continue;
                        }
                        let mut n = c;
                        n[a] = v as usize;
                        if cur.data[self.spec.index(n)] {
                            next[idx] = true;
                            break 'nb;
                        }
                    }
                }
            }
            cur.data = next;
        }
        cur
    }

    /// True if any set cell lies within `cells` of a grid face.
    pub fn touches_boundary(&self, cells: usize) -> bool {
        self.data.iter().enumerate().any(|(idx, &b)| {
            b && self.spec.cells_to_boundary(self.spec.decompose(idx)) < cells
        })
    }

    /// Area/volume-weighted centroid of the set cells.
    pub fn centroid(&self) -> Option<[f64; 3]> {
        let mut acc = [0.0; 3];
        let mut n = 0usize;
        for idx in 0..self.spec.len() {
            if self.data[idx] {
                let c = self.spec.center(self.spec.decompose(idx));
                for a in 0..3 {
                    acc[a] += c[a];
                }
                n += 1;
            }
        }
        (n > 0).then(|| {
            for a in &mut acc {
                *a /= n as f64;
            }
            acc
        })
    }
}

/// A point mass.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Atom {
    pub point: [f64; 3],
    pub mass: f64,
}

/// A uniform density on a ball.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 3],
    pub radius: f64,
    pub density: f64,
}

/// A uniform surface density on a sphere; `weight` multiplies the surface
/// measure, so the total mass is `weight * area`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Shell {
    pub center: [f64; 3],
    pub radius: f64,
    pub weight: f64,
}

/// A nonnegative measure of compact support: atoms, balls, spheres, and an
/// optional gridded density.
#[derive(Clone, Debug, Default)]
pub struct Measure {
    pub atoms: Vec<Atom>,
    pub balls: Vec<Ball>,
    pub shells: Vec<Shell>,
    pub density: Option<ScalarField>,
}

impl Measure {
    pub fn from_atom(point: [f64; 3], mass: f64) -> Self {
        Measure { atoms: vec![Atom { point, mass }], ..Default::default() }
    }

    pub fn from_ball(center: [f64; 3], radius: f64, density: f64) -> Self {
        Measure { balls: vec![Ball { center, radius, density }], ..Default::default() }
    }

    pub fn from_shell(center: [f64; 3], radius: f64, weight: f64) -> Self {
        Measure { shells: vec![Shell { center, radius, weight }], ..Default::default() }
    }

    pub fn from_density(density: ScalarField) -> Self {
        Measure { density: Some(density), ..Default::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
            && self.balls.is_empty()
            && self.shells.is_empty()
            && self.density.as_ref().map_or(true, |d| d.data.iter().all(|&v| v == 0.0))
    }

    /// Checks nonnegativity, finiteness, and (for 2-dimensional problems)
    /// that all components live in the z = 0 plane.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let plane = |p: [f64; 3], what: &str| -> Result<()> {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::Config(format!("{what} has non-finite coordinates")));
            }
            if dim == 2 && p[2] != 0.0 {
                return Err(Error::Config(format!(
                    "{what} must have z = 0 in dimension 2, got z = {}",
                    p[2]
                )));
            }
            Ok(())
        };
        for a in &self.atoms {
            plane(a.point, "atom")?;
            if !a.mass.is_finite() || a.mass < 0.0 {
                return Err(Error::Config(format!("atom mass must be >= 0, got {}", a.mass)));
            }
        }
        for b in &self.balls {
            plane(b.center, "ball")?;
            if !(b.radius.is_finite() && b.radius > 0.0) {
                return Err(Error::Config(format!("ball radius must be > 0, got {}", b.radius)));
            }
            if !b.density.is_finite() || b.density < 0.0 {
                return Err(Error::Config(format!(
                    "ball density must be >= 0, got {}",
                    b.density
                )));
            }
        }
        for s in &self.shells {
            plane(s.center, "sphere")?;
            if !(s.radius.is_finite() && s.radius > 0.0) {
                return Err(Error::Config(format!(
                    "sphere radius must be > 0, got {}",
                    s.radius
                )));
            }
            if !s.weight.is_finite() || s.weight < 0.0 {
                return Err(Error::Config(format!(
                    "sphere weight must be >= 0, got {}",
                    s.weight
                )));
            }
        }
        if let Some(d) = &self.density {
            if d.spec.dim != dim {
                return Err(Error::Config(format!(
                    "density grid dimension {} does not match problem dimension {dim}",
                    d.spec.dim
                )));
            }
            if d.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("density field has non-finite values".into()));
            }
            if d.min() < 0.0 {
                return Err(Error::Config(format!(
                    "density field must be nonnegative, min is {}",
                    d.min()
                )));
            }
        }
        Ok(())
    }

    /// Total mass (atoms + ball volumes + sphere areas + density integral).
    pub fn total_mass(&self, dim: usize) -> f64 {
        let med = Medium::new(dim, 0.0).expect("dim validated by caller");
        let mut m: f64 = self.atoms.iter().map(|a| a.mass).sum();
        m += self
            .balls
            .iter()
            .map(|b| b.density * med.ball_volume(b.radius))
            .sum::<f64>();
        m += self
            .shells
            .iter()
            .map(|s| s.weight * med.sphere_area(s.radius))
            .sum::<f64>();
        if let Some(d) = &self.density {
            m += d.integral();
        }
        m
    }

    /// Bounding box of the support `(lo, hi)`; `None` for the zero measure.
    pub fn support_bounds(&self, dim: usize) -> Option<([f64; 3], [f64; 3])> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut seen = false;
        let mut take = |p: [f64; 3], r: f64| {
            seen = true;
            for a in 0..3 {
                lo[a] = lo[a].min(p[a] - r);
                hi[a] = hi[a].max(p[a] + r);
            }
        };
        for a in &self.atoms {
            take(a.point, 0.0);
        }
        for b in &self.balls {
            take(b.center, b.radius);
        }
        for s in &self.shells {
            take(s.center, s.radius);
        }
        if let Some(d) = &self.density {
            for idx in 0..d.spec.len() {
                if d.data[idx] != 0.0 {
                    take(d.spec.center(d.spec.decompose(idx)), d.spec.h * 0.5);
                }
            }
        }
        if !seen {
            return None;
        }
        if dim == 2 {
            lo[2] = 0.0;
            hi[2] = 0.0;
        }
        Some((lo, hi))
    }

    /// Cell densities on `spec`. Atoms split linearly over the bracketing
    /// cells (exact total mass and first moment); balls use coverage
    /// supersampled at resolution `~h/0.4` so the rasterization error stays
    /// second order; spheres use deterministic surface quadrature with ~8
    /// nodes per crossed cell, deposited the same way as atoms. Errors if
    /// any component's support reaches outside the grid.
    pub fn rasterize(&self, spec: &GridSpec) -> Result<ScalarField> {
        self.validate(spec.dim)?;
        let mut out = ScalarField::zeros(*spec);
        let inv_vol = 1.0 / spec.cell_volume();

        for a in &self.atoms {
            if spec.pos_to_cell(a.point).is_none() {
                return Err(Error::Config(format!(
                    "atom at {:?} lies outside the grid",
                    a.point
                )));
            }
            deposit_point(&mut out, a.point, a.mass * inv_vol);
        }

        for b in &self.balls {
            rasterize_ball(&mut out, b)?;
        }

        for s in &self.shells {
            rasterize_shell(&mut out, s)?;
        }

        if let Some(d) = &self.density {
            if d.spec == *spec {
                for (o, v) in out.data.iter_mut().zip(d.data.iter()) {
                    *o += v;
                }
            } else {
                // Nearest-cell resampling; adequate only when the target
                // grid is at least as fine as the source.
                for idx in 0..spec.len() {
                    let c = spec.center(spec.decompose(idx));
                    if let Some(src) = d.spec.pos_to_cell(c) {
                        out.data[idx] += d.data[d.spec.index(src)];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Splits a point deposit linearly over the 2^dim cell centers bracketing
/// it, so the deposit's first moment matches the point exactly (the
/// whole-cell alternative displaces mass by up to half a cell, which shows
/// up as a first-order dipole error in potentials). At grid faces the
/// outside share is folded into the edge cell.
fn deposit_point(out: &mut ScalarField, p: [f64; 3], amount: f64) {
    let spec = out.spec;
    let axes = if spec.dim == 2 { 2 } else { 3 };
    let mut base = [0usize; 3];
    let mut w_hi = [0.0f64; 3];
    for a in 0..axes {
        let f = (p[a] - spec.origin[a]) / spec.h - 0.5;
        let i0 = f.floor() as isize;
        let n = spec.shape[a] as isize;
        if i0 < 0 || i0 + 1 >= n {
            // The bracketing pair leaves the grid; fold into the edge cell.
            base[a] = i0.clamp(0, n - 1) as usize;
            w_hi[a] = 0.0;
        } else {
            base[a] = i0 as usize;
            w_hi[a] = f - f.floor();
        }
    }
    // Accumulate over the bracketing corners.
    let zs = if spec.dim == 2 { 1 } else { 2 };
    for dz in 0..zs {
        for dy in 0..2usize {
            for dx in 0..2usize {
                let mut i = base;
                let mut w = 1.0;
                for (a, d) in [(0, dx), (1, dy), (2, dz)] {
                    if a >= axes {
                        continue;
                    }
                    if d == 1 {
                        if w_hi[a] == 0.0 {
                            w = 0.0;
                            break;
                        }
                        i[a] = base[a] + 1;
                        w *= w_hi[a];
                    } else {
                        w *= 1.0 - w_hi[a];
                    }
                }
                if w > 0.0 {
                    out.data[spec.index(i)] += amount * w;
                }
            }
        }
    }
}

/// Fraction of the cell whose center sits at `rel` (relative to the ball
/// center) covered by the ball of radius `radius`. Boundary cells are
/// resolved by subcell counting whose resolution scales like `1/h`, keeping
/// the coverage error second order under refinement.
pub(crate) fn cell_coverage(dim: usize, h: f64, rel: [f64; 3], radius: f64) -> f64 {
    let axes = if dim == 2 { 2 } else { 3 };
    let half_diag = 0.5 * h * (axes as f64).sqrt();
    let mut d2 = 0.0;
    for a in 0..axes {
        d2 += rel[a] * rel[a];
    }
    let d = d2.sqrt();
    if d <= radius - half_diag {
        return 1.0;
    }
    if d >= radius + half_diag {
        return 0.0;
    }
    let s = ((0.4 / h).ceil() as usize).clamp(8, 32);
    let sub = h / s as f64;
    let szs = if dim == 2 { 1 } else { s };
    let mut covered = 0.0f64;
    let mut total = 0usize;
    for sz in 0..szs {
        for sy in 0..s {
            for sx in 0..s {
                let p = [
                    rel[0] - 0.5 * h + (sx as f64 + 0.5) * sub,
                    rel[1] - 0.5 * h + (sy as f64 + 0.5) * sub,
                    if dim == 2 {
                        0.0
                    } else {
                        rel[2] - 0.5 * h + (sz as f64 + 0.5) * sub
                    },
                ];
                let mut q = 0.0;
                for a in 0..axes {
                    q += p[a] * p[a];
                }
                total += 1;
                // Linear ramp across the subcell instead of a hard 0/1
                // count: binary counting on a regular lattice leaves
                // non-cancelling boundary noise (the lattice-point-counting
                // effect), while the symmetric ramp is exact for straight
                // axis-aligned cuts and its residual is odd in the signed
                // distance, so it integrates out along the circle.
                covered += (0.5 + (radius - q.sqrt()) / sub).clamp(0.0, 1.0);
            }
        }
    }
    covered / total as f64
}

fn rasterize_ball(out: &mut ScalarField, b: &Ball) -> Result<()> {
    let spec = out.spec;
    let h = spec.h;
    let axes = if spec.dim == 2 { 2 } else { 3 };

    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..axes {
        let flo = (b.center[a] - b.radius - spec.origin[a]) / h - 1.0;
        let fhi = (b.center[a] + b.radius - spec.origin[a]) / h + 1.0;
        if flo < -1.5 || fhi > spec.shape[a] as f64 + 0.5 {
            return Err(Error::Config(format!(
                "ball at {:?} radius {} reaches outside the grid",
                b.center, b.radius
            )));
        }
        lo[a] = flo.max(0.0) as usize;
        hi[a] = (fhi.ceil() as usize).min(spec.shape[a]);
    }
    if spec.dim == 2 {
        hi[2] = 1;
    }

    for kz in lo[2]..hi[2] {
        for ky in lo[1]..hi[1] {
            for kx in lo[0]..hi[0] {
                let i = [kx, ky, kz];
                let c = spec.center(i);
                let rel = [
                    c[0] - b.center[0],
                    c[1] - b.center[1],
                    if spec.dim == 2 { 0.0 } else { c[2] - b.center[2] },
                ];
                let coverage = cell_coverage(spec.dim, h, rel, b.radius);
                if coverage > 0.0 {
                    out.data[spec.index(i)] += b.density * coverage;
                }
            }
        }
    }
    Ok(())
}

fn rasterize_shell(out: &mut ScalarField, s: &Shell) -> Result<()> {
    let spec = out.spec;
    let h = spec.h;
    let inv_vol = 1.0 / spec.cell_volume();
    if spec.dim == 2 {
        let circumference = 2.0 * std::f64::consts::PI * s.radius;
        let m = ((8.0 * circumference / h).ceil() as usize).max(256);
        let node_mass = s.weight * circumference / m as f64;
        for j in 0..m {
            let th = (j as f64 + 0.5) / m as f64 * 2.0 * std::f64::consts::PI;
            let p = [
                s.center[0] + s.radius * th.cos(),
                s.center[1] + s.radius * th.sin(),
                0.0,
            ];
            if spec.pos_to_cell(p).is_none() {
                return Err(Error::Config(format!(
                    "sphere at {:?} radius {} reaches outside the grid",
                    s.center, s.radius
                )));
            }
            deposit_point(out, p, node_mass * inv_vol);
        }
    } else {
        let area = 4.0 * std::f64::consts::PI * s.radius * s.radius;
        let m = ((8.0 * area / (h * h)).ceil() as usize).max(1024);
        let node_mass = s.weight * area / m as f64;
        let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
        for j in 0..m {
            let z = 1.0 - 2.0 * (j as f64 + 0.5) / m as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let th = golden * j as f64;
            let p = [
                s.center[0] + s.radius * rho * th.cos(),
                s.center[1] + s.radius * rho * th.sin(),
                s.center[2] + s.radius * z,
            ];
            if spec.pos_to_cell(p).is_none() {
                return Err(Error::Config(format!(
                    "sphere at {:?} radius {} reaches outside the grid",
                    s.center, s.radius
                )));
            }
            deposit_point(out, p, node_mass * inv_vol);
        }
    }
    Ok(())
}

/// `-(Delta_h + k^2) u` with the 2N+1-point Laplacian and zero extension
/// beyond the grid faces.
pub fn helmholtz_apply(u: &ScalarField, med: &Medium) -> ScalarField {
    let spec = u.spec;
    let inv_h2 = 1.0 / (spec.h * spec.h);
    let k2 = med.k() * med.k();
    let axes = if spec.dim == 2 { 2 } else { 3 };
    let two_n = 2.0 * axes as f64;
    let mut out = ScalarField::zeros(spec);
    use rayon::prelude::*;
    out.data
        .par_iter_mut()
        .enumerate()
        .for_each(|(idx, o)| {
            let c = spec.decompose(idx);
            let mut nb_sum = 0.0;
            for a in 0..axes {
                for dir in [-1isize, 1] {
                    let v = c[a] as isize + dir;
                    if v < 0 || v >= spec.shape[a] as isize {
                        continue; // zero extension
                    }
                    let mut n = c;
                    n[a] = v as usize;
                    nb_sum += u.data[spec.index(n)];
                }
            }
            let center = u.data[idx];
            *o = (two_n * center - nb_sum) * inv_h2 - k2 * center;
        });
    out
}

/// Mollifies a measure into a density on `spec` by three successive
/// mean-value averages over balls of radius `delta / 3`, each normalised by
/// `c_k(delta / 3)`. For potentials of nonnegative measures this produces
/// `U^{mu_delta} <= U^{mu}` with equality off an inflated support, and the
/// potentials increase as `delta` decreases.
pub fn mollify(
    measure: &Measure,
    delta: f64,
    med: &Medium,
    spec: &GridSpec,
) -> Result<Measure> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    let t = delta / 3.0;
    if med.k() > 0.0 && t >= crate::radial::r_k(med) {
        return Err(Error::Domain(format!(
            "delta / 3 = {t} reaches the admissible radius bound; the averaging weight degenerates"
        )));
    }
    let norm = c_k(med, t)?;
    let raster = measure.rasterize(spec)?;
    let mut dens = raster;
    for _ in 0..3 {
        // ball_average yields the local mass in B_t(x); dividing by c_k(t)
        // makes it the mean-value average of the density.
        dens = potential::ball_average(&dens, t)?;
        for v in &mut dens.data {
            *v /= norm;
        }
    }
    Ok(Measure::from_density(dens))
}

/// Report of the sliding-ball solvability precheck.
#[derive(Clone, Copy, Debug)]
pub struct PrecheckReport {
    /// Largest mass the measure places in any ball of the test radius.
    pub sup_local_mass: f64,
    /// The threshold `rho_scale * c_k(radius)`.
    pub bound: f64,
    pub radius: f64,
    /// True when `sup_local_mass <= bound`: every ball can absorb its local
    /// mass at the allowed density, which guarantees a bounded sweep.
    pub holds: bool,
}

/// Slides a ball of radius `r` over the grid and compares the measure's
/// local masses against the capacity `rho_scale * c_k(r)`.
pub fn existence_precheck(
    measure: &Measure,
    r: f64,
    med: &Medium,
    spec: &GridSpec,
    rho_scale: f64,
) -> Result<PrecheckReport> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("test radius must be positive, got {r}")));
    }
    if med.k() > 0.0 && r > crate::radial::r_k(med) {
        return Err(Error::Domain(format!(
            "test radius {r} exceeds the admissible radius bound {}",
            crate::radial::r_k(med)
        )));
    }
    let dens = measure.rasterize(spec)?;
    let local = potential::ball_average(&dens, r)?;
    let sup_local_mass = local.data.iter().fold(0.0f64, |m, &v| m.max(v));
    let bound = rho_scale * c_k(med, r)?;
    Ok(PrecheckReport {
        sup_local_mass,
        bound,
        radius: r,
        holds: sup_local_mass <= bound,
    })
}
