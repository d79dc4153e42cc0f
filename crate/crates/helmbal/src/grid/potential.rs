//! Potential evaluation: exact closed forms for atoms, balls, and spheres;
//! kernel-table convolution (direct or FFT) for gridded densities.
//!
//! The density kernel is the fundamental solution sampled at cell-center
//! offsets, except the zero offset, which carries the exact self-integral
//! of the kernel over the equal-volume ball. This keeps the midpoint-rule
//! convolution second-order accurate down to the singular cell.

use super::{Mask, Measure, ScalarField, GridSpec, SINGULAR};
use crate::error::{Error, Result};
use crate::radial::{potential_ball, potential_sphere, psi, Medium};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// How density potentials are convolved.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PotentialMethod {
    /// Direct summation for small grids, FFT otherwise.
    Auto,
    Direct,
    Fft,
}

/// Grids up to this many cells use direct summation under
/// [`PotentialMethod::Auto`].
const DIRECT_CELL_LIMIT: usize = 32_768;

/// Relative distance (in units of `h`) below which an atom is considered to
/// sit on a cell center, making the potential there singular.
const SINGULAR_ATOM_TOL: f64 = 1e-9;

/// Potential of a measure on the grid. Returns the field and a mask of
/// singular cells (cells whose center coincides with an atom); the field
/// carries the [`SINGULAR`] sentinel there.
///
/// Atoms, balls, and spheres are evaluated by their closed forms; the
/// density component (if any) must live on the same grid and is convolved
/// with the sampled kernel.
pub fn potential(
    measure: &Measure,
    spec: &GridSpec,
    med: &Medium,
    method: PotentialMethod,
) -> Result<(ScalarField, Mask)> {
    measure.validate(spec.dim)?;
    if spec.dim != med.dim() {
        return Err(Error::Config(format!(
            "grid dimension {} does not match medium dimension {}",
            spec.dim,
            med.dim()
        )));
    }

    let mut field = if let Some(d) = &measure.density {
        if d.spec != *spec {
            return Err(Error::Config(
                "density potentials require the density to live on the target grid".into(),
            ));
        }
        potential_of_density(d, med, method)?
    } else {
        ScalarField::zeros(*spec)
    };

    let mut singular = Mask::empty(*spec);
    if measure.atoms.is_empty() && measure.balls.is_empty() && measure.shells.is_empty() {
        return Ok((field, singular));
    }

    let atom_tol = SINGULAR_ATOM_TOL * spec.h;
    let results: Vec<(f64, bool)> = (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let c = spec.center(spec.decompose(idx));
            let mut v = 0.0;
            let mut sing = false;
            for a in &measure.atoms {
                let r = spec.distance(c, a.point);
                if r < atom_tol {
                    sing = true;
                } else {
                    v += a.mass * psi(med, r).expect("r > 0");
                }
            }
            for b in &measure.balls {
                let r = spec.distance(c, b.center);
                v += b.density * potential_ball(med, b.radius, r).expect("radius > 0");
            }
            for s in &measure.shells {
                let r = spec.distance(c, s.center);
                v += s.weight * potential_sphere(med, s.radius, r).expect("radius > 0");
            }
            (v, sing)
        })
        .collect();
    for (idx, (v, sing)) in results.into_iter().enumerate() {
        if sing {
            field.data[idx] = SINGULAR;
            singular.data[idx] = true;
        } else {
            field.data[idx] += v;
        }
    }
    Ok((field, singular))
}

/// Potential of a gridded density by kernel convolution.
pub fn potential_of_density(
    dens: &ScalarField,
    med: &Medium,
    method: PotentialMethod,
) -> Result<ScalarField> {
    let spec = dens.spec;
    let table = kernel_table(&spec, med)?;
    convolve(dens, &table, method)
}

/// Potential of a measure at arbitrary points (on or off the grid), by
/// direct summation; the density part treats each cell as a point mass at
/// its center, with the same self-consistent kernel as the gridded path.
pub fn potential_at_points(
    measure: &Measure,
    med: &Medium,
    pts: &[[f64; 3]],
) -> Result<Vec<f64>> {
    let sources: Vec<([f64; 3], f64)> = match &measure.density {
        Some(d) => {
            let vol = d.spec.cell_volume();
            (0..d.spec.len())
                .filter(|&i| d.data[i] != 0.0)
                .map(|i| (d.spec.center(d.spec.decompose(i)), d.data[i] * vol))
                .collect()
        }
        None => Vec::new(),
    };
    let dim_axes = |p: [f64; 3], q: [f64; 3]| -> f64 {
        let axes = if med.dim() == 2 { 2 } else { 3 };
        let mut s = 0.0;
        for a in 0..axes {
            let d = p[a] - q[a];
            s += d * d;
        }
        s.sqrt()
    };
    let h = measure.density.as_ref().map(|d| d.spec.h).unwrap_or(0.0);
    let atom_tol = 1e-12 + SINGULAR_ATOM_TOL * h;
    pts.par_iter()
        .map(|&p| {
            let mut v = 0.0;
            for a in &measure.atoms {
                let r = dim_axes(p, a.point);
                if r <= atom_tol {
                    return Ok(SINGULAR);
                }
                v += a.mass * psi(med, r)?;
            }
            for b in &measure.balls {
                v += b.density * potential_ball(med, b.radius, dim_axes(p, b.center))?;
            }
            for s in &measure.shells {
                v += s.weight * potential_sphere(med, s.radius, dim_axes(p, s.center))?;
            }
            for &(c, mass) in &sources {
                let r = dim_axes(p, c);
                v += if r < 0.5 * h {
                    // The point sits inside the source cell: use the
                    // equal-volume-ball average, as the gridded kernel does.
                    mass * self_cell_value(med, h)?
                } else {
                    mass * psi(med, r)?
                };
            }
            Ok(v)
        })
        .collect()
}

/// Mean of the kernel over the equal-volume ball of a cell: the exact
/// value `U^{ball}(0) / vol` for the ball with `vol = h^dim`.
fn self_cell_value(med: &Medium, h: f64) -> Result<f64> {
    let dim = med.dim() as f64;
    let kappa = if med.dim() == 2 {
        std::f64::consts::PI
    } else {
        4.0 * std::f64::consts::PI / 3.0
    };
    let a = h / kappa.powf(1.0 / dim);
    Ok(potential_ball(med, a, 0.0)? / h.powi(med.dim() as i32))
}

/// Kernel sampled at all nonnegative cell offsets, with the exact
/// self-cell average at offset zero. Indexed like the grid itself.
fn kernel_table(spec: &GridSpec, med: &Medium) -> Result<Vec<f64>> {
    let h = spec.h;
    let self_value = self_cell_value(med, h)?;
    let table: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let d = spec.decompose(idx);
            if d == [0, 0, 0] {
                return self_value;
            }
            let mut s = 0.0;
            let axes = if spec.dim == 2 { 2 } else { 3 };
            for a in 0..axes {
                let x = d[a] as f64 * h;
                s += x * x;
            }
            psi(med, s.sqrt()).expect("offset > 0")
        })
        .collect();
    Ok(table)
}

/// Convolves `dens * h^dim` with a symmetric kernel given by its table of
/// nonnegative offsets.
fn convolve(dens: &ScalarField, table: &[f64], method: PotentialMethod) -> Result<ScalarField> {
    let use_direct = match method {
        PotentialMethod::Direct => true,
        PotentialMethod::Fft => false,
        PotentialMethod::Auto => dens.spec.len() <= DIRECT_CELL_LIMIT,
    };
    if use_direct {
        convolve_direct(dens, table)
    } else {
        convolve_fft(dens, table)
    }
}

fn convolve_direct(dens: &ScalarField, table: &[f64]) -> Result<ScalarField> {
    let spec = dens.spec;
    let vol = spec.cell_volume();
    let sources: Vec<([usize; 3], f64)> = (0..spec.len())
        .filter(|&i| dens.data[i] != 0.0)
        .map(|i| (spec.decompose(i), dens.data[i] * vol))
        .collect();
    let mut out = ScalarField::zeros(spec);
    out.data
        .par_iter_mut()
        .enumerate()
        .for_each(|(idx, o)| {
            let c = spec.decompose(idx);
            let mut v = 0.0;
            for &(s, mass) in &sources {
                let d = [
                    c[0].abs_diff(s[0]),
                    c[1].abs_diff(s[1]),
                    c[2].abs_diff(s[2]),
                ];
                v += mass * table[spec.index(d)];
            }
            *o = v;
        });
    Ok(out)
}

fn convolve_fft(dens: &ScalarField, table: &[f64]) -> Result<ScalarField> {
    let spec = dens.spec;
    let n = spec.shape;
    let mut dims = [1usize; 3];
    for a in 0..3 {
        dims[a] = if n[a] == 1 { 1 } else { good_fft_size(2 * n[a] - 1) };
    }
    let total = dims[0] * dims[1] * dims[2];
    let vol = spec.cell_volume();

    let index = |i: [usize; 3]| -> usize { (i[2] * dims[1] + i[1]) * dims[0] + i[0] };

    // Kernel, periodised: index i represents offset i (i <= dims/2) or
    // i - dims (negative); offsets beyond the data extent are never touched
    // by the linear convolution, so they are left at zero.
    let mut kbuf = vec![Complex::new(0.0, 0.0); total];
    for iz in 0..dims[2] {
        let oz = wrap_offset(iz, dims[2]);
        if oz.abs() as usize >= n[2] {
            continue;
        }
        for iy in 0..dims[1] {
            let oy = wrap_offset(iy, dims[1]);
            if oy.abs() as usize >= n[1] {
                continue;
            }
            for ix in 0..dims[0] {
                let ox = wrap_offset(ix, dims[0]);
                if ox.abs() as usize >= n[0] {
                    continue;
                }
                let off = [ox.unsigned_abs(), oy.unsigned_abs(), oz.unsigned_abs()];
                kbuf[index([ix, iy, iz])] = Complex::new(table[spec.index(off)], 0.0);
            }
        }
    }

    let mut dbuf = vec![Complex::new(0.0, 0.0); total];
    for iz in 0..n[2] {
        for iy in 0..n[1] {
            for ix in 0..n[0] {
                let v = dens.data[spec.index([ix, iy, iz])];
                if v != 0.0 {
                    dbuf[index([ix, iy, iz])] = Complex::new(v * vol, 0.0);
                }
            }
        }
    }

    fft_3d(&mut kbuf, dims, false);
    fft_3d(&mut dbuf, dims, false);
    let scale = 1.0 / total as f64;
    dbuf.par_iter_mut().zip(kbuf.par_iter()).for_each(|(d, k)| {
        *d = *d * *k * scale;
    });
    drop(kbuf);
    fft_3d(&mut dbuf, dims, true);

    let mut out = ScalarField::zeros(spec);
    for iz in 0..n[2] {
        for iy in 0..n[1] {
            for ix in 0..n[0] {
                out.data[spec.index([ix, iy, iz])] = dbuf[index([ix, iy, iz])].re;
            }
        }
    }
    Ok(out)
}

fn wrap_offset(i: usize, dim: usize) -> isize {
    if i <= dim / 2 {
        i as isize
    } else {
        i as isize - dim as isize
    }
}

/// Smallest 5-smooth size >= `min` (FFT lengths with only factors 2, 3, 5).
fn good_fft_size(min: usize) -> usize {
    let mut n = min;
    loop {
        let mut m = n;
        for f in [2usize, 3, 5] {
            while m % f == 0 {
                m /= f;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

/// In-place complex FFT over each axis of a row-major (x-fastest) cube.
fn fft_3d(data: &mut [Complex<f64>], dims: [usize; 3], inverse: bool) {
    let mut planner = FftPlanner::new();
    for axis in 0..3 {
        if dims[axis] == 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(dims[axis])
        } else {
            planner.plan_fft_forward(dims[axis])
        };
        let len = dims[axis];
        match axis {
            0 => {
                data.par_chunks_mut(len).for_each_init(
                    || vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()],
                    |scratch, row| fft.process_with_scratch(row, scratch),
                );
            }
            1 => {
                let (nx, ny) = (dims[0], dims[1]);
                data.par_chunks_mut(nx * ny).for_each_init(
                    || {
                        (
                            vec![Complex::new(0.0, 0.0); ny],
                            vec![Complex::new(0.0, 0.0); ny],
                            vec![Complex::new(0.0, 0.0); fft.get_outofplace_scratch_len()],
                        )
                    },
                    |(col, out, scratch), slab| {
                        for x in 0..nx {
                            for y in 0..ny {
                                col[y] = slab[y * nx + x];
                            }
                            fft.process_outofplace_with_scratch(col, out, scratch);
                            for y in 0..ny {
                                slab[y * nx + x] = out[y];
                            }
                        }
                    },
                );
            }
            _ => {
                let (nx, ny, nz) = (dims[0], dims[1], dims[2]);
                let plane = nx * ny;
                // Borrow the whole buffer per (y) stripe: gather z-columns.
                let data_ptr = SendPtr(data.as_mut_ptr());
                (0..ny).into_par_iter().for_each_init(
                    || {
                        (
                            vec![Complex::new(0.0, 0.0); nz],
                            vec![Complex::new(0.0, 0.0); nz],
                            vec![Complex::new(0.0, 0.0); fft.get_outofplace_scratch_len()],
                        )
                    },
                    |(col, out, scratch), y| {
                        let base = data_ptr;
                        for x in 0..nx {
                            // Safety: distinct (x, y) pairs address disjoint
                            // z-columns, so parallel stripes never alias.
                            unsafe {
                                for z in 0..nz {
                                    col[z] = *base.0.add(z * plane + y * nx + x);
                                }
                            }
                            fft.process_outofplace_with_scratch(col, out, scratch);
                            unsafe {
                                for z in 0..nz {
                                    *base.0.add(z * plane + y * nx + x) = out[z];
                                }
                            }
                        }
                    },
                );
            }
        }
    }
}

#[derive(Copy, Clone)]
struct SendPtr(*mut Complex<f64>);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

/// Integral of `f` over the ball of radius `t` around each cell center
/// (convolution with the ball indicator, coverage-antialiased). The result
/// at `x` is the mass `f` places in `B_t(x)`.
pub(crate) fn ball_average(f: &ScalarField, t: f64) -> Result<ScalarField> {
    let spec = f.spec;
    let h = spec.h;
    let reach = (t / h).ceil() as usize + 1;
    let table: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let d = spec.decompose(idx);
            if d[0] > reach || d[1] > reach || d[2] > reach {
                return 0.0;
            }
            let rel = [d[0] as f64 * h, d[1] as f64 * h, d[2] as f64 * h];
            super::cell_coverage(spec.dim, h, rel, t)
        })
        .collect();
    // The convolution multiplies sources by the cell volume, so a plain
    // coverage kernel yields exactly the covered-mass integral.
    convolve(f, &table, PotentialMethod::Auto)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Measure;
    use std::f64::consts::PI;

    #[test]
    fn direct_and_fft_paths_agree() {
        let spec = GridSpec::new(2, [-1.0, -1.0, 0.0], [40, 40, 1], 0.05).unwrap();
        let med = Medium::new(2, 1.0).unwrap();
        let mut dens = ScalarField::zeros(spec);
        // Deterministic scattered density.
        for idx in 0..spec.len() {
            let c = spec.decompose(idx);
            if (c[0] * 7 + c[1] * 13) % 11 == 0 {
                dens.data[idx] = 0.3 + 0.01 * (c[0] as f64) - 0.007 * (c[1] as f64);
            }
        }
        let a = potential_of_density(&dens, &med, PotentialMethod::Direct).unwrap();
        let b = potential_of_density(&dens, &med, PotentialMethod::Fft).unwrap();
        let mut worst = 0.0f64;
        for i in 0..spec.len() {
            worst = worst.max((a.data[i] - b.data[i]).abs());
        }
        assert!(worst < 1e-10, "direct vs fft: {worst:.3e}");
    }

    #[test]
    fn gridded_ball_potential_matches_closed_form() {
        // N = 2, k = 1: rasterize the unit-density ball of radius 0.7 and
        // compare off-support against the exact potential.
        let spec = GridSpec::new(2, [-1.6, -1.6, 0.0], [160, 160, 1], 0.02).unwrap();
        let med = Medium::new(2, 1.0).unwrap();
        let mu = Measure::from_ball([0.0; 3], 0.7, 1.0);
        let dens = mu.rasterize(&spec).unwrap();
        let u = potential_of_density(&dens, &med, PotentialMethod::Fft).unwrap();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for idx in 0..spec.len() {
            let c = spec.center(spec.decompose(idx));
            let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
            if r > 0.9 && r < 1.4 {
                let want = crate::radial::potential_ball(&med, 0.7, r).unwrap();
                worst = worst.max((u.data[idx] - want).abs());
                scale = scale.max(want.abs());
            }
        }
        assert!(worst < 1e-3 * scale.max(0.05), "worst {worst:.3e} scale {scale:.3e}");
    }

    #[test]
    fn gridded_potential_refines_at_second_order() {
        // Sample inside the support, where the self-cell treatment drives
        // the error; far-field errors are too small to measure an order.
        let med = Medium::new(2, 1.0).unwrap();
        let samples = [[0.2_f64, 0.1, 0.0], [-0.3, 0.35, 0.0], [0.55, -0.2, 0.0]];
        let mut errs = Vec::new();
        for n in [40usize, 80, 160] {
            let h = 3.2 / n as f64;
            let spec = GridSpec::new(2, [-1.6, -1.6, 0.0], [n, n, 1], h).unwrap();
            let mu = Measure::from_ball([0.0; 3], 0.7, 1.0);
            let dens = mu.rasterize(&spec).unwrap();
            let u = potential_of_density(&dens, &med, PotentialMethod::Auto).unwrap();
            let mut worst = 0.0f64;
            for &p in &samples {
                let cell = spec.pos_to_cell(p).unwrap();
                let c = spec.center(cell);
                let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
                let want = crate::radial::potential_ball(&med, 0.7, r).unwrap();
                worst = worst.max((u.data[spec.index(cell)] - want).abs());
            }
            errs.push(worst);
        }
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!(o1 > 1.8 && o2 > 1.8, "orders {o1:.2}, {o2:.2} (errors {errs:?})");
    }

    #[test]
    fn atom_potential_is_exact_and_singular_cells_are_flagged() {
        let spec = GridSpec::new(2, [-1.0, -1.0, 0.0], [20, 20, 1], 0.1).unwrap();
        let med = Medium::new(2, 1.0).unwrap();
        // On a cell center: flagged singular.
        let center = spec.center([10, 10, 0]);
        let mu = Measure::from_atom(center, 2.0);
        let (u, sing) = potential(&mu, &spec, &med, PotentialMethod::Auto).unwrap();
        assert_eq!(sing.count(), 1);
        assert!(u.data[spec.index([10, 10, 0])] >= SINGULAR);
        // Off-center: exact kernel values everywhere.
        let mu = Measure::from_atom([0.013, -0.041, 0.0], 2.0);
        let (u, sing) = potential(&mu, &spec, &med, PotentialMethod::Auto).unwrap();
        assert_eq!(sing.count(), 0);
        for idx in [0usize, 57, 200, 399] {
            let c = spec.center(spec.decompose(idx));
            let r = ((c[0] - 0.013).powi(2) + (c[1] + 0.041).powi(2)).sqrt();
            let want = 2.0 * crate::radial::psi(&med, r).unwrap();
            assert!((u.data[idx] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn shell_potential_uses_closed_form() {
        let spec = GridSpec::new(3, [-2.0; 3], [40, 40, 40], 0.1).unwrap();
        let med = Medium::new(3, 1.0).unwrap();
        let mu = Measure::from_shell([0.0; 3], 1.0, 1.3);
        let (u, _) = potential(&mu, &spec, &med, PotentialMethod::Auto).unwrap();
        for idx in [0usize, 33333, 60000] {
            let c = spec.center(spec.decompose(idx));
            let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            let want = 1.3 * crate::radial::potential_sphere(&med, 1.0, r).unwrap();
            assert!((u.data[idx] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn potential_is_linear_in_the_measure() {
        let spec = GridSpec::new(2, [-1.0, -1.0, 0.0], [24, 24, 1], 0.09).unwrap();
        let med = Medium::new(2, 0.8).unwrap();
        let a = Measure::from_atom([0.11, 0.07, 0.0], 1.0);
        let b = Measure::from_ball([-0.3, 0.2, 0.0], 0.4, 0.6);
        let mut ab = a.clone();
        ab.balls = b.balls.clone();
        let (ua, _) = potential(&a, &spec, &med, PotentialMethod::Auto).unwrap();
        let (ub, _) = potential(&b, &spec, &med, PotentialMethod::Auto).unwrap();
        let (uab, _) = potential(&ab, &spec, &med, PotentialMethod::Auto).unwrap();
        for i in 0..spec.len() {
            assert!((uab.data[i] - ua.data[i] - ub.data[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn off_grid_points_match_on_grid_values() {
        let spec = GridSpec::new(2, [-1.2, -1.2, 0.0], [48, 48, 1], 0.05).unwrap();
        let med = Medium::new(2, 1.0).unwrap();
        let mu = Measure::from_ball([0.0; 3], 0.5, 1.0);
        let dens = mu.rasterize(&spec).unwrap();
        let gridded = Measure::from_density(dens);
        let (u, _) = potential(&gridded, &spec, &med, PotentialMethod::Direct).unwrap();
        let cells = [[40usize, 24, 0], [5, 5, 0]];
        let pts: Vec<[f64; 3]> = cells.iter().map(|&c| spec.center(c)).collect();
        let vals = potential_at_points(&gridded, &med, &pts).unwrap();
        for (i, &c) in cells.iter().enumerate() {
            assert!((vals[i] - u.data[spec.index(c)]).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_sizes_are_smooth() {
        assert_eq!(good_fft_size(127), 128);
        assert_eq!(good_fft_size(255), 256);
        assert_eq!(good_fft_size(319), 320);
        assert_eq!(good_fft_size(37), 40);
        assert_eq!(good_fft_size(1), 1);
    }

    #[test]
    fn ball_average_matches_local_mass() {
        let spec = GridSpec::new(2, [-1.0, -1.0, 0.0], [40, 40, 1], 0.05).unwrap();
        let mut f = ScalarField::zeros(spec);
        // Unit mass at the center cell.
        let c = spec.index([20, 20, 0]);
        f.data[c] = 1.0 / spec.cell_volume();
        let avg = ball_average(&f, 0.4).unwrap();
        // Ball around the mass catches all of it; far cells none.
        assert!((avg.data[c] - 1.0).abs() < 1e-12);
        assert_eq!(avg.data[spec.index([2, 2, 0])], 0.0);
        // Constant density: local mass equals density times ball area.
        let g = ScalarField::from_fn(spec, |_| 2.0);
        let avg = ball_average(&g, 0.3).unwrap();
        let want = 2.0 * PI * 0.09;
        let mid = avg.data[spec.index([20, 20, 0])];
        assert!((mid - want).abs() / want < 2e-3, "{mid} vs {want}");
    }
}
