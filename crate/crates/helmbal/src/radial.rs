//! Closed-form radial theory for the operator `Delta + k^2`.
//!
//! Everything here is exact (up to root finding at machine precision) and is
//! what the grid solvers are verified against. The central objects, for a
//! medium of dimension `N` in `{2, 3}` and wavenumber `k >= 0`, with
//! `alpha = (N-2)/2`:
//!
//! * [`psi`]: the radial profile of the fundamental solution,
//!   `psi(r) = -(1/4) (k/(2 pi))^alpha r^{-alpha} Y_alpha(k r)`, which
//!   reduces to `cos(kr)/(4 pi r)` for `N = 3` and `-Y_0(kr)/4` for `N = 2`,
//!   and to the Newtonian/logarithmic kernels at `k = 0`.
//! * [`c_k`] and [`d_k`]: the weighted ball mass
//!   `c_k(r) = (2 pi r / k)^{N/2} J_{N/2}(k r)` and sphere mass
//!   `d_k(r) = (2 pi r)^{N/2} J_alpha(k r) / k^alpha`. They satisfy
//!   `c_k' = d_k` and converge to the ball volume and sphere area as
//!   `k -> 0`. A uniform unit density on a ball of radius `t` has exterior
//!   potential `c_k(t) psi(r)`; a unit surface density on the sphere has
//!   exterior potential `d_k(t) psi(r)`.
//! * [`r_k`]: the largest radius to which saturated balls can grow,
//!   `j_{alpha,1} / k` (the first positive zero of `d_k`). Beyond it the
//!   operator loses its maximum principle on balls: the ground energy of
//!   `B_r` is `(j_{alpha,1} / r)^2`, which drops below `k^2` exactly at
//!   `r = r_k`.
//! * [`null_ball_radius`]: the first zero of `c_k`, namely `j_{N/2,1} / k`.
//!   Since the exterior potential of the saturated ball `B_t` is
//!   `c_k(t) psi`, this is the radius at which that ball becomes invisible
//!   from outside. Note it is strictly larger than `r_k`; at `r_k` itself
//!   `c_k(r_k) > 0` and the exterior potential does not vanish.
//!
//! Sweeps of radially symmetric measures have closed solutions:
//! [`point_mass_radius`] and [`ball_sweep_radius`] solve `c_k(r) = mass`
//! on the increasing branch, and [`sphere_sweep`] resolves the sweep of a
//! weighted sphere `|x| = T` into a saturated ball or annulus through the
//! auxiliary profile [`f_t`] and its critical points.

use crate::error::{Error, Result};
use crate::specfun::{
    bessel_j, bessel_y, bisect, first_positive_zero, Order,
};
use std::f64::consts::PI;

/// Ambient dimension and wavenumber. `k = 0` selects the classical
/// Newtonian (`N = 3`) or logarithmic (`N = 2`) setting.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Medium {
    dim: usize,
    k: f64,
}

impl Medium {
    pub fn new(dim: usize, k: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {dim}")));
        }
        if !k.is_finite() || k < 0.0 {
            return Err(Error::Config(format!("wavenumber must be finite and >= 0, got {k}")));
        }
        Ok(Self { dim, k })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `(N - 2) / 2`, the order of the Bessel factor in the fundamental
    /// solution.
    pub fn alpha(&self) -> f64 {
        (self.dim as f64 - 2.0) / 2.0
    }

    pub(crate) fn order_alpha(&self) -> Order {
        if self.dim == 2 {
            Order::Zero
        } else {
            Order::Half
        }
    }

    pub(crate) fn order_half_dim(&self) -> Order {
        if self.dim == 2 {
            Order::One
        } else {
            Order::ThreeHalves
        }
    }

    /// Volume of a ball of radius `r`.
    pub fn ball_volume(&self, r: f64) -> f64 {
        if self.dim == 2 {
            PI * r * r
        } else {
            4.0 * PI / 3.0 * r * r * r
        }
    }

    /// Surface area of a sphere of radius `r`.
    pub fn sphere_area(&self, r: f64) -> f64 {
        if self.dim == 2 {
            2.0 * PI * r
        } else {
            4.0 * PI * r * r
        }
    }
}

/// `r^{-alpha} J_alpha(k r)`, the radial profile that is regular at the
/// origin; continuous value `(k/2)^alpha / Gamma(alpha + 1)` at `r = 0`.
fn j_profile(med: &Medium, r: f64) -> Result<f64> {
    let k = med.k;
    if r == 0.0 {
        return Ok(if med.dim == 2 {
            1.0
        } else {
            // (k/2)^{1/2} / Gamma(3/2) = sqrt(2 k / pi)
            (2.0 * k / PI).sqrt()
        });
    }
    Ok(r.powf(-med.alpha()) * bessel_j(med.order_alpha(), k * r)?)
}

/// `r^{-alpha} Y_alpha(k r)`; singular at the origin.
fn y_profile(med: &Medium, r: f64) -> Result<f64> {
    Ok(r.powf(-med.alpha()) * bessel_y(med.order_alpha(), med.k * r)?)
}

/// Radial profile of the fundamental solution; `r > 0`.
pub fn psi(med: &Medium, r: f64) -> Result<f64> {
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::Domain(format!("psi needs r > 0, got {r}")));
    }
    let k = med.k;
    if k == 0.0 {
        return Ok(if med.dim == 2 {
            -r.ln() / (2.0 * PI)
        } else {
            1.0 / (4.0 * PI * r)
        });
    }
    let scale = -0.25 * (k / (2.0 * PI)).powf(med.alpha());
    Ok(scale * y_profile(med, r)?)
}

/// Weighted ball mass `c_k(r)`; the total mass a saturated region of unit
/// density and radius `r` carries. Increasing on `[0, r_k]`, equal to the
/// ball volume when `k = 0`.
pub fn c_k(med: &Medium, r: f64) -> Result<f64> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Domain(format!("c_k needs r >= 0, got {r}")));
    }
    let k = med.k;
    if k == 0.0 {
        return Ok(med.ball_volume(r));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let n2 = med.dim as f64 / 2.0;
    Ok((2.0 * PI * r / k).powf(n2) * bessel_j(med.order_half_dim(), k * r)?)
}

/// Weighted sphere mass `d_k(r) = c_k'(r)`; equal to the sphere area when
/// `k = 0`.
pub fn d_k(med: &Medium, r: f64) -> Result<f64> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Domain(format!("d_k needs r >= 0, got {r}")));
    }
    let k = med.k;
    if k == 0.0 {
        return Ok(med.sphere_area(r));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let n2 = med.dim as f64 / 2.0;
    Ok((2.0 * PI * r).powf(n2) * bessel_j(med.order_alpha(), k * r)? / k.powf(med.alpha()))
}

/// Largest admissible saturated-ball radius, `j_{alpha,1} / k`; infinite
/// when `k = 0`.
pub fn r_k(med: &Medium) -> f64 {
    if med.k == 0.0 {
        f64::INFINITY
    } else {
        first_positive_zero(med.order_alpha()) / med.k
    }
}

/// First zero of `c_k`, i.e. `j_{N/2,1} / k`: the saturated ball of this
/// radius has identically vanishing exterior potential. Infinite when
/// `k = 0` (a classical ball is never invisible).
pub fn null_ball_radius(med: &Medium) -> f64 {
    if med.k == 0.0 {
        f64::INFINITY
    } else {
        first_positive_zero(med.order_half_dim()) / med.k
    }
}

/// Potential of a unit surface density on the sphere `|x| = t`, evaluated
/// at radius `r`. Continuous across `r = t`; the exterior branch equals
/// `d_k(t) psi(r)`.
pub fn potential_sphere(med: &Medium, t: f64, r: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) || !(r.is_finite() && r >= 0.0) {
        return Err(Error::Domain(format!(
            "potential_sphere needs t > 0 and r >= 0, got t = {t}, r = {r}"
        )));
    }
    let k = med.k;
    if k == 0.0 {
        return Ok(match (med.dim, r <= t) {
            (2, true) => -t * t.ln(),
            (2, false) => -t * r.ln(),
            (_, true) => t,
            (_, false) => t * t / r,
        });
    }
    let n2 = med.dim as f64 / 2.0;
    if r <= t {
        let b = -(PI / 2.0) * t.powf(n2) * bessel_y(med.order_alpha(), k * t)?;
        Ok(b * j_profile(med, r)?)
    } else {
        let b = -(PI / 2.0) * t.powf(n2) * bessel_j(med.order_alpha(), k * t)?;
        Ok(b * y_profile(med, r)?)
    }
}

/// Potential of the unit density on the ball `|x| <= t`, evaluated at
/// radius `r`. The exterior branch is `c_k(t) psi(r)`; the interior branch
/// solves `(Delta + k^2) U = -1`.
pub fn potential_ball(med: &Medium, t: f64, r: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) || !(r.is_finite() && r >= 0.0) {
        return Err(Error::Domain(format!(
            "potential_ball needs t > 0 and r >= 0, got t = {t}, r = {r}"
        )));
    }
    let k = med.k;
    if k == 0.0 {
        return Ok(match (med.dim, r <= t) {
            (2, true) => (t * t - r * r) / 4.0 - t * t / 2.0 * t.ln(),
            (2, false) => -t * t / 2.0 * r.ln(),
            (_, true) => (3.0 * t * t - r * r) / 6.0,
            (_, false) => t * t * t / (3.0 * r),
        });
    }
    if r <= t {
        let n2 = med.dim as f64 / 2.0;
        let a = -(PI / (2.0 * k)) * t.powf(n2) * bessel_y(med.order_half_dim(), k * t)?;
        Ok(a * j_profile(med, r)? - 1.0 / (k * k))
    } else {
        Ok(c_k(med, t)? * psi(med, r)?)
    }
}

/// Radius of the saturated ball produced by sweeping a point mass `c`, or
/// `None` when `c` exceeds the capacity `c_k(r_k)` and no saturated
/// configuration exists.
pub fn point_mass_radius(med: &Medium, c: f64) -> Result<Option<f64>> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::Domain(format!("point mass must be positive, got {c}")));
    }
    if med.k == 0.0 {
        return Ok(Some((c / med.ball_volume(1.0)).powf(1.0 / med.dim as f64)));
    }
    let rk = r_k(med);
    let cmax = c_k(med, rk)?;
    if c > cmax {
        return Ok(None);
    }
    let f = |r: f64| c_k(med, r).expect("r in (0, r_k)") - c;
    Ok(Some(bisect(f, rk * 1e-12, rk)))
}

/// Radius of the saturated ball produced by sweeping `c` times the unit
/// density on a ball of radius `big_r`, for `c > 1`. `None` when the mass
/// exceeds the capacity `c_k(r_k)` (including `big_r >= r_k`).
pub fn ball_sweep_radius(med: &Medium, c: f64, big_r: f64) -> Result<Option<f64>> {
    if !c.is_finite() || c <= 1.0 {
        return Err(Error::Domain(format!("density factor must exceed 1, got {c}")));
    }
    if !big_r.is_finite() || big_r <= 0.0 {
        return Err(Error::Domain(format!("ball radius must be positive, got {big_r}")));
    }
    if med.k == 0.0 {
        return Ok(Some(big_r * c.powf(1.0 / med.dim as f64)));
    }
    let rk = r_k(med);
    if big_r >= rk {
        return Ok(None);
    }
    let target = c * c_k(med, big_r)?;
    if target > c_k(med, rk)? {
        return Ok(None);
    }
    let f = |r: f64| c_k(med, r).expect("r in [big_r, r_k]") - target;
    Ok(Some(bisect(f, big_r, rk)))
}

fn gamma_half_dim(med: &Medium) -> f64 {
    if med.dim == 2 {
        1.0
    } else {
        PI.sqrt() / 2.0
    }
}

/// The profile whose level sets describe sphere sweeps:
/// `f_T(xi) = xi^{N/2} { J_{N/2}(k xi) Y_alpha(k T) - Y_{N/2}(k xi) J_alpha(k T) }`,
/// extended continuously to `xi = 0`. It peaks at `xi = T` with value
/// `2 T^alpha / (pi k)`. Requires `k > 0`.
pub fn f_t(med: &Medium, big_t: f64, xi: f64) -> Result<f64> {
    if med.k == 0.0 {
        return Err(Error::Domain("f_t is defined for k > 0 only".into()));
    }
    if !(big_t.is_finite() && big_t > 0.0) || !(xi.is_finite() && xi >= 0.0) {
        return Err(Error::Domain(format!(
            "f_t needs T > 0 and xi >= 0, got T = {big_t}, xi = {xi}"
        )));
    }
    let k = med.k;
    let ja_t = bessel_j(med.order_alpha(), k * big_t)?;
    if xi == 0.0 {
        let n2 = med.dim as f64 / 2.0;
        return Ok(ja_t * gamma_half_dim(med) / PI * (2.0 / k).powf(n2));
    }
    let ya_t = bessel_y(med.order_alpha(), k * big_t)?;
    let n2 = med.dim as f64 / 2.0;
    Ok(xi.powf(n2)
        * (bessel_j(med.order_half_dim(), k * xi)? * ya_t
            - bessel_y(med.order_half_dim(), k * xi)? * ja_t))
}

/// `d/dr f_T(r) = k r^{N/2} { J_alpha(k r) Y_alpha(k T) - Y_alpha(k r) J_alpha(k T) }`;
/// requires `k > 0` and `r > 0`.
pub fn f_t_prime(med: &Medium, big_t: f64, r: f64) -> Result<f64> {
    if med.k == 0.0 {
        return Err(Error::Domain("f_t_prime is defined for k > 0 only".into()));
    }
    if !(big_t.is_finite() && big_t > 0.0) || !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!(
            "f_t_prime needs T > 0 and r > 0, got T = {big_t}, r = {r}"
        )));
    }
    let k = med.k;
    let n2 = med.dim as f64 / 2.0;
    Ok(k * r.powf(n2) * cross_profile(med, r, big_t)?)
}

/// `J_alpha(k r) Y_alpha(k T) - Y_alpha(k r) J_alpha(k T)`, the sign factor
/// of `f_T'`.
fn cross_profile(med: &Medium, r: f64, big_t: f64) -> Result<f64> {
    let k = med.k;
    let o = med.order_alpha();
    Ok(bessel_j(o, k * r)? * bessel_y(o, k * big_t)?
        - bessel_y(o, k * r)? * bessel_j(o, k * big_t)?)
}

/// Barrier profile with a double zero at `r = xi`:
/// `w_xi(r) = 1 - (pi k / 2) r^{-alpha} f_r(xi)` satisfies
/// `(Delta + k^2) w_xi = k^2`, `w_xi(xi) = w_xi'(xi) = 0`. Requires
/// `k > 0` and `r > 0`.
pub fn w_xi(med: &Medium, xi: f64, r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("w_xi needs r > 0, got {r}")));
    }
    let k = med.k;
    Ok(1.0 - (PI * k / 2.0) * r.powf(-med.alpha()) * f_t(med, r, xi)?)
}

/// `d/dr w_xi(r)`.
pub fn w_xi_prime(med: &Medium, xi: f64, r: f64) -> Result<f64> {
    if med.k == 0.0 {
        return Err(Error::Domain("w_xi_prime is defined for k > 0 only".into()));
    }
    if !(xi.is_finite() && xi > 0.0) || !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!(
            "w_xi_prime needs xi > 0 and r > 0, got xi = {xi}, r = {r}"
        )));
    }
    let k = med.k;
    let o = med.order_half_dim();
    let n2 = med.dim as f64 / 2.0;
    Ok((PI * k * k / 2.0)
        * xi.powf(n2)
        * r.powf(-med.alpha())
        * (bessel_j(o, k * xi)? * bessel_y(o, k * r)?
            - bessel_y(o, k * xi)? * bessel_j(o, k * r)?))
}

/// Dirichlet ground energy of a ball of radius `r`: `(j_{alpha,1} / r)^2`.
pub fn lambda1_ball(med: &Medium, r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("lambda1_ball needs r > 0, got {r}")));
    }
    let j = first_positive_zero(med.order_alpha());
    Ok((j / r) * (j / r))
}

/// Dirichlet ground energy of the annulus `a < |x| < b`: the square of the
/// first zero of `s -> J_alpha(s a) Y_alpha(s b) - Y_alpha(s a) J_alpha(s b)`.
pub fn lambda1_annulus(med: &Medium, a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && 0.0 < a && a < b) {
        return Err(Error::Domain(format!(
            "lambda1_annulus needs 0 < a < b, got a = {a}, b = {b}"
        )));
    }
    let o = med.order_alpha();
    let cross = |s: f64| {
        bessel_j(o, s * a).expect("s a > 0") * bessel_y(o, s * b).expect("s b > 0")
            - bessel_y(o, s * a).expect("s a > 0") * bessel_j(o, s * b).expect("s b > 0")
    };
    // The first zero sits near pi / (b - a) (exactly there for N = 3); zeros
    // are spaced by about the same amount, so a 1/16-of-spacing scan is safe.
    let spacing = PI / (b - a);
    let step = spacing / 16.0;
    let mut lo = step * 1e-3;
    let mut flo = cross(lo);
    for n in 1..=256 {
        let hi = step * n as f64;
        let fhi = cross(hi);
        if flo * fhi <= 0.0 {
            let s = bisect(cross, lo, hi);
            return Ok(s * s);
        }
        lo = hi;
        flo = fhi;
    }
    Err(Error::Solver(format!(
        "no annulus ground mode found below s = {:.3e}",
        step * 256.0
    )))
}

/// Exact record of a radially symmetric sphere sweep.
#[derive(Clone, Copy, Debug)]
pub struct RadialSweep {
    /// Inner radius of the saturated region; `0` for a full ball.
    pub inner: f64,
    /// Outer radius of the saturated region.
    pub outer: f64,
    /// Surface density of the swept sphere measure producing this region.
    pub weight: f64,
    /// Level parameter the radii solve `f_T = level` for.
    pub level: f64,
    /// Dirichlet ground energy of the region.
    pub lambda1: f64,
}

impl RadialSweep {
    pub fn is_ball(&self) -> bool {
        self.inner == 0.0
    }
}

/// Outcome of [`sphere_sweep`].
#[derive(Clone, Copy, Debug)]
pub enum RadialOutcome {
    Feasible(RadialSweep),
    /// The level cuts no bounded region around the sphere.
    NoBoundedRegion,
    /// A candidate region exists but its ground energy falls below `k^2`,
    /// so no saturated solution is admissible on it.
    GroundStateBelow { lambda1: f64 },
}

/// Resolves the sweep of a weighted sphere `|x| = T` at level `t`.
///
/// `f_T` rises to its peak `2 T^alpha / (pi k)` at `xi = T` between the two
/// critical radii adjacent to `T`. A level `t` strictly below the peak cuts
/// the profile at `xi_1 < T < xi_2`; the saturated region is the annulus
/// `A(xi_1, xi_2)`, or the full ball `B_{xi_2}` when the profile stays
/// above `t` all the way to the origin (possible only for `T < r_k`). The
/// surface density that produces this region is
/// `(c_k(xi_2) - c_k(xi_1)) / d_k(T)`. The record is admissible only when
/// the region's ground energy is at least `k^2`; otherwise
/// [`RadialOutcome::GroundStateBelow`] is returned.
///
/// Requires `k > 0` and `J_alpha(k T) != 0` (at such `T` the sphere mass
/// `d_k(T)` vanishes and no level parametrisation exists).
pub fn sphere_sweep(med: &Medium, big_t: f64, t: f64) -> Result<RadialOutcome> {
    if med.k == 0.0 {
        return Err(Error::Domain("sphere_sweep is defined for k > 0 only".into()));
    }
    if !(big_t.is_finite() && big_t > 0.0) {
        return Err(Error::Domain(format!("sphere radius must be positive, got {big_t}")));
    }
    let k = med.k;
    if bessel_j(med.order_alpha(), k * big_t)?.abs() < 1e-12 {
        return Err(Error::Domain(format!(
            "sphere radius T = {big_t} has vanishing d_k(T); the level parametrisation degenerates"
        )));
    }
    let peak = f_t(med, big_t, big_t)?;
    if !(t.is_finite() && t > 0.0 && t < peak) {
        return Err(Error::Domain(format!(
            "level must lie in (0, {peak:.6}), got {t}"
        )));
    }

    let below = critical_radius_below(med, big_t)?;
    let inner = match below {
        Some(j1) => {
            if t <= f_t(med, big_t, j1)? {
                return Ok(RadialOutcome::NoBoundedRegion);
            }
            let f = |r: f64| f_t(med, big_t, r).expect("r in (j1, T)") - t;
            Some(bisect(f, j1, big_t))
        }
        None => {
            let f0 = f_t(med, big_t, 0.0)?;
            if t > f0 {
                let f = |r: f64| f_t(med, big_t, r).expect("r in (0, T)") - t;
                Some(bisect(f, 1e-12 * big_t, big_t))
            } else {
                None // profile stays above the level down to the origin
            }
        }
    };

    let j2 = critical_radius_above(med, big_t)?;
    if t <= f_t(med, big_t, j2)? {
        return Ok(RadialOutcome::NoBoundedRegion);
    }
    let f = |r: f64| f_t(med, big_t, r).expect("r in (T, j2)") - t;
    let outer = bisect(f, big_t, j2);

    let (inner, lambda1) = match inner {
        Some(xi1) => (xi1, lambda1_annulus(med, xi1, outer)?),
        None => (0.0, lambda1_ball(med, outer)?),
    };
    // Marginal regions (ground energy equal to k^2 up to root-finding noise)
    // count as feasible; the boundary case outer = r_k is a valid sweep.
    if lambda1 < k * k * (1.0 - 1e-9) {
        return Ok(RadialOutcome::GroundStateBelow { lambda1 });
    }
    let weight = (c_k(med, outer)? - c_k(med, inner)?) / d_k(med, big_t)?;
    Ok(RadialOutcome::Feasible(RadialSweep {
        inner,
        outer,
        weight,
        level: t,
        lambda1,
    }))
}

/// Largest critical radius of `f_T` strictly below `T`, or `None` when the
/// profile is monotone on `(0, T)` (which happens exactly for `T <= r_k`).
fn critical_radius_below(med: &Medium, big_t: f64) -> Result<Option<f64>> {
    let g = |r: f64| cross_profile(med, r, big_t).expect("r > 0");
    // Zeros of the cross profile are spaced by about pi / k; an eighth of
    // that cannot step over a pair.
    let step = PI / (8.0 * med.k);
    let mut hi = big_t * (1.0 - 1e-9);
    let mut fhi = g(hi);
    loop {
        let lo = (hi - step).max(big_t * 1e-12);
        let flo = g(lo);
        if flo * fhi <= 0.0 && flo != 0.0 {
            return Ok(Some(bisect(g, lo, hi)));
        }
        if lo <= big_t * 1e-12 * 1.5 {
            return Ok(None);
        }
        hi = lo;
        fhi = flo;
    }
}

/// Smallest critical radius of `f_T` strictly above `T`.
fn critical_radius_above(med: &Medium, big_t: f64) -> Result<f64> {
    let g = |r: f64| cross_profile(med, r, big_t).expect("r > 0");
    let step = PI / (8.0 * med.k);
    let mut lo = big_t * (1.0 + 1e-9);
    let mut flo = g(lo);
    for _ in 0..128 {
        let hi = lo + step;
        let fhi = g(hi);
        if flo * fhi <= 0.0 && fhi != 0.0 {
            return Ok(bisect(g, lo, hi));
        }
        lo = hi;
        flo = fhi;
    }
    Err(Error::Solver(format!(
        "no critical radius of the sphere profile found above T = {big_t}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn med2() -> Medium {
        Medium::new(2, 1.0).unwrap()
    }
    fn med3() -> Medium {
        Medium::new(3, 1.0).unwrap()
    }

    #[test]
    fn kernel_spot_values() {
        // Reference values computed with 30-digit arithmetic.
        let m3 = med3();
        assert!((c_k(&m3, 2.0).unwrap() - 21.885_479_220_263_737).abs() < 1e-12);
        assert!((c_k(&m3, 1.0).unwrap() - 3.784_597_236_993_932).abs() < 1e-13);
        assert!((c_k(&m3, PI).unwrap() - 4.0 * PI * PI).abs() < 1e-11);
        assert!((d_k(&m3, PI / 2.0).unwrap() - 19.739_208_802_178_717).abs() < 1e-12);
        let m2 = med2();
        assert!((c_k(&m2, 1.0).unwrap() - 2.764_919_374_768_337_1).abs() < 1e-13);
        assert!((c_k(&m2, 0.8).unwrap() - 1.854_002_339_751_155_9).abs() < 1e-13);
        assert!((c_k(&m2, 2.0).unwrap() - 7.247_337_676_767_916_9).abs() < 1e-12);
        assert!((d_k(&m2, 1.0).unwrap() - 4.807_878_861_268_826).abs() < 1e-13);
        // N = 3 closed forms: c = 4 pi (sin r - r cos r), d = 4 pi r sin r.
        for r in [0.3_f64, 1.7, 2.9] {
            let want_c = 4.0 * PI * (r.sin() - r * r.cos());
            let want_d = 4.0 * PI * r * r.sin();
            assert!((c_k(&m3, r).unwrap() - want_c).abs() < 1e-12);
            assert!((d_k(&m3, r).unwrap() - want_d).abs() < 1e-12);
        }
    }

    #[test]
    fn kernels_approach_volume_and_area_for_small_k() {
        for dim in [2usize, 3] {
            let med = Medium::new(dim, 1e-4).unwrap();
            for r in [0.5, 1.0, 2.0] {
                let c = c_k(&med, r).unwrap();
                let d = d_k(&med, r).unwrap();
                let vol = med.ball_volume(r);
                let area = med.sphere_area(r);
                assert!((c - vol).abs() / vol < 1e-6, "dim {dim} r {r}: {c} vs {vol}");
                assert!((d - area).abs() / area < 1e-6, "dim {dim} r {r}: {d} vs {area}");
            }
        }
    }

    #[test]
    fn sphere_mass_is_derivative_of_ball_mass() {
        let eps = 1e-6;
        for med in [med2(), med3(), Medium::new(2, 0.0).unwrap()] {
            for r in [0.4, 1.1, 2.3, 3.4] {
                let num =
                    (c_k(&med, r + eps).unwrap() - c_k(&med, r - eps).unwrap()) / (2.0 * eps);
                let want = d_k(&med, r).unwrap();
                assert!((num - want).abs() < 1e-5 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn fundamental_solution_spot_values() {
        let m3 = med3();
        assert!((psi(&m3, 1.0).unwrap() - 0.042_995_891_371_431_802).abs() < 1e-15);
        assert!((psi(&m3, 2.0).unwrap() - 2.0_f64.cos() / (8.0 * PI)).abs() < 1e-15);
        let m2 = med2();
        assert!((psi(&m2, 1.0).unwrap() - (-0.022_064_241_053_919_239)).abs() < 1e-15);
        // Classical kernels at k = 0.
        let c3 = Medium::new(3, 0.0).unwrap();
        assert!((psi(&c3, 2.0).unwrap() - 1.0 / (8.0 * PI)).abs() < 1e-16);
        let c2 = Medium::new(2, 0.0).unwrap();
        assert!((psi(&c2, 3.0).unwrap() + 3.0_f64.ln() / (2.0 * PI)).abs() < 1e-16);
        assert!(psi(&m3, 0.0).is_err());
    }

    #[test]
    fn admissible_radius_and_null_radius() {
        let m3 = med3();
        assert!((r_k(&m3) - PI).abs() < 1e-12);
        assert!((null_ball_radius(&m3) - 4.493_409_457_909_064_2).abs() < 1e-11);
        let m2 = med2();
        assert!((r_k(&m2) - 2.404_825_557_695_772_8).abs() < 1e-12);
        assert!((null_ball_radius(&m2) - 3.831_705_970_207_512_3).abs() < 1e-11);
        // Scaling in k.
        let m2k = Medium::new(2, 2.0).unwrap();
        assert!((r_k(&m2k) - r_k(&m2) / 2.0).abs() < 1e-12);
        assert_eq!(r_k(&Medium::new(3, 0.0).unwrap()), f64::INFINITY);

        // The ball of null radius is invisible from outside; the ball of
        // radius r_k is not (its exterior potential carries c_k(r_k) > 0).
        assert!(c_k(&m3, null_ball_radius(&m3)).unwrap().abs() < 1e-10);
        assert!(c_k(&m2, null_ball_radius(&m2)).unwrap().abs() < 1e-10);
        assert!(c_k(&m3, r_k(&m3)).unwrap() > 39.0);
        for r in [5.0, 6.5] {
            let u = potential_ball(&m3, null_ball_radius(&m3), r).unwrap();
            assert!(u.abs() < 1e-10, "exterior potential {u} at {r}");
        }
    }

    #[test]
    fn sphere_potential_spot_values_and_continuity() {
        let m3 = med3();
        // N = 3, k = 1, t = 1: interior cos(1) sin(r)/r, exterior sin(1) cos(r)/r.
        assert!(
            (potential_sphere(&m3, 1.0, 2.0).unwrap() - (-0.175_087_744_187_007_32)).abs() < 1e-15
        );
        assert!(
            (potential_sphere(&m3, 1.0, 0.5).unwrap() - 0.518_069_447_999_851_43).abs() < 1e-15
        );
        let m2 = med2();
        assert!(
            (potential_sphere(&m2, 1.3, 0.4).unwrap() - (-0.561_943_689_301_000_2)).abs() < 1e-15
        );
        assert!(
            (potential_sphere(&m2, 1.3, 2.1).unwrap() - (-0.656_282_931_786_545_34)).abs() < 1e-15
        );
        // Exterior branch is d_k(t) psi(r) for every medium.
        for med in [med2(), med3(), Medium::new(2, 0.0).unwrap(), Medium::new(3, 0.0).unwrap()] {
            for (t, r) in [(0.7, 1.9), (1.3, 1.4), (2.0, 5.0)] {
                let lhs = potential_sphere(&med, t, r).unwrap();
                let rhs = d_k(&med, t).unwrap() * psi(&med, r).unwrap();
                assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
            }
        }
        // Value at the origin is finite and matches the limit of interior values.
        let v0 = potential_sphere(&m3, 1.0, 0.0).unwrap();
        let v_eps = potential_sphere(&m3, 1.0, 1e-7).unwrap();
        assert!((v0 - v_eps).abs() < 1e-9);
    }

    #[test]
    fn ball_potential_spot_values_and_equation() {
        let m3 = med3();
        assert!(
            (potential_ball(&m3, 1.0, 2.0).unwrap() - (-0.062_665_196_503_930_886)).abs() < 1e-15
        );
        assert!((potential_ball(&m3, PI, 0.0).unwrap() + 2.0).abs() < 1e-12);
        let m2 = med2();
        assert!(
            (potential_ball(&m2, 1.3, 0.0).unwrap() - 0.120_096_610_136_831_07).abs() < 1e-15
        );
        assert!(
            (potential_ball(&m2, 1.3, 2.1).unwrap() - (-0.552_495_868_381_562_44)).abs() < 1e-15
        );
        // Classical values.
        let c3 = Medium::new(3, 0.0).unwrap();
        assert!((potential_ball(&c3, 1.0, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((potential_ball(&c3, 1.0, 2.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);

        // Interior branch solves (Delta + k^2) U = -1: check the radial
        // Laplacian U'' + (N-1)/r U' by central differences.
        let h = 1e-4;
        for med in [med2(), med3()] {
            let t = 1.5;
            for r in [0.6, 1.1] {
                let um = potential_ball(&med, t, r - h).unwrap();
                let u0 = potential_ball(&med, t, r).unwrap();
                let up = potential_ball(&med, t, r + h).unwrap();
                let lap = (up - 2.0 * u0 + um) / (h * h)
                    + (med.dim() as f64 - 1.0) / r * (up - um) / (2.0 * h);
                assert!((lap + med.k() * med.k() * u0 + 1.0).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn point_mass_radius_matches_reference() {
        let m3 = med3();
        let r = point_mass_radius(&m3, 21.885_479_220_263_737).unwrap().unwrap();
        assert!((r - 2.0).abs() < 1e-10);
        let r10 = point_mass_radius(&m3, 10.0).unwrap().unwrap();
        assert!((r10 - 1.434_472_550_488_363_3).abs() < 1e-10);
        // Capacity boundary: c_k(r_k) = 4 pi^2 maps to r_k; above it, no
        // saturated configuration.
        let rmax = point_mass_radius(&m3, 4.0 * PI * PI).unwrap().unwrap();
        assert!((rmax - PI).abs() < 1e-7);
        assert!(point_mass_radius(&m3, 39.5).unwrap().is_none());
        let m2 = med2();
        let r2 = point_mass_radius(&m2, 7.247_337_676_767_916_9).unwrap().unwrap();
        assert!((r2 - 2.0).abs() < 1e-10);
        // k = 0: plain volume.
        let c3 = Medium::new(3, 0.0).unwrap();
        let rc = point_mass_radius(&c3, 4.0 * PI / 3.0).unwrap().unwrap();
        assert!((rc - 1.0).abs() < 1e-14);
        assert!(point_mass_radius(&m3, -1.0).is_err());
    }

    #[test]
    fn ball_sweep_radius_matches_reference() {
        let m3 = med3();
        let r = ball_sweep_radius(&m3, 2.0, 1.0).unwrap().unwrap();
        assert!((r - 1.289_183_351_543_086_7).abs() < 1e-10);
        // Too much mass: 2 c_k(2) > c_k(r_k).
        assert!(ball_sweep_radius(&m3, 2.0, 2.0).unwrap().is_none());
        // Source ball already exceeds the admissible radius.
        assert!(ball_sweep_radius(&m3, 1.5, 3.3).unwrap().is_none());
        let c3 = Medium::new(3, 0.0).unwrap();
        let rc = ball_sweep_radius(&c3, 8.0, 1.0).unwrap().unwrap();
        assert!((rc - 2.0).abs() < 1e-14);
        assert!(ball_sweep_radius(&m3, 1.0, 1.0).is_err());
    }

    #[test]
    fn sphere_profile_identities() {
        // Peak value f_T(T) = 2 T^alpha / (pi k).
        let m2 = med2();
        for t in [0.7, 1.2, 3.0] {
            let peak = f_t(&m2, t, t).unwrap();
            assert!((peak - 2.0 / PI).abs() < 1e-13, "T {t}");
            assert!(f_t_prime(&m2, t, t).unwrap().abs() < 1e-13);
        }
        let m3 = med3();
        for t in [0.9, 4.0] {
            let peak = f_t(&m3, t, t).unwrap();
            assert!((peak - 2.0 * t.sqrt() / PI).abs() < 1e-13);
        }
        // Frozen case T = 1.2, N = 2: value at the origin and at r_k.
        let t12 = 1.2;
        assert!((f_t(&m2, t12, 0.0).unwrap() - 0.427_256_374_882_008_75).abs() < 1e-14);
        assert!((f_t(&m2, t12, r_k(&m2)).unwrap() - 0.118_924_195_627_465_47).abs() < 1e-14);
        // Continuity of the origin extension.
        let f0 = f_t(&m2, t12, 0.0).unwrap();
        let feps = f_t(&m2, t12, 1e-8).unwrap();
        assert!((f0 - feps).abs() < 1e-7);
        let f0 = f_t(&m3, 0.9, 0.0).unwrap();
        let feps = f_t(&m3, 0.9, 1e-8).unwrap();
        assert!((f0 - feps).abs() < 1e-7);
        assert!(f_t(&Medium::new(2, 0.0).unwrap(), 1.0, 0.5).is_err());
    }

    #[test]
    fn barrier_profile_has_double_zero() {
        let m2 = med2();
        assert!((w_xi(&m2, 1.5, 1.0).unwrap() - 0.140_603_059_110_679_56).abs() < 1e-14);
        for med in [med2(), med3()] {
            for xi in [0.8, 1.5, 2.6] {
                assert!(w_xi(&med, xi, xi).unwrap().abs() < 1e-12);
                assert!(w_xi_prime(&med, xi, xi).unwrap().abs() < 1e-12);
                // Quadratic contact: w(xi + d) = O(d^2).
                for d in [-1e-3, 1e-3] {
                    let w = w_xi(&med, xi, xi + d).unwrap();
                    assert!(w.abs() < 50.0 * d * d, "xi {xi} d {d}: {w}");
                }
                // (Delta + k^2) w = k^2 radially.
                let h = 1e-4;
                let r = xi + 0.3;
                let wm = w_xi(&med, xi, r - h).unwrap();
                let w0 = w_xi(&med, xi, r).unwrap();
                let wp = w_xi(&med, xi, r + h).unwrap();
                let lap = (wp - 2.0 * w0 + wm) / (h * h)
                    + (med.dim() as f64 - 1.0) / r * (wp - wm) / (2.0 * h);
                let k2 = med.k() * med.k();
                assert!((lap + k2 * w0 - k2).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn ground_energies_of_radial_domains() {
        let m2 = med2();
        assert!((lambda1_ball(&m2, 1.0).unwrap() - 5.783_185_962_946_784_5).abs() < 1e-10);
        let m3 = med3();
        assert!((lambda1_ball(&m3, 2.0).unwrap() - PI * PI / 4.0).abs() < 1e-12);
        // N = 3 annuli have ground energy exactly (pi / (b - a))^2.
        let lam = lambda1_annulus(&m3, 1.0, 2.5).unwrap();
        assert!((lam - (PI / 1.5) * (PI / 1.5)).abs() < 1e-10);
        // Frozen N = 2 annulus.
        let lam2 = lambda1_annulus(&m2, 1.856_917_143_541_148_3, 3.998_117_480_295_286_2).unwrap();
        assert!((lam2 - 2.121_880_276_575_173_7).abs() < 1e-8);
    }

    #[test]
    fn sphere_sweep_ball_cases() {
        let m2 = med2();
        let t_big = 1.2;
        // Marginal level: the saturated region is exactly the admissible ball.
        let lvl = f_t(&m2, t_big, r_k(&m2)).unwrap();
        match sphere_sweep(&m2, t_big, lvl).unwrap() {
            RadialOutcome::Feasible(s) => {
                assert!(s.is_ball());
                assert!((s.outer - r_k(&m2)).abs() < 1e-9);
                assert!((s.weight - 1.550_189_065_135_391_6).abs() < 1e-9);
                assert!((s.lambda1 - 1.0).abs() < 1e-8);
            }
            other => panic!("expected feasible ball, got {other:?}"),
        }
        // Strictly interior level.
        match sphere_sweep(&m2, t_big, 0.273_090_285_254_737_11).unwrap() {
            RadialOutcome::Feasible(s) => {
                assert!(s.is_ball());
                assert!((s.outer - 2.205_154_793_117_167_7).abs() < 1e-9);
                assert!((s.weight - 1.520_259_946_193_416_3).abs() < 1e-9);
                assert!(
                    (f_t(&m2, t_big, s.outer).unwrap() - s.level).abs() < 1e-10,
                    "radius solves the level equation"
                );
            }
            other => panic!("expected feasible ball, got {other:?}"),
        }
        // Level below f_T(r_k): the candidate ball exceeds r_k.
        match sphere_sweep(&m2, t_big, 0.08).unwrap() {
            RadialOutcome::GroundStateBelow { lambda1 } => assert!(lambda1 < 1.0),
            other => panic!("expected ground-state rejection, got {other:?}"),
        }
    }

    #[test]
    fn sphere_sweep_annulus_cases() {
        let m2 = med2();
        match sphere_sweep(&m2, 3.0, 0.315_531_059_437_665_22).unwrap() {
            RadialOutcome::Feasible(s) => {
                assert!(!s.is_ball());
                assert!((s.inner - 1.856_917_143_541_148_3).abs() < 1e-9);
                assert!((s.outer - 3.998_117_480_295_286_2).abs() < 1e-9);
                assert!((s.weight - 1.719_610_549_017_341_1).abs() < 1e-9);
                assert!((s.lambda1 - 2.121_880_276_575_173_7).abs() < 1e-7);
                assert!((f_t(&m2, 3.0, s.inner).unwrap() - s.level).abs() < 1e-10);
                assert!((f_t(&m2, 3.0, s.outer).unwrap() - s.level).abs() < 1e-10);
            }
            other => panic!("expected feasible annulus, got {other:?}"),
        }
        // Wider level: ground energy drops below k^2.
        match sphere_sweep(&m2, 3.0, 0.02).unwrap() {
            RadialOutcome::GroundStateBelow { lambda1 } => {
                assert!((lambda1 - 0.895_254_572_433_496_53).abs() < 1e-7);
            }
            other => panic!("expected ground-state rejection, got {other:?}"),
        }
        let m3 = med3();
        match sphere_sweep(&m3, 4.0, 0.809_295_817_894_065_07).unwrap() {
            RadialOutcome::Feasible(s) => {
                assert!((s.inner - 3.031_894_892_610_425_5).abs() < 1e-9);
                assert!((s.outer - 4.824_156_466_502_406_4).abs() < 1e-9);
                assert!((s.weight - 1.537_710_058_200_765_9).abs() < 1e-9);
                assert!((s.lambda1 - 3.072_535_844_892_577_3).abs() < 1e-8);
            }
            other => panic!("expected feasible annulus, got {other:?}"),
        }
        // Degenerate sphere radius and out-of-range levels are rejected.
        assert!(sphere_sweep(&m2, 2.404_825_557_695_772_8, 0.3).is_err());
        assert!(sphere_sweep(&m2, 3.0, 0.7).is_err());
        assert!(sphere_sweep(&m2, 3.0, -0.1).is_err());
    }

    #[test]
    fn critical_radii_bracket_the_sphere() {
        // For N = 3, k = 1 the cross profile is proportional to sin(r - T),
        // so the critical radii sit exactly at T -+ pi.
        let m3 = med3();
        let below = critical_radius_below(&m3, 4.0).unwrap().unwrap();
        assert!((below - (4.0 - PI)).abs() < 1e-10);
        let above = critical_radius_above(&m3, 4.0).unwrap();
        assert!((above - (4.0 + PI)).abs() < 1e-10);
        // Below r_k the profile is monotone on (0, T).
        assert!(critical_radius_below(&m3, 2.0).unwrap().is_none());
        let m2 = med2();
        assert!(critical_radius_below(&m2, 1.2).unwrap().is_none());
        let j1t = critical_radius_below(&m2, 3.0).unwrap().unwrap();
        assert!((j1t - 0.114_902_698_588_913_85).abs() < 1e-9);
        let j2t = critical_radius_above(&m2, 3.0).unwrap();
        assert!((j2t - 6.121_970_941_146_906_4).abs() < 1e-9);
    }

    #[test]
    fn medium_validation() {
        assert!(Medium::new(4, 1.0).is_err());
        assert!(Medium::new(2, -1.0).is_err());
        assert!(Medium::new(2, f64::NAN).is_err());
        let m = Medium::new(2, 0.0).unwrap();
        assert_eq!(m.alpha(), 0.0);
        assert!((med3().alpha() - 0.5).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn potentials_are_continuous_across_the_interface(
            t in 0.3_f64..3.0,
            dim in 2_usize..4,
            ki in 0_usize..3,
        ) {
            let k = [0.0, 0.7, 1.3][ki];
            let med = Medium::new(dim, k).unwrap();
            let eps = 1e-9;
            let s_in = potential_sphere(&med, t, t - eps).unwrap();
            let s_out = potential_sphere(&med, t, t + eps).unwrap();
            prop_assert!((s_in - s_out).abs() < 1e-7 * (1.0 + s_in.abs()));
            let b_in = potential_ball(&med, t, t - eps).unwrap();
            let b_out = potential_ball(&med, t, t + eps).unwrap();
            prop_assert!((b_in - b_out).abs() < 1e-7 * (1.0 + b_in.abs()));
        }

        #[test]
        fn ball_mass_derivative_is_sphere_mass(
            r in 0.2_f64..4.0,
            dim in 2_usize..4,
            ki in 0_usize..3,
        ) {
            let k = [0.0, 0.9, 1.6][ki];
            let med = Medium::new(dim, k).unwrap();
            let eps = 1e-6;
            let num = (c_k(&med, r + eps).unwrap() - c_k(&med, r - eps).unwrap()) / (2.0 * eps);
            let want = d_k(&med, r).unwrap();
            prop_assert!((num - want).abs() < 1e-4 * (1.0 + want.abs()));
        }
    }
}
