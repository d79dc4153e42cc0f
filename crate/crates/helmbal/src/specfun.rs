//! Cylinder functions for the orders the radial theory uses.
//!
//! The fundamental solution of `Delta + k^2` in dimension `N` is built from
//! `J_nu` and `Y_nu` at the orders `alpha = (N-2)/2` and `N/2`, so for
//! `N = 2, 3` only `nu` in `{0, 1/2, 1, 3/2}` ever occurs. Restricting to
//! those four orders keeps every evaluation either a closed form or a short
//! series:
//!
//! * Half-integer orders reduce to trigonometric expressions, e.g.
//!   `J_{1/2}(t) = sqrt(2/(pi t)) sin t` and
//!   `J_{3/2}(t) = sqrt(2/(pi t)) (sin t / t - cos t)`. The `3/2` form
//!   cancels catastrophically near zero, so below a small cutoff the bracket
//!   is evaluated by its power series `t^2/3 - t^4/30 + t^6/840 - ...`.
//! * Integer orders use the ascending series up to [`ASYMPTOTIC_SWITCH`] and
//!   the Hankel large-argument expansion beyond it. At the switch point the
//!   optimally truncated asymptotic tail is of order `e^{-2t} ~ 4e-11`,
//!   which the seam test below pins down.
//!
//! Derivatives are always formed through the recurrence
//! `C_nu'(t) = C_{nu-1}(t) - (nu/t) C_nu(t)` (with `C_0' = -C_1`), never by
//! numerical differencing. Zeros of `J_nu` come from sign-scan plus
//! bisection and are exposed through [`first_positive_zero`] and
//! [`positive_zeros`].

use crate::error::{Error, Result};

/// Arguments above this use the Hankel asymptotic expansion for integer
/// orders; below it, the ascending series. At `t = 12` the truncation floor
/// of the asymptotic branch is ~4e-11 and the series still sums accurately
/// (worst intermediate term ~4e3, so rounding stays near 1e-12).
pub const ASYMPTOTIC_SWITCH: f64 = 12.0;

/// Half-integer closed forms switch to power series below this argument to
/// avoid cancellation in `sin t / t - cos t`.
const SMALL_T: f64 = 0.5;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const FRAC_2_PI: f64 = std::f64::consts::FRAC_2_PI;

/// The cylinder-function orders supported by this crate.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Order {
    Zero,
    Half,
    One,
    ThreeHalves,
}

impl Order {
    /// The order as a float.
    pub fn nu(self) -> f64 {
        match self {
            Order::Zero => 0.0,
            Order::Half => 0.5,
            Order::One => 1.0,
            Order::ThreeHalves => 1.5,
        }
    }

    /// Maps `2 nu` to an order, rejecting anything this crate does not
    /// implement (the radial theory only ever asks for these four).
    pub fn from_two_nu(two_nu: i32) -> Result<Order> {
        match two_nu {
            0 => Ok(Order::Zero),
            1 => Ok(Order::Half),
            2 => Ok(Order::One),
            3 => Ok(Order::ThreeHalves),
            other => Err(Error::UnsupportedOrder(other as f64 / 2.0)),
        }
    }
}

/// `J_nu(t)` for `t >= 0`.
pub fn bessel_j(order: Order, t: f64) -> Result<f64> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("J_nu needs finite t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(if order == Order::Zero { 1.0 } else { 0.0 });
    }
    Ok(match order {
        Order::Zero => {
            if t < ASYMPTOTIC_SWITCH {
                j0_series(t)
            } else {
                hankel(0.0, t).0
            }
        }
        Order::One => {
            if t < ASYMPTOTIC_SWITCH {
                j1_series(t)
            } else {
                hankel(1.0, t).0
            }
        }
        Order::Half => root_2_pi_t(t) * t.sin(),
        Order::ThreeHalves => root_2_pi_t(t) * sinc_minus_cos(t),
    })
}

/// `Y_nu(t)` for `t > 0`.
pub fn bessel_y(order: Order, t: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!("Y_nu needs finite t > 0, got {t}")));
    }
    Ok(match order {
        Order::Zero => {
            if t < ASYMPTOTIC_SWITCH {
                y0_series(t)
            } else {
                hankel(0.0, t).1
            }
        }
        Order::One => {
            if t < ASYMPTOTIC_SWITCH {
                y1_series(t)
            } else {
                hankel(1.0, t).1
            }
        }
        Order::Half => -root_2_pi_t(t) * t.cos(),
        Order::ThreeHalves => -root_2_pi_t(t) * (t.cos() / t + t.sin()),
    })
}

/// `d/dt J_nu(t)` via the downward recurrence; `t > 0`.
pub fn bessel_j_prime(order: Order, t: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!(
            "J_nu' needs finite t > 0, got {t}"
        )));
    }
    Ok(match order {
        Order::Zero => -bessel_j(Order::One, t)?,
        Order::One => bessel_j(Order::Zero, t)? - bessel_j(Order::One, t)? / t,
        // J_{-1/2}(t) = sqrt(2/(pi t)) cos t.
        Order::Half => root_2_pi_t(t) * t.cos() - 0.5 * bessel_j(Order::Half, t)? / t,
        Order::ThreeHalves => {
            bessel_j(Order::Half, t)? - 1.5 * bessel_j(Order::ThreeHalves, t)? / t
        }
    })
}

/// `d/dt Y_nu(t)` via the downward recurrence; `t > 0`.
pub fn bessel_y_prime(order: Order, t: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!(
            "Y_nu' needs finite t > 0, got {t}"
        )));
    }
    Ok(match order {
        Order::Zero => -bessel_y(Order::One, t)?,
        Order::One => bessel_y(Order::Zero, t)? - bessel_y(Order::One, t)? / t,
        // Y_{-1/2}(t) = sqrt(2/(pi t)) sin t.
        Order::Half => root_2_pi_t(t) * t.sin() - 0.5 * bessel_y(Order::Half, t)? / t,
        Order::ThreeHalves => {
            bessel_y(Order::Half, t)? - 1.5 * bessel_y(Order::ThreeHalves, t)? / t
        }
    })
}

/// First positive zero of `J_nu`.
pub fn first_positive_zero(order: Order) -> f64 {
    positive_zeros(order)
        .next()
        .expect("J_nu zero scan is infinite")
}

/// The increasing sequence of positive zeros of `J_nu`.
///
/// Consecutive zeros of the supported orders are separated by at least 2.8,
/// so a 0.2-step sign scan cannot skip a pair; each bracket is then bisected
/// to machine accuracy.
pub fn positive_zeros(order: Order) -> impl Iterator<Item = f64> {
    let mut from = 0.0_f64;
    std::iter::from_fn(move || {
        let eval = |t: f64| bessel_j(order, t).expect("t > 0 in zero scan");
        let step = 0.2;
        let mut lo = from.max(step);
        // Move off a just-returned zero onto the next arch.
        if from > 0.0 {
            lo = from + step;
        }
        let mut flo = eval(lo);
        loop {
            let hi = lo + step;
            let fhi = eval(hi);
            if flo == 0.0 {
                from = lo;
                return Some(lo);
            }
            if flo * fhi < 0.0 {
                let z = bisect(eval, lo, hi);
                from = z;
                return Some(z);
            }
            lo = hi;
            flo = fhi;
        }
    })
}

/// Bisection on a bracketing interval; panics if the bracket is invalid.
/// Runs to floating-point fixed point, so results are deterministic.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    let fhi = f(hi);
    assert!(
        flo * fhi <= 0.0,
        "bisect: no sign change on [{lo}, {hi}] ({flo}, {fhi})"
    );
    let mut sign_lo = flo.is_sign_negative();
    if fhi == 0.0 {
        return hi;
    }
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.is_sign_negative() == sign_lo {
            lo = mid;
            sign_lo = fm.is_sign_negative();
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn root_2_pi_t(t: f64) -> f64 {
    (FRAC_2_PI / t).sqrt()
}

/// `sin t / t - cos t`, series-guarded against cancellation near zero.
fn sinc_minus_cos(t: f64) -> f64 {
    if t >= SMALL_T {
        return t.sin() / t - t.cos();
    }
    // sum_{m>=1} (-1)^{m+1} 2m t^{2m} / (2m+1)!
    let t2 = t * t;
    let mut term = t2 / 3.0;
    let mut sum = term;
    let mut m = 1.0_f64;
    while term.abs() > 1e-20 * sum.abs().max(1e-300) {
        // ratio of consecutive terms: -(m+1)/m * t^2 / ((2m+2)(2m+3))
        term *= -t2 * (m + 1.0) / (m * (2.0 * m + 2.0) * (2.0 * m + 3.0));
        sum += term;
        m += 1.0;
    }
    sum
}

fn j0_series(t: f64) -> f64 {
    let q = 0.25 * t * t;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for m in 1..=60 {
        let mf = m as f64;
        term *= -q / (mf * mf);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-3) {
            break;
        }
    }
    sum
}

fn j1_series(t: f64) -> f64 {
    let q = 0.25 * t * t;
    let mut term = 0.5 * t;
    let mut sum = term;
    for m in 1..=60 {
        let mf = m as f64;
        term *= -q / (mf * (mf + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-3) {
            break;
        }
    }
    sum
}

fn y0_series(t: f64) -> f64 {
    // (2/pi) [ (ln(t/2) + gamma) J_0(t) + sum_{m>=1} (-1)^{m+1} H_m q^m / (m!)^2 ]
    let q = 0.25 * t * t;
    let mut term = 1.0_f64; // q^m / (m!)^2, starting at m = 1 below
    let mut h = 0.0_f64;
    let mut sum = 0.0_f64;
    for m in 1..=60 {
        let mf = m as f64;
        term *= q / (mf * mf);
        h += 1.0 / mf;
        let contrib = if m % 2 == 1 { term * h } else { -term * h };
        sum += contrib;
        if term * h < 1e-18 * sum.abs().max(1e-3) {
            break;
        }
    }
    FRAC_2_PI * (((0.5 * t).ln() + EULER_GAMMA) * j0_series(t) + sum)
}

fn y1_series(t: f64) -> f64 {
    // (2/pi) [ ln(t/2) J_1(t) - 1/t
    //          - (t/4) sum_{m>=0} (psi(m+1) + psi(m+2)) (-q)^m / (m! (m+1)!) ]
    let q = 0.25 * t * t;
    let mut term = 1.0_f64; // q^m / (m! (m+1)!)
    let mut psi_a = -EULER_GAMMA; // psi(m+1)
    let mut psi_b = 1.0 - EULER_GAMMA; // psi(m+2)
    let mut sum = 0.0_f64;
    for m in 0..=60 {
        let mf = m as f64;
        if m > 0 {
            term *= q / (mf * (mf + 1.0));
            psi_a += 1.0 / mf;
            psi_b += 1.0 / (mf + 1.0);
        }
        let contrib = if m % 2 == 0 {
            term * (psi_a + psi_b)
        } else {
            -term * (psi_a + psi_b)
        };
        sum += contrib;
        if term * (psi_a + psi_b).abs() < 1e-18 * sum.abs().max(1e-3) {
            break;
        }
    }
    FRAC_2_PI * ((0.5 * t).ln() * j1_series(t) - 1.0 / t - 0.25 * t * sum)
}

/// Hankel large-argument expansion, returning `(J_nu(t), Y_nu(t))`.
///
/// Terms are added while they shrink and dropped at the first growing one,
/// which is the optimal truncation; at `t >= 12` the remainder is ~`e^{-2t}`.
fn hankel(nu: f64, t: f64) -> (f64, f64) {
    let mu4 = 4.0 * nu * nu;
    let mut p = 1.0_f64;
    let mut q = 0.0_f64;
    let mut b_prev = 1.0_f64; // b_0
    for j in 1..=40 {
        let jf = j as f64;
        let two_j_m1 = 2.0 * jf - 1.0;
        let b = b_prev * (mu4 - two_j_m1 * two_j_m1) / (8.0 * jf * t);
        if b.abs() >= b_prev.abs() {
            break;
        }
        let sign = if j % 4 <= 1 { 1.0 } else { -1.0 };
        if j % 2 == 0 {
            p += sign * b;
        } else {
            q += sign * b;
        }
        b_prev = b;
        if b.abs() < 1e-19 {
            break;
        }
    }
    let chi = t - (0.5 * nu + 0.25) * std::f64::consts::PI;
    let (s, c) = chi.sin_cos();
    let amp = root_2_pi_t(t);
    (amp * (p * c - q * s), amp * (p * s + q * c))
}
