//! A posteriori verification of swept measures.
//!
//! A sweep is correct exactly when it preserves the exterior potential of
//! its source and lowers it nowhere; both statements are checked here by
//! comparing exact point evaluations of the two potentials on sampling
//! shells and interior point sets. The sampling is deterministic for a
//! given seed, so verification artifacts reproduce bit for bit.

use crate::error::{Error, Result};
use crate::grid::{potential_at_points, Measure};
use crate::radial::{d_k, Medium};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Evenly spread points on the sphere (circle) of the given radius. The
/// seed rotates the whole node set, so repeated checks sample fresh
/// directions without losing determinism.
pub fn shell_points(
    med: &Medium,
    center: [f64; 3],
    radius: f64,
    count: usize,
    seed: u64,
) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut pts = Vec::with_capacity(count);
    if med.dim() == 2 {
        for i in 0..count {
            let a = phase + (i as f64 + 0.5) * std::f64::consts::TAU / count as f64;
            pts.push([center[0] + radius * a.cos(), center[1] + radius * a.sin(), 0.0]);
        }
    } else {
        // Fibonacci spiral; the golden angle keeps neighboring nodes
        // evenly spaced at any count.
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        for i in 0..count {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let a = phase + golden * i as f64;
            pts.push([
                center[0] + radius * r * a.cos(),
                center[1] + radius * r * a.sin(),
                center[2] + radius * z,
            ]);
        }
    }
    pts
}

/// Exterior agreement between the potentials of two measures, sampled on
/// shells around `center`.
#[derive(Clone, Debug)]
pub struct ExteriorReport {
    /// Shell radii in the order given.
    pub radii: Vec<f64>,
    /// Largest potential gap per shell.
    pub gaps: Vec<f64>,
    pub max_gap: f64,
}

/// Compares the potentials of two measures on sampling shells; the shells
/// must enclose both supports for the comparison to mean anything.
pub fn exterior_match(
    a: &Measure,
    b: &Measure,
    med: &Medium,
    center: [f64; 3],
    radii: &[f64],
    count: usize,
    seed: u64,
) -> Result<ExteriorReport> {
    if radii.is_empty() || count == 0 {
        return Err(Error::Config("need at least one shell and one node".into()));
    }
    let mut gaps = Vec::with_capacity(radii.len());
    let mut max_gap = 0.0f64;
    for (i, &r) in radii.iter().enumerate() {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Config(format!("shell radius must be positive, got {r}")));
        }
        let pts = shell_points(med, center, r, count, seed.wrapping_add(i as u64));
        let ua = potential_at_points(a, med, &pts)?;
        let ub = potential_at_points(b, med, &pts)?;
        let gap = ua
            .iter()
            .zip(ub.iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        gaps.push(gap);
        max_gap = max_gap.max(gap);
    }
    Ok(ExteriorReport { radii: radii.to_vec(), gaps, max_gap })
}

/// Largest potential magnitude of a measure over sampling shells; near
/// zero for null domains, whose mass is invisible from outside.
pub fn exterior_sup(
    m: &Measure,
    med: &Medium,
    center: [f64; 3],
    radii: &[f64],
    count: usize,
    seed: u64,
) -> Result<f64> {
    let mut sup = 0.0f64;
    for (i, &r) in radii.iter().enumerate() {
        let pts = shell_points(med, center, r, count, seed.wrapping_add(i as u64));
        let u = potential_at_points(m, med, &pts)?;
        sup = u.iter().fold(sup, |s, v| s.max(v.abs()));
    }
    Ok(sup)
}

/// Largest value of `U^b - U^a` over the given points: nonpositive (up to
/// discretisation) when `b` is a sweep of `a`.
pub fn interior_domination(
    a: &Measure,
    b: &Measure,
    med: &Medium,
    points: &[[f64; 3]],
) -> Result<f64> {
    let ua = potential_at_points(a, med, points)?;
    let ub = potential_at_points(b, med, points)?;
    Ok(ua
        .iter()
        .zip(ub.iter())
        .fold(f64::NEG_INFINITY, |m, (x, y)| m.max(y - x)))
}

/// Gap in the spherical mean-value identity of the potential: for a ball
/// `B_r(z)` clear of the support, the surface integral of `U` over the
/// sphere equals `U(z) d_k(r)`. Returns the absolute difference using the
/// node average times the sphere area.
pub fn mean_value_gap(
    m: &Measure,
    med: &Medium,
    z: [f64; 3],
    r: f64,
    count: usize,
    seed: u64,
) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("sphere radius must be positive, got {r}")));
    }
    let pts = shell_points(med, z, r, count, seed);
    let u = potential_at_points(m, med, &pts)?;
    let avg = u.iter().sum::<f64>() / count as f64;
    let surface = avg * med.sphere_area(r);
    let center = potential_at_points(m, med, &[z])?[0];
    Ok((surface - center * d_k(med, r)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balayage::{sweep, Rho, SweepConfig, SweepResult};
    use crate::grid::GridSpec;
    use crate::radial::null_ball_radius;
    use proptest::prelude::*;

    #[test]
    fn swept_mass_keeps_the_exterior_potential() {
        let med = Medium::new(2, 1.0).unwrap();
        let h = 0.05;
        let spec = GridSpec::from_box(2, [-1.8, -1.8, 0.0], [1.8, 1.8, 0.0], h).unwrap();
        let mu = Measure::from_atom([0.0; 3], 2.0);
        let cfg = SweepConfig { compute_lambda1: false, ..Default::default() };
        let out = match sweep(&mu, &Rho::Constant(1.0), &med, &spec, &cfg).unwrap() {
            SweepResult::Converged(o) => o,
            other => panic!("expected convergence, got {other:?}"),
        };
        let swept = Measure::from_density(out.swept.clone());
        let radii = [1.25, 1.5];
        let rep = exterior_match(&mu, &swept, &med, [0.0; 3], &radii, 64, 7).unwrap();
        assert!(rep.max_gap < 10.0 * h * 2.0, "exterior gap {:?}", rep.gaps);

        // Interior: the swept potential must not exceed the source's.
        let pts: Vec<[f64; 3]> = (0..24)
            .map(|i| {
                let a = i as f64 * 0.7;
                let r = 0.15 + 0.03 * i as f64;
                [r * a.cos(), r * a.sin(), 0.0]
            })
            .collect();
        let dom = interior_domination(&mu, &swept, &med, &pts).unwrap();
        assert!(dom < 1e-2, "domination excess {dom}");

        // Negative control: doubling the swept density must light up the
        // exterior check by orders of magnitude.
        let mut bad_field = out.swept.clone();
        for v in &mut bad_field.data {
            *v *= 2.0;
        }
        let bad = Measure::from_density(bad_field);
        let bad_rep = exterior_match(&mu, &bad, &med, [0.0; 3], &radii, 64, 7).unwrap();
        assert!(
            bad_rep.max_gap > 100.0 * rep.max_gap,
            "control {} vs {:?}",
            bad_rep.max_gap,
            rep.gaps
        );
    }

    #[test]
    fn mean_value_identity_for_clear_spheres() {
        // Point source at the origin; spheres well away from it. The
        // trapezoid rule on a circle converges spectrally, the spiral on
        // a sphere a little slower.
        let m = Measure::from_atom([0.0; 3], 1.3);
        let med2 = Medium::new(2, 1.0).unwrap();
        let gap2 = mean_value_gap(&m, &med2, [2.0, 0.3, 0.0], 0.7, 256, 11).unwrap();
        assert!(gap2 < 1e-10, "circle gap {gap2:.2e}");
        let med3 = Medium::new(3, 1.0).unwrap();
        let gap3 = mean_value_gap(&m, &med3, [2.0, 0.3, -0.4], 0.7, 4096, 11).unwrap();
        assert!(gap3 < 1e-4, "sphere gap {gap3:.2e}");
    }

    #[test]
    fn null_ball_is_silent_from_outside() {
        // The ball whose radius is the first zero of the volume kernel has
        // vanishing exterior potential; the critical-radius ball does not.
        let med = Medium::new(2, 1.0).unwrap();
        let r_null = null_ball_radius(&med);
        let h = 0.05;
        let ext = 1.05 * r_null;
        let spec = GridSpec::from_box(2, [-ext, -ext, 0.0], [ext, ext, 0.0], h).unwrap();
        let ball = Measure::from_ball([0.0; 3], r_null, 1.0);
        let gridded = Measure::from_density(ball.rasterize(&spec).unwrap());
        let radii = [1.25 * r_null, 1.5 * r_null];
        let sup_null = exterior_sup(&gridded, &med, [0.0; 3], &radii, 64, 3).unwrap();
        assert!(sup_null < 10.0 * h, "null-ball exterior {sup_null}");

        // Same construction at the critical radius: loud by comparison,
        // because the volume kernel does not vanish there.
        let r_crit = crate::radial::r_k(&med);
        let crit = Measure::from_ball([0.0; 3], r_crit, 1.0);
        let gridded_crit = Measure::from_density(crit.rasterize(&spec).unwrap());
        let radii_crit = [1.25 * r_crit, 1.5 * r_crit];
        let sup_crit =
            exterior_sup(&gridded_crit, &med, [0.0; 3], &radii_crit, 64, 3).unwrap();
        assert!(
            sup_crit > 20.0 * sup_null,
            "critical {sup_crit} vs null {sup_null}"
        );
        let ck = crate::radial::c_k(&med, r_crit).unwrap();
        assert!(ck.abs() > 7.0, "c_k at the critical radius is {ck}, not zero");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn mean_value_identity_for_random_sources(
            mass in 0.1f64..5.0,
            sx in -1.0f64..1.0,
            sy in -1.0f64..1.0,
            r in 0.2f64..0.9,
        ) {
            // Keep the sphere clear of the source: center at (3, 1).
            let m = Measure::from_atom([sx, sy, 0.0], mass);
            let med = Medium::new(2, 1.0).unwrap();
            let gap = mean_value_gap(&m, &med, [3.0, 1.0, 0.0], r, 256, 5).unwrap();
            prop_assert!(gap < 1e-9, "gap {gap:.2e}");
        }
    }
}
