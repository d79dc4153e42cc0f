//! Injection-driven domain evolution.
//!
//! Starting from a saturated region `Omega_0` filled at the bound density,
//! mass `t` injected at a fixed point `z` produces the swept region of
//! `rho 1_{Omega_0} + t delta_z`; the evolved domain at time `t` is that
//! region joined with `Omega_0`. Each time is solved independently from
//! the same source, which keeps the family monotone in `t` (the discrete
//! problems compare cell by cell).
//!
//! Two consistency tools come with the driver: [`verify_law`] checks the
//! semigroup property, comparing a direct sweep at `t + eps` against a
//! sweep of the time-`t` result plus a fresh injection of mass `eps`
//! (entering through its potential), and [`terminal_bracket`] locates the
//! largest injectable mass.

use crate::balayage::{
    feasibility_scan, sweep, sweep_from_potential, InfeasibleReason, Rho, SweepConfig,
    SweepOutcome, SweepResult,
};
use crate::error::{Error, Result};
use crate::grid::{potential, Mask, Measure, ScalarField, SINGULAR};
use crate::radial::Medium;

/// One evolved time.
#[derive(Clone, Debug)]
pub struct EvolutionStep {
    pub time: f64,
    /// Swept region joined with the initial domain.
    pub domain: Mask,
    pub outcome: SweepOutcome,
}

/// Result of an evolution run.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub steps: Vec<EvolutionStep>,
    /// Set when a requested time was infeasible; later times are skipped.
    pub halted: Option<(f64, InfeasibleReason)>,
    /// Cells that left the domain between consecutive steps (monotone
    /// evolution makes this zero; threshold flicker would show up here).
    pub containment_violations: usize,
}

/// Source measure of the evolution at time `t`.
pub fn injection_measure(
    initial: &Mask,
    z: [f64; 3],
    t: f64,
    rho: &Rho,
) -> Measure {
    let spec = initial.spec;
    let mut density = ScalarField::zeros(spec);
    for idx in 0..spec.len() {
        if initial.data[idx] {
            density.data[idx] = rho.at(idx);
        }
    }
    let mut m = Measure::from_density(density);
    if t > 0.0 {
        m.atoms.push(crate::grid::Atom { point: z, mass: t });
    }
    m
}

/// Evolves the initial domain through the given injection masses.
pub fn evolve(
    initial: &Mask,
    z: [f64; 3],
    med: &Medium,
    rho: &Rho,
    times: &[f64],
    cfg: &SweepConfig,
) -> Result<Evolution> {
    let spec = initial.spec;
    if times.is_empty() {
        return Err(Error::Config("no evolution times given".into()));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) || times[0] <= 0.0 {
        return Err(Error::Config("times must be positive and increasing".into()));
    }
    if spec.pos_to_cell(z).is_none() {
        return Err(Error::Domain("injection point lies outside the grid".into()));
    }
    let mut steps: Vec<EvolutionStep> = Vec::new();
    let mut halted = None;
    let mut containment_violations = 0usize;
    for &t in times {
        let mu = injection_measure(initial, z, t, rho);
        match sweep(&mu, rho, med, &spec, cfg)? {
            SweepResult::Converged(out) => {
                let mut domain = initial.clone();
                for idx in 0..spec.len() {
                    domain.data[idx] |= out.omega.data[idx];
                }
                if let Some(prev) = steps.last() {
                    containment_violations += (0..spec.len())
                        .filter(|&i| prev.domain.data[i] && !domain.data[i])
                        .count();
                }
                steps.push(EvolutionStep { time: t, domain, outcome: *out });
            }
            SweepResult::Infeasible { reason, .. } => {
                halted = Some((t, reason));
                break;
            }
        }
    }
    Ok(Evolution { steps, halted, containment_violations })
}

/// Agreement between the direct sweep at `t + eps` and the two-stage
/// sweep through the time-`t` state.
#[derive(Clone, Copy, Debug)]
pub struct LawReport {
    /// Cells on which the two regions disagree.
    pub region_sym_diff: usize,
    /// True when every disagreeing cell sits within three cells of the
    /// other region.
    pub layer_ok: bool,
    /// Sup-norm gap between the two swept potentials, singular cells
    /// excluded.
    pub potential_gap: f64,
}

/// Checks the semigroup property of the evolution at time `t`, step `eps`:
/// sweeping `rho 1_{Omega_0} + (t + eps) delta_z` directly must agree with
/// sweeping the saturated time-`t` domain plus `eps delta_z`, the latter
/// entering through its potential. Both regions and potentials agree to
/// discretisation accuracy when the driver is consistent.
pub fn verify_law(
    initial: &Mask,
    z: [f64; 3],
    t: f64,
    eps: f64,
    med: &Medium,
    rho: &Rho,
    cfg: &SweepConfig,
) -> Result<LawReport> {
    if !(t > 0.0 && eps > 0.0) {
        return Err(Error::Config("law check needs positive time and step".into()));
    }
    let spec = initial.spec;

    let at_t = match sweep(&injection_measure(initial, z, t, rho), rho, med, &spec, cfg)? {
        SweepResult::Converged(out) => out,
        SweepResult::Infeasible { reason, .. } => {
            return Err(Error::Solver(format!("time {t} is not feasible: {reason}")))
        }
    };
    let mut domain_t = initial.clone();
    for idx in 0..spec.len() {
        domain_t.data[idx] |= at_t.omega.data[idx];
    }

    // Direct formulation at t + eps.
    let direct = match sweep(
        &injection_measure(initial, z, t + eps, rho),
        rho,
        med,
        &spec,
        cfg,
    )? {
        SweepResult::Converged(out) => out,
        SweepResult::Infeasible { reason, .. } => {
            return Err(Error::Solver(format!(
                "time {} is not feasible: {reason}",
                t + eps
            )))
        }
    };

    // Two-stage formulation: the time-t state is the bound density on its
    // domain; add the new injection through its exact potential.
    let staged_measure = injection_measure(&domain_t, z, 0.0, rho);
    let (mut background, _) = potential(&staged_measure, &spec, med, cfg.method)?;
    let (atom_pot, _) = potential(&Measure::from_atom(z, eps), &spec, med, cfg.method)?;
    for idx in 0..spec.len() {
        background.data[idx] += atom_pot.data[idx];
    }
    let staged = match sweep_from_potential(&background, rho, med, cfg)? {
        SweepResult::Converged(out) => out,
        SweepResult::Infeasible { reason, .. } => {
            return Err(Error::Solver(format!("staged sweep infeasible: {reason}")))
        }
    };

    let mut domain_direct = initial.clone();
    let mut domain_staged = domain_t.clone();
    for idx in 0..spec.len() {
        domain_direct.data[idx] |= direct.omega.data[idx];
        domain_staged.data[idx] |= staged.omega.data[idx];
    }

    let region_sym_diff = domain_direct.sym_diff_count(&domain_staged);
    let near_direct = domain_direct.dilate(3);
    let near_staged = domain_staged.dilate(3);
    let mut layer_ok = true;
    let mut potential_gap = 0.0f64;
    for idx in 0..spec.len() {
        if domain_direct.data[idx] && !near_staged.data[idx] {
            layer_ok = false;
        }
        if domain_staged.data[idx] && !near_direct.data[idx] {
            layer_ok = false;
        }
        let a = direct.v.data[idx];
        let b = staged.v.data[idx];
        if a.abs() < SINGULAR && b.abs() < SINGULAR {
            potential_gap = potential_gap.max((a - b).abs());
        }
    }
    Ok(LawReport { region_sym_diff, layer_ok, potential_gap })
}

/// Brackets the largest injectable mass: the evolution is feasible at the
/// returned lower endpoint and infeasible at the upper one.
pub fn terminal_bracket(
    initial: &Mask,
    z: [f64; 3],
    med: &Medium,
    rho: &Rho,
    cfg: &SweepConfig,
    t_lo: f64,
    t_hi: f64,
    width: f64,
) -> Result<(f64, f64)> {
    let spec = initial.spec;
    if med.k() == 0.0 {
        return Err(Error::Domain(
            "k = 0 evolutions absorb any mass; there is no terminal time".into(),
        ));
    }
    feasibility_scan(
        |t| {
            let mu = injection_measure(initial, z, t, rho);
            Ok(sweep(&mu, rho, med, &spec, cfg)?.is_converged())
        },
        t_lo,
        t_hi,
        width,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn area_radius(mask: &Mask) -> f64 {
        let spec = mask.spec;
        (mask.count() as f64 * spec.h * spec.h / std::f64::consts::PI).sqrt()
    }

    fn volume_radius(mask: &Mask) -> f64 {
        let spec = mask.spec;
        let v = mask.count() as f64 * spec.h * spec.h * spec.h;
        (3.0 * v / (4.0 * std::f64::consts::PI)).powf(1.0 / 3.0)
    }

    fn quick_cfg() -> SweepConfig {
        SweepConfig { compute_lambda1: false, ..Default::default() }
    }

    #[test]
    fn discs_grow_at_the_predicted_radii() {
        // Initial disc of radius 0.8 at bound 1, injection at the center;
        // the evolved radii follow the exact radial solution.
        let med = Medium::new(2, 1.0).unwrap();
        let h = 0.025;
        let spec = GridSpec::from_box(2, [-1.6, -1.6, 0.0], [1.6, 1.6, 0.0], h).unwrap();
        let initial = Mask::from_fn(spec, |p| (p[0] * p[0] + p[1] * p[1]).sqrt() < 0.8);
        let rho = Rho::Constant(1.0);
        let times = [0.2, 0.5, 1.0, 2.0];
        let want = [
            0.846_173_346_408_822_08,
            0.912_742_671_829_456_16,
            1.018_457_809_618_341_2,
            1.219_152_643_119_868,
        ];
        let ev = evolve(&initial, [0.0; 3], &med, &rho, &times, &quick_cfg()).unwrap();
        assert!(ev.halted.is_none());
        assert_eq!(ev.steps.len(), times.len());
        assert_eq!(ev.containment_violations, 0);
        for (step, want_r) in ev.steps.iter().zip(want) {
            let got = area_radius(&step.domain);
            assert!(
                (got - want_r).abs() < 2.0 * h,
                "t = {}: radius {got} vs {want_r}",
                step.time
            );
        }
    }

    #[test]
    fn balls_grow_at_the_predicted_radii() {
        let med = Medium::new(3, 1.0).unwrap();
        let h = 0.05;
        let spec =
            GridSpec::from_box(3, [-1.3, -1.3, -1.3], [1.3, 1.3, 1.3], h).unwrap();
        let initial = Mask::from_fn(spec, |p| {
            (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() < 0.5
        });
        let rho = Rho::Constant(1.0);
        let times = [0.5, 1.5, 3.0];
        let want = [
            0.630_902_890_556_904_38,
            0.800_016_974_436_801_55,
            0.973_515_657_749_550_26,
        ];
        let ev = evolve(&initial, [0.0; 3], &med, &rho, &times, &quick_cfg()).unwrap();
        assert!(ev.halted.is_none());
        assert_eq!(ev.containment_violations, 0);
        for (step, want_r) in ev.steps.iter().zip(want) {
            let got = volume_radius(&step.domain);
            assert!(
                (got - want_r).abs() < 2.0 * h,
                "t = {}: radius {got} vs {want_r}",
                step.time
            );
        }
    }

    #[test]
    fn law_step_agrees_between_formulations() {
        let med = Medium::new(2, 1.0).unwrap();
        let h = 0.05;
        let spec = GridSpec::from_box(2, [-1.6, -1.6, 0.0], [1.6, 1.6, 0.0], h).unwrap();
        let initial = Mask::from_fn(spec, |p| (p[0] * p[0] + p[1] * p[1]).sqrt() < 0.8);
        let rho = Rho::Constant(1.0);
        let rep = verify_law(&initial, [0.0; 3], 0.5, 0.1, &med, &rho, &quick_cfg()).unwrap();
        assert!(rep.layer_ok, "{rep:?}");
        assert!(rep.potential_gap < 10.0 * h, "{rep:?}");
    }

    #[test]
    fn evolution_halts_at_an_infeasible_time() {
        // The disc of radius 0.8 accepts just under 6 units of injected
        // mass; ask for more and the run stops there.
        let med = Medium::new(2, 1.0).unwrap();
        let spec = GridSpec::from_box(2, [-2.7, -2.7, 0.0], [2.7, 2.7, 0.0], 0.05).unwrap();
        let initial = Mask::from_fn(spec, |p| (p[0] * p[0] + p[1] * p[1]).sqrt() < 0.8);
        let rho = Rho::Constant(1.0);
        let ev = evolve(&initial, [0.0; 3], &med, &rho, &[1.0, 6.5], &quick_cfg()).unwrap();
        assert_eq!(ev.steps.len(), 1);
        match ev.halted {
            Some((t, _)) => assert_eq!(t, 6.5),
            None => panic!("expected a halt at t = 6.5"),
        }
    }

    #[test]
    fn terminal_mass_is_bracketed() {
        let med = Medium::new(2, 1.0).unwrap();
        let spec = GridSpec::from_box(2, [-2.7, -2.7, 0.0], [2.7, 2.7, 0.0], 0.05).unwrap();
        let initial = Mask::from_fn(spec, |p| (p[0] * p[0] + p[1] * p[1]).sqrt() < 0.8);
        let rho = Rho::Constant(1.0);
        let (lo, hi) =
            terminal_bracket(&initial, [0.0; 3], &med, &rho, &quick_cfg(), 5.0, 7.0, 0.5)
                .unwrap();
        let want = 5.990_297_971_893_277_7;
        assert!(lo <= want && want <= hi, "bracket [{lo}, {hi}] vs {want}");
        assert!(hi - lo <= 0.5);
        let k0 = Medium::new(2, 0.0).unwrap();
        assert!(terminal_bracket(&initial, [0.0; 3], &k0, &rho, &quick_cfg(), 1.0, 2.0, 0.5)
            .is_err());
    }
}
