//! Batch front end: scenario ingestion, orchestration, reproducible artifacts.
//!
//! A scenario is a single JSON document naming the medium, the source
//! measure, the density bound, the grid, and per-command blocks. Every
//! command writes a `manifest.json` recording the scenario hash, the grid,
//! and the library version, plus a machine-readable `summary.json`; bulky
//! results go to field binaries (`.f64` with a JSON sidecar), PGM masks,
//! and CSV tables. Outputs are bit-identical across runs and thread counts
//! for a fixed scenario, seed, and version.
//!
//! Exit status: `0` on success, `2` when the mathematics reports an
//! infeasible but well-posed problem (no admissible sweep, halted
//! evolution), `1` on errors and failed verifications.

use crate::balayage::{
    auto_grid, lambda1_estimate, structure_check, sweep, Rho, SweepConfig, SweepOutcome,
    SweepResult,
};
use crate::error::{Error, Result};
use crate::grid::io::{read_field, read_mask, write_field, write_field_csv, write_mask};
use crate::grid::{
    potential_at_points, Atom, Ball, GridSpec, Mask, Measure, PotentialMethod, Shell,
};
use crate::heleshaw::{evolve, terminal_bracket, verify_law};
use crate::quadrature::{exterior_match, interior_domination, mean_value_gap};
use crate::radial::{
    ball_sweep_radius, c_k, d_k, null_ball_radius, point_mass_radius, psi, r_k, sphere_sweep,
    Medium, RadialOutcome,
};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

/// Default shell radii for exterior verification, as multiples of the
/// enclosing radius of `omega` and the source support.
const DEFAULT_SHELL_FACTORS: [f64; 2] = [1.25, 1.5];
/// Default node count per verification shell.
const DEFAULT_SHELL_NODES: usize = 64;
/// Default interior sample budget for the domination check.
const DEFAULT_INTERIOR_POINTS: usize = 32;
/// Verification tolerance is this factor times `h` times the source mass.
const DEFAULT_TOLERANCE_FACTOR: f64 = 10.0;

#[derive(Parser)]
#[command(name = "helmbal", version, about = "Partial sweeping of measures for the Helmholtz operator", long_about = None)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the scenario measure and export the result fields and masks.
    Sweep(RunArgs),
    /// Evolve a saturated domain under point injection over a time grid.
    Heleshaw(RunArgs),
    /// Tabulate closed-form radial quantities as CSV.
    RadialTable(RunArgs),
    /// Check a sweep against exterior, interior, and mean-value sampling.
    Verify(RunArgs),
    /// Estimate the Dirichlet ground energy of a region.
    Lambda1(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario JSON document.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for artifacts; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario grid spacing.
    #[arg(long)]
    grid_h: Option<f64>,
    /// Seed for sampling-based verification.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Size of the global worker pool; defaults to the CPU count.
    #[arg(long)]
    threads: Option<usize>,
}

/// Parses arguments, runs the command, and maps the outcome to the exit
/// status contract.
pub fn main() -> i32 {
    let args = Args::parse();
    let run = match &args.command {
        Command::Sweep(r)
        | Command::Heleshaw(r)
        | Command::RadialTable(r)
        | Command::Verify(r)
        | Command::Lambda1(r) => r,
    };
    if let Some(n) = run.threads {
        // A second initialisation in the same process is harmless; results
        // do not depend on the pool size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let outcome = match &args.command {
        Command::Sweep(r) => cmd_sweep(r),
        Command::Heleshaw(r) => cmd_heleshaw(r),
        Command::RadialTable(r) => cmd_radial_table(r),
        Command::Verify(r) => cmd_verify(r),
        Command::Lambda1(r) => cmd_lambda1(r),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario schema
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Scenario {
    medium: MediumSpec,
    rho: RhoSpec,
    #[serde(default)]
    measure: MeasureSpec,
    #[serde(default)]
    grid: Option<GridSection>,
    #[serde(default)]
    solver: Option<SolverSpec>,
    #[serde(default)]
    output: Option<OutputSpec>,
    #[serde(default)]
    heleshaw: Option<HeleshawSpec>,
    #[serde(default)]
    radial: Option<RadialSpec>,
    #[serde(default)]
    verify: Option<VerifySpec>,
    #[serde(default)]
    lambda1: Option<Lambda1Spec>,
}

#[derive(Deserialize)]
struct MediumSpec {
    dim: usize,
    k: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RhoSpec {
    Constant(f64),
    File { file: String },
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MeasureSpec {
    #[serde(default)]
    atoms: Vec<Atom>,
    #[serde(default)]
    balls: Vec<Ball>,
    #[serde(default)]
    shells: Vec<Shell>,
    #[serde(default)]
    density_file: Option<String>,
}

#[derive(Deserialize)]
struct GridSection {
    h: f64,
    #[serde(rename = "box")]
    bbox: BoxSpec,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BoxSpec {
    Keyword(String),
    Explicit { lo: [f64; 3], hi: [f64; 3] },
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverSpec {
    inner_tol: Option<f64>,
    outer_tol: Option<f64>,
    max_outer: Option<usize>,
    omega_theta: Option<f64>,
    divergence_factor: Option<f64>,
    spectral_kill: Option<f64>,
    method: Option<String>,
    compute_lambda1: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OutputSpec {
    /// Also export the result fields as CSV next to the binaries.
    #[serde(default)]
    csv_fields: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HeleshawSpec {
    initial: RegionSpec,
    injection_point: [f64; 3],
    times: Vec<f64>,
    #[serde(default)]
    law_check: Option<LawCheckSpec>,
    #[serde(default)]
    bracket: Option<BracketSpec>,
}

/// A region given either as a ball or as a mask file path (relative to the
/// scenario document). Exactly one entry must be present.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RegionSpec {
    #[serde(default)]
    ball: Option<BallRegion>,
    #[serde(default)]
    mask: Option<String>,
}

#[derive(Deserialize, Clone, Copy)]
struct BallRegion {
    center: [f64; 3],
    radius: f64,
}

#[derive(Deserialize, Clone, Copy)]
struct LawCheckSpec {
    time: f64,
    step: f64,
}

#[derive(Deserialize, Clone, Copy)]
struct BracketSpec {
    lo: f64,
    hi: f64,
    width: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RadialSpec {
    rows: Vec<RadialRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RadialRow {
    kind: String,
    #[serde(default)]
    dim: Option<usize>,
    #[serde(default)]
    k: Option<f64>,
    #[serde(default)]
    r_start: Option<f64>,
    #[serde(default)]
    r_stop: Option<f64>,
    #[serde(default)]
    count: Option<usize>,
    #[serde(default)]
    mass: Option<f64>,
    #[serde(default)]
    density: Option<f64>,
    #[serde(default)]
    radius: Option<f64>,
    #[serde(default)]
    sphere_radius: Option<f64>,
    #[serde(default)]
    level: Option<f64>,
    #[serde(default)]
    initial_radius: Option<f64>,
    #[serde(default)]
    times: Option<Vec<f64>>,
}

#[derive(Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct VerifySpec {
    /// Saturated region from an earlier sweep; when absent the sweep runs
    /// here and its region is used directly.
    #[serde(default)]
    omega_mask: Option<String>,
    #[serde(default)]
    shell_factors: Option<Vec<f64>>,
    #[serde(default)]
    nodes: Option<usize>,
    #[serde(default)]
    interior_points: Option<usize>,
    #[serde(default)]
    tolerance_factor: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Lambda1Spec {
    #[serde(default)]
    ball: Option<BallRegion>,
    #[serde(default)]
    mask: Option<String>,
}

/// Scenario plus everything derived from its location and bytes.
struct Loaded {
    scenario: Scenario,
    sha256: String,
    base: PathBuf,
}

fn load_scenario(path: &Path) -> Result<Loaded> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
    let scenario: Scenario = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Config(format!("scenario {}: {e}", path.display())))?;
    if scenario.medium.dim != 2 && scenario.medium.dim != 3 {
        return Err(Error::Config(format!(
            "medium dim must be 2 or 3, got {}",
            scenario.medium.dim
        )));
    }
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let sha256 = hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            use std::fmt::Write;
            let _ = write!(s, "{b:02x}");
            s
        });
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok(Loaded { scenario, sha256, base })
}

impl Loaded {
    fn medium(&self) -> Result<Medium> {
        Medium::new(self.scenario.medium.dim, self.scenario.medium.k)
    }

    fn measure(&self) -> Result<Measure> {
        let spec = &self.scenario.measure;
        let density = match &spec.density_file {
            Some(rel) => Some(read_field(&self.base.join(rel))?),
            None => None,
        };
        let m = Measure {
            atoms: spec.atoms.clone(),
            balls: spec.balls.clone(),
            shells: spec.shells.clone(),
            density,
        };
        if m.is_empty() {
            return Err(Error::Config("scenario measure is empty".into()));
        }
        Ok(m)
    }

    fn rho(&self) -> Result<Rho> {
        Ok(match &self.scenario.rho {
            RhoSpec::Constant(c) => Rho::Constant(*c),
            RhoSpec::File { file } => Rho::Field(read_field(&self.base.join(file))?),
        })
    }

    /// Resolves the grid section, honouring a spacing override. The auto
    /// box needs a constant density bound to size itself.
    fn grid(&self, med: &Medium, measure: &Measure, h_override: Option<f64>) -> Result<GridSpec> {
        let section = self
            .scenario
            .grid
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a grid section".into()))?;
        let h = h_override.unwrap_or(section.h);
        match &section.bbox {
            BoxSpec::Keyword(word) if word == "auto" => {
                let floor = match &self.scenario.rho {
                    RhoSpec::Constant(c) => *c,
                    RhoSpec::File { .. } => {
                        return Err(Error::Config(
                            "auto box needs a constant rho; give an explicit box".into(),
                        ))
                    }
                };
                auto_grid(measure, med, floor, h)
            }
            BoxSpec::Keyword(word) => {
                Err(Error::Config(format!("unknown box keyword {word:?}, expected \"auto\"")))
            }
            BoxSpec::Explicit { lo, hi } => GridSpec::from_box(med.dim(), *lo, *hi, h),
        }
    }

    fn sweep_config(&self) -> Result<SweepConfig> {
        let mut cfg = SweepConfig::default();
        if let Some(s) = &self.scenario.solver {
            if let Some(v) = s.inner_tol {
                cfg.inner_tol = v;
            }
            if let Some(v) = s.outer_tol {
                cfg.outer_tol = v;
            }
            if let Some(v) = s.max_outer {
                cfg.max_outer = v;
            }
            if let Some(v) = s.omega_theta {
                cfg.omega_theta = v;
            }
            if let Some(v) = s.divergence_factor {
                cfg.divergence_factor = v;
            }
            if let Some(v) = s.spectral_kill {
                cfg.spectral_kill = v;
            }
            if let Some(m) = &s.method {
                cfg.method = match m.as_str() {
                    "auto" => PotentialMethod::Auto,
                    "direct" => PotentialMethod::Direct,
                    "fft" => PotentialMethod::Fft,
                    other => {
                        return Err(Error::Config(format!(
                            "unknown potential method {other:?}, expected auto, direct, or fft"
                        )))
                    }
                };
            }
            if let Some(v) = s.compute_lambda1 {
                cfg.compute_lambda1 = v;
            }
        }
        Ok(cfg)
    }

    fn csv_fields(&self) -> bool {
        self.scenario.output.as_ref().map(|o| o.csv_fields).unwrap_or(false)
    }

    fn region_mask(&self, region: &RegionSpec, spec_hint: Option<GridSpec>) -> Result<Mask> {
        match (&region.ball, &region.mask) {
            (Some(ball), None) => {
                let spec = spec_hint.ok_or_else(|| {
                    Error::Config("a ball region needs a grid section".into())
                })?;
                let c = *ball;
                Ok(Mask::from_fn(spec, |p| {
                    let mut s = 0.0;
                    for a in 0..spec.dim {
                        let d = p[a] - c.center[a];
                        s += d * d;
                    }
                    s.sqrt() < c.radius
                }))
            }
            (None, Some(rel)) => read_mask(&self.base.join(rel)),
            _ => Err(Error::Config(
                "a region must give exactly one of \"ball\" or \"mask\"".into(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    scenario_sha256: &'a str,
    grid: Option<GridSpec>,
    seed: u64,
}

fn write_manifest(
    out: &Path,
    command: &'static str,
    loaded: &Loaded,
    grid: Option<GridSpec>,
    seed: u64,
) -> Result<()> {
    let manifest = Manifest {
        tool: "helmbal",
        version: env!("CARGO_PKG_VERSION"),
        command,
        scenario_sha256: &loaded.sha256,
        grid,
        seed,
    };
    write_json(&out.join("manifest.json"), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), value)?;
    Ok(())
}

fn ensure_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create output dir {}: {e}", dir.display())))
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ResidualSummary {
    max_excess: f64,
    max_omega_residual: f64,
    max_exterior_residual: f64,
    ring_mass: f64,
}

#[derive(Serialize)]
struct SweepSummary {
    feasible: bool,
    converged: bool,
    iterations: usize,
    lambda1_omega: Option<f64>,
    omega_cell_count: usize,
    saturated_cell_count: usize,
    #[serde(rename = "B_total_mass")]
    b_total_mass: Option<f64>,
    source_total_mass: Option<f64>,
    residuals: Option<ResidualSummary>,
    infeasible_reason: Option<String>,
    sup_u: Option<f64>,
}

fn summarize_converged(out: &SweepOutcome, rho: &Rho) -> SweepSummary {
    let rep = structure_check(out, rho);
    let vol = out.u.spec.cell_volume();
    SweepSummary {
        feasible: true,
        converged: true,
        iterations: out.outer_iterations,
        lambda1_omega: out.lambda1,
        omega_cell_count: out.omega.count(),
        saturated_cell_count: out.saturated.count(),
        b_total_mass: Some(out.swept.data.iter().sum::<f64>() * vol),
        source_total_mass: Some(out.source.data.iter().sum::<f64>() * vol),
        residuals: Some(ResidualSummary {
            max_excess: rep.max_excess,
            max_omega_residual: rep.max_omega_residual,
            max_exterior_residual: rep.max_exterior_residual,
            ring_mass: rep.ring_mass,
        }),
        infeasible_reason: None,
        sup_u: None,
    }
}

fn write_sweep_artifacts(out_dir: &Path, out: &SweepOutcome, csv: bool) -> Result<()> {
    write_field(&out.u, &out_dir.join("u.f64"))?;
    write_field(&out.v, &out_dir.join("v.f64"))?;
    write_field(&out.swept, &out_dir.join("b.f64"))?;
    write_field(&out.source, &out_dir.join("source.f64"))?;
    write_mask(&out.omega, &out_dir.join("omega.pgm"))?;
    write_mask(&out.saturated, &out_dir.join("saturated.pgm"))?;
    if csv {
        write_field_csv(&out.u, &out_dir.join("u.csv"))?;
        write_field_csv(&out.v, &out_dir.join("v.csv"))?;
        write_field_csv(&out.swept, &out_dir.join("b.csv"))?;
    }
    Ok(())
}

fn cmd_sweep(run: &RunArgs) -> Result<i32> {
    let loaded = load_scenario(&run.scenario)?;
    let med = loaded.medium()?;
    let measure = loaded.measure()?;
    let rho = loaded.rho()?;
    let spec = loaded.grid(&med, &measure, run.grid_h)?;
    let cfg = loaded.sweep_config()?;
    ensure_out(&run.out)?;
    write_manifest(&run.out, "sweep", &loaded, Some(spec), run.seed)?;
    match sweep(&measure, &rho, &med, &spec, &cfg)? {
        SweepResult::Converged(out) => {
            let summary = summarize_converged(&out, &rho);
            write_json(&run.out.join("summary.json"), &summary)?;
            write_sweep_artifacts(&run.out, &out, loaded.csv_fields())?;
            println!(
                "sweep: converged in {} outer iterations, omega has {} cells",
                out.outer_iterations,
                out.omega.count()
            );
            Ok(0)
        }
        SweepResult::Infeasible { reason, outer_iterations, sup_u } => {
            let summary = SweepSummary {
                feasible: false,
                converged: false,
                iterations: outer_iterations,
                lambda1_omega: None,
                omega_cell_count: 0,
                saturated_cell_count: 0,
                b_total_mass: None,
                source_total_mass: None,
                residuals: None,
                infeasible_reason: Some(reason.to_string()),
                sup_u: Some(sup_u),
            };
            write_json(&run.out.join("summary.json"), &summary)?;
            println!("sweep: infeasible ({reason})");
            Ok(2)
        }
    }
}

// ---------------------------------------------------------------------------
// heleshaw
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct HeleshawStep {
    t: f64,
    omega_cells: usize,
    lambda1: Option<f64>,
    feasible: bool,
    domain_cells: usize,
    equivalent_radius: f64,
}

#[derive(Serialize)]
struct HaltRecord {
    t: f64,
    reason: String,
}

#[derive(Serialize)]
struct LawSummary {
    time: f64,
    step: f64,
    region_sym_diff: usize,
    layer_ok: bool,
    potential_gap: f64,
}

#[derive(Serialize)]
struct HeleshawSummary {
    steps: Vec<HeleshawStep>,
    halted: Option<HaltRecord>,
    containment_violations: usize,
    law: Option<LawSummary>,
    terminal_bracket: Option<[f64; 2]>,
}

/// Radius of the ball with the same volume as `cells` grid cells.
fn equivalent_radius(med: &Medium, spec: &GridSpec, cells: usize) -> f64 {
    let vol = cells as f64 * spec.cell_volume();
    (vol / med.ball_volume(1.0)).powf(1.0 / med.dim() as f64)
}

fn cmd_heleshaw(run: &RunArgs) -> Result<i32> {
    let loaded = load_scenario(&run.scenario)?;
    let med = loaded.medium()?;
    let rho = loaded.rho()?;
    let section = loaded
        .scenario
        .heleshaw
        .as_ref()
        .ok_or_else(|| Error::Config("heleshaw command needs a heleshaw section".into()))?;
    let spec_hint = match &loaded.scenario.grid {
        Some(g) => {
            let h = run.grid_h.unwrap_or(g.h);
            match &g.bbox {
                BoxSpec::Explicit { lo, hi } => Some(GridSpec::from_box(med.dim(), *lo, *hi, h)?),
                BoxSpec::Keyword(_) => {
                    return Err(Error::Config(
                        "heleshaw needs an explicit box; the final extent is not known up front"
                            .into(),
                    ))
                }
            }
        }
        None => None,
    };
    let initial = loaded.region_mask(&section.initial, spec_hint)?;
    let spec = initial.spec;
    let cfg = loaded.sweep_config()?;
    ensure_out(&run.out)?;
    write_manifest(&run.out, "heleshaw", &loaded, Some(spec), run.seed)?;

    let evolution = evolve(&initial, section.injection_point, &med, &rho, &section.times, &cfg)?;
    let mut steps = Vec::with_capacity(evolution.steps.len());
    for (i, step) in evolution.steps.iter().enumerate() {
        write_mask(&step.domain, &run.out.join(format!("domain_{i:03}.pgm")))?;
        steps.push(HeleshawStep {
            t: step.time,
            omega_cells: step.outcome.omega.count(),
            lambda1: step.outcome.lambda1,
            feasible: true,
            domain_cells: step.domain.count(),
            equivalent_radius: equivalent_radius(&med, &spec, step.domain.count()),
        });
    }
    let halted = evolution
        .halted
        .as_ref()
        .map(|(t, reason)| HaltRecord { t: *t, reason: reason.to_string() });

    let law = match &section.law_check {
        Some(lc) => {
            let rep = verify_law(&initial, section.injection_point, lc.time, lc.step, &med, &rho, &cfg)?;
            Some(LawSummary {
                time: lc.time,
                step: lc.step,
                region_sym_diff: rep.region_sym_diff,
                layer_ok: rep.layer_ok,
                potential_gap: rep.potential_gap,
            })
        }
        None => None,
    };
    let bracket = match &section.bracket {
        Some(b) => Some(terminal_bracket(
            &initial,
            section.injection_point,
            &med,
            &rho,
            &cfg,
            b.lo,
            b.hi,
            b.width,
        )?),
        None => None,
    };

    let summary = HeleshawSummary {
        steps,
        halted,
        containment_violations: evolution.containment_violations,
        law,
        terminal_bracket: bracket.map(|(lo, hi)| [lo, hi]),
    };
    write_json(&run.out.join("summary.json"), &summary)?;
    match &evolution.halted {
        Some((t, reason)) => {
            println!("heleshaw: halted at t = {t} ({reason}), {} steps written", evolution.steps.len());
            Ok(2)
        }
        None => {
            println!("heleshaw: {} steps written", evolution.steps.len());
            Ok(0)
        }
    }
}

// ---------------------------------------------------------------------------
// radial-table
// ---------------------------------------------------------------------------

struct CsvRow {
    quantity: String,
    medium: String,
    parameters: String,
    value: String,
}

fn medium_label(med: &Medium) -> String {
    format!("N={},k={}", med.dim(), med.k())
}

fn push_value(rows: &mut Vec<CsvRow>, q: &str, med: &Medium, params: String, v: f64) {
    rows.push(CsvRow {
        quantity: q.into(),
        medium: medium_label(med),
        parameters: params,
        value: format!("{v}"),
    });
}

fn radial_rows(row: &RadialRow, default_med: &Medium) -> Result<Vec<CsvRow>> {
    let med = Medium::new(
        row.dim.unwrap_or(default_med.dim()),
        row.k.unwrap_or(default_med.k()),
    )?;
    let mut rows = Vec::new();
    match row.kind.as_str() {
        "constants" => {
            push_value(&mut rows, "R_k", &med, String::new(), r_k(&med));
            push_value(&mut rows, "null_ball_radius", &med, String::new(), null_ball_radius(&med));
        }
        "kernels" => {
            let start = row.r_start.unwrap_or(0.1);
            let stop = row.r_stop.unwrap_or(r_k(&med).min(10.0));
            let count = row.count.unwrap_or(16).max(2);
            for i in 0..count {
                let r = start + (stop - start) * i as f64 / (count - 1) as f64;
                let params = format!("r={r}");
                push_value(&mut rows, "c_k", &med, params.clone(), c_k(&med, r)?);
                push_value(&mut rows, "d_k", &med, params.clone(), d_k(&med, r)?);
                push_value(&mut rows, "psi", &med, params, psi(&med, r)?);
            }
        }
        "point_mass" => {
            let c = row
                .mass
                .ok_or_else(|| Error::Config("point_mass row needs \"mass\"".into()))?;
            let params = format!("c={c}");
            match point_mass_radius(&med, c)? {
                Some(r) => push_value(&mut rows, "point_mass_radius", &med, params, r),
                None => rows.push(CsvRow {
                    quantity: "point_mass_radius".into(),
                    medium: medium_label(&med),
                    parameters: params,
                    value: "unbounded".into(),
                }),
            }
        }
        "ball_sweep" => {
            let c = row
                .density
                .ok_or_else(|| Error::Config("ball_sweep row needs \"density\"".into()))?;
            let big_r = row
                .radius
                .ok_or_else(|| Error::Config("ball_sweep row needs \"radius\"".into()))?;
            let params = format!("c={c},R={big_r}");
            match ball_sweep_radius(&med, c, big_r)? {
                Some(r) => push_value(&mut rows, "ball_sweep_radius", &med, params, r),
                None => rows.push(CsvRow {
                    quantity: "ball_sweep_radius".into(),
                    medium: medium_label(&med),
                    parameters: params,
                    value: "unbounded".into(),
                }),
            }
        }
        "sphere_sweep" => {
            let big_t = row
                .sphere_radius
                .ok_or_else(|| Error::Config("sphere_sweep row needs \"sphere_radius\"".into()))?;
            let t = row
                .level
                .ok_or_else(|| Error::Config("sphere_sweep row needs \"level\"".into()))?;
            let params = format!("T={big_t},t={t}");
            match sphere_sweep(&med, big_t, t)? {
                RadialOutcome::Feasible(s) => {
                    push_value(&mut rows, "sphere_inner", &med, params.clone(), s.inner);
                    push_value(&mut rows, "sphere_outer", &med, params.clone(), s.outer);
                    push_value(&mut rows, "sphere_weight", &med, params.clone(), s.weight);
                    push_value(&mut rows, "sphere_lambda1", &med, params, s.lambda1);
                }
                RadialOutcome::NoBoundedRegion => rows.push(CsvRow {
                    quantity: "sphere_sweep".into(),
                    medium: medium_label(&med),
                    parameters: params,
                    value: "no-bounded-region".into(),
                }),
                RadialOutcome::GroundStateBelow { lambda1 } => rows.push(CsvRow {
                    quantity: "sphere_sweep".into(),
                    medium: medium_label(&med),
                    parameters: params,
                    value: format!("ground-state-below:{lambda1}"),
                }),
            }
        }
        "growth" => {
            // Radius of the saturated ball after injecting mass t into a
            // ball of the given initial radius: exterior agreement forces
            // rho c_k(r) = rho c_k(R0) + t.
            let big_r = row
                .initial_radius
                .ok_or_else(|| Error::Config("growth row needs \"initial_radius\"".into()))?;
            let rho = row.density.unwrap_or(1.0);
            let times = row
                .times
                .as_ref()
                .ok_or_else(|| Error::Config("growth row needs \"times\"".into()))?;
            let base = c_k(&med, big_r)?;
            for &t in times {
                let params = format!("R0={big_r},rho={rho},t={t}");
                match point_mass_radius(&med, base + t / rho)? {
                    Some(r) => push_value(&mut rows, "growth_radius", &med, params, r),
                    None => rows.push(CsvRow {
                        quantity: "growth_radius".into(),
                        medium: medium_label(&med),
                        parameters: params,
                        value: "unbounded".into(),
                    }),
                }
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown radial row kind {other:?}; expected constants, kernels, point_mass, \
                 ball_sweep, sphere_sweep, or growth"
            )))
        }
    }
    Ok(rows)
}

fn cmd_radial_table(run: &RunArgs) -> Result<i32> {
    let loaded = load_scenario(&run.scenario)?;
    let med = loaded.medium()?;
    let section = loaded
        .scenario
        .radial
        .as_ref()
        .ok_or_else(|| Error::Config("radial-table command needs a radial section".into()))?;
    if section.rows.is_empty() {
        return Err(Error::Config("radial section has no rows".into()));
    }
    ensure_out(&run.out)?;
    write_manifest(&run.out, "radial-table", &loaded, None, run.seed)?;
    let path = run.out.join("radial.csv");
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(["quantity", "medium", "parameters", "value"])
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    let mut n = 0usize;
    for row in &section.rows {
        for r in radial_rows(row, &med)? {
            w.write_record([&r.quantity, &r.medium, &r.parameters, &r.value])
                .map_err(|e| Error::Config(format!("csv: {e}")))?;
            n += 1;
        }
    }
    w.flush()?;
    println!("radial-table: {n} rows written");
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct QuadratureReport {
    /// The certificate covers translates of the fundamental solution, not
    /// every admissible test function.
    test_family: &'static str,
    center: [f64; 3],
    shell_radii: Vec<f64>,
    shell_gaps: Vec<f64>,
    max_exterior_gap: f64,
    interior_domination: f64,
    interior_points_used: usize,
    mean_value_gap: f64,
    mean_value_tolerance: f64,
    tolerance: f64,
    pass: bool,
}

/// Largest distance from `center` to an active cell center, in the axes
/// the dimension uses.
fn enclosing_radius(mask: &Mask, med: &Medium, center: [f64; 3]) -> f64 {
    let spec = mask.spec;
    let mut best = 0.0f64;
    for idx in 0..spec.len() {
        if !mask.data[idx] {
            continue;
        }
        let p = spec.center(spec.decompose(idx));
        let mut s = 0.0;
        for a in 0..med.dim() {
            let d = p[a] - center[a];
            s += d * d;
        }
        best = best.max(s.sqrt());
    }
    best
}

/// Deterministic coarse sublattice of active cells, at least `1.5 h` away
/// from every atom so the samples stay off the kernel singularity.
fn interior_samples(
    mask: &Mask,
    measure: &Measure,
    med: &Medium,
    budget: usize,
) -> Vec<[f64; 3]> {
    let spec = mask.spec;
    let mut stride = 1usize;
    loop {
        let mut pts = Vec::new();
        for idx in 0..spec.len() {
            if !mask.data[idx] {
                continue;
            }
            let c = spec.decompose(idx);
            if c[0] % stride != 0 || c[1] % stride != 0 || c[2] % stride != 0 {
                continue;
            }
            let p = spec.center(c);
            let near_atom = measure.atoms.iter().any(|a| {
                let mut s = 0.0;
                for ax in 0..med.dim() {
                    let d = p[ax] - a.point[ax];
                    s += d * d;
                }
                s.sqrt() < 1.5 * spec.h
            });
            if !near_atom {
                pts.push(p);
            }
        }
        if pts.len() <= budget || stride > spec.shape.iter().copied().max().unwrap_or(1) {
            return pts;
        }
        stride *= 2;
    }
}

fn cmd_verify(run: &RunArgs) -> Result<i32> {
    let loaded = load_scenario(&run.scenario)?;
    let med = loaded.medium()?;
    let measure = loaded.measure()?;
    let rho = loaded.rho()?;
    let section = loaded.scenario.verify.clone().unwrap_or_default();
    let cfg = loaded.sweep_config()?;
    ensure_out(&run.out)?;

    // The saturated region: either replayed from a mask artifact or
    // produced by sweeping the scenario right here.
    let (omega, swept_field) = match &section.omega_mask {
        Some(rel) => {
            if run.grid_h.is_some() {
                return Err(Error::Config(
                    "grid-h cannot override a mask-defined grid".into(),
                ));
            }
            let omega = read_mask(&loaded.base.join(rel))?;
            let spec = omega.spec;
            if spec.dim != med.dim() {
                return Err(Error::Config(format!(
                    "mask dimension {} does not match medium dimension {}",
                    spec.dim,
                    med.dim()
                )));
            }
            rho.validate(&spec)?;
            // Reconstruct the swept density from the structure theorem:
            // rho on omega, the source density elsewhere.
            let mut b = measure.rasterize(&spec)?;
            for idx in 0..spec.len() {
                if omega.data[idx] {
                    b.data[idx] = rho.at(idx);
                }
            }
            (omega, b)
        }
        None => {
            let spec = loaded.grid(&med, &measure, run.grid_h)?;
            match sweep(&measure, &rho, &med, &spec, &cfg)? {
                SweepResult::Converged(out) => (out.omega.clone(), out.swept.clone()),
                SweepResult::Infeasible { reason, outer_iterations, sup_u } => {
                    write_manifest(&run.out, "verify", &loaded, Some(spec), run.seed)?;
                    let summary = SweepSummary {
                        feasible: false,
                        converged: false,
                        iterations: outer_iterations,
                        lambda1_omega: None,
                        omega_cell_count: 0,
                        saturated_cell_count: 0,
                        b_total_mass: None,
                        source_total_mass: None,
                        residuals: None,
                        infeasible_reason: Some(reason.to_string()),
                        sup_u: Some(sup_u),
                    };
                    write_json(&run.out.join("summary.json"), &summary)?;
                    println!("verify: nothing to check, the sweep is infeasible ({reason})");
                    return Ok(2);
                }
            }
        }
    };
    let spec = omega.spec;
    write_manifest(&run.out, "verify", &loaded, Some(spec), run.seed)?;
    let swept_measure = Measure::from_density(swept_field);

    let center = omega
        .centroid()
        .or_else(|| {
            measure.support_bounds(med.dim()).map(|(lo, hi)| {
                [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])]
            })
        })
        .ok_or_else(|| Error::Config("the region and the measure are both empty".into()))?;
    let mut enclosing = enclosing_radius(&omega, &med, center);
    if let Some((lo, hi)) = measure.support_bounds(med.dim()) {
        for a in 0..med.dim() {
            enclosing = enclosing
                .max((lo[a] - center[a]).abs())
                .max((hi[a] - center[a]).abs());
        }
    }
    enclosing += 2.0 * spec.h;

    let factors = section
        .shell_factors
        .clone()
        .unwrap_or_else(|| DEFAULT_SHELL_FACTORS.to_vec());
    let radii: Vec<f64> = factors.iter().map(|f| f * enclosing).collect();
    let nodes = section.nodes.unwrap_or(DEFAULT_SHELL_NODES);
    let budget = section.interior_points.unwrap_or(DEFAULT_INTERIOR_POINTS);
    let factor = section.tolerance_factor.unwrap_or(DEFAULT_TOLERANCE_FACTOR);
    let mass = measure.total_mass(med.dim());
    let tolerance = factor * spec.h * mass.max(1.0);

    let exterior = exterior_match(&measure, &swept_measure, &med, center, &radii, nodes, run.seed)?;
    let interior_pts = interior_samples(&omega, &measure, &med, budget);
    let domination = if interior_pts.is_empty() {
        0.0
    } else {
        interior_domination(&measure, &swept_measure, &med, &interior_pts)?
    };

    // Mean-value identity of the swept potential on a sphere clear of all
    // mass; checks the sampling machinery itself.
    let mut z = center;
    z[0] += 2.5 * enclosing;
    let mv_nodes = if med.dim() == 2 { 256 } else { 4096 };
    let mv_gap = mean_value_gap(&swept_measure, &med, z, 0.4 * enclosing, mv_nodes, run.seed)?;
    let mv_scale = {
        let uz = potential_at_points(&swept_measure, &med, &[z])?[0];
        (uz * d_k(&med, 0.4 * enclosing)?).abs()
    };
    let mv_tol = if med.dim() == 2 { 1e-8 } else { 1e-3 } * mv_scale.max(1e-12);

    let pass = exterior.max_gap <= tolerance && domination <= tolerance && mv_gap <= mv_tol;
    let report = QuadratureReport {
        test_family: "fundamental solution translates",
        center,
        shell_radii: exterior.radii.clone(),
        shell_gaps: exterior.gaps.clone(),
        max_exterior_gap: exterior.max_gap,
        interior_domination: domination,
        interior_points_used: interior_pts.len(),
        mean_value_gap: mv_gap,
        mean_value_tolerance: mv_tol,
        tolerance,
        pass,
    };
    write_json(&run.out.join("summary.json"), &report)?;
    if pass {
        println!(
            "verify: pass, exterior gap {:.3e} within {:.3e}",
            exterior.max_gap, tolerance
        );
        Ok(0)
    } else {
        println!(
            "verify: FAIL, exterior gap {:.3e}, domination {:.3e}, mean value {:.3e} (tolerance {:.3e})",
            exterior.max_gap, domination, mv_gap, tolerance
        );
        Ok(1)
    }
}

// ---------------------------------------------------------------------------
// lambda1
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Lambda1Summary {
    lambda1: f64,
    k_squared: f64,
    coercive: bool,
    cells: usize,
    region: &'static str,
}

fn cmd_lambda1(run: &RunArgs) -> Result<i32> {
    let loaded = load_scenario(&run.scenario)?;
    let med = loaded.medium()?;
    let section = loaded.scenario.lambda1.as_ref();
    ensure_out(&run.out)?;

    let (mask, region): (Mask, &'static str) = match section {
        Some(Lambda1Spec { ball: Some(ball), mask: None }) => {
            // The region sizes its own box when the grid says "auto"; only
            // the spacing is taken from the grid section.
            let g = loaded
                .scenario
                .grid
                .as_ref()
                .ok_or_else(|| Error::Config("a ball region needs a grid section".into()))?;
            let h = run.grid_h.unwrap_or(g.h);
            let spec = match &g.bbox {
                BoxSpec::Explicit { lo, hi } => GridSpec::from_box(med.dim(), *lo, *hi, h)?,
                BoxSpec::Keyword(_) => {
                    let pad = ball.radius + 5.0 * h;
                    let mut lo = [0.0; 3];
                    let mut hi = [0.0; 3];
                    for a in 0..med.dim() {
                        lo[a] = ball.center[a] - pad;
                        hi[a] = ball.center[a] + pad;
                    }
                    GridSpec::from_box(med.dim(), lo, hi, h)?
                }
            };
            let region = RegionSpec { ball: Some(*ball), mask: None };
            (loaded.region_mask(&region, Some(spec))?, "ball")
        }
        Some(Lambda1Spec { ball: None, mask: Some(rel) }) => {
            if run.grid_h.is_some() {
                return Err(Error::Config(
                    "grid-h cannot override a mask-defined grid".into(),
                ));
            }
            (read_mask(&loaded.base.join(rel))?, "mask")
        }
        Some(Lambda1Spec { ball: Some(_), mask: Some(_) }) => {
            return Err(Error::Config(
                "lambda1 region must give at most one of \"ball\" or \"mask\"".into(),
            ))
        }
        _ => {
            // No explicit region: sweep the scenario and rate its omega.
            let measure = loaded.measure()?;
            let rho = loaded.rho()?;
            let spec = loaded.grid(&med, &measure, run.grid_h)?;
            let cfg = loaded.sweep_config()?;
            match sweep(&measure, &rho, &med, &spec, &cfg)? {
                SweepResult::Converged(out) => (out.omega.clone(), "swept-omega"),
                SweepResult::Infeasible { reason, .. } => {
                    return Err(Error::Solver(format!(
                        "cannot rate omega, the sweep is infeasible ({reason})"
                    )))
                }
            }
        }
    };
    if mask.spec.dim != med.dim() {
        return Err(Error::Config(format!(
            "region dimension {} does not match medium dimension {}",
            mask.spec.dim,
            med.dim()
        )));
    }
    write_manifest(&run.out, "lambda1", &loaded, Some(mask.spec), run.seed)?;
    if mask.count() == 0 {
        return Err(Error::Domain("the region is empty".into()));
    }
    let lambda1 = lambda1_estimate(&mask, 1e-6)?;
    let k2 = med.k() * med.k();
    let summary = Lambda1Summary {
        lambda1,
        k_squared: k2,
        coercive: lambda1 > k2,
        cells: mask.count(),
        region,
    };
    write_mask(&mask, &run.out.join("region.pgm"))?;
    write_json(&run.out.join("summary.json"), &summary)?;
    println!(
        "lambda1: {} on {} cells ({}coercive at k^2 = {})",
        lambda1,
        mask.count(),
        if lambda1 > k2 { "" } else { "not " },
        k2
    );
    Ok(0)
}
