use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use mfsde_core::approx::{
    check_monotone, check_subset_infimum, moment_bound_check, run_hierarchy, BoundConstants, DriftMode,
    Hierarchy, LevelAccumulator, MomentBoundReport, SubsetInfimumReport,
};
use mfsde_core::coeffs::{validate_system, Modulus, Sampling, Status, ValidationReport};
use mfsde_core::noise::{NoiseBundle, SeedLineage, TimeGrid};
use mfsde_core::paths::write_system_paths_long;
use mfsde_core::scenario::Scenario;
use mfsde_core::system::{estimate_moments, simulate_ensemble, solve_system, with_path, MomentSummary};
use mfsde_core::uniqueness::{uniqueness_trial, TestFunctionFamily, TrialConfig, UniquenessReport};

use crate::output::{csv_err, csv_writer, out_dir, stage, write_json};
use crate::{ApproxArgs, Failure, RunArgs, UniquenessArgs, ValidateArgs};

const DEFAULT_PATHS: usize = 1000;
const CHUNK: usize = 64;
const PHI_PLOT_POINTS: usize = 200;

struct Context {
    scenario: Scenario,
    paths: usize,
    seed: u64,
    out: std::path::PathBuf,
    pool: rayon::ThreadPool,
}

fn load(args: &RunArgs) -> Result<Context, Failure> {
    let scenario = Scenario::load(&args.scenario)?;
    let paths = args.paths.or(scenario.paths).unwrap_or(DEFAULT_PATHS);
    if paths == 0 {
        return Err(Failure::usage("--paths must be at least 1"));
    }
    if let Some(dt) = args.dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Failure::usage(format!("--dt must be positive, got {dt}")));
        }
    }
    let seed = args.seed.or(scenario.seed).unwrap_or(0);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    Ok(Context {
        scenario,
        paths,
        seed,
        out: out_dir(args.out.as_ref())?,
        pool,
    })
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    scenario: Option<&'a str>,
    seed: u64,
    step_size: f64,
    moments: &'a MomentSummary,
    warnings: &'a [String],
}

pub fn simulate(args: &RunArgs) -> Result<(), Failure> {
    let ctx = load(args)?;
    let sc = &ctx.scenario;
    let spec = sc.spec()?;
    let cfg = sc.scheme_config(args.dt);
    let grid = Arc::new(sc.grid()?);
    let times = sc.times(cfg.step_size)?;
    stage(&format!("simulate: {} paths, dt = {}", ctx.paths, cfg.step_size));
    let (samples, report) = ctx
        .pool
        .install(|| simulate_ensemble(&spec, Arc::clone(&grid), &cfg, ctx.seed, ctx.paths, &times))?;
    let summary = if samples.len() >= 2 {
        estimate_moments(&samples, &times)?
    } else {
        let duplicated = vec![samples[0].clone(), samples[0].clone()];
        let mut m = estimate_moments(&duplicated, &times)?;
        m.paths = 1;
        m
    };
    let shown = args.path_limit.min(ctx.paths);
    stage(&format!("simulate: writing {shown} trajectories"));
    let trajectories = ctx.pool.install(|| {
        (0..shown as u64)
            .into_par_iter()
            .map(|p| {
                let noise = NoiseBundle::generate(&spec.layout, Arc::clone(&grid), SeedLineage::new(ctx.seed, p))?;
                solve_system(&spec, &noise, &cfg).map_err(|e| with_path(e, p))
            })
            .collect::<mfsde_core::Result<Vec<_>>>()
    })?;
    let rows = trajectories
        .iter()
        .enumerate()
        .flat_map(|(p, s)| s.paths.iter().enumerate().map(move |(i, path)| (p as u64, i, path)));
    write_system_paths_long(rows, crate::output::create(&ctx.out, "paths.csv")?)?;
    write_json(
        &ctx.out,
        "summary.json",
        &SimulateSummary {
            scenario: sc.name.as_deref(),
            seed: ctx.seed,
            step_size: cfg.step_size,
            moments: &summary,
            warnings: &report.warnings,
        },
    )?;
    write_series(&ctx.out, "aggregate.csv", &summary)?;
    stage("simulate: done");
    Ok(())
}

fn write_series(dir: &Path, name: &str, m: &MomentSummary) -> Result<(), Failure> {
    let mut w = csv_writer(dir, name)?;
    w.write_record(["time", "mean", "std_error", "q05", "q50", "q95"]).map_err(csv_err)?;
    let a = &m.aggregate;
    for (k, t) in m.times.iter().enumerate() {
        w.write_record([t, &a.mean[k], &a.std_error[k], &a.q05[k], &a.q50[k], &a.q95[k]].map(|v| v.to_string()))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-path statistics of one hierarchy.
struct PathStats {
    gaps: Vec<Vec<f64>>,
    cauchy: Vec<Vec<f64>>,
    violation: Vec<Vec<f64>>,
    fraction: Vec<Vec<f64>>,
    subset: SubsetInfimumReport,
}

fn path_stats(h: &Hierarchy) -> mfsde_core::Result<PathStats> {
    let ordering = check_monotone(&h.levels)?;
    Ok(PathStats {
        gaps: h.level_gaps(),
        cauchy: h.cauchy_gaps(),
        violation: ordering
            .iter()
            .map(|o| o.components.iter().map(|c| c.max_violation).collect())
            .collect(),
        fraction: ordering
            .iter()
            .map(|o| o.components.iter().map(|c| c.violating_fraction).collect())
            .collect(),
        subset: check_subset_infimum(&h.levels),
    })
}

#[derive(Serialize)]
struct LevelRow {
    /// Lower level `n` of the pair `(n, n + 1)`.
    n: usize,
    component: usize,
    mean_sup_gap: f64,
    mean_cauchy_gap: f64,
    max_ordering_violation: f64,
    mean_violating_fraction: f64,
}

#[derive(Serialize)]
struct ApproxSummary {
    scenario: Option<String>,
    seed: u64,
    paths: usize,
    step_size: f64,
    levels: usize,
    mode: &'static str,
    mode_auto_selected: bool,
    /// Largest ordering violation over paths, level pairs and components.
    ordering_max_violation: f64,
    ordering_mean_violating_fraction: f64,
    subset_infimum: SubsetInfimumReport,
    level_table: Vec<LevelRow>,
    moment_bound: MomentBoundReport,
    warnings: Vec<String>,
}

pub fn approx(args: &ApproxArgs) -> Result<(), Failure> {
    let ctx = load(&args.run)?;
    let sc = &ctx.scenario;
    let spec = sc.spec()?;
    let cfg = sc.scheme_config(args.run.dt);
    let grid = Arc::new(sc.grid()?);
    let levels = args.levels.unwrap_or(sc.approx.levels);
    if levels < 2 {
        return Err(Failure::usage("--levels must be at least 2"));
    }
    let requested = args.mode.or(sc.approx.mode).map(|m| m.with_inner(sc.approx.inner));
    let mode = DriftMode::resolve(requested, &spec);
    stage(&format!("approx: {} paths, {levels} levels, mode {}", ctx.paths, mode.name()));
    let n = spec.len();
    let mut acc: Option<LevelAccumulator> = None;
    let mut scheme_grid: Option<TimeGrid> = None;
    let mut all = Vec::with_capacity(ctx.paths);
    let mut start = 0usize;
    while start < ctx.paths {
        let end = (start + CHUNK).min(ctx.paths);
        let chunk = ctx.pool.install(|| {
            (start as u64..end as u64)
                .into_par_iter()
                .map(|p| {
                    let noise = NoiseBundle::generate(&spec.layout, Arc::clone(&grid), SeedLineage::new(ctx.seed, p))?;
                    let h = run_hierarchy(&spec, &noise, &cfg, levels, mode).map_err(|e| with_path(e, p))?;
                    let stats = path_stats(&h)?;
                    Ok((h, stats))
                })
                .collect::<mfsde_core::Result<Vec<_>>>()
        })?;
        for (h, stats) in chunk {
            let g = h.levels[0].paths[0].grid();
            let a = acc.get_or_insert_with(|| LevelAccumulator::new(levels, n, g.len()));
            a.add(&h);
            scheme_grid.get_or_insert_with(|| (**g).clone());
            all.push(stats);
        }
        start = end;
    }
    let acc = acc.expect("at least one path");
    let scheme_grid = scheme_grid.expect("at least one path");
    let moments = acc.moments();
    let constants = BoundConstants::from_spec(&spec, sc.horizon);
    let bound = moment_bound_check(&moments, &scheme_grid, &spec.initials(), &constants, sc.approx.margin)?;
    let mut subset = SubsetInfimumReport::default();
    for s in &all {
        subset.merge(&s.subset);
    }
    let paths = all.len() as f64;
    let mut table = Vec::new();
    for pair in 0..levels - 1 {
        for i in 0..n {
            table.push(LevelRow {
                n: pair + 1,
                component: i,
                mean_sup_gap: all.iter().map(|s| s.gaps[pair][i]).sum::<f64>() / paths,
                mean_cauchy_gap: all.iter().map(|s| s.cauchy[pair][i]).sum::<f64>() / paths,
                max_ordering_violation: all.iter().map(|s| s.violation[pair][i]).fold(0.0, f64::max),
                mean_violating_fraction: all.iter().map(|s| s.fraction[pair][i]).sum::<f64>() / paths,
            });
        }
    }
    let mut w = csv_writer(&ctx.out, "level_gaps.csv")?;
    w.write_record([
        "n",
        "component",
        "mean_sup_gap",
        "mean_cauchy_gap",
        "max_ordering_violation",
        "mean_violating_fraction",
    ])
    .map_err(csv_err)?;
    for r in &table {
        w.write_record([
            r.n.to_string(),
            r.component.to_string(),
            r.mean_sup_gap.to_string(),
            r.mean_cauchy_gap.to_string(),
            r.max_ordering_violation.to_string(),
            r.mean_violating_fraction.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    let mut w = csv_writer(&ctx.out, "bound_envelope.csv")?;
    let mut header = vec!["time".to_string(), "envelope".to_string()];
    header.extend((1..=levels).map(|l| format!("level_{l}_sup_mean")));
    w.write_record(&header).map_err(csv_err)?;
    for (t, env) in bound.envelope.iter().enumerate() {
        let mut row = vec![scheme_grid.time(t).to_string(), env.to_string()];
        for lm in &moments {
            let sup = (0..n).map(|i| lm.mean[i][t]).fold(f64::NEG_INFINITY, f64::max);
            row.push(sup.to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    let warnings: Vec<String> = spec
        .components
        .iter()
        .enumerate()
        .filter_map(|(i, c)| cfg.monotonicity_warning(c.coeffs.a, i))
        .collect();
    let summary = ApproxSummary {
        scenario: sc.name.clone(),
        seed: ctx.seed,
        paths: all.len(),
        step_size: cfg.step_size,
        levels,
        mode: mode.name(),
        mode_auto_selected: requested.is_none(),
        ordering_max_violation: table.iter().map(|r| r.max_ordering_violation).fold(0.0, f64::max),
        ordering_mean_violating_fraction: table.iter().map(|r| r.mean_violating_fraction).sum::<f64>()
            / table.len() as f64,
        subset_infimum: subset,
        level_table: table,
        moment_bound: bound,
        warnings,
    };
    write_json(&ctx.out, "approx_report.json", &summary)?;
    stage(&format!(
        "approx: max ordering violation {}, moment bound {}",
        summary.ordering_max_violation,
        if summary.moment_bound.holds { "holds" } else { "FAILS" }
    ));
    Ok(())
}

#[derive(Serialize)]
struct ComponentReport {
    component: usize,
    report: ValidationReport,
}

#[derive(Serialize)]
struct ValidateSummary {
    scenario: Option<String>,
    passed: bool,
    reports: Vec<ComponentReport>,
}

pub fn validate(args: &ValidateArgs) -> Result<(), Failure> {
    let sc = Scenario::load(&args.scenario)?;
    let spec = sc.spec()?;
    let out = out_dir(args.out.as_ref())?;
    let reports = validate_system(&spec, sc.horizon, sc.xm, &Sampling::default())?;
    let mut passed = true;
    for (i, r) in &reports {
        for c in &r.checks {
            let status = match c.status {
                Status::Pass => "pass",
                Status::Fail => {
                    passed = false;
                    "FAIL"
                }
                Status::Unchecked => "unchecked",
                Status::NotApplicable => "n/a",
            };
            let witness = c
                .witness
                .as_ref()
                .map(|w| format!(" witness = {w:?}"))
                .unwrap_or_default();
            println!("component {i} | {} | {} | {status} | {}{witness}", r.subject, c.condition, c.detail);
        }
    }
    write_json(
        &out,
        "validation.json",
        &ValidateSummary {
            scenario: sc.name.clone(),
            passed,
            reports: reports
                .into_iter()
                .map(|(component, report)| ComponentReport { component, report })
                .collect(),
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(Failure::validation("one or more assumptions fail"))
    }
}

#[derive(Serialize)]
struct UniquenessSummary<'a> {
    scenario: Option<&'a str>,
    seed: u64,
    xm: f64,
    family_note: Option<String>,
    report: &'a UniquenessReport,
    warnings: &'a [String],
}

pub fn uniqueness(args: &UniquenessArgs) -> Result<(), Failure> {
    let ctx = load(&args.run)?;
    let sc = &ctx.scenario;
    let spec = sc.spec()?;
    let set = &sc.uniqueness;
    let mut ladder = args.ladder.clone().unwrap_or_else(|| set.ladder.clone());
    if ladder.is_empty() {
        ladder.push(args.run.dt.unwrap_or_else(|| sc.base_step()));
    }
    if ladder.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Failure::usage("ladder step sizes must be positive"));
    }
    let comp = spec
        .components
        .get(set.component)
        .ok_or_else(|| Failure::validation(format!("uniqueness.component {} is out of range", set.component)))?;
    let k_max = set.ks.iter().copied().max().unwrap_or(0).max(10);
    let (family, family_note) = match &comp.coeffs.rho {
        Modulus::Zero => (None, Some("ρ ≡ 0: no test-function family; φ curves omitted".to_string())),
        rho => match TestFunctionFamily::new(rho.clone(), sc.xm, k_max) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(format!("test functions unavailable: {e}"))),
        },
    };
    let ks = if family.is_some() { set.ks.clone() } else { Vec::new() };
    let template = sc.scheme_config(None);
    let cfg = TrialConfig {
        horizon: sc.horizon,
        ladder,
        template,
        seed: ctx.seed,
        paths: ctx.paths,
        ceiling: set.ceiling,
        family: family.clone(),
        ks: ks.clone(),
    };
    stage(&format!("uniqueness: {} paths, ladder {:?}", ctx.paths, cfg.ladder));
    let report = ctx.pool.install(|| uniqueness_trial(&spec, &cfg))?;
    let mut w = csv_writer(&ctx.out, "divergence.csv")?;
    let mut header = vec!["dt".to_string(), "max_sup_diff_mean".into(), "max_sup_diff_std_error".into()];
    header.extend((0..spec.len()).map(|i| format!("sup_diff_mean_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in &report.rows {
        let mut row = vec![r.dt.to_string(), r.max_sup_diff_mean.to_string(), r.max_sup_diff_std_error.to_string()];
        row.extend(r.sup_diff_mean.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    let mut w = csv_writer(&ctx.out, "phi_moments.csv")?;
    w.write_record(["dt", "k", "time", "phi_mean", "abs_mean"]).map_err(csv_err)?;
    for c in &report.phi_curves {
        for (t, time) in report.times.iter().enumerate() {
            w.write_record([
                c.dt.to_string(),
                c.k.to_string(),
                time.to_string(),
                c.phi_mean[t].to_string(),
                c.abs_mean[t].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    let mut w = csv_writer(&ctx.out, "a_table.csv")?;
    w.write_record(["k", "a_k"]).map_err(csv_err)?;
    for (k, a) in &report.a_table {
        w.write_record([k.to_string(), a.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    if let Some(f) = &family {
        let mut w = csv_writer(&ctx.out, "phi_eval.csv")?;
        w.write_record(["k", "x", "phi", "dphi", "ddphi"]).map_err(csv_err)?;
        for &k in &ks {
            let phi = f.phi(k)?;
            let top = 1.5 * f.a_seq[k - 1];
            for s in 0..=PHI_PLOT_POINTS {
                let x = -top + 2.0 * top * s as f64 / PHI_PLOT_POINTS as f64;
                let (v, d, dd) = phi.eval(x);
                w.write_record([k.to_string(), x.to_string(), v.to_string(), d.to_string(), dd.to_string()])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
    }
    let warnings: Vec<String> = cfg
        .ladder
        .iter()
        .flat_map(|&dt| {
            let mut c = template;
            c.step_size = dt;
            spec.components
                .iter()
                .enumerate()
                .filter_map(move |(i, comp)| c.monotonicity_warning(comp.coeffs.a, i))
                .collect::<Vec<_>>()
        })
        .collect();
    write_json(
        &ctx.out,
        "uniqueness_report.json",
        &UniquenessSummary {
            scenario: sc.name.as_deref(),
            seed: ctx.seed,
            xm: sc.xm,
            family_note,
            report: &report,
            warnings: &warnings,
        },
    )?;
    for r in &report.rows {
        stage(&format!("uniqueness: dt = {} E[sup|Δ|] = {:.6e}", r.dt, r.max_sup_diff_mean));
    }
    Ok(())
}
