//! Batch experiment driver.
//!
//! Every command reads its physical parameters from flags or a JSON config,
//! runs one study, writes deterministic CSV/JSON results (and binary field
//! snapshots where a field is worth keeping), and exits 0 exactly when all
//! of its asserted thresholds pass. Validation failures and usage mistakes
//! exit 2 before any computation; runtime failures (non-converged stages,
//! I/O) exit 1. Set `CSS_PEAKS_LOG=info` (or `debug`) for progress output.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use css_peaks::config::ExperimentConfig;
use css_peaks::error::{Error, Result};
use css_peaks::expansion::expansion_study;
use css_peaks::gauge::compute_gauge_with_derivs;
use css_peaks::grid::{Grid2D, ScalarField};
use css_peaks::pohozaev::{pohozaev_check, tangency_residual, PohozaevReport};
use css_peaks::potential::PotentialSpec;
use css_peaks::radial::cached_profile;
use css_peaks::report::{
    float_cell, write_expansion_csv, write_json, write_pohozaev_csv, write_sweep_csv, PohozaevRow,
    ProbeSummary, SolveSummary,
};
use css_peaks::solve::{continuation_run, profiles_for, uniqueness_probe};

#[derive(Parser)]
#[command(
    name = "css-peaks",
    version,
    about = "Multi-peak concentrating solutions of a planar gauged Schrodinger system"
)]
struct Cli {
    /// Experiment configuration (JSON)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (default: the config's output_dir, else `.`)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads; this build computes on a single thread and warns if
    /// more are requested
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Override the probe seed from the config
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one radial limit profile and write its table and header
    GroundState(GroundStateArgs),
    /// Full pipeline: reduced minimization, then Newton continuation over
    /// eps_list, with per-eps reports and a summary CSV
    Solve,
    /// Tabulate the ansatz energy against its limit expansion
    ExpansionCheck(ExpansionArgs),
    /// Local momentum-balance checks on solved (or stored) fields
    Pohozaev(PohozaevArgs),
    /// Multi-start local uniqueness probe at the smallest eps
    Uniqueness,
    /// Gauge constraint residuals on a reference bump or a stored field
    GaugeCheck(GaugeCheckArgs),
}

#[derive(Args)]
struct GroundStateArgs {
    /// Potential value at the concentration point (positive)
    #[arg(long)]
    v0: f64,
    /// Nonlinearity exponent (must exceed 2)
    #[arg(long)]
    p: f64,
}

#[derive(Args)]
struct ExpansionArgs {
    /// Shift the first peak by `DX,DY` at the smallest eps and compare the
    /// energy change with the potential-term prediction
    #[arg(long, value_name = "DX,DY")]
    displacement: Option<String>,
}

#[derive(Args)]
struct PohozaevArgs {
    /// Check a stored field instead of solving: path to a field snapshot
    /// (requires --eps; the config still provides the potential and p)
    #[arg(long, value_name = "PATH", requires = "eps")]
    snapshot: Option<PathBuf>,
    /// The eps the stored field was solved at
    #[arg(long)]
    eps: Option<f64>,
    /// Pass threshold on the relative residuals. The boundary terms carry
    /// an interpolation error of order v_max (h/eps)^2, so tighten this on
    /// grids finer than the minimum eight cells per eps
    #[arg(long, default_value_t = 2e-2)]
    tol: f64,
}

#[derive(Args)]
struct GaugeCheckArgs {
    /// Check a stored field instead of the built-in reference bump
    #[arg(long, value_name = "PATH")]
    snapshot: Option<PathBuf>,
    /// Grid side for the reference bump
    #[arg(long, default_value_t = 512)]
    n: usize,
    /// Half-extent for the reference bump
    #[arg(long, default_value_t = 7.0, value_name = "L")]
    l: f64,
    /// Pass threshold on the constraint residuals
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter("CSS_PEAKS_LOG")
            .write_style("CSS_PEAKS_LOG_STYLE"),
    )
    .init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if t > 1 {
            log::warn!("this build computes on a single thread; --threads {t} ignored");
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("FAIL: one or more asserted thresholds did not pass");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation(_) | Error::Format(_) | Error::Json(_) => ExitCode::from(2),
                Error::Solver(_) | Error::Io(_) => ExitCode::FAILURE,
            }
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::GroundState(args) => cmd_ground_state(cli, args),
        Command::Solve => cmd_solve(cli),
        Command::ExpansionCheck(args) => cmd_expansion_check(cli, args),
        Command::Pohozaev(args) => cmd_pohozaev(cli, args),
        Command::Uniqueness => cmd_uniqueness(cli),
        Command::GaugeCheck(args) => cmd_gauge_check(cli, args),
    }
}

/// Prefix errors with the pipeline stage that raised them.
fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Validation(m) => Error::Validation(format!("{name}: {m}")),
        Error::Solver(m) => Error::Solver(format!("{name}: {m}")),
        Error::Format(m) => Error::Format(format!("{name}: {m}")),
        other => other,
    })
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Validation("this command needs --config PATH".into()))?;
    let text = fs::read_to_string(path)?;
    stage("config", ExperimentConfig::from_json(&text))
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> Result<PathBuf> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn effective_seed(cli: &Cli, cfg: &ExperimentConfig) -> u64 {
    cli.seed.unwrap_or(cfg.probe.seed)
}

fn cmd_ground_state(cli: &Cli, args: &GroundStateArgs) -> Result<bool> {
    if !(args.v0.is_finite() && args.v0 > 0.0) {
        return Err(Error::Validation(format!(
            "--v0 must be positive, got {}",
            args.v0
        )));
    }
    if !(args.p.is_finite() && args.p > 2.0) {
        return Err(Error::Validation(format!(
            "--p must exceed 2, got {}",
            args.p
        )));
    }
    let dir = out_dir(cli, None)?;
    let profile = stage("shooting", cached_profile(args.v0, args.p))?;
    let base = format!("profile_v0{}_p{}", args.v0, args.p);
    profile.write_csv(&dir.join(format!("{base}.csv")))?;
    profile.write_header_json(&dir.join(format!("{base}.json")))?;

    let ode = profile.ode_residual_rel();
    let nehari = profile.nehari_rel();
    let derrick = profile.derrick_rel();
    println!(
        "ground state v0={} p={}: U(0)={:.12} tail={:.6e}",
        args.v0,
        args.p,
        profile.u0(),
        profile.tail_amplitude()
    );
    println!("  ode residual (rel)  {}", float_cell(ode));
    println!("  nehari identity     {}", float_cell(nehari));
    println!("  derrick identity    {}", float_cell(derrick));
    println!("  wrote {base}.csv, {base}.json in {}", dir.display());
    Ok(ode < 1e-6 && nehari < 1e-5 && derrick < 1e-5)
}

fn eps_tag(eps: f64) -> String {
    format!("{eps}").replace('.', "p")
}

fn cmd_solve(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    let dir = out_dir(cli, Some(&cfg))?;
    let rungs = cfg.rungs();
    log::info!(
        "continuation over {} rungs, {} wells",
        rungs.len(),
        cfg.potential.wells.len()
    );
    let points = stage(
        "continuation",
        continuation_run(&cfg.potential, cfg.p, &rungs, &cfg.solver.params(), true),
    )?;
    let mut all_converged = true;
    for pt in &points {
        let tag = eps_tag(pt.rung.eps);
        pt.report
            .u
            .write_snapshot(&dir.join(format!("field_eps{tag}.cssf")))?;
        let summary = SolveSummary::new(&pt.report, pt.rung.eps, cfg.p, Some(pt.energy.total));
        write_json(&dir.join(format!("report_eps{tag}.json")), &summary)?;
        all_converged &= pt.report.converged;
        println!(
            "eps={:<6} n={:<5} peaks={} iterations={} residual={} energy={}",
            pt.rung.eps,
            pt.rung.n,
            pt.peaks.len(),
            pt.report.iterations,
            float_cell(pt.report.residual_norm),
            float_cell(pt.energy.total),
        );
    }
    write_sweep_csv(&dir.join("sweep.csv"), &points)?;
    println!("wrote sweep.csv and per-eps reports in {}", dir.display());
    Ok(all_converged)
}

fn parse_displacement(text: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = text.split(',').collect();
    let bad = || Error::Validation(format!("--displacement expects DX,DY, got {text:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let dx = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
    let dy = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
    if !(dx.is_finite() && dy.is_finite()) {
        return Err(bad());
    }
    Ok([dx, dy])
}

fn cmd_expansion_check(cli: &Cli, args: &ExpansionArgs) -> Result<bool> {
    let cfg = load_config(cli)?;
    let dir = out_dir(cli, Some(&cfg))?;
    let displacement = args
        .displacement
        .as_deref()
        .map(parse_displacement)
        .transpose()?;
    let study = stage(
        "expansion",
        expansion_study(&cfg.potential, cfg.p, &cfg.rungs(), displacement),
    )?;
    println!("c0 = {}", float_cell(study.c0));
    for row in &study.rows {
        println!(
            "eps={:<6} n={:<5} I/eps^2={} remainder={} gauge={}",
            row.eps,
            row.n,
            float_cell(row.scaled),
            float_cell(row.remainder),
            float_cell(row.gauge),
        );
    }
    let mut pass = true;
    let last = study.rows.last().expect("validated nonempty");
    let lead_rel = (last.scaled - study.c0).abs() / study.c0.abs();
    println!("leading coefficient rel error at eps={}: {}", last.eps, float_cell(lead_rel));
    pass &= lead_rel < 0.01;
    if let Some(order) = study.remainder_order {
        println!("remainder order {order:.3} (want >= 2)");
        pass &= order >= 2.0;
    }
    if let Some(slope) = study.gauge_slope {
        println!("gauge slope {slope:.3} (want 4 +- 0.2)");
        pass &= (slope - 4.0).abs() <= 0.2;
    }
    if let Some(corr) = &study.correction {
        println!(
            "displacement ({}, {}): measured {} predicted {} ratio {:.4}",
            corr.displacement[0],
            corr.displacement[1],
            float_cell(corr.measured),
            float_cell(corr.predicted),
            corr.ratio
        );
        pass &= (corr.ratio - 1.0).abs() <= 0.1;
    }
    write_expansion_csv(&dir.join("expansion.csv"), &study)?;
    write_json(&dir.join("expansion.json"), &study)?;
    println!("wrote expansion.csv, expansion.json in {}", dir.display());
    Ok(pass)
}

/// Ball geometry for a peak: off-center (centered balls degenerate to
/// 0 = 0 on these mirror-symmetric wells), radius a couple of eps, shrunk
/// to respect the domain margin and half the well separation.
fn ball_for_peak(
    peak: [f64; 2],
    eps: f64,
    grid: Grid2D,
    spec: &PotentialSpec,
) -> Result<([f64; 2], f64)> {
    let mut d = 2.4 * eps;
    let sep = spec.min_separation();
    if sep.is_finite() {
        d = d.min(0.45 * sep);
    }
    // margin: |center_i| + d <= L - 2h with center = peak + d/3 per axis
    let room = grid.half_extent()
        - 2.0 * grid.spacing()
        - peak[0].abs().max(peak[1].abs())
        - 1e-9;
    d = d.min(room / (1.0 + 1.0 / 3.0));
    if d <= grid.spacing() * 4.0 {
        return Err(Error::Validation(format!(
            "no room for a meaningful ball around the peak at ({}, {})",
            peak[0], peak[1]
        )));
    }
    let center = [peak[0] + d / 3.0, peak[1] + d / 3.0];
    Ok((center, d))
}

const POHOZAEV_QUAD: usize = 720;

fn pohozaev_rows_for_field(
    u: &ScalarField,
    spec: &PotentialSpec,
    eps: f64,
    p: f64,
    peaks: &[[f64; 2]],
) -> Result<Vec<(usize, PohozaevReport)>> {
    let gauge = compute_gauge_with_derivs(u);
    let mut rows = Vec::new();
    for (i, peak) in peaks.iter().enumerate() {
        let (center, d) = ball_for_peak(*peak, eps, u.grid(), spec)?;
        for k in [1, 2] {
            let rep = pohozaev_check(u, &gauge, spec, eps, p, center, d, k, POHOZAEV_QUAD)?;
            rows.push((i, rep));
        }
    }
    Ok(rows)
}

fn cmd_pohozaev(cli: &Cli, args: &PohozaevArgs) -> Result<bool> {
    if !(args.tol.is_finite() && args.tol > 0.0) {
        return Err(Error::Validation(format!(
            "--tol must be positive, got {}",
            args.tol
        )));
    }
    let cfg = load_config(cli)?;
    let dir = out_dir(cli, Some(&cfg))?;
    let mut rows: Vec<PohozaevRow> = Vec::new();

    if let Some(snap) = &args.snapshot {
        if !snap.exists() {
            return Err(Error::Validation(format!(
                "snapshot {} does not exist",
                snap.display()
            )));
        }
        let eps = args.eps.expect("clap enforces --eps with --snapshot");
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::Validation(format!("--eps must be positive, got {eps}")));
        }
        let u = ScalarField::read_snapshot(snap)?;
        let peaks: Vec<[f64; 2]> = css_peaks::peaks::peak_locations(&u)
            .iter()
            .map(|pk| pk.point)
            .collect();
        if peaks.is_empty() {
            return Err(Error::Validation("stored field has no peaks".into()));
        }
        log::info!("checking {} stored peaks", peaks.len());
        for (i, rep) in pohozaev_rows_for_field(&u, &cfg.potential, eps, cfg.p, &peaks)? {
            rows.push(PohozaevRow {
                eps,
                peak_index: i,
                report: rep,
            });
        }
    } else {
        let rungs = cfg.rungs();
        let points = stage(
            "continuation",
            continuation_run(&cfg.potential, cfg.p, &rungs, &cfg.solver.params(), true),
        )?;
        for pt in &points {
            for (i, rep) in
                pohozaev_rows_for_field(&pt.report.u, &cfg.potential, pt.rung.eps, cfg.p, &pt.peaks)?
            {
                rows.push(PohozaevRow {
                    eps: pt.rung.eps,
                    peak_index: i,
                    report: rep,
                });
            }
        }
    }

    let mut pass = true;
    for row in &rows {
        let ok = row.report.rel_residual < args.tol;
        pass &= ok;
        println!(
            "eps={:<6} peak={} k={} lhs={} rhs={} rel={} [{}]",
            row.eps,
            row.peak_index,
            row.report.k,
            float_cell(row.report.lhs),
            float_cell(row.report.rhs),
            float_cell(row.report.rel_residual),
            if ok { "ok" } else { "FAIL" },
        );
    }
    write_pohozaev_csv(&dir.join("pohozaev.csv"), &rows)?;
    write_json(&dir.join("pohozaev.json"), &rows)?;
    println!("wrote pohozaev.csv, pohozaev.json in {}", dir.display());
    Ok(pass)
}

const UNIQUENESS_MATCH_TOL: f64 = 1e-8;

fn cmd_uniqueness(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    let dir = out_dir(cli, Some(&cfg))?;
    if cfg.probe.k_perturbations == 0 {
        log::warn!("k_perturbations = 0: nothing to compare, trivially passing");
        println!("uniqueness probe skipped (k_perturbations = 0): trivial pass");
        return Ok(true);
    }
    let eps = *cfg.eps_list.last().expect("validated nonempty");
    let grid = Grid2D::new(cfg.grid.n, cfg.grid.l)?;
    let profiles = stage("profiles", profiles_for(&cfg.potential, cfg.p))?;
    let seed = effective_seed(cli, &cfg);
    let probe = stage(
        "probe",
        uniqueness_probe(
            grid,
            &cfg.potential,
            &profiles,
            eps,
            cfg.p,
            cfg.probe.k_perturbations,
            cfg.probe.magnitude,
            seed,
            &cfg.solver.params(),
        ),
    )?;
    let summary = ProbeSummary::new(&probe, eps);
    write_json(&dir.join("uniqueness.json"), &summary)?;
    if let Some(xi) = &probe.xi {
        xi.write_snapshot(&dir.join("xi.cssf"))?;
        log::warn!("solutions differ beyond tolerance; wrote the difference profile xi.cssf");
    }
    let mut line = format!(
        "{} starts at eps={eps}, seed={seed}: ",
        probe.reports.len()
    );
    let pass = match probe.max_pairwise_sup {
        Some(sup) => {
            write!(line, "max pairwise sup {}", float_cell(sup)).unwrap();
            probe.excluded.is_empty() && sup < UNIQUENESS_MATCH_TOL
        }
        None => {
            line.push_str("fewer than two converged starts");
            false
        }
    };
    if !probe.excluded.is_empty() {
        write!(line, " ({} starts excluded)", probe.excluded.len()).unwrap();
    }
    println!("{line}");
    println!("wrote uniqueness.json in {}", dir.display());
    Ok(pass)
}

/// Smooth compactly supported radial bump: a Gaussian taken to zero by a
/// quintic falloff, wide enough to exercise every constraint.
fn reference_bump(grid: Grid2D) -> ScalarField {
    ScalarField::from_fn(grid, |x1, x2| {
        let r = (x1 * x1 + x2 * x2).sqrt();
        let w = ((r - 4.6) / 2.26).clamp(0.0, 1.0);
        let falloff = 1.0 - (10.0 * w.powi(3) - 15.0 * w.powi(4) + 6.0 * w.powi(5));
        (-r * r / (2.0 * 2.3 * 2.3)).exp() * falloff
    })
}

fn cmd_gauge_check(cli: &Cli, args: &GaugeCheckArgs) -> Result<bool> {
    if !(args.tol.is_finite() && args.tol > 0.0) {
        return Err(Error::Validation(format!(
            "--tol must be positive, got {}",
            args.tol
        )));
    }
    let dir = out_dir(cli, None)?;
    let (u, source) = match &args.snapshot {
        Some(path) => {
            if !path.exists() {
                return Err(Error::Validation(format!(
                    "snapshot {} does not exist",
                    path.display()
                )));
            }
            (ScalarField::read_snapshot(path)?, path.display().to_string())
        }
        None => {
            let grid = Grid2D::new(args.n, args.l)?;
            (reference_bump(grid), format!("reference bump {}x{0}, L={}", args.n, args.l))
        }
    };
    let gauge = compute_gauge_with_derivs(&u);
    let res = gauge.constraint_residuals(&u)?;
    let tang = tangency_residual(&u, &gauge);
    println!("gauge constraints on {source}:");
    println!("  curl + rho/2      {}", float_cell(res.curl));
    println!("  divergence        {}", float_cell(res.div));
    println!("  d1 A0 - A2 rho    {}", float_cell(res.a0_x1));
    println!("  d2 A0 + A1 rho    {}", float_cell(res.a0_x2));
    println!("  tangency          {}", float_cell(tang));
    let report = serde_json::json!({
        "source": source,
        "n": u.grid().n(),
        "L": u.grid().half_extent(),
        "curl": res.curl,
        "div": res.div,
        "a0_x1": res.a0_x1,
        "a0_x2": res.a0_x2,
        "tangency": tang,
        "tol": args.tol,
    });
    write_json(&dir.join("gauge.json"), &report)?;
    println!("wrote gauge.json in {}", dir.display());
    Ok(res.max() < args.tol)
}
