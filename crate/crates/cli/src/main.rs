//! Experiment driver: each subcommand reads a declarative config (JSON or
//! TOML), applies flag overrides, runs one experiment deterministically, and
//! writes a manifest, CSV tables, and a pass/fail summary.
//!
//! Exit codes: 0 success, 1 assertion failure, 2 config error, 3 runtime
//! error.

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use mapfluct::config::{LadderSpecConfig, MapSpecConfig, SCHEMA_VERSION};
use mapfluct::ergodicity::{beta_mixing_stationary, fit_rate, tv_decay_curve, RateModel};
use mapfluct::exponents::{resolvent, stationary_distribution, TestFn};
use mapfluct::ladder_est::estimate_ladder_spec;
use mapfluct::ladder_sim::{mc_resolvent, simulate_ladder_overshoot};
use mapfluct::law::Extended;
use mapfluct::model::{validate, validate_ladder, LadderSpec, MapSpec};
use mapfluct::rng::RngStream;
use mapfluct::simulate::{overshoot_series, simulate_path, SimOptions};
use mapfluct::vigon::{vigon_check, wiener_hopf_residual, VigonParams};

#[derive(Parser)]
#[command(name = "mapfluct", version, about = "MAP fluctuation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate parent MAP paths and export them as CSV.
    Simulate(RunArgs),
    /// First-passage overshoot samples across levels.
    Overshoot(RunArgs),
    /// Closed-form resolvent against its Monte Carlo estimate.
    ResolventCheck(RunArgs),
    /// Empirical overshoot law at a large level against the stationary law.
    StationaryCheck(RunArgs),
    /// Ladder spec estimation from parent paths.
    LadderEstimate(RunArgs),
    /// Ladder Levy system against the dual-potential convolution.
    VigonCheck(RunArgs),
    /// Factorization residual of the characteristic matrix exponent.
    WienerHopfCheck(RunArgs),
    /// Total-variation decay curve and rate fit.
    TvDecay(RunArgs),
    /// Stationary beta-mixing curve.
    Mixing(RunArgs),
    /// Stable-process bridge: spec construction and round-trip checks.
    Lamperti(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file (.json or .toml).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<u64>,
    /// Output directory for manifest, tables, and summary.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_seed() -> u64 {
    20260809
}

fn default_paths() -> u64 {
    10_000
}

fn default_lambda() -> f64 {
    1.0
}

fn default_fcoeff() -> f64 {
    -1.0
}

fn default_out() -> String {
    "out".into()
}

fn default_boot() -> u32 {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridRange {
    lo: f64,
    hi: f64,
    step: f64,
}

impl GridRange {
    fn expand(&self) -> Vec<f64> {
        let mut v = Vec::new();
        let mut x = self.lo;
        while x <= self.hi + 1e-12 {
            v.push(x);
            x += self.step;
        }
        v
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BinSpec {
    lo: f64,
    hi: f64,
    count: usize,
}

impl BinSpec {
    fn edges(&self) -> Vec<f64> {
        (0..=self.count)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / self.count as f64)
            .collect()
    }
}

fn default_bins() -> BinSpec {
    BinSpec { lo: 0.0, hi: 6.0, count: 200 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExperimentConfig {
    #[serde(default = "default_schema")]
    schema_version: u32,
    #[serde(default)]
    map_spec: Option<MapSpecConfig>,
    #[serde(default)]
    ladder_spec: Option<LadderSpecConfig>,
    #[serde(default)]
    dual_ladder_spec: Option<LadderSpecConfig>,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_paths")]
    paths: u64,
    #[serde(default)]
    horizon: Option<f64>,
    #[serde(default)]
    levels: Vec<f64>,
    #[serde(default)]
    t_grid: Vec<f64>,
    #[serde(default = "default_lambda")]
    lambda: f64,
    #[serde(default = "default_fcoeff")]
    f_coeff: f64,
    #[serde(default)]
    xs: Vec<f64>,
    #[serde(default)]
    start_phase: usize,
    #[serde(default)]
    start_value: f64,
    #[serde(default)]
    theta: Option<GridRange>,
    #[serde(default = "default_bins")]
    bins: BinSpec,
    #[serde(default)]
    potential_bins: Option<BinSpec>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    rho: Option<f64>,
    #[serde(default)]
    starts: Option<u64>,
    #[serde(default)]
    paths_per_start: Option<u64>,
    #[serde(default = "default_boot")]
    bootstrap: u32,
    #[serde(default)]
    rate_model: Option<String>,
    /// Estimate both ladder specs from the parent spec instead of reading
    /// them from the config (wiener-hopf-check only).
    #[serde(default)]
    estimate_ladders: bool,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default = "default_out")]
    out_dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tolerances {
    #[serde(default = "tv_tol")]
    tv: f64,
    #[serde(default = "atom_tol")]
    atom: f64,
    #[serde(default = "abs_tol")]
    abs: f64,
    #[serde(default = "ratio_tol")]
    ratio: f64,
    #[serde(default = "r2_tol")]
    r_squared: f64,
}

fn tv_tol() -> f64 {
    0.03
}
fn atom_tol() -> f64 {
    0.01
}
fn abs_tol() -> f64 {
    0.01
}
fn ratio_tol() -> f64 {
    0.1
}
fn r2_tol() -> f64 {
    0.9
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { tv: tv_tol(), atom: atom_tol(), abs: abs_tol(), ratio: ratio_tol(), r_squared: r2_tol() }
    }
}

#[derive(Debug)]
enum RunError {
    Config(String),
    Assertion(String),
    Runtime(String),
}

impl From<mapfluct::MapError> for RunError {
    fn from(e: mapfluct::MapError) -> Self {
        RunError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Runtime(format!("io: {e}"))
    }
}

type RunResult = Result<serde_json::Value, RunError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Overshoot(a) => ("overshoot", a),
        Command::ResolventCheck(a) => ("resolvent-check", a),
        Command::StationaryCheck(a) => ("stationary-check", a),
        Command::LadderEstimate(a) => ("ladder-estimate", a),
        Command::VigonCheck(a) => ("vigon-check", a),
        Command::WienerHopfCheck(a) => ("wiener-hopf-check", a),
        Command::TvDecay(a) => ("tv-decay", a),
        Command::Mixing(a) => ("mixing", a),
        Command::Lamperti(a) => ("lamperti", a),
    };
    match run(kind, args) {
        Ok(_) => ExitCode::SUCCESS,
        Err(RunError::Assertion(msg)) => {
            eprintln!("FAIL: {msg}");
            ExitCode::from(1)
        }
        Err(RunError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, RunError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| RunError::Config(format!("{}: {e}", args.config.display())))?;
    let mut cfg: ExperimentConfig = if args.config.extension().and_then(|e| e.to_str()) == Some("toml")
    {
        toml::from_str(&text).map_err(|e| RunError::Config(e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| RunError::Config(e.to_string()))?
    };
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(RunError::Config(format!(
            "schema_version {} unsupported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(p) = args.paths {
        cfg.paths = p;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.display().to_string();
    }
    Ok(cfg)
}

fn run(kind: &str, args: &RunArgs) -> RunResult {
    let cfg = load_config(args)?;
    let out = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&out)?;
    // the manifest echoes the fully resolved config, defaults included
    let manifest = json!({ "kind": kind, "config": cfg });
    write_json(&out.join("manifest.json"), &manifest)?;
    let summary = match kind {
        "simulate" => run_simulate(&cfg, &out),
        "overshoot" => run_overshoot(&cfg, &out),
        "resolvent-check" => run_resolvent_check(&cfg, &out),
        "stationary-check" => run_stationary_check(&cfg, &out),
        "ladder-estimate" => run_ladder_estimate(&cfg, &out),
        "vigon-check" => run_vigon_check(&cfg, &out),
        "wiener-hopf-check" => run_wiener_hopf(&cfg, &out),
        "tv-decay" => run_tv_decay(&cfg, &out),
        "mixing" => run_mixing(&cfg, &out),
        "lamperti" => run_lamperti(&cfg, &out),
        _ => Err(RunError::Config(format!("unknown kind {kind}"))),
    }?;
    write_json(&out.join("summary.json"), &summary)?;
    let passed = summary.get("pass").and_then(|v| v.as_bool()).unwrap_or(true);
    if !passed {
        return Err(RunError::Assertion(format!(
            "experiment {kind} failed; see {}",
            out.join("summary.json").display()
        )));
    }
    println!("{kind}: ok ({})", out.display());
    Ok(summary)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), RunError> {
    fs::write(path, serde_json::to_string_pretty(value).map_err(|e| RunError::Runtime(e.to_string()))?)?;
    Ok(())
}

/// Fixed 17-significant-digit float format for byte-stable CSV diffs.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn need_map(cfg: &ExperimentConfig) -> Result<MapSpec, RunError> {
    let spec = cfg
        .map_spec
        .as_ref()
        .ok_or_else(|| RunError::Config("map_spec required".into()))?
        .resolve()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let report = validate(&spec);
    if !report.ok() {
        return Err(RunError::Config(format!(
            "invalid map_spec: {}",
            serde_json::to_string(&report).unwrap_or_default()
        )));
    }
    Ok(spec)
}

fn need_ladder(cfg: &ExperimentConfig) -> Result<LadderSpec, RunError> {
    let spec = cfg
        .ladder_spec
        .as_ref()
        .ok_or_else(|| RunError::Config("ladder_spec required".into()))?
        .resolve()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let report = validate_ladder(&spec);
    if !report.ok() {
        return Err(RunError::Config(format!(
            "invalid ladder_spec: {}",
            serde_json::to_string(&report).unwrap_or_default()
        )));
    }
    Ok(spec)
}

fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    let spec = need_map(cfg)?;
    let horizon = cfg.horizon.ok_or_else(|| RunError::Config("horizon required".into()))?;
    let stream = RngStream::new(cfg.seed, 0);
    let mut csv = String::from("path,time,value,phase\n");
    let opts = SimOptions::default();
    let mut finals = Vec::new();
    for p in 0..cfg.paths {
        let mut rng = stream.substream(p).rng();
        let path = simulate_path(&spec, cfg.start_value, cfg.start_phase, horizon, &opts, &mut rng)?;
        for piece in &path.pieces {
            csv.push_str(&format!("{p},{},{},{}\n", fmt(piece.t0), fmt(piece.x0), piece.phase));
        }
        csv.push_str(&format!(
            "{p},{},{},{}\n",
            fmt(horizon),
            fmt(path.final_value()),
            path.phase_at(horizon)
        ));
        finals.push(path.final_value());
    }
    fs::write(out.join("paths.csv"), csv)?;
    let mean = finals.iter().sum::<f64>() / finals.len().max(1) as f64;
    Ok(json!({ "pass": true, "paths": cfg.paths, "mean_final_value": mean }))
}

fn run_overshoot(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    if cfg.levels.is_empty() {
        return Err(RunError::Config("levels required".into()));
    }
    let stream = RngStream::new(cfg.seed, 1);
    let mut csv = String::from("path,level,passage_time,overshoot,phase,crept\n");
    let mut crept = vec![0u64; cfg.levels.len()];
    if let Some(lcfg) = &cfg.ladder_spec {
        let ladder = lcfg.resolve().map_err(|e| RunError::Config(e.to_string()))?;
        for p in 0..cfg.paths {
            let mut rng = stream.substream(p).rng();
            let samples = simulate_ladder_overshoot(
                &ladder,
                &cfg.levels,
                cfg.start_value,
                cfg.start_phase,
                &mut rng,
            )?;
            for (k, s) in samples.iter().enumerate() {
                crept[k] += s.crept as u64;
                csv.push_str(&format!(
                    "{p},{},{},{},{},{}\n",
                    fmt(s.level),
                    fmt(s.passage_time),
                    fmt(s.overshoot),
                    s.phase,
                    s.crept
                ));
            }
        }
    } else {
        let spec = need_map(cfg)?;
        let opts = SimOptions::default();
        let horizon = cfg.horizon.unwrap_or(1e9);
        for p in 0..cfg.paths {
            let mut rng = stream.substream(p).rng();
            let samples = overshoot_series(
                &spec,
                &cfg.levels,
                cfg.start_value,
                cfg.start_phase,
                horizon,
                &opts,
                &mut rng,
            )?;
            for (k, s) in samples.iter().enumerate() {
                crept[k] += s.crept as u64;
                csv.push_str(&format!(
                    "{p},{},{},{},{},{}\n",
                    fmt(s.level),
                    fmt(s.passage_time),
                    fmt(s.overshoot),
                    s.phase,
                    s.crept
                ));
            }
        }
    }
    fs::write(out.join("overshoots.csv"), csv)?;
    let freqs: Vec<f64> = crept.iter().map(|c| *c as f64 / cfg.paths as f64).collect();
    Ok(json!({ "pass": true, "creeping_frequency": freqs }))
}

fn run_resolvent_check(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    let ladder = need_ladder(cfg)?;
    let f = TestFn::exp(cfg.f_coeff);
    let xs = if cfg.xs.is_empty() { vec![0.0, 0.7] } else { cfg.xs.clone() };
    let mut csv = String::from("x,phase,formula,mc,se,abs_diff,pass\n");
    let mut all_pass = true;
    let mut worst: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        for i in 0..ladder.phases() {
            let formula = resolvent(&ladder, &f, x, i, cfg.lambda)?;
            let (mc, se) = mc_resolvent(
                &ladder,
                &f,
                x,
                i,
                cfg.lambda,
                cfg.paths,
                RngStream::new(cfg.seed, 100 + (k * ladder.phases() + i) as u64),
            )?;
            let diff = (mc - formula).abs();
            let pass = diff <= 3.0 * se && diff <= cfg.tolerances.abs;
            all_pass &= pass;
            worst = worst.max(diff / se.max(1e-300));
            csv.push_str(&format!(
                "{},{i},{},{},{},{},{}\n",
                fmt(x),
                fmt(formula),
                fmt(mc),
                fmt(se),
                fmt(diff),
                pass
            ));
        }
    }
    fs::write(out.join("resolvent.csv"), csv)?;
    Ok(json!({ "pass": all_pass, "max_diff_over_se": worst, "paths": cfg.paths }))
}

fn run_stationary_check(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    let ladder = need_ladder(cfg)?;
    let level = cfg.levels.first().copied().unwrap_or(50.0);
    let edges = cfg.bins.edges();
    let rho = stationary_distribution(&ladder, &edges)?;
    let mut emp = mapfluct::ergodicity::EmpiricalMeasure::new(edges.clone(), ladder.phases());
    let stream = RngStream::new(cfg.seed, 2);
    for p in 0..cfg.paths {
        let mut rng = stream.substream(p).rng();
        let s =
            simulate_ladder_overshoot(&ladder, &[level], cfg.start_value, cfg.start_phase, &mut rng)?;
        emp.push(s[0].overshoot, s[0].phase);
    }
    let tv = mapfluct::ergodicity::tv_distance(&emp, &rho)?;
    let total = emp.total as f64;
    let mut atom_diff: f64 = 0.0;
    let mut csv = String::from("phase,bin_lo,bin_hi,stationary_mass,empirical_mass\n");
    for i in 0..ladder.phases() {
        let emp_atom = emp.zero_atom[i] as f64 / total;
        atom_diff = atom_diff.max((emp_atom - rho.atoms[i]).abs());
        csv.push_str(&format!("{i},0,0,{},{}\n", fmt(rho.atoms[i]), fmt(emp_atom)));
        for (k, w) in edges.windows(2).enumerate() {
            csv.push_str(&format!(
                "{i},{},{},{},{}\n",
                fmt(w[0]),
                fmt(w[1]),
                fmt(rho.bins[i][k]),
                fmt(emp.bins[i][k] as f64 / total)
            ));
        }
    }
    fs::write(out.join("stationary.csv"), csv)?;
    let crept_total: f64 =
        (0..ladder.phases()).map(|i| emp.zero_atom[i] as f64).sum::<f64>() / total;
    let rho_atoms: f64 = rho.atoms.iter().sum();
    let pass = tv <= cfg.tolerances.tv && atom_diff <= cfg.tolerances.atom;
    Ok(json!({
        "pass": pass,
        "tv": tv,
        "max_atom_diff": atom_diff,
        "creeping_frequency": crept_total,
        "stationary_atom_mass": rho_atoms,
        "level": level,
    }))
}

fn run_ladder_estimate(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    let spec = need_map(cfg)?;
    let horizon = cfg.horizon.ok_or_else(|| RunError::Config("horizon required".into()))?;
    let est = estimate_ladder_spec(
        &spec,
        cfg.paths,
        horizon,
        &cfg.bins.edges(),
        100,
        RngStream::new(cfg.seed, 3),
    )?;
    let mut csv = String::from("phase,lo,hi,intensity,se\n");
    for (i, bins) in est.levy_bins.iter().enumerate() {
        for b in bins {
            csv.push_str(&format!(
                "{i},{},{},{},{}\n",
                fmt(b.lo),
                fmt(b.hi),
                fmt(b.intensity),
                fmt(b.se)
            ));
        }
    }
    fs::write(out.join("ladder_levy.csv"), csv)?;
    let mut csv = String::from("from,to,q_hat,q_se\n");
    for i in 0..spec.phases() {
        for j in 0..spec.phases() {
            if i != j {
                csv.push_str(&format!("{i},{j},{},{}\n", fmt(est.q_hat[i][j]), fmt(est.q_se[i][j])));
            }
        }
    }
    fs::write(out.join("ladder_rates.csv"), csv)?;
    write_json(
        &out.join("ladder_spec.json"),
        &serde_json::to_value(LadderSpecConfig::from_spec(&est.spec)).unwrap(),
    )?;
    Ok(json!({ "pass": !est.wide_ci, "events": est.events, "local_time": est.local_time }))
}

fn run_vigon_check(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    let spec = need_map(cfg)?;
    let horizon = cfg.horizon.ok_or_else(|| RunError::Config("horizon required".into()))?;
    let potential_edges =
        cfg.potential_bins.clone().unwrap_or(BinSpec { lo: 0.0, hi: 8.0, count: 160 });
    let params = VigonParams {
        n_paths: cfg.paths,
        horizon,
        edges: cfg.bins.edges(),
        potential_edges: potential_edges.edges(),
        min_events: 100,
    };
    let report = vigon_check(&spec, &params, RngStream::new(cfg.seed, 4))?;
    let mut csv = String::from("from,to,lo,hi,lhs,lhs_se,rhs,rhs_se,ratio\n");
    let mut worst: f64 = 0.0;
    let mut usable = 0u64;
    let mut pass = true;
    for r in &report.rows {
        let ratio_txt = r.ratio.map(fmt).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.from,
            r.to,
            fmt(r.lo),
            fmt(r.hi),
            fmt(r.lhs),
            fmt(r.lhs_se),
            fmt(r.rhs),
            fmt(r.rhs_se),
            ratio_txt
        ));
        if let Some(ratio) = r.ratio {
            usable += 1;
            worst = worst.max((ratio - 1.0).abs());
            pass &= (ratio - 1.0).abs() <= cfg.tolerances.ratio;
        }
    }
    fs::write(out.join("vigon.csv"), csv)?;
    pass &= usable > 0;
    Ok(json!({
        "pass": pass,
        "usable_bins": usable,
        "max_ratio_deviation": worst,
        "scales": report.scales,
    }))
}

fn run_wiener_hopf(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    let spec = need_map(cfg)?;
    let thetas = cfg
        .theta
        .clone()
        .unwrap_or(GridRange { lo: 0.25, hi: 6.0, step: 0.25 })
        .expand();
    let (ladder, dual_ladder) = if cfg.estimate_ladders {
        let horizon = cfg.horizon.ok_or_else(|| RunError::Config("horizon required".into()))?;
        let edges = cfg.bins.edges();
        let ladder = estimate_ladder_spec(
            &spec,
            cfg.paths,
            horizon,
            &edges,
            100,
            RngStream::new(cfg.seed, 8),
        )?
        .spec;
        let dual = mapfluct::model::dualize(&spec)?;
        let dual_ladder = mapfluct::ladder_est::estimate_record_ladder_spec(
            &dual,
            cfg.paths,
            horizon,
            &edges,
            RngStream::new(cfg.seed, 9),
        )?;
        write_json(
            &out.join("ladder_spec.json"),
            &serde_json::to_value(LadderSpecConfig::from_spec(&ladder)).unwrap(),
        )?;
        write_json(
            &out.join("dual_ladder_spec.json"),
            &serde_json::to_value(LadderSpecConfig::from_spec(&dual_ladder)).unwrap(),
        )?;
        (ladder, dual_ladder)
    } else {
        let ladder = cfg
            .ladder_spec
            .as_ref()
            .ok_or_else(|| RunError::Config("ladder_spec required (or set estimate_ladders)".into()))?
            .resolve()
            .map_err(|e| RunError::Config(e.to_string()))?;
        let dual_ladder = cfg
            .dual_ladder_spec
            .as_ref()
            .ok_or_else(|| RunError::Config("dual_ladder_spec required (or set estimate_ladders)".into()))?
            .resolve()
            .map_err(|e| RunError::Config(e.to_string()))?;
        (ladder, dual_ladder)
    };
    let report = wiener_hopf_residual(&spec, &ladder, &dual_ladder, &thetas)?;
    let summary = json!({
        "pass": report.max_rel_residual <= cfg.tolerances.ratio,
        "max_abs_residual": report.max_abs_residual,
        "max_rel_residual": report.max_rel_residual,
        "scales": report.scales,
    });
    write_json(&out.join("wiener_hopf.json"), &summary)?;
    Ok(summary)
}

fn run_tv_decay(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    let ladder = need_ladder(cfg)?;
    if cfg.t_grid.len() < 5 {
        return Err(RunError::Config("t_grid needs at least 5 points".into()));
    }
    let edges = cfg.bins.edges();
    let rho = stationary_distribution(&ladder, &edges)?;
    let curve = tv_decay_curve(
        &ladder,
        &rho,
        (cfg.start_value, cfg.start_phase),
        &cfg.t_grid,
        cfg.paths,
        cfg.bootstrap,
        RngStream::new(cfg.seed, 5),
    )?;
    let mut csv = String::from("t,tv,se\n");
    for p in &curve {
        csv.push_str(&format!("{},{},{}\n", fmt(p.t), fmt(p.tv), fmt(p.se)));
    }
    fs::write(out.join("tv_decay.csv"), csv)?;
    let model = match cfg.rate_model.as_deref() {
        Some("polynomial") => RateModel::Polynomial,
        _ => RateModel::Exponential,
    };
    let fit = fit_rate(&curve, model)?;
    let pass = match model {
        RateModel::Exponential => fit.rate > 0.0 && fit.r_squared >= cfg.tolerances.r_squared,
        RateModel::Polynomial => fit.rate < 0.0 && fit.r_squared >= cfg.tolerances.r_squared,
    };
    write_json(&out.join("rate_fit.json"), &serde_json::to_value(&fit).unwrap())?;
    Ok(json!({ "pass": pass, "rate": fit.rate, "r_squared": fit.r_squared }))
}

fn run_mixing(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    let ladder = need_ladder(cfg)?;
    if cfg.t_grid.is_empty() {
        return Err(RunError::Config("t_grid required".into()));
    }
    let edges = cfg.bins.edges();
    let rho = stationary_distribution(&ladder, &edges)?;
    let starts = cfg.starts.unwrap_or(32);
    let pps = cfg.paths_per_start.unwrap_or(4_000);
    let curve = beta_mixing_stationary(
        &ladder,
        &rho,
        &cfg.t_grid,
        starts,
        pps,
        RngStream::new(cfg.seed, 6),
    )?;
    let mut csv = String::from("t,beta,se\n");
    for p in &curve {
        csv.push_str(&format!("{},{},{}\n", fmt(p.t), fmt(p.beta), fmt(p.se)));
    }
    fs::write(out.join("mixing.csv"), csv)?;
    let mut nonincreasing = true;
    for w in curve.windows(2) {
        nonincreasing &= w[1].beta <= w[0].beta + 3.0 * (w[0].se + w[1].se);
    }
    let last = curve.last().unwrap();
    let pass = nonincreasing && last.beta < 0.05;
    Ok(json!({ "pass": pass, "beta_last": last.beta, "nonincreasing": nonincreasing }))
}

fn run_lamperti(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    let alpha = cfg.alpha.ok_or_else(|| RunError::Config("alpha required".into()))?;
    let rho = cfg.rho.ok_or_else(|| RunError::Config("rho required".into()))?;
    let spec = mapfluct::lamperti::lamperti_stable_spec(alpha, rho)?;
    write_json(
        &out.join("lamperti_spec.json"),
        &serde_json::to_value(MapSpecConfig::from_spec(&spec)).unwrap(),
    )?;
    // switch-law mass by quadrature
    let f_mass = spec.transitions[0][1]
        .as_ref()
        .map(|law| law.integrate(|_| 1.0, 1e-10))
        .unwrap_or(0.0);
    let levy = spec.components[0].levy_measure().unwrap();
    let finite_below = levy.exp_moment_tail_finite(alpha / 2.0);
    let divergent_at = !levy.exp_moment_tail_finite(alpha);
    let moment_value = match levy.exp_moment_above(alpha / 2.0, 1.0) {
        Extended::Finite(v) => v,
        _ => f64::NAN,
    };
    let dichotomy = mapfluct::exponents::drift_dichotomy(&spec)?;
    let transient = dichotomy.verdict == mapfluct::exponents::DriftVerdict::Transient;
    // round-trip identity on simulated two-phase paths
    let demo = MapSpecConfig {
        components: vec![
            mapfluct::model::LevyComponentSpec::cpp(
                0.7,
                1.0,
                mapfluct::law::JumpLaw::uniform(-0.5, 1.0),
            ),
            mapfluct::model::LevyComponentSpec::cpp(
                -0.3,
                0.8,
                mapfluct::law::JumpLaw::exponential(2.0),
            ),
        ],
        q: vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
        transitions: vec![],
    }
    .resolve()
    .map_err(|e| RunError::Runtime(e.to_string()))?;
    let opts = SimOptions::default();
    let stream = RngStream::new(cfg.seed, 7);
    let mut sup: f64 = 0.0;
    let round_trips = cfg.paths.min(1000);
    for p in 0..round_trips {
        let mut rng = stream.substream(p).rng();
        let path = simulate_path(&demo, 0.2, (p % 2) as usize, 4.0, &opts, &mut rng)?;
        let z = mapfluct::lamperti::lamperti_kiu_inverse(&path, alpha)?;
        let back = mapfluct::lamperti::lamperti_kiu_forward(&z, alpha)?;
        for (a, b) in path.pieces.iter().zip(&back.pieces) {
            sup = sup.max((a.x0 - b.x0).abs()).max((a.t1 - b.t1).abs());
        }
    }
    let pass =
        (f_mass - 1.0).abs() < 1e-8 && finite_below && divergent_at && transient && sup < 1e-9;
    Ok(json!({
        "pass": pass,
        "switch_law_mass": f_mass,
        "exp_moment_at_half_alpha": moment_value,
        "divergent_at_alpha": divergent_at,
        "drift": dichotomy.drift,
        "transient": transient,
        "round_trip_sup": sup,
        "round_trips": round_trips,
    }))
}
