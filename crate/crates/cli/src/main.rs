//! `fdp`: FDP confidence envelopes and simulation experiments from the command line.
//!
//! Every subcommand writes CSV to `--out` (or stdout). Failures are reported as a
//! single JSON object on stderr with a nonzero exit code.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use fdp_envelopes::harness::io::{emit_csv, load_pvalue_stream, load_pvalues_csv, read_pvalue_stream};
use fdp_envelopes::harness::{
    consistency_curve, parse_methods, real_data_report, run_experiment, ExperimentConfig, LordConfig, MethodSpec,
    ModelConfig, Setting, SummaryRow,
};
use fdp_envelopes::models::{gen_gaussian_topk, gen_vct, replication_rng, VctConfig};
use fdp_envelopes::online::{run_lord_stream, OnlineState};
use fdp_envelopes::preordered::{preordered_envelope, PreorderedData};
use fdp_envelopes::topk::{path_sizes, topk_adaptive_envelope_sorted, topk_bounds, PValueBatch};
use fdp_envelopes::{interpolate, FdpError, Method};

const EXIT_ERROR: u8 = 1;
const EXIT_FAILED_CELL: u8 = 2;

#[derive(Parser)]
#[command(name = "fdp", version, about = "Simultaneous FDP confidence envelopes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-k top-k envelopes for a p-value file or a simulated batch.
    Topk(TopkArgs),
    /// Per-k pre-ordered envelopes for a p-value file (in test order) or a simulated knockoff batch.
    Preordered(PreorderedArgs),
    /// Runs LORD over a p-value stream and prints the envelopes after every step.
    Online(OnlineArgs),
    /// Replicated coverage experiment; fails if any cell misses 1 - delta - 3 SE.
    Coverage(ExperimentArgs),
    /// Median bound minus alpha over an m grid, with log-log slopes.
    Consistency(ExperimentArgs),
    /// BH rejections and bounds for an observed p-value file.
    RealData(RealDataArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    /// Comma-separated, e.g. `simes,wellner-adapt,kr-interp`.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TopkArgs {
    /// CSV with header `index,pvalue[,label]`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Batch size when simulating (dense Gaussian model).
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 0.5)]
    pi0: f64,
    #[arg(long, default_value_t = 1.5)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PreorderedArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    m: usize,
    /// Knockoff-linear curve parameter when simulating.
    #[arg(long, default_value_t = 30.0)]
    z: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OnlineArgs {
    /// One p-value per line; stdin when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    /// Initial wealth as a fraction of alpha.
    #[arg(long, default_value_t = 0.5)]
    w0: f64,
    /// Use gamma_j = j^-1.6 without normalization.
    #[arg(long)]
    raw_gamma: bool,
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RealDataArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated levels.
    #[arg(long, default_value = "0.05,0.1,0.2")]
    alpha: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum SettingArg {
    Topk,
    Preordered,
    Online,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment file; other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "topk")]
    setting: SettingArg,
    /// Comma-separated m grid.
    #[arg(long)]
    m: Option<String>,
    /// Comma-separated alpha grid.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Adds m = 10^6 to the default grid.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    raw_gamma: bool,
    /// Adds a wall_time column.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Core(FdpError),
    Usage(String),
    FailedCells(Vec<serde_json::Value>),
}

impl From<FdpError> for CliError {
    fn from(e: FdpError) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Topk(a) => cmd_topk(a),
        Command::Preordered(a) => cmd_preordered(a),
        Command::Online(a) => cmd_online(a),
        Command::Coverage(a) => cmd_coverage(a),
        Command::Consistency(a) => cmd_consistency(a),
        Command::RealData(a) => cmd_real_data(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, body) = match e {
                CliError::Core(e) => (EXIT_ERROR, json!({"error": e.kind(), "message": e.to_string()})),
                CliError::Usage(m) => (EXIT_ERROR, json!({"error": "usage", "message": m})),
                CliError::FailedCells(cells) => (
                    EXIT_FAILED_CELL,
                    json!({"error": "coverage", "message": "coverage below 1 - delta - 3 SE", "cells": cells}),
                ),
            };
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}

fn output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| CliError::Usage(format!("invalid {what} value {x:?}"))))
        .collect()
}

fn methods_or(list: &Option<String>, default: &str) -> CliResult<Vec<MethodSpec>> {
    Ok(parse_methods(list.as_deref().unwrap_or(default))?)
}

/// Writes a header plus one row per k; columns after `lead` are envelope values.
fn write_table(
    out: &mut dyn Write,
    lead: &[&str],
    lead_rows: &[Vec<String>],
    names: &[String],
    cols: &[Vec<f64>],
) -> CliResult<()> {
    let mut header: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    header.extend(names.iter().cloned());
    writeln!(out, "{}", header.join(","))?;
    for (i, lr) in lead_rows.iter().enumerate() {
        let mut row = lr.clone();
        row.extend(cols.iter().map(|c| c[i].to_string()));
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_topk(a: TopkArgs) -> CliResult<()> {
    let batch = match &a.input {
        Some(p) => load_pvalues_csv(p)?,
        None => {
            let cfg = fdp_envelopes::models::GaussianLocationConfig::dense(a.m, a.pi0, a.mu)?;
            gen_gaussian_topk(&cfg, &mut replication_rng(a.seed, 0))?
        }
    };
    let methods = methods_or(&a.common.methods, "simes,dkw,kr,wellner,hybrid")?;
    let sorted = batch.sorted();
    let sizes = path_sizes(&sorted.sorted);
    let mut cols = Vec::new();
    for spec in &methods {
        if !Method::TOPK.contains(&spec.method) {
            return Err(CliError::Usage(format!("{spec} is not a top-k method")));
        }
        let bounds = if spec.adaptive {
            topk_adaptive_envelope_sorted(spec.method, &sorted.sorted, a.common.delta)?.bounds
        } else {
            topk_bounds(spec.method, &sorted.sorted, a.common.delta, batch.m() as f64)?
        };
        cols.push(if spec.interpolated {
            fdp_envelopes::envelope::interpolate_bounds(&bounds, &sizes)?
        } else {
            bounds
        });
    }
    let lead: Vec<Vec<String>> = sorted
        .sorted
        .iter()
        .zip(&sorted.perm)
        .enumerate()
        .map(|(k, (p, idx))| vec![(k + 1).to_string(), idx.to_string(), p.to_string()])
        .collect();
    let names: Vec<String> = methods.iter().map(|m| m.to_string()).collect();
    write_table(&mut *output(&a.common.out)?, &["k", "index", "pvalue"], &lead, &names, &cols)
}

fn cmd_preordered(a: PreorderedArgs) -> CliResult<()> {
    let data = match &a.input {
        Some(p) => {
            let b: PValueBatch = load_pvalues_csv(p)?;
            PreorderedData::new(b.values().to_vec(), a.s, a.lambda, b.labels().map(<[bool]>::to_vec))?
        }
        None => {
            let mut cfg = VctConfig::knockoff(a.z, a.beta);
            cfg.s = a.s;
            cfg.lambda = a.lambda;
            cfg.validate()?;
            gen_vct(&cfg, a.m, &mut replication_rng(a.seed, 0))?
        }
    };
    let methods = methods_or(&a.common.methods, "freedman,kr,kru")?;
    let (ak, nk) = data.counts();
    let mut cols = Vec::new();
    for spec in &methods {
        if !Method::SEQUENTIAL.contains(&spec.method) || spec.adaptive {
            return Err(CliError::Usage(format!("{spec} is not a pre-ordered method")));
        }
        let env = preordered_envelope(spec.method, &data, a.common.delta)?;
        cols.push(if spec.interpolated { interpolate(&env, &ak)?.bounds } else { env.bounds });
    }
    let lead: Vec<Vec<String>> = data
        .pvalues()
        .iter()
        .enumerate()
        .map(|(i, p)| vec![(i + 1).to_string(), p.to_string(), ak[i].to_string(), nk[i].to_string()])
        .collect();
    let names: Vec<String> = methods.iter().map(|m| m.to_string()).collect();
    write_table(&mut *output(&a.common.out)?, &["k", "pvalue", "A_k", "N_k"], &lead, &names, &cols)
}

fn cmd_online(a: OnlineArgs) -> CliResult<()> {
    let pvalues = match &a.input {
        Some(p) => load_pvalue_stream(p)?,
        None => read_pvalue_stream(BufReader::new(io::stdin().lock()))?,
    };
    let lord = LordConfig { w0_fraction: a.w0, raw_gamma: a.raw_gamma, ..LordConfig::default() };
    if !(0.0..=1.0).contains(&a.w0) {
        return Err(CliError::Usage("--w0 must lie in [0,1]".into()));
    }
    let state = OnlineState::new(a.alpha, a.w0 * a.alpha, lord.spending())?;
    let records = run_lord_stream(pvalues, state, a.delta)?;
    emit_csv(&records, output(&a.out)?)?;
    Ok(())
}

fn cmd_real_data(a: RealDataArgs) -> CliResult<()> {
    let batch = load_pvalues_csv(&a.input)?;
    let alphas: Vec<f64> = parse_list(&a.alpha, "alpha")?;
    let methods = methods_or(&a.common.methods, "simes,dkw,kr,wellner,hybrid")?;
    let rows = real_data_report(&batch, &alphas, &methods, a.common.delta)?;
    emit_csv(&rows, output(&a.common.out)?)?;
    Ok(())
}

fn default_config(setting: SettingArg, full: bool) -> ExperimentConfig {
    let mut grid = vec![1_000, 10_000, 100_000];
    if full {
        grid.push(1_000_000);
    }
    let (setting, model, methods) = match setting {
        SettingArg::Topk => (Setting::Topk, ModelConfig::dense_gaussian(0.5, 1.5), "simes,dkw,kr,wellner,hybrid"),
        SettingArg::Preordered => (Setting::Preordered, ModelConfig::Vct(VctConfig::knockoff(30.0, 0.0)), "freedman,kr,kru"),
        SettingArg::Online => (Setting::Online, ModelConfig::Mixture { pi1: 0.3, mu: 3.0 }, "freedman,kr,kru"),
    };
    ExperimentConfig {
        setting,
        model,
        m_grid: grid,
        alpha_grid: vec![0.2],
        delta: 0.25,
        replications: 1000,
        methods: parse_methods(methods).expect("valid default methods"),
        seed: 0,
        lord: LordConfig::default(),
        interpolation_max_m: 100_000,
        timing: false,
    }
}

fn build_config(a: &ExperimentArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_toml_str(&std::fs::read_to_string(p)?)?,
        None => default_config(a.setting, a.full),
    };
    if let Some(m) = &a.m {
        cfg.m_grid = parse_list(m, "m")?;
    }
    if let Some(al) = &a.alpha {
        cfg.alpha_grid = parse_list(al, "alpha")?;
    }
    if let Some(d) = a.delta {
        cfg.delta = d;
    }
    if let Some(r) = a.reps {
        cfg.replications = r;
    }
    if let Some(ms) = &a.methods {
        cfg.methods = parse_methods(ms)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.lord.raw_gamma |= a.raw_gamma;
    cfg.timing |= a.timing;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_coverage(a: ExperimentArgs) -> CliResult<()> {
    let cfg = build_config(&a)?;
    let rows = run_experiment(&cfg)?;
    emit_csv(&rows, output(&a.out)?)?;
    let failed = failed_cells(&rows, cfg.delta, cfg.replications);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::FailedCells(failed))
    }
}

/// Rows whose coverage is below 1 - delta - 3 SE, as JSON objects.
fn failed_cells(rows: &[SummaryRow], delta: f64, reps: usize) -> Vec<serde_json::Value> {
    let se = (delta * (1.0 - delta) / reps as f64).sqrt();
    let gate = 1.0 - delta - 3.0 * se;
    rows.iter()
        .filter(|r| r.coverage_rate < gate)
        .map(|r| json!({"m": r.m, "alpha": r.alpha, "method": r.method, "coverage_rate": r.coverage_rate, "gate": gate}))
        .collect()
}

#[derive(Serialize)]
struct ConsistencyRow<'a> {
    method: &'a str,
    alpha: f64,
    m: usize,
    gap: f64,
    slope: f64,
}

fn cmd_consistency(a: ExperimentArgs) -> CliResult<()> {
    let mut cfg = build_config(&a)?;
    if a.config.is_none() && a.reps.is_none() {
        cfg.replications = 200;
    }
    let series = consistency_curve(&run_experiment(&cfg)?)?;
    let rows: Vec<ConsistencyRow> = series
        .iter()
        .flat_map(|s| {
            s.points.iter().map(move |&(m, gap)| ConsistencyRow { method: &s.method, alpha: s.alpha, m, gap, slope: s.slope })
        })
        .collect();
    emit_csv(&rows, output(&a.out)?)?;
    Ok(())
}
