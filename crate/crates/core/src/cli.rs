//! Command-line front end. Every subcommand parses and validates its inputs,
//! calls into the library and writes one table as CSV or JSON.

use crate::error::Error;
use crate::fock::{fock_fidelity_curve, SpacingMode};
use crate::kernels::{ClickTimes, OpoParams};
use crate::optimizer::{optimize_mode, OptimizerSettings};
use crate::two_mode::{
    conditional_number_distribution, fidelity_closed_form, two_mode_fidelity_via_wigner, SqueezingParam,
};
use crate::wick::{conditional_moment_lhs, conditional_moment_rhs, detector_splitting_check, SplitCoefficients};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "HERALDED_FOCK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "heralded-fock", version, about = "Heralded Fock states from a CW OPO")]
pub struct Cli {
    /// Flat `key = value` file; keys are the long flag names. Flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; `-` or absent writes to stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-pulse model: F2 in closed form and by phase-space integration.
    TwoMode(TwoModeArgs),
    /// F2 against click separation, optimised mode and f_a mode.
    FidelitySweep(SweepArgs),
    /// Optimised signal mode for one click pair.
    OptimizeMode(OptimizeArgs),
    /// Weak-pump n-photon fidelity against click span.
    FockN(FockArgs),
    /// Wick-expansion checks of the weak-pump state and detector splitting.
    WickCheck(WickArgs),
}

#[derive(Debug, Args)]
pub struct TwoModeArgs {
    #[arg(long, num_args = 1..)]
    pub r: Vec<f64>,
    #[arg(long)]
    pub n_max: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PumpArgs {
    #[arg(long)]
    pub eta_t: Option<f64>,
    #[arg(long)]
    pub eta_s: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, num_args = 1..)]
    pub eps_over_gamma: Vec<f64>,
    /// `start:end:step` in units of `1/gamma`, end inclusive.
    #[arg(long)]
    pub dt_range: Option<String>,
    #[command(flatten)]
    pub pump: PumpArgs,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, num_args = 1)]
    pub eps_over_gamma: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Keep every `stride`-th grid sample in the output.
    #[arg(long)]
    pub stride: Option<usize>,
    #[command(flatten)]
    pub pump: PumpArgs,
}

#[derive(Debug, Args)]
pub struct FockArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub pattern: Option<Pattern>,
    /// `start:end:step` of `gamma |t_cn - t_c1|`, end inclusive.
    #[arg(long)]
    pub range: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pattern {
    Equal,
    CoincidentPair,
}

impl FromStr for Pattern {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Pattern as ValueEnum>::from_str(s, true)
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Args)]
pub struct WickArgs {
    /// Comma-separated click times for the splitting check.
    #[arg(long)]
    pub clicks: Option<String>,
    #[arg(long, num_args = 1)]
    pub eps_over_gamma: Option<f64>,
    /// Number of random configurations for the weak-pump identity.
    #[arg(long)]
    pub configs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Failure with its process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: if e.is_input_error() { EXIT_INVALID } else { EXIT_NUMERICAL },
            message: e.to_string(),
        }
    }
}

/// Flat `key = value` configuration with `#` comments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile(BTreeMap<String, String>);

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::invalid(format!("config line {}: expected key = value", k + 1)));
            };
            map.insert(key.trim().replace('_', "-"), value.trim().to_string());
        }
        Ok(ConfigFile(map))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.0
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::invalid(format!("config key `{key}`: {e}"))))
            .transpose()
    }

    fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.0.get(key).map(|v| parse_list(v, key)).transpose()
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::invalid(format!("unknown config key `{k}`"))),
            None => Ok(()),
        }
    }
}

fn parse_list(s: &str, name: &str) -> Result<Vec<f64>, CliError> {
    s.split([',', ' '])
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| CliError::invalid(format!("`{name}`: {e}")))
        })
        .collect()
}

/// Parses `start:end:step` into the inclusive list `start + k step`.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let parts = parse_list(&s.replace(':', ","), "range")?;
    let [start, end, step] = parts[..] else {
        return Err(CliError::invalid(format!("range `{s}` must be start:end:step")));
    };
    if !(step > 0.0) || end < start || !start.is_finite() || !end.is_finite() {
        return Err(CliError::invalid(format!("range `{s}` is empty or has a nonpositive step")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// One output cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(v.to_string()),
            Cell::Int(v) => json!(v),
            Cell::Bool(v) => json!(v),
            Cell::Text(v) => json!(v),
        }
    }
}

/// Shortest round-trip text, switching to exponent form for very small or
/// very large magnitudes.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Result of one subcommand: a table plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: &'static str,
    pub params: Map<String, Value>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Set when some rows come from a run that hit its iteration cap.
    pub incomplete: bool,
}

impl Report {
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::invalid(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Object(
                    self.columns
                        .iter()
                        .zip(r)
                        .map(|(c, v)| (c.to_string(), v.json()))
                        .collect(),
                )
            })
            .collect();
        let doc = json!({
            "metadata": {
                "command": self.command,
                "version": env!("CARGO_PKG_VERSION"),
                "params": self.params,
                "complete": !self.incomplete,
            },
            "columns": self.columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("json serialisation");
        s.push('\n');
        s
    }
}

fn opo(eps: f64, eta_t: f64, eta_s: f64) -> Result<OpoParams, CliError> {
    Ok(OpoParams::scaled(eps, eta_t, eta_s)?)
}

fn settings_with_seed(seed: u64) -> OptimizerSettings {
    OptimizerSettings {
        seed,
        ..OptimizerSettings::default()
    }
}

fn two_mode(args: &TwoModeArgs, cfg: &ConfigFile) -> Result<Report, CliError> {
    cfg.check_keys(&["r", "n-max", "output", "format"])?;
    let rs = if args.r.is_empty() { cfg.get_list("r")?.unwrap_or_default() } else { args.r.clone() };
    if rs.is_empty() {
        return Err(CliError::invalid("two-mode needs at least one --r"));
    }
    let n_max = pick(args.n_max, cfg.get("n-max")?, 50);
    let mut rows = Vec::new();
    for &r in &rs {
        let sq = SqueezingParam::new(r)?;
        let dist = conditional_number_distribution(sq, n_max)?;
        rows.push(vec![
            Cell::Num(r),
            Cell::Num(fidelity_closed_form(sq)),
            Cell::Num(two_mode_fidelity_via_wigner(sq)?),
            Cell::Num(dist.probabilities[2]),
            Cell::Num(dist.tail),
        ]);
    }
    let mut params = Map::new();
    params.insert("r".into(), json!(rs));
    params.insert("n_max".into(), json!(n_max));
    Ok(Report {
        command: "two-mode",
        params,
        columns: vec!["r", "F2_closed_form", "F2_phase_space", "p2_number_basis", "tail_mass"],
        rows,
        incomplete: false,
    })
}

const PUMP_KEYS: [&str; 3] = ["eta-t", "eta-s", "seed"];

fn fidelity_sweep(args: &SweepArgs, cfg: &ConfigFile) -> Result<Report, CliError> {
    let mut keys = vec!["eps-over-gamma", "dt-range", "output", "format"];
    keys.extend(PUMP_KEYS);
    cfg.check_keys(&keys)?;
    let eps = if args.eps_over_gamma.is_empty() {
        cfg.get_list("eps-over-gamma")?.unwrap_or_default()
    } else {
        args.eps_over_gamma.clone()
    };
    if eps.is_empty() {
        return Err(CliError::invalid("fidelity-sweep needs --eps-over-gamma"));
    }
    let range = args
        .dt_range
        .clone()
        .or(cfg.get("dt-range")?)
        .unwrap_or_else(|| "0:10:0.5".to_string());
    let seps = parse_range(&range)?;
    let eta_t = pick(args.pump.eta_t, cfg.get("eta-t")?, 1.0);
    let eta_s = pick(args.pump.eta_s, cfg.get("eta-s")?, 1.0);
    let seed = pick(args.pump.seed, cfg.get("seed")?, 7);
    let settings = settings_with_seed(seed);
    let jobs: Vec<(OpoParams, f64)> = eps
        .iter()
        .map(|&e| opo(e, eta_t, eta_s))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flat_map(|p| seps.iter().map(move |&s| (p, s)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(p, sep)| optimize_mode(p, &ClickTimes::pair(*sep)?, &settings))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut incomplete = false;
    let rows = jobs
        .iter()
        .zip(&results)
        .map(|((p, sep), r)| {
            incomplete |= !r.converged;
            vec![
                Cell::Num(p.eps_over_gamma()),
                Cell::Num(*sep),
                Cell::Num(r.fidelity),
                Cell::Num(r.zero_intensity_mode_fidelity),
                Cell::Bool(r.converged),
            ]
        })
        .collect();
    let mut params = Map::new();
    params.insert("eps_over_gamma".into(), json!(eps));
    params.insert("dt_range".into(), json!(range));
    params.insert("eta_t".into(), json!(eta_t));
    params.insert("eta_s".into(), json!(eta_s));
    params.insert("seed".into(), json!(seed));
    Ok(Report {
        command: "fidelity-sweep",
        params,
        columns: vec!["eps_over_gamma", "gamma_dt", "F2_optimized", "F2_zero_intensity_mode", "converged"],
        rows,
        incomplete,
    })
}

fn optimize(args: &OptimizeArgs, cfg: &ConfigFile) -> Result<Report, CliError> {
    let mut keys = vec!["eps-over-gamma", "dt", "stride", "output", "format"];
    keys.extend(PUMP_KEYS);
    cfg.check_keys(&keys)?;
    let eps = pick(args.eps_over_gamma, cfg.get("eps-over-gamma")?, 0.08);
    let dt = pick(args.dt, cfg.get("dt")?, 4.0);
    let stride = pick(args.stride, cfg.get("stride")?, 10);
    if stride == 0 {
        return Err(CliError::invalid("stride must be positive"));
    }
    let eta_t = pick(args.pump.eta_t, cfg.get("eta-t")?, 1.0);
    let eta_s = pick(args.pump.eta_s, cfg.get("eta-s")?, 1.0);
    let seed = pick(args.pump.seed, cfg.get("seed")?, 7);
    let p = opo(eps, eta_t, eta_s)?;
    let clicks = ClickTimes::pair(dt)?;
    let result = optimize_mode(&p, &clicks, &settings_with_seed(seed))?;
    let grid = *result.mode.grid();
    let f_a = crate::optimizer::optimal_mode_zero_intensity_on(&grid, clicks.times()[0], clicks.times()[1], 1.0)?;
    let rows = (0..grid.len())
        .step_by(stride)
        .map(|k| {
            vec![
                Cell::Num(grid.time(k)),
                Cell::Num(result.mode.values()[k]),
                Cell::Num(f_a.values()[k]),
            ]
        })
        .collect();
    let mut params = Map::new();
    params.insert("eps_over_gamma".into(), json!(eps));
    params.insert("dt".into(), json!(dt));
    params.insert("eta_t".into(), json!(eta_t));
    params.insert("eta_s".into(), json!(eta_s));
    params.insert("seed".into(), json!(seed));
    params.insert("stride".into(), json!(stride));
    params.insert("F2_optimized".into(), json!(result.fidelity));
    params.insert("F2_zero_intensity_mode".into(), json!(result.zero_intensity_mode_fidelity));
    Ok(Report {
        command: "optimize-mode",
        params,
        columns: vec!["gamma_t", "f_optimized", "f_zero_intensity"],
        rows,
        incomplete: !result.converged,
    })
}

fn fock_n(args: &FockArgs, cfg: &ConfigFile) -> Result<Report, CliError> {
    cfg.check_keys(&["n", "pattern", "range", "output", "format"])?;
    let n = pick(args.n, cfg.get("n")?, 3);
    let pattern = pick(args.pattern, cfg.get("pattern")?, Pattern::Equal);
    let range = args.range.clone().or(cfg.get("range")?).unwrap_or_else(|| "0:20:0.2".to_string());
    let spans = parse_range(&range)?;
    let spacing = match pattern {
        Pattern::Equal => SpacingMode::Equal,
        Pattern::CoincidentPair => SpacingMode::CoincidentPair,
    };
    let curve = fock_fidelity_curve(n, spacing, &spans)?;
    let rows = curve
        .iter()
        .map(|p| vec![Cell::Num(p.gamma_span), Cell::Num(p.fidelity), Cell::Num(p.xi)])
        .collect();
    let mut params = Map::new();
    params.insert("n".into(), json!(n));
    params.insert("pattern".into(), json!(format!("{pattern:?}")));
    params.insert("range".into(), json!(range));
    Ok(Report {
        command: "fock-n",
        params,
        columns: vec!["gamma_span", "F_n", "xi"],
        rows,
        incomplete: false,
    })
}

/// Rows of a random unitary, from the QR factors of a random complex matrix.
fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Complex64>> {
    let m = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let q = m.qr().q();
    (0..dim).map(|i| (0..dim).map(|j| q[(i, j)]).collect()).collect()
}

fn wick_check(args: &WickArgs, cfg: &ConfigFile) -> Result<Report, CliError> {
    cfg.check_keys(&["clicks", "eps-over-gamma", "configs", "seed", "output", "format"])?;
    let clicks_text = args.clicks.clone().or(cfg.get("clicks")?).unwrap_or_else(|| "0,0.8".to_string());
    let split_clicks = ClickTimes::new(parse_list(&clicks_text, "clicks")?)?;
    if split_clicks.len() != 2 {
        return Err(CliError::invalid("the splitting check needs exactly two clicks"));
    }
    let eps = pick(args.eps_over_gamma, cfg.get("eps-over-gamma")?, 1e-3);
    let configs = pick(args.configs, cfg.get("configs")?, 50);
    let seed = pick(args.seed, cfg.get("seed")?, 7);
    let p = opo(eps, 1.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut rows = Vec::new();
    for index in 0..configs {
        let n = rng.random_range(1..=3usize);
        let m = rng.random_range(0..=n);
        let mut times: Vec<f64> = (0..n).map(|_| 3.0 * rng.random::<f64>()).collect();
        times.sort_by(f64::total_cmp);
        let primed: Vec<f64> = (0..m).map(|_| 4.0 * rng.random::<f64>() - 0.5).collect();
        let double_primed: Vec<f64> = (0..m).map(|_| 4.0 * rng.random::<f64>() - 0.5).collect();
        let clicks = ClickTimes::new(times)?;
        let lhs = conditional_moment_lhs(&clicks, &primed, &double_primed, &p)?;
        let rhs = conditional_moment_rhs(&clicks, &primed, &double_primed, 1.0)?;
        rows.push(vec![
            Cell::Text("identity".into()),
            Cell::Int(index),
            Cell::Int(n),
            Cell::Int(m),
            Cell::Num(rhs),
            Cell::Num(lhs.value),
            Cell::Num((lhs.value - rhs).abs()),
        ]);
    }

    let splits = [
        (SplitCoefficients::new(vec![vec![Complex64::new(1.0, 0.0)]])?, vec![0, 0]),
        (SplitCoefficients::balanced(), vec![0, 1]),
        (SplitCoefficients::new(random_unitary(3, &mut rng))?, vec![0, 2]),
    ];
    let split_params = opo(eps.max(0.05), 1.0, 1.0)?;
    for (index, (split, assignment)) in splits.iter().enumerate() {
        let report = detector_splitting_check(&split_clicks, split, assignment, &split_params)?;
        rows.push(vec![
            Cell::Text("detector-split".into()),
            Cell::Int(index),
            Cell::Int(split.detectors()),
            Cell::Int(2),
            Cell::Num(report.direct[0]),
            Cell::Num(report.split[0]),
            Cell::Num(report.max_relative_deviation),
        ]);
    }
    let mut params = Map::new();
    params.insert("eps_over_gamma".into(), json!(eps));
    params.insert("configs".into(), json!(configs));
    params.insert("seed".into(), json!(seed));
    params.insert("clicks".into(), json!(split_clicks.times()));
    Ok(Report {
        command: "wick-check",
        params,
        columns: vec!["check", "index", "n", "m", "reference", "value", "deviation"],
        rows,
        incomplete: false,
    })
}

/// Runs the parsed command and returns its report (nothing is written).
pub fn execute(cli: &Cli, cfg: &ConfigFile) -> Result<Report, CliError> {
    match &cli.command {
        Command::TwoMode(a) => two_mode(a, cfg),
        Command::FidelitySweep(a) => fidelity_sweep(a, cfg),
        Command::OptimizeMode(a) => optimize(a, cfg),
        Command::FockN(a) => fock_n(a, cfg),
        Command::WickCheck(a) => wick_check(a, cfg),
    }
}

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

fn run_cli(cli: Cli) -> Result<i32, CliError> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let format = pick(cli.format, cfg.get("format")?, Format::Csv);
    let output: Option<PathBuf> = cli.output.clone().or(cfg.get::<PathBuf>("output")?);
    let report = match thread_cap()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::invalid(e.to_string()))?
            .install(|| execute(&cli, &cfg))?,
        None => execute(&cli, &cfg)?,
    };
    let text = match format {
        Format::Csv => report.to_csv()?,
        Format::Json => report.to_json(),
    };
    match output.as_deref() {
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::invalid(e.to_string()))?,
        Some(p) if p == Path::new("-") => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::invalid(e.to_string()))?,
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::invalid(format!("cannot write {}: {e}", p.display())))?,
    }
    if report.incomplete {
        eprintln!("warning: some optimisations stopped at the iteration cap; see the `converged` column");
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match run_cli(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_range("0:10:0.1").unwrap().len(), 101);
        assert!(parse_range("1:0:0.1").is_err());
        assert!(parse_range("0:1:0").is_err());
        assert!(parse_range("0:1").is_err());
    }

    #[test]
    fn float_text_round_trips() {
        for v in [0.0, 1.0, 0.25, 9.025548416559286e-75, -3e-7, 1e20, 123.456] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(2e-9), "2e-9");
    }

    #[test]
    fn config_parsing() {
        let cfg = ConfigFile::parse("# sweep\neta_s = 0.8\n\ndt-range=0:2:1 # inline\n").unwrap();
        assert_eq!(cfg.get::<f64>("eta-s").unwrap(), Some(0.8));
        assert_eq!(cfg.get::<String>("dt-range").unwrap().as_deref(), Some("0:2:1"));
        assert!(cfg.check_keys(&["eta-s"]).is_err());
        assert!(ConfigFile::parse("novalue").is_err());
        assert!(cfg.get::<usize>("eta-s").is_err());
    }

    #[test]
    fn invalid_physics_maps_to_exit_two() {
        let e: CliError = OpoParams::scaled(0.6, 1.0, 1.0).unwrap_err().into();
        assert_eq!(e.code, EXIT_INVALID);
        let e: CliError = Error::NoConvergence("x".into()).into();
        assert_eq!(e.code, EXIT_NUMERICAL);
    }
}
