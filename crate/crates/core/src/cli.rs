//! Command-line front end: `analyze`, `design`, `verify`, `simulate`, and
//! `rerun` (replays a run manifest).
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage, 3 infeasible configuration,
//! 4 numerical degeneracy or a failed verification.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::dof_report;
use crate::design::{Diagnostics, Transceiver};
use crate::error::Error;
use crate::exchange::{run_exchange, MessageSet};
use crate::model::{draw_channels, NetworkConfig, StreamAllocation};
use crate::numerics::TolerancePolicy;
use crate::rates::{ergodic_sweep, sub_seed, RateCurve, Scheme};
use crate::reduced::design_reduced;
use crate::sajic::design_full;

pub const SEED_ENV: &str = "XRELAY_SEED";
const DEFAULT_SEED: u64 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

pub const CSV_HEADER: &str = "scheme,M,N,snr_db,mean_sum_rate,std_err,trials";

/// Inclusive antenna range; a single value is `a..a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AntennaRange {
    pub lo: usize,
    pub hi: usize,
}

impl AntennaRange {
    pub fn values(self) -> impl Iterator<Item = usize> {
        self.lo..=self.hi
    }

    fn single(self, flag: &str) -> Result<usize, CliError> {
        if self.lo == self.hi {
            Ok(self.lo)
        } else {
            Err(CliError::Usage(format!(
                "{flag} takes a single value for this subcommand"
            )))
        }
    }
}

impl FromStr for AntennaRange {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("'{t}' is not a non-negative integer"))
        };
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        if lo == 0 {
            return Err("antenna counts start at 1".into());
        }
        if lo > hi {
            return Err(format!("empty range {lo}..{hi}"));
        }
        Ok(Self { lo, hi })
    }
}

impl fmt::Display for AntennaRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}..{}", self.lo, self.hi)
        }
    }
}

/// `start:step:stop` in dB, stop inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrGrid {
    text: String,
    pub points: Vec<f64>,
}

impl FromStr for SnrGrid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, step, stop] = parts[..] else {
            return Err("expected start:step:stop".into());
        };
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("'{t}' is not a number"))
        };
        let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
        if step <= 0.0 {
            return Err("step must be positive".into());
        }
        if stop < start {
            return Err("stop is below start".into());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err("grid has too many points".into());
        }
        Ok(Self {
            text: s.to_string(),
            points: (0..count).map(|i| start + step * i as f64).collect(),
        })
    }
}

impl fmt::Display for SnrGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Sajic,
    Reduced,
    Timeshare,
    All,
}

impl SchemeArg {
    fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeArg::Sajic => vec![Scheme::Sajic],
            SchemeArg::Reduced => vec![Scheme::Reduced],
            SchemeArg::Timeshare => vec![Scheme::Timeshare],
            SchemeArg::All => Scheme::ALL.to_vec(),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            SchemeArg::Sajic => "sajic",
            SchemeArg::Reduced => "reduced",
            SchemeArg::Timeshare => "timeshare",
            SchemeArg::All => "all",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "xrelay",
    version,
    about = "Signal alignment for the MIMO two-way X relay channel"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate DOF figures over antenna ranges.
    Analyze(AnalyzeArgs),
    /// Build one transceiver design and report its residuals.
    Design(DesignArgs),
    /// Run noiseless exchanges and check for bit errors.
    Verify(VerifyArgs),
    /// Monte Carlo ergodic sum-rate sweep, written as CSV.
    Simulate(SimulateArgs),
    /// Replay the run recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Source antennas: a value or an inclusive range `a..b`.
    #[arg(long = "M", value_name = "M")]
    pub m: AntennaRange,
    /// Relay antennas: a value or an inclusive range `a..b`.
    #[arg(long = "N", value_name = "N")]
    pub n: AntennaRange,
    /// Output file; a `<out>.manifest.json` is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Numeric {
    /// Master seed. Falls back to $XRELAY_SEED, then 1.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative singular-value threshold for rank decisions.
    #[arg(long = "tol-rank", default_value_t = TolerancePolicy::default().relative_rank_eps)]
    pub tol_rank: f64,
    /// Acceptance threshold for alignment residuals and leakage.
    #[arg(long = "tol-residual", default_value_t = TolerancePolicy::default().residual_eps)]
    pub tol_residual: f64,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "sajic")]
    pub scheme: SchemeArg,
    #[command(flatten)]
    pub numeric: Numeric,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "sajic")]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[command(flatten)]
    pub numeric: Numeric,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "sajic")]
    pub scheme: SchemeArg,
    /// SNR grid in dB as `start:step:stop`.
    #[arg(long, default_value = "0:5:60")]
    pub snr: SnrGrid,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[command(flatten)]
    pub numeric: Numeric,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    /// Write to this path instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("FAIL: {0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Model(e) if e.is_infeasible() => EXIT_INFEASIBLE,
            CliError::Model(Error::InvalidConfig(_)) => EXIT_USAGE,
            CliError::Model(_) | CliError::Failed(_) => EXIT_DEGENERATE,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    fn hint(&self) -> Option<&'static str> {
        match self {
            CliError::Model(Error::InfeasibleRegime { .. }) => {
                Some("alignment needs N < 2M; the timeshare baseline works for any N")
            }
            CliError::Model(Error::ReducedInfeasible { .. }) => {
                Some("the reduced scheme needs 3N <= 4M; use --scheme sajic instead")
            }
            _ => None,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

/// Provenance written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Every flag with its effective value, defaults included.
    pub flags: BTreeMap<String, String>,
    /// Arguments that reproduce the output when passed back to the binary.
    pub argv: Vec<String>,
    pub master_seed: u64,
    /// `flag`, `env` or `default`.
    pub seed_source: String,
    pub version: String,
    /// Seconds since the Unix epoch when the run started.
    pub started_at: u64,
    pub output: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<CurveSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub scheme: String,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub fitted_slope_per_3db: Option<f64>,
    pub redraws: usize,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

struct Run {
    subcommand: &'static str,
    flags: Vec<(String, String)>,
    seed: Option<(u64, &'static str)>,
    started_at: u64,
}

impl Run {
    fn new(subcommand: &'static str, common: &Common) -> Self {
        let started_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut run = Self {
            subcommand,
            flags: Vec::new(),
            seed: None,
            started_at,
        };
        run.flag("M", common.m);
        run.flag("N", common.n);
        run
    }

    fn flag(&mut self, name: &str, value: impl ToString) {
        self.flags.push((name.to_string(), value.to_string()));
    }

    fn numeric(
        &mut self,
        numeric: &Numeric,
        env_seed: Option<&str>,
    ) -> Result<(u64, TolerancePolicy), CliError> {
        let (seed, source) = match (numeric.seed, env_seed) {
            (Some(s), _) => (s, "flag"),
            (None, Some(v)) => {
                let s = v.trim().parse::<u64>().map_err(|_| {
                    CliError::Usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))
                })?;
                (s, "env")
            }
            (None, None) => (DEFAULT_SEED, "default"),
        };
        let tol = TolerancePolicy::new(numeric.tol_rank, numeric.tol_residual)
            .ok_or_else(|| CliError::Usage("tolerances must be positive and below 1".into()))?;
        self.flag("seed", seed);
        self.flag("tol-rank", numeric.tol_rank);
        self.flag("tol-residual", numeric.tol_residual);
        self.seed = Some((seed, source));
        Ok((seed, tol))
    }

    fn write(&self, out: &Path, body: &[u8], curves: Vec<CurveSummary>) -> Result<(), CliError> {
        fs::write(out, body).map_err(io_err(format!("writing {}", out.display())))?;
        let mut argv = vec![self.subcommand.to_string()];
        for (k, v) in &self.flags {
            argv.push(format!("--{k}"));
            argv.push(v.clone());
        }
        argv.push("--out".into());
        argv.push(out.display().to_string());
        let (master_seed, seed_source) = self.seed.unwrap_or((0, "none"));
        let manifest = RunManifest {
            subcommand: self.subcommand.into(),
            flags: self
                .flags
                .iter()
                .cloned()
                .chain([("out".into(), out.display().to_string())])
                .collect(),
            argv,
            master_seed,
            seed_source: seed_source.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            started_at: self.started_at,
            output: out.display().to_string(),
            curves,
        };
        let path = manifest_path(out);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(io_err(format!("writing {}", path.display())))
    }
}

/// Parses `args` (including the program name) and runs the command.
/// `env_seed` is the value of `XRELAY_SEED`, if set.
pub fn run<I, T>(
    args: I,
    env_seed: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command, env_seed, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if matches!(e, CliError::Failed(_)) {
                let _ = writeln!(stdout, "{e}");
            }
            let _ = writeln!(stderr, "error: {e}");
            if let Some(h) = e.hint() {
                let _ = writeln!(stderr, "hint: {h}");
            }
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, env_seed: Option<&str>, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Analyze(a) => cmd_analyze(&a, out),
        Command::Design(a) => cmd_design(&a, env_seed, out),
        Command::Verify(a) => cmd_verify(&a, env_seed, out),
        Command::Simulate(a) => cmd_simulate(&a, env_seed, out),
        Command::Rerun(a) => cmd_rerun(&a, env_seed, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(io_err("writing output"))
}

pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let run = Run::new("analyze", &args.common);
    let mut table = format!(
        "{:>4} {:>4} {:>11} {:>9} {:>12} {:>13}\n",
        "M", "N", "upper_bound", "sajic_dof", "reduced_full", "timeshare_dof"
    );
    let mut csv = String::from("M,N,upper_bound,sajic_dof,reduced_full,timeshare_dof\n");
    for m in args.common.m.values() {
        for n in args.common.n.values() {
            let r = dof_report(m, n);
            let full = if r.reduced_full { "yes" } else { "no" };
            table += &format!(
                "{m:>4} {n:>4} {:>11} {:>9} {full:>12} {:>13}\n",
                r.upper_bound, r.sajic_dof, r.time_share_dof
            );
            csv += &format!(
                "{m},{n},{},{},{full},{}\n",
                r.upper_bound, r.sajic_dof, r.time_share_dof
            );
        }
    }
    emit(out, &table)?;
    if let Some(path) = &args.common.out {
        run.write(path, csv.as_bytes(), Vec::new())?;
    }
    Ok(())
}

fn design_scheme(scheme: SchemeArg) -> Result<Scheme, CliError> {
    match scheme {
        SchemeArg::Sajic => Ok(Scheme::Sajic),
        SchemeArg::Reduced => Ok(Scheme::Reduced),
        _ => Err(CliError::Usage(
            "--scheme must be sajic or reduced here".into(),
        )),
    }
}

fn build(
    scheme: Scheme,
    cfg: &NetworkConfig,
    seed: u64,
    tol: &TolerancePolicy,
) -> Result<Box<dyn Transceiver>, Error> {
    let ch = draw_channels(cfg, seed);
    Ok(match scheme {
        Scheme::Reduced => Box::new(design_reduced(&ch, cfg, tol)?),
        _ => Box::new(design_full(&ch, cfg, tol)?),
    })
}

#[derive(Serialize)]
struct DesignReport<'a> {
    scheme: Scheme,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    seed: u64,
    allocation: &'a StreamAllocation,
    diagnostics: &'a Diagnostics,
    pass: bool,
}

fn format_diagnostics(d: &Diagnostics) -> String {
    let mut s = String::new();
    s += &format!("mac_alignment_residual  {:.3e}\n", d.mac_residual);
    if let Some(r) = d.bc_alignment_residual {
        s += &format!("bc_alignment_residual   {r:.3e}\n");
    }
    s += &format!("max_leakage             {:.3e}\n", d.leakage);
    s += &format!(
        "rank(G_r)               {}/{}\n",
        d.mac_rank, d.total_streams
    );
    s += &format!(
        "rank(U_r)               {}/{}\n",
        d.beamformer_rank, d.total_streams
    );
    for i in 0..4 {
        s += &format!(
            "node {} desired rank     {}/{}   tx power {:.6}\n",
            i + 1,
            d.desired_rank[i],
            d.desired_expected[i],
            d.node_power[i]
        );
    }
    s += &format!(
        "relay tx power          {:.6} (budget {:.6})\n",
        d.relay_power, d.power_budget
    );
    s
}

pub fn cmd_design(
    args: &DesignArgs,
    env_seed: Option<&str>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut run = Run::new("design", &args.common);
    let (m, n) = (args.common.m.single("--M")?, args.common.n.single("--N")?);
    let scheme = design_scheme(args.scheme)?;
    run.flag("scheme", args.scheme.as_str());
    let (seed, tol) = run.numeric(&args.numeric, env_seed)?;
    let cfg = NetworkConfig::antennas(m, n)?;
    scheme.check_feasible(m, n)?;

    let design = build(scheme, &cfg, seed, &tol)?;
    let link = design.link();
    let diag = design.diagnostics(&tol);
    let failures = diag.failures(&tol);
    let a = link.allocation.per_pair;
    let mut text = format!("scheme {scheme}  M={m} N={n}  seed={seed}\n");
    text += &format!(
        "streams d13={} d14={} d23={} d24={}  total DOF {}\n",
        a[0],
        a[1],
        a[2],
        a[3],
        2 * link.total_streams()
    );
    text += &format_diagnostics(&diag);
    emit(out, &text)?;

    if let Some(path) = &args.common.out {
        let report = DesignReport {
            scheme,
            m,
            n,
            seed,
            allocation: &link.allocation,
            diagnostics: &diag,
            pass: failures.is_empty(),
        };
        let mut body = serde_json::to_string_pretty(&report).expect("report serializes");
        body.push('\n');
        run.write(path, body.as_bytes(), Vec::new())?;
    }
    if failures.is_empty() {
        emit(out, "PASS\n")
    } else {
        Err(CliError::Failed(failures.join("; ")))
    }
}

#[derive(Serialize)]
struct VerifyReport {
    scheme: Scheme,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    seed: u64,
    trials: usize,
    failed_trials: usize,
    bit_errors: usize,
    max_leakage: f64,
    max_mac_residual: f64,
    pass: bool,
}

pub fn cmd_verify(
    args: &VerifyArgs,
    env_seed: Option<&str>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut run = Run::new("verify", &args.common);
    let (m, n) = (args.common.m.single("--M")?, args.common.n.single("--N")?);
    let scheme = design_scheme(args.scheme)?;
    run.flag("scheme", args.scheme.as_str());
    run.flag("trials", args.trials);
    let (seed, tol) = run.numeric(&args.numeric, env_seed)?;
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let cfg = NetworkConfig::antennas(m, n)?;
    scheme.check_feasible(m, n)?;

    let mut failed_trials = 0;
    let mut bit_errors = 0;
    let mut max_leakage: f64 = 0.0;
    let mut max_mac_residual: f64 = 0.0;
    let mut first_failure = None;
    for t in 0..args.trials as u64 {
        let outcome = build(scheme, &cfg, sub_seed(seed, 0, t, 0), &tol).and_then(|d| {
            let diag = d.diagnostics(&tol);
            max_leakage = max_leakage.max(diag.leakage);
            max_mac_residual = max_mac_residual.max(diag.mac_residual);
            let msgs = MessageSet::random(&d.link().allocation, sub_seed(seed, 1, t, 0));
            run_exchange(d.as_ref(), &msgs, 0.0, 0, &tol)
        });
        match outcome {
            Ok(rep) if rep.message_errors == 0 && rep.relay_errors == 0 => {}
            Ok(rep) => {
                failed_trials += 1;
                bit_errors += rep.message_errors;
                first_failure
                    .get_or_insert(format!("trial {t}: {} bit errors", rep.message_errors));
            }
            Err(e) if e.is_infeasible() => return Err(e.into()),
            Err(e) => {
                failed_trials += 1;
                first_failure.get_or_insert(format!("trial {t}: {e}"));
            }
        }
    }
    let pass = failed_trials == 0;
    emit(
        out,
        &format!(
            "scheme {scheme}  M={m} N={n}  seed={seed}  trials={}\n\
             failed_trials {failed_trials}  bit_errors {bit_errors}\n\
             max_mac_alignment_residual {max_mac_residual:.3e}  max_leakage {max_leakage:.3e}\n",
            args.trials
        ),
    )?;
    if let Some(path) = &args.common.out {
        let report = VerifyReport {
            scheme,
            m,
            n,
            seed,
            trials: args.trials,
            failed_trials,
            bit_errors,
            max_leakage,
            max_mac_residual,
            pass,
        };
        let mut body = serde_json::to_string_pretty(&report).expect("report serializes");
        body.push('\n');
        run.write(path, body.as_bytes(), Vec::new())?;
    }
    if pass {
        emit(out, "PASS\n")
    } else {
        Err(CliError::Failed(first_failure.unwrap_or_default()))
    }
}

/// Renders curves in the CSV schema consumed by the plotting script.
pub fn render_csv(curves: &[RateCurve]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for c in curves {
        for p in &c.points {
            s += &format!(
                "{},{},{},{:.6},{:.6},{:.6},{}\n",
                c.scheme,
                c.source_antennas,
                c.relay_antennas,
                p.snr_db,
                p.mean_sum_rate,
                p.std_err,
                p.trials
            );
        }
    }
    s
}

pub fn cmd_simulate(
    args: &SimulateArgs,
    env_seed: Option<&str>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut run = Run::new("simulate", &args.common);
    run.flag("scheme", args.scheme.as_str());
    run.flag("snr", &args.snr);
    run.flag("trials", args.trials);
    let (seed, tol) = run.numeric(&args.numeric, env_seed)?;
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }

    let mut jobs = Vec::new();
    for scheme in args.scheme.schemes() {
        for m in args.common.m.values() {
            for n in args.common.n.values() {
                match scheme.check_feasible(m, n) {
                    Ok(()) => jobs.push((scheme, m, n)),
                    // `all` keeps whatever applies to each configuration.
                    Err(_) if args.scheme == SchemeArg::All => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    if jobs.is_empty() {
        return Err(CliError::Usage(
            "no scheme applies to the requested configurations".into(),
        ));
    }

    let mut curves = Vec::with_capacity(jobs.len());
    for (scheme, m, n) in jobs {
        let cfg = NetworkConfig::antennas(m, n)?;
        curves.push(ergodic_sweep(
            &cfg,
            scheme,
            &args.snr.points,
            args.trials,
            seed,
            &tol,
        )?);
    }
    let summaries: Vec<CurveSummary> = curves
        .iter()
        .map(|c| CurveSummary {
            scheme: c.scheme.to_string(),
            m: c.source_antennas,
            n: c.relay_antennas,
            fitted_slope_per_3db: c.fitted_slope_per_3db,
            redraws: c.redraws,
        })
        .collect();
    let csv = render_csv(&curves);
    match &args.common.out {
        Some(path) => {
            run.write(path, csv.as_bytes(), summaries.clone())?;
            for s in &summaries {
                let slope = s
                    .fitted_slope_per_3db
                    .map_or("n/a".to_string(), |v| format!("{v:.3}"));
                emit(
                    out,
                    &format!(
                        "{} M={} N={}  slope {slope} bits/s/Hz per 3 dB  redraws {}\n",
                        s.scheme, s.m, s.n, s.redraws
                    ),
                )?;
            }
            emit(out, &format!("wrote {}\n", path.display()))
        }
        None => emit(out, &csv),
    }
}

pub fn cmd_rerun(
    args: &RerunArgs,
    env_seed: Option<&str>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.manifest)
        .map_err(io_err(format!("reading {}", args.manifest.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!(
            "{} is not a run manifest: {e}",
            args.manifest.display()
        ))
    })?;
    let mut argv = manifest.argv.clone();
    if let Some(path) = &args.out {
        match argv.iter().position(|a| a == "--out") {
            Some(i) if i + 1 < argv.len() => argv[i + 1] = path.display().to_string(),
            _ => {
                argv.push("--out".into());
                argv.push(path.display().to_string());
            }
        }
    }
    let cli = Cli::try_parse_from(std::iter::once("xrelay".to_string()).chain(argv))
        .map_err(|e| CliError::Usage(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(CliError::Usage(
            "a manifest cannot point at another rerun".into(),
        ));
    }
    dispatch(cli.command, env_seed, out)
}
