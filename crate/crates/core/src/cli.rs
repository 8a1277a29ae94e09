//! Command-line front end. Every subcommand produces a table written as CSV (one `#`
//! line with the full configuration, then a column header) or as a JSON array of row
//! objects. Exit codes: 0 success, 2 usage error, 3 numeric or accuracy failure.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::asymptotics::{counting_asy, f_asy, h_asy, variance_log_coeff};
use crate::dynamics::{identity_report, integrate, seed_large_s, IntegrateOptions};
use crate::error::Error;
use crate::fredholm::{build_grid, counting_moments, log_det, log_det_single, resolvent_diag_at_s};
use crate::kernel::{cancellation_digits, kernel_double_contour, ModelParams, PearceyModel};
use crate::verify::{criterion_name, run_criterion, CRITERIA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Largest |F_m − F_{m/2}| accepted by `det`.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-9;
/// Largest relative difference to the double-contour oracle accepted by `kernel`.
pub const KERNEL_TOLERANCE: f64 = 1e-6;
/// Oracle column is filled only when both arguments are at most this.
pub const ORACLE_RANGE: f64 = 50.0;
/// Decimal digits of cancellation tolerated in double precision.
pub const MAX_CANCELLATION_DIGITS: f64 = 9.0;

#[derive(Debug, Parser)]
#[command(name = "pearcey-gap", version, about = "Gap probabilities and dynamics of the hard-edge Pearcey process")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// F(s) = ln det(I − γK) against its large-s expansion.
    Det(CommonArgs),
    /// Kernel values on an (x, y) grid with the double-contour oracle.
    Kernel(CommonArgs),
    /// Mean and variance of the number of points in (0, s).
    Counting(CommonArgs),
    /// Hamiltonian trajectory seeded at large s, compared with the Fredholm route.
    Ode(CommonArgs),
    /// Run the acceptance suite.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Run only these criteria (repeatable).
        #[arg(long = "criterion", value_name = "ID")]
        criteria: Vec<u8>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Linear,
    Log,
    /// Uniform draws from [start, stop], sorted; reproducible through --rng-seed.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, default_value_t = 20.0)]
    pub s_start: f64,
    #[arg(long, default_value_t = 60.0)]
    pub s_stop: f64,
    #[arg(long, default_value_t = 5)]
    pub s_count: usize,
    #[arg(long, value_enum, default_value_t = Spacing::Linear)]
    pub s_spacing: Spacing,
    /// Thinning parameter; defaults to 0.5 (1 for `kernel`, fixed at 1 for `counting`).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 320)]
    pub grid_m: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e4)]
    pub seed_s0: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Allow kernel assembly beyond the double-precision cancellation guard.
    #[arg(long)]
    pub extended_precision: bool,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
}

/// Validated configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub s_start: f64,
    pub s_stop: f64,
    pub s_count: usize,
    pub s_spacing: Spacing,
    pub gamma: f64,
    pub params: ModelParams,
    pub grid_m: usize,
    pub tol: f64,
    pub seed_s0: f64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub extended_precision: bool,
    pub rng_seed: u64,
    pub criteria: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(m) | Error::Domain(m) => CliError::Usage(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    pub fn from_command(cmd: &Command) -> Result<Self, CliError> {
        let (name, c, criteria) = match cmd {
            Command::Det(c) => ("det", c, vec![]),
            Command::Kernel(c) => ("kernel", c, vec![]),
            Command::Counting(c) => ("counting", c, vec![]),
            Command::Ode(c) => ("ode", c, vec![]),
            Command::Verify { common, criteria } => ("verify", common, criteria.clone()),
        };
        let gamma = match (name, c.gamma) {
            ("counting", Some(g)) if g != 1.0 => return Err(usage("counting runs at gamma = 1")),
            ("counting", _) | ("kernel", None) => 1.0,
            (_, Some(g)) => g,
            (_, None) => 0.5,
        };
        let cfg = RunConfig {
            subcommand: name,
            s_start: c.s_start,
            s_stop: c.s_stop,
            s_count: c.s_count,
            s_spacing: c.s_spacing,
            gamma,
            params: ModelParams::new(c.alpha, c.rho).map_err(|e| usage(e.to_string()))?,
            grid_m: c.grid_m,
            tol: c.tol,
            seed_s0: c.seed_s0,
            format: c.format,
            out: c.out.clone(),
            extended_precision: c.extended_precision,
            rng_seed: c.rng_seed,
            criteria,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.s_start > 0.0 && self.s_start.is_finite()) {
            return Err(usage(format!("--s-start must be positive, got {}", self.s_start)));
        }
        if !(self.s_stop >= self.s_start && self.s_stop.is_finite()) {
            return Err(usage("--s-stop must be finite and at least --s-start"));
        }
        if self.s_count == 0 && self.subcommand != "ode" {
            return Err(usage("--s-count must be at least 1"));
        }
        if self.grid_m < 8 {
            return Err(usage("--grid-m must be at least 8"));
        }
        if !(1e-12..=1e-6).contains(&self.tol) {
            return Err(usage("--tol must lie in [1e-12, 1e-6]"));
        }
        let g = self.gamma;
        match self.subcommand {
            "det" if !(0.0..1.0).contains(&g) => return Err(usage("det needs gamma in [0, 1)")),
            "kernel" if !(g > 0.0 && g <= 1.0) => return Err(usage("kernel needs gamma in (0, 1]")),
            "ode" if !(g > 0.0 && g < 1.0) => return Err(usage("ode needs gamma in (0, 1)")),
            _ => {}
        }
        if self.subcommand == "ode" {
            if self.seed_s0 < 1e3 || !self.seed_s0.is_finite() {
                return Err(usage("--seed-s0 must be at least 1000"));
            }
            if self.s_stop > self.seed_s0 {
                return Err(usage("ode needs --s-stop <= --seed-s0"));
            }
        }
        for &id in &self.criteria {
            if criterion_name(id).is_none() {
                return Err(usage(format!("unknown criterion id {id}")));
            }
        }
        if matches!(self.subcommand, "det" | "kernel" | "counting") && !self.extended_precision {
            self.check_precision(self.s_stop)?;
        }
        Ok(())
    }

    fn check_precision(&self, s: f64) -> Result<(), CliError> {
        let digits = cancellation_digits(s);
        if digits > MAX_CANCELLATION_DIGITS {
            return Err(usage(format!(
                "s = {s} costs about {digits:.1} digits of cancellation (limit {MAX_CANCELLATION_DIGITS}); \
                 pass --extended-precision to run anyway"
            )));
        }
        Ok(())
    }

    fn fredholm_allowed(&self, s: f64) -> bool {
        self.extended_precision || cancellation_digits(s) <= MAX_CANCELLATION_DIGITS
    }

    /// Abscissae of the s-range, in increasing order.
    pub fn s_values(&self) -> Vec<f64> {
        let (a, b, n) = (self.s_start, self.s_stop, self.s_count);
        if n == 0 {
            return vec![];
        }
        if n == 1 {
            return vec![a];
        }
        let t = |k: usize| k as f64 / (n - 1) as f64;
        match self.s_spacing {
            Spacing::Linear => (0..n).map(|k| a + (b - a) * t(k)).collect(),
            Spacing::Log => (0..n).map(|k| a * (b / a).powf(t(k))).collect(),
            Spacing::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
                let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(a..=b)).collect();
                v.sort_by(f64::total_cmp);
                v
            }
        }
    }

    /// The one-line `#` header: version and every configuration field.
    pub fn header(&self) -> String {
        format!(
            "# pearcey-gap {} command={} s_start={} s_stop={} s_count={} s_spacing={:?} gamma={} rho={} \
             alpha={} grid_m={} tol={:e} seed_s0={} rng_seed={} extended_precision={} arithmetic=f64",
            env!("CARGO_PKG_VERSION"),
            self.subcommand,
            self.s_start,
            self.s_stop,
            self.s_count,
            self.s_spacing,
            self.gamma,
            self.params.rho,
            self.params.alpha,
            self.grid_m,
            self.tol,
            self.seed_s0,
            self.rng_seed,
            self.extended_precision
        )
        .to_lowercase()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => "NaN".into(),
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // Same 17 significant digits as the CSV; NaN becomes null.
            Cell::Num(v) => format!("{v:.16e}").parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
        }
    }
}

/// Tabular output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn to_csv(&self, header: &str) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(vec![]);
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::csv)).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
        format!("{header}\n{body}")
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: Map<String, Value> =
                    self.columns.iter().zip(r).map(|(c, v)| (c.to_string(), v.json())).collect();
                Value::Object(obj)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&Value::Array(rows)).expect("serializable");
        s.push('\n');
        s
    }
}

/// Result of a run: the table, whether all checks passed, and notes for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub table: Table,
    pub ok: bool,
    pub notes: Vec<String>,
}

fn param_cells(cfg: &RunConfig) -> Vec<Cell> {
    vec![
        Cell::Num(cfg.gamma),
        Cell::Num(cfg.params.rho),
        Cell::Num(cfg.params.alpha),
        Cell::Int(cfg.grid_m as i64),
    ]
}

const PARAM_COLUMNS: [&str; 4] = ["gamma", "rho", "alpha", "grid_m"];

fn columns(head: &[&'static str]) -> Vec<&'static str> {
    head.iter().chain(PARAM_COLUMNS.iter()).copied().collect()
}

pub fn cmd_det(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let model = PearceyModel::new(cfg.params)?;
    let s = cfg.s_values();
    let rows: Vec<Result<(f64, [f64; 5]), (f64, Error)>> = s
        .par_iter()
        .map(|&s| {
            let run = || -> crate::Result<[f64; 5]> {
                let d = log_det(&model, &build_grid(s, cfg.grid_m)?, cfg.gamma)?;
                let fa = f_asy(s, cfg.gamma, &cfg.params)?.total;
                let res = (d.f - fa).abs();
                Ok([d.f, fa, res, res * s.cbrt(), d.convergence_estimate])
            };
            run().map(|r| (s, r)).map_err(|e| (s, e))
        })
        .collect();
    let mut table = Table {
        columns: columns(&["s", "f_num", "f_asy", "residual", "residual_s13", "convergence_estimate"]),
        rows: vec![],
    };
    let mut ok = true;
    let mut notes = vec![];
    for r in rows {
        let (s, v) = r.map_err(|(s, e)| CliError::Numeric(format!("row s = {s}: {e}")))?;
        if !(v[4] <= CONVERGENCE_TOLERANCE) {
            ok = false;
            notes.push(format!("s = {s}: convergence estimate {:.2e} exceeds {CONVERGENCE_TOLERANCE:e}", v[4]));
        }
        let mut row = vec![Cell::Num(s)];
        row.extend(v.iter().map(|&x| Cell::Num(x)));
        row.extend(param_cells(cfg));
        table.rows.push(row);
    }
    Ok(RunOutput { table, ok, notes })
}

pub fn cmd_kernel(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let model = PearceyModel::new(cfg.params)?;
    let pts = cfg.s_values();
    let pairs: Vec<(f64, f64)> = pts.iter().flat_map(|&x| pts.iter().map(move |&y| (x, y))).collect();
    let vals: Vec<Result<[f64; 5], CliError>> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let fail = |e: Error| CliError::Numeric(format!("row ({x}, {y}): {e}"));
            let k = model.kernel(x, y, cfg.gamma).map_err(fail)?;
            if x <= ORACLE_RANGE && y <= ORACLE_RANGE {
                let o = cfg.gamma * kernel_double_contour(x, y, &cfg.params).map_err(fail)?;
                Ok([x, y, k, o, (k - o).abs() / o.abs()])
            } else {
                Ok([x, y, k, f64::NAN, f64::NAN])
            }
        })
        .collect();
    let mut table = Table { columns: columns(&["x", "y", "k", "oracle_k", "diff"]), rows: vec![] };
    let mut ok = true;
    let mut notes = vec![];
    for v in vals {
        let v = v?;
        if v[4] > KERNEL_TOLERANCE {
            ok = false;
            notes.push(format!("({}, {}): relative difference {:.2e} exceeds {KERNEL_TOLERANCE:e}", v[0], v[1], v[4]));
        }
        let mut row: Vec<Cell> = v.iter().map(|&x| Cell::Num(x)).collect();
        row.extend(param_cells(cfg));
        table.rows.push(row);
    }
    Ok(RunOutput { table, ok, notes })
}

pub fn cmd_counting(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let model = PearceyModel::new(cfg.params)?;
    let rows: Vec<Result<[f64; 6], CliError>> = cfg
        .s_values()
        .par_iter()
        .map(|&s| {
            let (mean, var) = counting_moments(&model, &build_grid(s, cfg.grid_m)?)
                .map_err(|e| CliError::Numeric(format!("row s = {s}: {e}")))?;
            let a = counting_asy(s, &cfg.params);
            // the part of the variance beyond its logarithmic growth
            let offset = var - variance_log_coeff() * s.ln();
            Ok([s, mean, a.mean, var, a.variance, offset])
        })
        .collect();
    let mut table = Table {
        columns: columns(&["s", "mean_num", "mean_asy", "var_num", "var_asy", "var_offset"]),
        rows: vec![],
    };
    for v in rows {
        let mut row: Vec<Cell> = v?.iter().map(|&x| Cell::Num(x)).collect();
        row.extend(param_cells(cfg));
        table.rows.push(row);
    }
    Ok(RunOutput { table, ok: true, notes: vec![] })
}

pub fn cmd_ode(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let mut table = Table {
        columns: columns(&[
            "s", "h_traj", "minus_r", "h_asy", "int_h", "delta_f", "drift_max", "hamilton_residual", "tol", "seed_s0",
        ]),
        rows: vec![],
    };
    let s_points = cfg.s_values();
    if s_points.is_empty() || cfg.s_start >= cfg.seed_s0 {
        return Ok(RunOutput { table, ok: true, notes: vec!["empty range: no trajectory".into()] });
    }
    let p = cfg.params;
    let seed = seed_large_s(cfg.seed_s0, cfg.gamma, &p)?;
    let opts = IntegrateOptions { tolerance: cfg.tol, ..Default::default() };
    let traj = integrate(&seed, cfg.gamma, &p, cfg.s_start, &s_points, &opts)?;
    let report = identity_report(&traj, None)?;
    let drift = traj.drift();
    let seed_res = traj.seed_residuals.as_array();
    let mut ok = true;
    let mut notes = vec![format!(
        "drift {:.2e} {:.2e} {:.2e} {:.2e}; seed residuals {:.2e} {:.2e} {:.2e} {:.2e}; max Hamilton residual {:.2e}",
        drift[0],
        drift[1],
        drift[2],
        drift[3],
        seed_res[0].norm(),
        seed_res[1].norm(),
        seed_res[2].norm(),
        seed_res[3].norm(),
        report.max_hamilton
    )];
    for k in 0..4 {
        let bound = 100.0 * cfg.tol + seed_res[k].norm();
        if drift[k] > bound {
            ok = false;
            notes.push(format!("drift of combination {k} is {:.2e}, bound {bound:.2e}", drift[k]));
        }
    }
    let model = PearceyModel::new(p)?;
    let f_ref = if cfg.fredholm_allowed(cfg.s_stop) {
        log_det_single(&model, &build_grid(cfg.s_stop, cfg.grid_m)?, cfg.gamma)?.f
    } else {
        f64::NAN
    };
    let r0 = traj.seed_residuals.as_array();
    let rows: Vec<Result<Vec<Cell>, CliError>> = s_points
        .par_iter()
        .map(|&s| {
            let idx = traj
                .samples
                .iter()
                .position(|x| (x.state.s - s).abs() <= 1e-12 * s.max(1.0))
                .ok_or_else(|| CliError::Numeric(format!("trajectory has no sample at s = {s}")))?;
            let smp = &traj.samples[idx];
            let (minus_r, delta_f) = if cfg.fredholm_allowed(s) {
                let g = build_grid(s, cfg.grid_m)?;
                let r = resolvent_diag_at_s(&model, &g, cfg.gamma)?;
                let f = log_det_single(&model, &g, cfg.gamma)?.f;
                (-r, f_ref - f)
            } else {
                (f64::NAN, f64::NAN)
            };
            let h_a = if s >= 8.0 { h_asy(s, cfg.gamma, &p)? } else { f64::NAN };
            let int_h = traj.integral_between(s, cfg.s_stop).unwrap_or(f64::NAN);
            let r = smp.state.residuals(&p).as_array();
            let dmax = (0..4).map(|k| (r[k] - r0[k]).norm()).fold(0.0, f64::max);
            let mut row: Vec<Cell> = [s, smp.h.re, minus_r, h_a, int_h, delta_f, dmax, report.rows[idx].hamilton]
                .iter()
                .map(|&x| Cell::Num(x))
                .collect();
            row.push(Cell::Num(cfg.tol));
            row.push(Cell::Num(cfg.seed_s0));
            row.extend(param_cells(cfg));
            Ok(row)
        })
        .collect();
    for r in rows {
        table.rows.push(r?);
    }
    Ok(RunOutput { table, ok, notes })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let ids: Vec<u8> = if cfg.criteria.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { cfg.criteria.clone() };
    let mut table = Table { columns: vec!["criterion", "name", "passed", "detail"], rows: vec![] };
    let mut ok = true;
    let mut notes = vec![];
    for id in ids {
        let o = run_criterion(id)?;
        ok &= o.passed;
        notes.push(o.line());
        table.rows.push(vec![Cell::Int(id as i64), Cell::Text(o.name.into()), Cell::Bool(o.passed), Cell::Text(o.detail)]);
    }
    Ok(RunOutput { table, ok, notes })
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    match cfg.subcommand {
        "det" => cmd_det(cfg),
        "kernel" => cmd_kernel(cfg),
        "counting" => cmd_counting(cfg),
        "ode" => cmd_ode(cfg),
        _ => cmd_verify(cfg),
    }
}

pub fn render(cfg: &RunConfig, out: &RunOutput) -> String {
    match cfg.format {
        Format::Csv => out.table.to_csv(&cfg.header()),
        Format::Json => out.table.to_json(),
    }
}

/// Parse arguments, run, write the output, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = RunConfig::from_command(&cli.command).and_then(|cfg| {
        let out = execute(&cfg)?;
        let text = render(&cfg, &out);
        match &cfg.out {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?,
            None => print!("{text}"),
        }
        Ok(out)
    });
    match result {
        Ok(out) => {
            let mut msg = String::new();
            for n in &out.notes {
                let _ = writeln!(msg, "{n}");
            }
            eprint!("{msg}");
            if out.ok {
                EXIT_OK
            } else {
                EXIT_NUMERIC
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str]) -> Result<RunConfig, CliError> {
        let cli = Cli::try_parse_from(args).map_err(|e| usage(e.to_string()))?;
        RunConfig::from_command(&cli.command)
    }

    #[test]
    fn spacing_and_seeded_points() {
        let c = cfg(&["p", "det", "--s-start", "1", "--s-stop", "100", "--s-count", "3", "--s-spacing", "log"]).unwrap();
        let v = c.s_values();
        assert!((v[1] - 10.0).abs() < 1e-12 && (v[2] - 100.0).abs() < 1e-12);
        let r = |seed: &str| {
            cfg(&["p", "det", "--s-spacing", "random", "--s-count", "4", "--rng-seed", seed]).unwrap().s_values()
        };
        assert_eq!(r("7"), r("7"));
        assert_ne!(r("7"), r("8"));
        assert!(r("7").windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn precision_guard_and_usage_errors() {
        assert!(cancellation_digits(140.0) < MAX_CANCELLATION_DIGITS);
        assert!(cancellation_digits(150.0) > MAX_CANCELLATION_DIGITS);
        assert!(matches!(cfg(&["p", "det", "--s-stop", "200"]), Err(CliError::Usage(_))));
        assert!(cfg(&["p", "det", "--s-stop", "200", "--extended-precision"]).is_ok());
        assert!(matches!(cfg(&["p", "counting", "--gamma", "0.5"]), Err(CliError::Usage(_))));
        assert!(matches!(cfg(&["p", "verify", "--criterion", "11"]), Err(CliError::Usage(_))));
        assert!(matches!(cfg(&["p", "det", "--alpha", "-2"]), Err(CliError::Usage(_))));
        assert!(matches!(cfg(&["p", "ode", "--seed-s0", "500"]), Err(CliError::Usage(_))));
    }

    #[test]
    fn csv_and_json_carry_the_same_numbers() {
        let t = Table {
            columns: vec!["a", "b", "c"],
            rows: vec![vec![Cell::Num(1.0 / 3.0), Cell::Num(f64::NAN), Cell::Text("x, y".into())]],
        };
        let csv = t.to_csv("# h");
        let line = csv.lines().nth(2).unwrap();
        assert!(line.starts_with("3.3333333333333331e-1,NaN,\"x, y\""));
        let json: Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(json[0]["a"].as_f64().unwrap(), "3.3333333333333331e-1".parse::<f64>().unwrap());
        assert!(json[0]["b"].is_null());
    }
}
