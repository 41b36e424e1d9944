//! Command-line front end: reads a scenario document, runs the benchmark
//! experiments and writes bit-stable result files.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use uma_core::bench::{self, BenchOptions, ExperimentResult, Scheme};
use uma_core::scenario::Scenario;
use uma_core::Error as CoreError;

use config::Overrides;
use output::{EmitOptions, Format, ResultSet};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::InfeasibleAperture { .. } => CliError::Infeasible(e.to_string()),
            CoreError::InvalidScenario { field: "fixed_height", reason } => {
                CliError::Config(format!("--fixed-height: {reason}"))
            }
            CoreError::InvalidScenario { .. } | CoreError::Domain(_) | CoreError::Dimension { .. } => {
                CliError::Config(e.to_string())
            }
            CoreError::Contract(_) | CoreError::Solver(_) => CliError::Solver(e.to_string()),
        }
    }
}

/// Inclusive uniform grid `start:stop:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + step * i as f64).collect()
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("expected start:stop:count, got `{s}`"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        let (start, stop) = (num(a)?, num(b)?);
        let count: usize = n.trim().parse().map_err(|e| format!("`{n}`: {e}"))?;
        if !(start.is_finite() && stop.is_finite()) || stop < start {
            return Err(format!("need finite start <= stop, got `{s}`"));
        }
        if count == 0 || (count == 1 && stop != start) {
            return Err(format!("count must be >= 2 unless start == stop, got `{s}`"));
        }
        Ok(Self { start, stop, count })
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "uma",
    version,
    about = "Max-min beamforming for a UAV-mounted movable-antenna array",
    after_help = "Exit codes: 0 success, 1 output error, 2 config or flag error, 3 infeasible scenario, 4 solver failure."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run schemes to convergence; writes traces, final configurations and the scenario.
    Optimize(CommonArgs),
    /// Gain toward the first secondary user over a grid of fixed heights (MA, FPA).
    SweepHeight {
        #[command(flatten)]
        common: CommonArgs,
        /// Height grid start:stop:count, inclusive.
        #[arg(long, default_value = "10:14:81")]
        grid: GridSpec,
    },
    /// Final beam pattern of each scheme over [0, pi].
    Beampattern {
        #[command(flatten)]
        common: CommonArgs,
        /// Write angles in degrees instead of radians.
        #[arg(long)]
        degrees: bool,
        /// Add a gain_db column to the pattern table.
        #[arg(long)]
        db: bool,
        /// Number of angles in the pattern grid.
        #[arg(long, default_value_t = bench::PATTERN_POINTS)]
        points: usize,
    },
    /// Per-iteration max-min gain for every (scheme, eta) pair.
    Trace(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario document (TOML); reference values when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Comma-separated schemes: UMA, UMA-AH, UMA-AW, UMA-AHAW, MA, FPA.
    #[arg(long, value_delimiter = ',')]
    pub scheme: Vec<Scheme>,
    /// Comma-separated interference caps; overrides the scenario value.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eta: Vec<f64>,
    /// Number of antennas; the aperture follows it unless the scenario sets one.
    #[arg(long)]
    pub n: Option<usize>,
    /// Minimum hovering height.
    #[arg(long, allow_negative_numbers = true)]
    pub h0: Option<f64>,
    /// Height for the MA and FPA schemes; defaults to the minimum height.
    #[arg(long, allow_negative_numbers = true)]
    pub fixed_height: Option<f64>,
    /// Outer-iteration cap.
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Seed of the first random restart.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random restarts per run; 1 runs the deterministic initialization only.
    #[arg(long, default_value_t = 1)]
    pub starts: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Output format of the data files.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

struct Prepared {
    scenario: Scenario,
    etas: Vec<f64>,
    schemes: Vec<Scheme>,
    options: BenchOptions,
}

fn prepare(args: &CommonArgs, default_schemes: &[Scheme]) -> Result<Prepared, CliError> {
    let text = match &args.scenario {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("--scenario {}: {e}", p.display())))?,
        None => String::new(),
    };
    let overrides = Overrides {
        interference_cap: None,
        num_antennas: args.n,
        min_height: args.h0,
    };
    let scenario = config::parse_scenario_with(&text, &overrides)?;
    let mut etas = Vec::new();
    for &eta in &args.eta {
        let o = Overrides {
            interference_cap: Some(eta),
            ..overrides
        };
        etas.push(config::parse_scenario_with(&text, &o)?.interference_cap);
    }
    if etas.is_empty() {
        etas.push(scenario.interference_cap);
    }
    if let Some(h) = args.fixed_height {
        if !(h.is_finite() && h >= scenario.min_height) {
            return Err(CliError::Config(format!(
                "--fixed-height {h}: must be at least the minimum height {}",
                scenario.min_height
            )));
        }
    }
    if args.max_iters == 0 {
        return Err(CliError::Config("--max-iters: must be at least 1".into()));
    }
    if args.starts == 0 {
        return Err(CliError::Config("--starts: must be at least 1".into()));
    }
    let mut options = BenchOptions {
        fixed_height: args.fixed_height,
        ..Default::default()
    };
    options.optimize.max_outer_iters = args.max_iters;
    options.optimize.rng_seed = args.seed;
    let schemes = if args.scheme.is_empty() {
        default_schemes.to_vec()
    } else {
        args.scheme.clone()
    };
    Ok(Prepared {
        scenario,
        etas,
        schemes,
        options,
    })
}

fn single_eta(p: &Prepared) -> Result<Scenario, CliError> {
    match p.etas[..] {
        [eta] => Ok(Scenario {
            interference_cap: eta,
            ..p.scenario.clone()
        }),
        _ => Err(CliError::Config("--eta: this command takes a single value".into())),
    }
}

fn runs(p: &Prepared, args: &CommonArgs) -> Result<Vec<ExperimentResult>, CliError> {
    if args.starts == 1 {
        return bench::iteration_trace_experiment(&p.scenario, &p.schemes, &p.etas, &p.options)
            .map_err(CliError::from_core);
    }
    let seeds: Vec<u64> = (0..args.starts).map(|k| args.seed.wrapping_add(k)).collect();
    let mut out = Vec::new();
    for &scheme in &p.schemes {
        for &eta in &p.etas {
            let s = Scenario {
                interference_cap: eta,
                ..p.scenario.clone()
            };
            out.push(bench::multistart(&s, scheme, &p.options, &seeds).map_err(CliError::from_core)?);
        }
    }
    Ok(out)
}

fn report(r: &ExperimentResult) {
    eprintln!(
        "{:<9} eta={} delta={} iterations={} max_pu_gain={} wall_ms={:.1}",
        r.scheme.name(),
        output::sig12(r.eta),
        output::sig12(r.delta),
        r.trace.outer_iterations(),
        output::sig12(r.pu_gains.iter().copied().fold(0.0, f64::max)),
        r.wall_ms
    );
}

/// Runs one parsed command.
pub fn dispatch(command: &Command) -> Result<output::Manifest, CliError> {
    match command {
        Command::Optimize(args) | Command::Trace(args) => {
            let optimize = matches!(command, Command::Optimize(_));
            let defaults: &[Scheme] = if optimize {
                &[Scheme::Uma]
            } else {
                &[Scheme::Uma, Scheme::UmaAh, Scheme::UmaAw, Scheme::UmaAhaw]
            };
            let p = prepare(args, defaults)?;
            let runs = runs(&p, args)?;
            runs.iter().for_each(report);
            let set = ResultSet {
                runs,
                with_configs: optimize,
                scenario: optimize.then(|| p.scenario.clone()),
                ..Default::default()
            };
            let opts = EmitOptions {
                format: args.format,
                ..Default::default()
            };
            output::emit_results(&set, &opts, &args.out)
        }
        Command::SweepHeight { common, grid } => {
            let p = prepare(common, &[Scheme::Ma, Scheme::Fpa])?;
            let s = single_eta(&p)?;
            if grid.start < s.min_height {
                return Err(CliError::Config(format!(
                    "--grid {grid}: heights must be at least the minimum height {}",
                    s.min_height
                )));
            }
            if let Some(bad) = p.schemes.iter().find(|s| !s.fixed_height()) {
                return Err(CliError::Config(format!("--scheme {bad}: height sweeps need MA or FPA")));
            }
            let points = grid.points();
            let mut sweeps = Vec::new();
            for &scheme in &p.schemes {
                let curve = bench::height_sweep(&s, scheme, &points, &p.options).map_err(CliError::from_core)?;
                sweeps.push((scheme, curve));
            }
            let set = ResultSet {
                sweeps,
                ..Default::default()
            };
            let opts = EmitOptions {
                format: common.format,
                ..Default::default()
            };
            output::emit_results(&set, &opts, &common.out)
        }
        Command::Beampattern {
            common,
            degrees,
            db,
            points,
        } => {
            let p = prepare(common, &[Scheme::Uma, Scheme::UmaAh, Scheme::Ma, Scheme::Fpa])?;
            let s = single_eta(&p)?;
            let angles = bench::angle_grid(*points).map_err(|e| CliError::Config(format!("--points: {e}")))?;
            let patterns =
                bench::beam_pattern_experiment(&s, &p.schemes, &angles, &p.options).map_err(CliError::from_core)?;
            patterns.iter().for_each(|pr| report(&pr.result));
            let set = ResultSet::patterns(&s, patterns)?;
            let opts = EmitOptions {
                format: common.format,
                degrees: *degrees,
                db_column: *db,
            };
            output::emit_results(&set, &opts, &common.out)
        }
    }
}

/// Parses `argv` (program name first), runs it and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(m) => {
            for f in &m.files {
                eprintln!("wrote {}", f.path);
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
