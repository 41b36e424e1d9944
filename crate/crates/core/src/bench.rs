//! Benchmark schemes and the experiment runners behind the height sweep,
//! iteration traces and beam-pattern comparisons.
//!
//! Every scheme is a configuration of [`optimize`]: the full
//! scheme runs all three blocks from the tightness-based height initializer,
//! the `-AH` variants start at the minimum height, the `-AW` variants start
//! from uniform weights, and the fixed-height baselines drop the height block
//! (and for `FPA` the position block as well).

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alternating::{
    init_apv, optimize, scale_for_interference, uniform_awv, Blocks, InitOverrides,
    OptimizeOptions, Trace,
};
use crate::scenario::{beam_pattern, AntennaConfig, Scenario};
use crate::{Error, Result};

/// Default number of points of the beam-pattern angle grid over `[0, pi]`.
pub const PATTERN_POINTS: usize = 1801;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "UMA")]
    Uma,
    #[serde(rename = "UMA-AH")]
    UmaAh,
    #[serde(rename = "UMA-AW")]
    UmaAw,
    #[serde(rename = "UMA-AHAW")]
    UmaAhaw,
    #[serde(rename = "MA")]
    Ma,
    #[serde(rename = "FPA")]
    Fpa,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Uma,
        Scheme::UmaAh,
        Scheme::UmaAw,
        Scheme::UmaAhaw,
        Scheme::Ma,
        Scheme::Fpa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Uma => "UMA",
            Scheme::UmaAh => "UMA-AH",
            Scheme::UmaAw => "UMA-AW",
            Scheme::UmaAhaw => "UMA-AHAW",
            Scheme::Ma => "MA",
            Scheme::Fpa => "FPA",
        }
    }

    pub fn blocks(self) -> Blocks {
        match self {
            Scheme::Uma | Scheme::UmaAh | Scheme::UmaAw | Scheme::UmaAhaw => Blocks::ALL,
            Scheme::Ma => Blocks {
                height: false,
                awv: true,
                apv: true,
            },
            Scheme::Fpa => Blocks {
                height: false,
                awv: true,
                apv: false,
            },
        }
    }

    /// True for the baselines that hover at a fixed height.
    pub fn fixed_height(self) -> bool {
        matches!(self, Scheme::Ma | Scheme::Fpa)
    }

    fn arbitrary_height(self) -> bool {
        matches!(self, Scheme::UmaAh | Scheme::UmaAhaw)
    }

    fn arbitrary_weights(self) -> bool {
        matches!(self, Scheme::UmaAw | Scheme::UmaAhaw)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Scheme::ALL.iter().map(|k| k.name()).collect();
                Error::Domain(format!("unknown scheme '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// Options shared by all runners.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchOptions {
    pub optimize: OptimizeOptions,
    /// Height of the fixed-height baselines; defaults to the minimum height.
    pub fixed_height: Option<f64>,
}


#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scheme: Scheme,
    pub eta: f64,
    pub config: AntennaConfig,
    pub delta: f64,
    pub su_gains: Vec<f64>,
    pub pu_gains: Vec<f64>,
    pub trace: Trace,
    /// Wall-clock time of the run; never written to result files.
    #[serde(skip)]
    pub wall_ms: f64,
}

/// Equality ignores `wall_ms`.
impl PartialEq for ExperimentResult {
    fn eq(&self, other: &Self) -> bool {
        self.scheme == other.scheme
            && self.eta == other.eta
            && self.config == other.config
            && self.delta == other.delta
            && self.su_gains == other.su_gains
            && self.pu_gains == other.pu_gains
            && self.trace == other.trace
    }
}

impl ExperimentResult {
    pub fn pattern(&self, scenario: &Scenario, angles: &[f64]) -> Result<Vec<f64>> {
        beam_pattern(&self.config, angles, scenario.wavelength)
    }
}

/// Optimizer options realizing `scheme` on `scenario`.
pub fn scheme_options(
    scenario: &Scenario,
    scheme: Scheme,
    options: &BenchOptions,
) -> Result<OptimizeOptions> {
    let mut opts = options.optimize.clone();
    opts.blocks = scheme.blocks();
    let mut init = InitOverrides::default();
    if scheme.fixed_height() {
        let h = options.fixed_height.unwrap_or(scenario.min_height);
        if !(h >= scenario.min_height) {
            return Err(Error::InvalidScenario {
                field: "fixed_height",
                reason: format!("{h} is below the minimum height {}", scenario.min_height),
            });
        }
        init.height = Some(h);
    }
    if scheme.arbitrary_height() {
        init.height = Some(scenario.min_height);
    }
    if scheme.arbitrary_weights() {
        let x0 = init_apv(scenario)?;
        init.awv = Some(uniform_awv(scenario, &x0, scenario.min_height)?);
        init.apv = Some(x0);
    }
    opts.init = init;
    Ok(opts)
}

fn run_with(scenario: &Scenario, scheme: Scheme, opts: &OptimizeOptions) -> Result<ExperimentResult> {
    let start = Instant::now();
    let out = optimize(scenario, opts)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(ExperimentResult {
        scheme,
        eta: scenario.interference_cap,
        su_gains: scenario.su_gains(&out.config)?,
        pu_gains: scenario.pu_gains(&out.config)?,
        config: out.config,
        delta: out.delta,
        trace: out.trace,
        wall_ms,
    })
}

pub fn run_scheme(scenario: &Scenario, scheme: Scheme, options: &BenchOptions) -> Result<ExperimentResult> {
    let opts = scheme_options(scenario, scheme, options)?;
    run_with(scenario, scheme, &opts)
}

/// Runs `scheme` once per seed, each from weights with seeded random phases
/// (scaled for the caps), and keeps the best result; ties go to the earlier seed.
pub fn multistart(
    scenario: &Scenario,
    scheme: Scheme,
    options: &BenchOptions,
    seeds: &[u64],
) -> Result<ExperimentResult> {
    if seeds.is_empty() {
        return Err(Error::Domain("multistart needs at least one seed".into()));
    }
    let base = scheme_options(scenario, scheme, options)?;
    let runs: Vec<Result<ExperimentResult>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut opts = base.clone();
            opts.rng_seed = seed;
            let x0 = match &opts.init.apv {
                Some(x) => x.clone(),
                None => init_apv(scenario)?,
            };
            let h = opts.init.height.unwrap_or(scenario.min_height);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let amp = 1.0 / (x0.len() as f64).sqrt();
            let mut w: Vec<Complex64> = (0..x0.len())
                .map(|_| Complex64::from_polar(amp, rng.gen_range(0.0..std::f64::consts::TAU)))
                .collect();
            scale_for_interference(scenario, &mut w, &x0, h)?;
            opts.init.awv = Some(w);
            opts.init.apv = Some(x0);
            run_with(scenario, scheme, &opts)
        })
        .collect();
    let mut best: Option<ExperimentResult> = None;
    for r in runs {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.delta > b.delta) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one seed"))
}

/// One point of a height sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub height: f64,
    pub gain_su1: f64,
}

/// Gain toward the first secondary user after running `scheme` with the UAV
/// pinned at each grid height.
pub fn height_sweep(
    scenario: &Scenario,
    scheme: Scheme,
    h_grid: &[f64],
    options: &BenchOptions,
) -> Result<Vec<SweepPoint>> {
    if !scheme.fixed_height() {
        return Err(Error::Domain(format!(
            "height sweep needs a fixed-height scheme (MA or FPA), got {scheme}"
        )));
    }
    if h_grid.is_empty() {
        return Err(Error::Domain("empty height grid".into()));
    }
    if let Some(&h) = h_grid.iter().find(|&&h| !(h >= scenario.min_height)) {
        return Err(Error::Domain(format!(
            "grid height {h} is below the minimum height {}",
            scenario.min_height
        )));
    }
    h_grid
        .par_iter()
        .map(|&h| {
            let opts = BenchOptions {
                fixed_height: Some(h),
                ..options.clone()
            };
            let r = run_scheme(scenario, scheme, &opts)?;
            Ok(SweepPoint {
                height: h,
                gain_su1: r.su_gains[0],
            })
        })
        .collect()
}

/// Runs every `(scheme, eta)` pair, in that nesting order.
pub fn iteration_trace_experiment(
    scenario: &Scenario,
    schemes: &[Scheme],
    etas: &[f64],
    options: &BenchOptions,
) -> Result<Vec<ExperimentResult>> {
    let jobs: Vec<(Scheme, f64)> = schemes
        .iter()
        .flat_map(|&k| etas.iter().map(move |&e| (k, e)))
        .collect();
    jobs.par_iter()
        .map(|&(scheme, eta)| {
            let s = Scenario {
                interference_cap: eta,
                ..scenario.clone()
            };
            s.validate()?;
            run_scheme(&s, scheme, options)
        })
        .collect()
}

/// Uniform grid of `points` angles over `[0, pi]`.
pub fn angle_grid(points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::Domain("angle grid needs at least two points".into()));
    }
    let step = std::f64::consts::PI / (points - 1) as f64;
    Ok((0..points).map(|i| i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternResult {
    pub result: ExperimentResult,
    pub angles: Vec<f64>,
    pub gains: Vec<f64>,
}

/// Final beam pattern of each scheme over `angles`.
pub fn beam_pattern_experiment(
    scenario: &Scenario,
    schemes: &[Scheme],
    angles: &[f64],
    options: &BenchOptions,
) -> Result<Vec<PatternResult>> {
    if angles.is_empty() {
        return Err(Error::Domain("empty angle grid".into()));
    }
    schemes
        .par_iter()
        .map(|&scheme| {
            let result = run_scheme(scenario, scheme, options)?;
            let gains = result.pattern(scenario, angles)?;
            Ok(PatternResult {
                result,
                angles: angles.to_vec(),
                gains,
            })
        })
        .collect()
}

/// Sum of absolute differences between consecutive sweep gains.
pub fn total_variation(curve: &[SweepPoint]) -> f64 {
    curve
        .windows(2)
        .map(|p| (p[1].gain_su1 - p[0].gain_su1).abs())
        .sum()
}

/// Widest run of consecutive grid points with gain at least `threshold`,
/// as `(start, end)` heights.
pub fn widest_interval(curve: &[SweepPoint], threshold: f64) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut start: Option<f64> = None;
    for (i, p) in curve.iter().enumerate() {
        if p.gain_su1 >= threshold {
            let s = *start.get_or_insert(p.height);
            let last = curve.get(i + 1).is_none_or(|q| q.gain_su1 < threshold);
            if last && best.is_none_or(|(a, b)| p.height - s > b - a) {
                best = Some((s, p.height));
            }
        } else {
            start = None;
        }
    }
    best
}
