//! Block-alternating optimization over height, weights and positions.
//!
//! Each outer iteration solves the height, weight and position subproblems in
//! turn, each built at the current iterate. A block result is kept only when
//! the exact max-min gain does not drop and the configuration stays feasible,
//! so the recorded objective is monotone by construction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::qcqp::{
    apv_subproblem, awv_subproblem, height_subproblem, real_to_awv, solve_apv, solve_awv,
    solve_height, SolveStatus, SubproblemSolution,
};
use crate::scenario::{
    beamforming_gain, l2_norm, steering_vector, validate_config, weight_phase, AntennaConfig,
    Scenario,
};
use crate::surrogate::gamma_derivatives;
use crate::{Error, Result, FEASIBILITY_TOL};

/// Allowed drop of the exact objective when accepting a block update.
pub const ACCEPT_TOL: f64 = 1e-9;

const ROOT_SCAN_STEP: f64 = 0.05;
const BISECTION_ITERS: usize = 100;

/// Which blocks the outer loop updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocks {
    pub height: bool,
    pub awv: bool,
    pub apv: bool,
}

impl Blocks {
    pub const ALL: Blocks = Blocks {
        height: true,
        awv: true,
        apv: true,
    };
    pub const NONE: Blocks = Blocks {
        height: false,
        awv: false,
        apv: false,
    };
}

/// Replaces the default initializers. `None` keeps the default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitOverrides {
    pub height: Option<f64>,
    pub awv: Option<Vec<Complex64>>,
    pub apv: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub max_outer_iters: usize,
    /// SCA iterations per block per outer pass.
    pub sca_inner_iters: usize,
    /// Per-update bound on `|h - h^i|`; `None` disables it.
    pub height_trust_radius: Option<f64>,
    pub blocks: Blocks,
    /// Seed for callers that randomize starts; the loop itself is deterministic.
    pub rng_seed: u64,
    /// Upper end of the height bracket; defaults to [`Scenario::default_max_height`].
    pub h_max: Option<f64>,
    pub init: InitOverrides,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 100,
            sca_inner_iters: 1,
            height_trust_radius: Some(0.5),
            blocks: Blocks::ALL,
            rng_seed: 0,
            h_max: None,
            init: InitOverrides::default(),
        }
    }
}

/// Outcome of one block update inside an outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub status: SolveStatus,
    pub accepted: bool,
    /// KKT residual of the last solve (bracket width for the height block).
    pub kkt_residual: f64,
    /// Largest constraint violation of the last solve.
    pub max_violation: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Exact smallest secondary-user gain.
    pub delta: f64,
    pub height: f64,
    pub max_pu_gain: f64,
    /// Largest violation reported by [`validate_config`]; zero when feasible.
    pub max_violation: f64,
    pub height_block: Option<BlockReport>,
    pub awv_block: Option<BlockReport>,
    pub apv_block: Option<BlockReport>,
}

/// Per-iteration history; record 0 is the initial point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn deltas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.delta).collect()
    }

    /// Outer iterations run after initialization.
    pub fn outer_iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn block_reports(&self) -> impl Iterator<Item = (&'static str, &BlockReport)> {
        self.records.iter().flat_map(|r| {
            [
                ("height", r.height_block.as_ref()),
                ("awv", r.awv_block.as_ref()),
                ("apv", r.apv_block.as_ref()),
            ]
            .into_iter()
            .filter_map(|(k, b)| b.map(|b| (k, b)))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub config: AntennaConfig,
    pub delta: f64,
    pub trace: Trace,
}

/// True iff the last two recorded objectives differ by less than `tolerance`.
pub fn converged(trace: &Trace, tolerance: f64) -> bool {
    match trace.records.as_slice() {
        [.., prev, last] => (last.delta - prev.delta).abs() < tolerance,
        _ => false,
    }
}

/// Uniform layout at exactly the minimum spacing, centered on the origin.
pub fn init_apv(scenario: &Scenario) -> Result<Vec<f64>> {
    let n = scenario.num_antennas;
    if n == 0 {
        return Err(Error::Domain("no antennas".into()));
    }
    let span = (n as f64 - 1.0) * scenario.min_spacing;
    if span > scenario.aperture {
        return Err(Error::InfeasibleAperture {
            n,
            min_spacing: scenario.min_spacing,
            aperture: scenario.aperture,
        });
    }
    let mid = (n as f64 - 1.0) / 2.0;
    Ok((0..n)
        .map(|i| (i as f64 - mid) * scenario.min_spacing)
        .collect())
}

/// Scales `w` down (never up) until every primary-user gain at `h` is at most
/// the cap.
pub fn scale_for_interference(
    scenario: &Scenario,
    w: &mut [Complex64],
    x: &[f64],
    h: f64,
) -> Result<()> {
    let mut worst: f64 = 0.0;
    for angle in scenario.pu_angles(h)? {
        worst = worst.max(beamforming_gain(w, x, angle, scenario.wavelength)?);
    }
    if worst > scenario.interference_cap {
        // a hair under the cap so the start is strictly interior
        let factor = (scenario.interference_cap / worst).sqrt() * (1.0 - 1e-9);
        w.iter_mut().for_each(|v| *v *= factor);
    }
    Ok(())
}

/// Sum of the secondary-user steering vectors at `h0`, normalized to unit norm,
/// then scaled for the interference caps.
pub fn init_awv(scenario: &Scenario, x0: &[f64], h0: f64) -> Result<Vec<Complex64>> {
    let n = x0.len();
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    for angle in scenario.su_angles(h0)? {
        for (acc, a) in w.iter_mut().zip(steering_vector(x0, angle, scenario.wavelength)?) {
            *acc += a;
        }
    }
    let norm = l2_norm(&w);
    if norm > 0.0 {
        w.iter_mut().for_each(|v| *v /= norm);
    } else {
        // steering vectors cancel exactly: fall back to uniform weights
        let v = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
        w.iter_mut().for_each(|c| *c = v);
    }
    scale_for_interference(scenario, &mut w, x0, h0)?;
    Ok(w)
}

/// Uniform-magnitude, zero-phase weights scaled for the caps at `h`.
pub fn uniform_awv(scenario: &Scenario, x: &[f64], h: f64) -> Result<Vec<Complex64>> {
    let n = x.len();
    let mut w = vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n];
    scale_for_interference(scenario, &mut w, x, h)?;
    Ok(w)
}

/// `sin(gamma) gamma'^2 - cos(gamma) gamma''`, whose zeros are the heights
/// where the curvature bound on `cos(gamma(h))` is tight.
fn tightness_residual(chi: f64, varpi: f64, ground: f64, h: f64) -> f64 {
    let z = h * h + ground * ground;
    let gamma = -chi * ground / z.sqrt() - varpi;
    let (d1, d2) = gamma_derivatives(chi, ground, h).unwrap_or((0.0, 0.0));
    gamma.sin() * d1 * d1 - gamma.cos() * d2
}

/// Smallest root of the tightness residual in `[lo, hi]`, if any.
fn smallest_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let mut a = lo;
    let mut fa = f(a);
    if fa == 0.0 {
        return Some(a);
    }
    while a < hi {
        let b = (a + ROOT_SCAN_STEP).min(hi);
        let fb = f(b);
        if fb == 0.0 {
            return Some(b);
        }
        if fa.signum() != fb.signum() {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..BISECTION_ITERS {
                let m = 0.5 * (l + r);
                let fm = f(m);
                if fm == 0.0 {
                    return Some(m);
                }
                if fm.signum() == fl.signum() {
                    l = m;
                    fl = fm;
                } else {
                    r = m;
                }
            }
            return Some(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    None
}

/// Height initializer: average over antenna pairs and secondary users of the
/// smallest height at which the pair's curvature bound is tight.
pub fn init_height(
    scenario: &Scenario,
    w0: &[Complex64],
    x0: &[f64],
    h_max: Option<f64>,
) -> Result<f64> {
    if w0.len() != x0.len() {
        return Err(Error::Dimension {
            what: "initial weights vs positions",
            expected: x0.len(),
            got: w0.len(),
        });
    }
    let h0 = scenario.min_height;
    let hi = h_max.unwrap_or_else(|| scenario.default_max_height());
    let k = 2.0 * std::f64::consts::PI / scenario.wavelength;
    let mut sum = 0.0;
    let mut count = 0usize;
    for n in 0..x0.len() {
        for m in 0..x0.len() {
            if n == m || w0[n].norm() * w0[m].norm() == 0.0 {
                continue;
            }
            let chi = k * (x0[n] - x0[m]);
            let varpi = weight_phase(w0[n]) - weight_phase(w0[m]);
            for &s in &scenario.su_positions {
                let root = smallest_root(|h| tightness_residual(chi, varpi, s, h), h0, hi);
                sum += root.unwrap_or(h0);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Ok(h0);
    }
    Ok((sum / count as f64).max(h0))
}

fn report(sol: &SubproblemSolution, accepted: bool) -> BlockReport {
    BlockReport {
        status: sol.status,
        accepted,
        kkt_residual: sol.kkt_residual,
        max_violation: sol.max_violation(),
        newton_steps: sol.iterations,
    }
}

struct Evaluated {
    delta: f64,
    max_pu_gain: f64,
    max_violation: f64,
}

fn evaluate(scenario: &Scenario, cfg: &AntennaConfig) -> Result<Evaluated> {
    Ok(Evaluated {
        delta: scenario.min_su_gain(cfg)?,
        max_pu_gain: scenario.max_pu_gain(cfg)?,
        max_violation: validate_config(scenario, cfg)
            .iter()
            .map(|v| v.residual)
            .fold(0.0, f64::max),
    })
}

/// Keeps `candidate` iff it is feasible and does not lower the objective.
fn accept(
    scenario: &Scenario,
    current: &mut AntennaConfig,
    delta: &mut f64,
    candidate: AntennaConfig,
) -> Result<bool> {
    if !validate_config(scenario, &candidate).is_empty() {
        return Ok(false);
    }
    let d = scenario.min_su_gain(&candidate)?;
    if d >= *delta - ACCEPT_TOL {
        *current = candidate;
        *delta = d;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Initial point: positions, then weights at the minimum height, then the
/// height initializer, then a final rescale of the weights for the caps at the
/// chosen height.
pub fn initial_config(scenario: &Scenario, options: &OptimizeOptions) -> Result<AntennaConfig> {
    let x0 = match &options.init.apv {
        Some(x) => x.clone(),
        None => init_apv(scenario)?,
    };
    let mut w0 = match &options.init.awv {
        Some(w) => w.clone(),
        None => init_awv(scenario, &x0, scenario.min_height)?,
    };
    let h0 = match options.init.height {
        Some(h) => h,
        None => init_height(scenario, &w0, &x0, options.h_max)?,
    };
    scale_for_interference(scenario, &mut w0, &x0, h0)?;
    Ok(AntennaConfig {
        apv: x0,
        awv: w0,
        height: h0,
    })
}

/// Runs the alternating loop from [`initial_config`].
pub fn optimize(scenario: &Scenario, options: &OptimizeOptions) -> Result<Optimized> {
    scenario.validate()?;
    if options.max_outer_iters == 0 {
        return Err(Error::Domain("max_outer_iters must be at least 1".into()));
    }
    let mut cfg = initial_config(scenario, options)?;
    if cfg.apv.len() != scenario.num_antennas || cfg.awv.len() != scenario.num_antennas {
        return Err(Error::Dimension {
            what: "initial configuration",
            expected: scenario.num_antennas,
            got: cfg.apv.len().min(cfg.awv.len()),
        });
    }
    let h_max = options.h_max.unwrap_or_else(|| scenario.default_max_height());
    let ev = evaluate(scenario, &cfg)?;
    let mut delta = ev.delta;
    let mut trace = Trace {
        records: vec![TraceRecord {
            iteration: 0,
            delta,
            height: cfg.height,
            max_pu_gain: ev.max_pu_gain,
            max_violation: ev.max_violation,
            height_block: None,
            awv_block: None,
            apv_block: None,
        }],
    };

    for iteration in 1..=options.max_outer_iters {
        let mut height_block = None;
        let mut awv_block = None;
        let mut apv_block = None;

        for _ in 0..options.sca_inner_iters {
            if !options.blocks.height {
                break;
            }
            let p = height_subproblem(
                scenario,
                &cfg.awv,
                &cfg.apv,
                cfg.height,
                h_max.max(scenario.min_height),
                options.height_trust_radius,
            )?;
            let sol = solve_height(&p)?;
            let ok = if sol.status == SolveStatus::Optimal {
                let candidate = AntennaConfig {
                    height: sol.variables[0],
                    ..cfg.clone()
                };
                accept(scenario, &mut cfg, &mut delta, candidate)?
            } else {
                false
            };
            height_block = Some(report(&sol, ok));
        }

        for _ in 0..options.sca_inner_iters {
            if !options.blocks.awv {
                break;
            }
            let p = awv_subproblem(scenario, &cfg.awv, &cfg.apv, cfg.height)?;
            let sol = solve_awv(&p)?;
            let ok = if sol.status == SolveStatus::Optimal {
                let candidate = AntennaConfig {
                    awv: real_to_awv(&sol.variables),
                    ..cfg.clone()
                };
                accept(scenario, &mut cfg, &mut delta, candidate)?
            } else {
                false
            };
            awv_block = Some(report(&sol, ok));
        }

        for _ in 0..options.sca_inner_iters {
            if !options.blocks.apv {
                break;
            }
            let p = apv_subproblem(scenario, &cfg.awv, &cfg.apv, cfg.height)?;
            let sol = solve_apv(&p)?;
            let ok = if sol.status == SolveStatus::Optimal {
                let candidate = AntennaConfig {
                    apv: sol.variables.clone(),
                    ..cfg.clone()
                };
                accept(scenario, &mut cfg, &mut delta, candidate)?
            } else {
                false
            };
            apv_block = Some(report(&sol, ok));
        }

        let ev = evaluate(scenario, &cfg)?;
        trace.records.push(TraceRecord {
            iteration,
            delta,
            height: cfg.height,
            max_pu_gain: ev.max_pu_gain,
            max_violation: ev.max_violation,
            height_block,
            awv_block,
            apv_block,
        });
        if converged(&trace, scenario.tolerance) {
            break;
        }
    }
    debug_assert!(trace
        .records
        .iter()
        .all(|r| r.max_violation <= FEASIBILITY_TOL || r.iteration == 0));
    Ok(Optimized {
        config: cfg,
        delta,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::steering_angle;

    #[test]
    fn uniform_layouts() {
        let s = Scenario {
            num_antennas: 2,
            ..Scenario::default()
        };
        let x = init_apv(&s).unwrap();
        assert!((x[0] + 0.025).abs() < 1e-15 && (x[1] - 0.025).abs() < 1e-15);

        let s = Scenario::default();
        let x = init_apv(&s).unwrap();
        assert!(x.windows(2).all(|p| (p[1] - p[0] - 0.05).abs() < 1e-12));
        assert!((x[7] - 0.175).abs() < 1e-12 && x[7] <= s.aperture / 2.0);

        let one = Scenario {
            num_antennas: 1,
            ..Scenario::default()
        };
        assert_eq!(init_apv(&one).unwrap(), vec![0.0]);

        let tight = Scenario {
            num_antennas: 10,
            ..Scenario::default()
        };
        assert!(matches!(
            init_apv(&tight),
            Err(Error::InfeasibleAperture { .. })
        ));
    }

    #[test]
    fn init_awv_single_target_is_matched() {
        let s = Scenario {
            pu_positions: vec![],
            su_positions: vec![5.77],
            ..Scenario::default()
        };
        let x = init_apv(&s).unwrap();
        let w = init_awv(&s, &x, 10.0).unwrap();
        assert!((l2_norm(&w) - 1.0).abs() < 1e-12);
        let angle = steering_angle(5.77, 10.0).unwrap();
        let g = beamforming_gain(&w, &x, angle, s.wavelength).unwrap();
        assert!((g - 8.0).abs() < 1e-9);
    }

    #[test]
    fn init_awv_respects_caps() {
        let s = Scenario::default();
        let x = init_apv(&s).unwrap();
        for h in [10.0, 12.5, 40.0] {
            let w = init_awv(&s, &x, h).unwrap();
            assert!(l2_norm(&w) <= 1.0 + 1e-12);
            for a in s.pu_angles(h).unwrap() {
                assert!(beamforming_gain(&w, &x, a, s.wavelength).unwrap() <= s.interference_cap);
            }
        }
    }

    #[test]
    fn init_height_degenerate_cases() {
        let one = Scenario {
            num_antennas: 1,
            ..Scenario::default()
        };
        let w = [Complex64::new(1.0, 0.0)];
        assert_eq!(init_height(&one, &w, &[0.0], None).unwrap(), 10.0);

        let s = Scenario::default();
        let x = init_apv(&s).unwrap();
        let mut w = vec![Complex64::new(0.0, 0.0); 8];
        w[3] = Complex64::new(1.0, 0.0);
        assert_eq!(init_height(&s, &w, &x, None).unwrap(), 10.0);
    }

    #[test]
    fn tightness_roots_are_roots() {
        let s = Scenario::default();
        let chi = 2.0 * std::f64::consts::PI / s.wavelength * 0.15;
        for &g in &s.su_positions {
            if let Some(h) = smallest_root(|h| tightness_residual(chi, 0.3, g, h), 10.0, 200.0) {
                assert!(tightness_residual(chi, 0.3, g, h).abs() < 1e-9);
                // no earlier sign change on the scan grid
                let f0 = tightness_residual(chi, 0.3, g, 10.0);
                let mut t = 10.0;
                while t + ROOT_SCAN_STEP < h {
                    assert_eq!(
                        tightness_residual(chi, 0.3, g, t).signum(),
                        f0.signum()
                    );
                    t += ROOT_SCAN_STEP;
                }
            }
        }
    }

    #[test]
    fn converged_examples() {
        let rec = |d: f64| TraceRecord {
            iteration: 0,
            delta: d,
            height: 10.0,
            max_pu_gain: 0.0,
            max_violation: 0.0,
            height_block: None,
            awv_block: None,
            apv_block: None,
        };
        let t = |ds: &[f64]| Trace {
            records: ds.iter().map(|&d| rec(d)).collect(),
        };
        assert!(converged(&t(&[3.0, 3.0005]), 1e-3));
        assert!(!converged(&t(&[3.0, 3.5]), 1e-3));
        assert!(!converged(&t(&[3.0]), 1e-3));
    }
}
