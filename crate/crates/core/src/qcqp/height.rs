//! Exact one-dimensional solver for the height subproblem.
//!
//! The objective `min_l q_l(h)` is a pointwise minimum of concave quadratics,
//! hence concave; each interference constraint `q_k(h) <= cap` has a convex
//! `q_k`, so its sublevel set is one interval. The feasible set is the
//! intersection of those intervals with the bracket and the trust region, and
//! the maximum is found by ternary search.

use serde::{Deserialize, Serialize};

use super::{SolveStatus, SubproblemSolution};
use crate::surrogate::ScalarQuadratic;
use crate::{Error, Result};

/// Coefficient sign tolerance for the convexity contracts.
const SIGN_TOL: f64 = 1e-12;
const TERNARY_ITERS: usize = 200;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn intersect(self, other: Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

/// Height subproblem in epigraph form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightSubproblem {
    /// One concave quadratic per secondary user (`a <= 0`).
    pub lower_quads: Vec<ScalarQuadratic>,
    /// One convex quadratic per primary user (`a >= 0`).
    pub upper_quads: Vec<ScalarQuadratic>,
    pub h_min: f64,
    pub h_max: f64,
    pub cap: f64,
    pub trust_center: Option<f64>,
    pub trust_radius: Option<f64>,
}

impl HeightSubproblem {
    fn check(&self) -> Result<()> {
        if !(self.h_min <= self.h_max) {
            return Err(Error::Contract(format!(
                "empty height bracket [{}, {}]",
                self.h_min, self.h_max
            )));
        }
        if self.lower_quads.is_empty() {
            return Err(Error::Contract(
                "height subproblem needs at least one secondary-user quadratic".into(),
            ));
        }
        if let Some(q) = self.lower_quads.iter().find(|q| q.a > SIGN_TOL) {
            return Err(Error::Contract(format!(
                "secondary-user quadratic must be concave, got a = {}",
                q.a
            )));
        }
        if let Some(q) = self.upper_quads.iter().find(|q| q.a < -SIGN_TOL) {
            return Err(Error::Contract(format!(
                "primary-user quadratic must be convex, got a = {}",
                q.a
            )));
        }
        Ok(())
    }

    /// The concave objective `min_l q_l(h)`.
    pub fn objective(&self, h: f64) -> f64 {
        self.lower_quads
            .iter()
            .map(|q| q.eval(h))
            .fold(f64::INFINITY, f64::min)
    }

    /// Intersection of bracket, trust region and every interference interval.
    pub fn feasible_set(&self) -> Result<Option<Interval>> {
        self.check()?;
        let mut set = Interval {
            lo: self.h_min,
            hi: self.h_max,
        };
        if let (Some(c), Some(r)) = (self.trust_center, self.trust_radius) {
            match set.intersect(Interval {
                lo: c - r,
                hi: c + r,
            }) {
                Some(s) => set = s,
                None => return Ok(None),
            }
        }
        for q in &self.upper_quads {
            match feasible_interval(q, self.cap, set.lo, set.hi)? {
                Some(s) => set = s,
                None => return Ok(None),
            }
        }
        Ok(Some(set))
    }
}

/// `{h in [h_min, h_max] : q(h) <= cap}` for convex `q`; at most one interval.
pub fn feasible_interval(
    quad: &ScalarQuadratic,
    cap: f64,
    h_min: f64,
    h_max: f64,
) -> Result<Option<Interval>> {
    if quad.a < -SIGN_TOL {
        return Err(Error::Contract(format!(
            "feasible_interval needs a convex quadratic, got a = {}",
            quad.a
        )));
    }
    if h_min > h_max {
        return Ok(None);
    }
    let bracket = Interval {
        lo: h_min,
        hi: h_max,
    };
    // q(h) - cap = a h^2 + b h + c'
    let (a, b, c) = (quad.a.max(0.0), quad.b, quad.c - cap);
    let roots = if a == 0.0 {
        if b == 0.0 {
            return Ok((c <= 0.0).then_some(bracket));
        }
        let r = -c / b;
        if b > 0.0 {
            Interval {
                lo: f64::NEG_INFINITY,
                hi: r,
            }
        } else {
            Interval {
                lo: r,
                hi: f64::INFINITY,
            }
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Ok(None);
        }
        // numerically stable pair of roots
        let sq = disc.sqrt();
        let t = -0.5 * (b + b.signum() * sq);
        let (r1, r2) = if t == 0.0 {
            (0.0, 0.0)
        } else {
            (t / a, c / t)
        };
        Interval {
            lo: r1.min(r2),
            hi: r1.max(r2),
        }
    };
    let mut set = match bracket.intersect(roots) {
        Some(s) => s,
        None => return Ok(None),
    };
    // Guard the endpoints against rounding in the root formula.
    for _ in 0..64 {
        if set.lo >= set.hi || quad.eval(set.lo) <= cap {
            break;
        }
        set.lo = next_up(set.lo).min(set.hi);
    }
    for _ in 0..64 {
        if set.hi <= set.lo || quad.eval(set.hi) <= cap {
            break;
        }
        set.hi = next_down(set.hi).max(set.lo);
    }
    if quad.eval(set.lo) > cap {
        return Ok(None);
    }
    Ok(Some(set))
}

fn next_up(v: f64) -> f64 {
    let step = v.abs().max(1.0) * f64::EPSILON;
    v + step
}

fn next_down(v: f64) -> f64 {
    let step = v.abs().max(1.0) * f64::EPSILON;
    v - step
}

/// Vertices of the concave pieces and pairwise crossing points.
fn breakpoints(quads: &[ScalarQuadratic]) -> Vec<f64> {
    let mut out: Vec<f64> = quads
        .iter()
        .filter(|q| q.a < 0.0)
        .map(|q| -q.b / (2.0 * q.a))
        .collect();
    for (i, p) in quads.iter().enumerate() {
        for q in &quads[i + 1..] {
            let (a, b, c) = (p.a - q.a, p.b - q.b, p.c - q.c);
            if a == 0.0 {
                if b != 0.0 {
                    out.push(-c / b);
                }
                continue;
            }
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let t = -0.5 * (b + b.signum() * disc.sqrt());
                if t != 0.0 {
                    out.push(t / a);
                    out.push(c / t);
                } else {
                    out.push(0.0);
                }
            }
        }
    }
    out.retain(|h| h.is_finite());
    out
}

/// Maximizes `min_l q_l(h)` over the feasible height set. Ties resolve to
/// the smallest maximizer.
pub fn solve_height(problem: &HeightSubproblem) -> Result<SubproblemSolution> {
    let Some(set) = problem.feasible_set()? else {
        return Ok(SubproblemSolution {
            variables: Vec::new(),
            delta: f64::NEG_INFINITY,
            status: SolveStatus::Infeasible,
            kkt_residual: f64::INFINITY,
            constraint_residuals: Vec::new(),
            multipliers: Vec::new(),
            iterations: 0,
        });
    };

    let f = |h: f64| problem.objective(h);
    let (mut lo, mut hi) = (set.lo, set.hi);
    for _ in 0..TERNARY_ITERS {
        if hi - lo <= 0.0 {
            break;
        }
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    // Bracket ends are candidates too: ternary search never evaluates them.
    let mut best = lo;
    for cand in [set.lo, hi] {
        if f(cand) > f(best) || (f(cand) == f(best) && cand < best) {
            best = cand;
        }
    }
    // The maximizer of a minimum of concave quadratics is a vertex, a
    // crossing of two pieces, or a bracket end; polish onto the best of those.
    let mut exact = set.lo;
    for cand in breakpoints(&problem.lower_quads)
        .into_iter()
        .filter(|&h| set.contains(h))
        .chain([set.hi])
    {
        if f(cand) > f(exact) || (f(cand) == f(exact) && cand < exact) {
            exact = cand;
        }
    }
    if f(exact) >= f(best) - 4.0 * f64::EPSILON * f(best).abs().max(1.0) {
        best = exact;
    }
    let delta = f(best);
    let mut residuals: Vec<f64> = problem
        .upper_quads
        .iter()
        .map(|q| (q.eval(best) - problem.cap).max(0.0))
        .collect();
    residuals.push((problem.h_min - best).max(0.0));
    residuals.push((best - problem.h_max).max(0.0));
    if let (Some(c), Some(r)) = (problem.trust_center, problem.trust_radius) {
        residuals.push(((best - c).abs() - r).max(0.0));
    }
    Ok(SubproblemSolution {
        variables: vec![best],
        delta,
        status: SolveStatus::Optimal,
        kkt_residual: hi - lo,
        constraint_residuals: residuals,
        multipliers: Vec::new(),
        iterations: TERNARY_ITERS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sq(a: f64, b: f64, c: f64) -> ScalarQuadratic {
        ScalarQuadratic { a, b, c }
    }

    fn problem(lower: Vec<ScalarQuadratic>, upper: Vec<ScalarQuadratic>) -> HeightSubproblem {
        HeightSubproblem {
            lower_quads: lower,
            upper_quads: upper,
            h_min: 10.0,
            h_max: 20.0,
            cap: 0.1,
            trust_center: None,
            trust_radius: None,
        }
    }

    #[test]
    fn interval_of_pure_square() {
        let i = feasible_interval(&sq(1.0, 0.0, 0.0), 4.0, 0.0, 10.0)
            .unwrap()
            .unwrap();
        assert!(i.lo.abs() < 1e-15);
        assert!((i.hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_quadratic_intervals() {
        let all = feasible_interval(&sq(0.0, 0.0, 3.0), 4.0, 1.0, 5.0).unwrap();
        assert_eq!(all, Some(Interval { lo: 1.0, hi: 5.0 }));
        assert_eq!(
            feasible_interval(&sq(0.0, 0.0, 5.0), 4.0, 1.0, 5.0).unwrap(),
            None
        );
    }

    #[test]
    fn linear_and_concave_cases() {
        // 2h - 10 <= 0 on [0, 10] -> [0, 5]
        let i = feasible_interval(&sq(0.0, 2.0, -10.0), 0.0, 0.0, 10.0)
            .unwrap()
            .unwrap();
        assert!((i.hi - 5.0).abs() < 1e-12 && i.lo == 0.0);
        assert!(matches!(
            feasible_interval(&sq(-1.0, 0.0, 0.0), 1.0, 0.0, 1.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn vertex_optimum() {
        // -(h - 12)^2 + 8
        let p = problem(vec![sq(-1.0, 24.0, -136.0)], vec![]);
        let s = solve_height(&p).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.variables[0] - 12.0).abs() < 1e-8);
        assert!((s.delta - 8.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_optimum_from_interference() {
        // PU quadratic 0.1 - (h - 14) * 0.05 <= 0.1  <=>  h >= 14
        let pu = sq(0.0, -0.05, 0.1 + 14.0 * 0.05);
        let p = problem(vec![sq(-1.0, 24.0, -136.0)], vec![pu]);
        let s = solve_height(&p).unwrap();
        assert!((s.variables[0] - 14.0).abs() < 1e-8);
        assert!((s.delta - 4.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible_when_cap_unreachable() {
        let p = problem(vec![sq(-1.0, 0.0, 5.0)], vec![sq(1.0, 0.0, 1.0)]);
        let s = solve_height(&p).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.variables.is_empty());
    }

    #[test]
    fn trust_region_clips_step() {
        let mut p = problem(vec![sq(-1.0, 24.0, -136.0)], vec![]);
        p.trust_center = Some(15.0);
        p.trust_radius = Some(0.5);
        let s = solve_height(&p).unwrap();
        assert!((s.variables[0] - 14.5).abs() < 1e-8);
    }

    #[test]
    fn plateau_resolves_to_smallest_height() {
        let p = problem(vec![sq(0.0, 0.0, 3.0)], vec![]);
        let s = solve_height(&p).unwrap();
        assert_eq!(s.variables[0], 10.0);
    }

    #[test]
    fn sign_contracts_are_enforced() {
        let p = problem(vec![sq(1.0, 0.0, 0.0)], vec![]);
        assert!(solve_height(&p).is_err());
        let p = problem(vec![sq(-1.0, 0.0, 0.0)], vec![sq(-1.0, 0.0, 0.0)]);
        assert!(solve_height(&p).is_err());
    }

    /// Random instance whose optimum need not sit at a vertex.
    fn random_problem(rng: &mut impl Rng) -> HeightSubproblem {
        let l = rng.gen_range(1..=4);
        let k = rng.gen_range(0..=4);
        let lower = (0..l)
            .map(|_| {
                let a = -rng.gen_range(0.0..0.5);
                let v = rng.gen_range(10.0..20.0);
                let top = rng.gen_range(1.0..8.0);
                let tilt = rng.gen_range(-0.3..0.3);
                sq(a, -2.0 * a * v + tilt, a * v * v - tilt * v + top)
            })
            .collect();
        let upper = (0..k)
            .map(|_| {
                let a = rng.gen_range(0.0..0.05);
                let v = rng.gen_range(8.0..22.0);
                sq(a, -2.0 * a * v, a * v * v + rng.gen_range(-0.5..0.12))
            })
            .collect();
        HeightSubproblem {
            lower_quads: lower,
            upper_quads: upper,
            h_min: 10.0,
            h_max: 20.0,
            cap: 0.1,
            trust_center: None,
            trust_radius: None,
        }
    }

    #[test]
    fn agrees_with_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = random_problem(&mut rng);
            let s = solve_height(&p).unwrap();
            let points = 100_000;
            let mut best = f64::NEG_INFINITY;
            for i in 0..=points {
                let h = p.h_min + (p.h_max - p.h_min) * i as f64 / points as f64;
                if p.upper_quads.iter().all(|q| q.eval(h) <= p.cap) {
                    best = best.max(p.objective(h));
                }
            }
            if best == f64::NEG_INFINITY {
                assert_eq!(s.status, SolveStatus::Infeasible);
            } else {
                assert!(s.delta >= best - 1e-9);
                assert!((s.delta - best).abs() < 1e-3);
            }
        }
    }
}
