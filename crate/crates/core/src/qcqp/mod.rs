//! Convex subproblems of the alternating scheme and their solvers.
//!
//! The height subproblem has one scalar variable and is solved exactly in
//! [`height`]. The weight and position subproblems share one template,
//! [`ConicSubproblem`]: maximize the epigraph variable `delta` subject to
//! affine, Euclidean-norm and convex quadratic constraints. Both go through
//! the primal-dual interior-point core in `ipm`.
//!
//! Complex weights are mapped to `z = [Re w_1, Im w_1, ..., Re w_N, Im w_N]`.

pub mod height;
mod ipm;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use height::{feasible_interval, solve_height, HeightSubproblem, Interval};
use ipm::{IpmProblem, IpmSettings, QuadForm};

use crate::scenario::{spatial_frequency, steering_vector, Scenario};
use crate::surrogate::{
    awv_linear_surrogate, height_lower_surrogate, height_upper_surrogate,
    position_lower_surrogate, position_nonneg_surrogate, position_upper_surrogate,
};
use crate::{Error, Result};

/// KKT residual required for a conic solve to count as optimal.
pub const KKT_TOL: f64 = 1e-7;
/// Constraint violation allowed on an optimal conic solve.
pub const CONSTRAINT_TOL: f64 = 1e-6;


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

/// Output of one convex subproblem solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSolution {
    /// Height `[h]`, or the real vector `z` of the conic template.
    pub variables: Vec<f64>,
    /// Attained epigraph value (surrogate objective).
    pub delta: f64,
    pub status: SolveStatus,
    /// For conic solves, see [`kkt_residual`]; for the height solve, the width
    /// of the final ternary-search bracket.
    pub kkt_residual: f64,
    /// Per-constraint violation in natural units, clipped at zero.
    pub constraint_residuals: Vec<f64>,
    /// Lagrange multipliers, one per constraint, in [`ConicSubproblem`] order.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

impl SubproblemSolution {
    pub fn max_violation(&self) -> f64 {
        self.constraint_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// A constraint of the conic template, in the variable `z` and epigraph `delta`.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `g^T z + d >= delta`
    AffineLower { g: DVector<f64>, d: f64 },
    /// `||M z + v|| <= r`
    Norm {
        m: DMatrix<f64>,
        v: DVector<f64>,
        r: f64,
    },
    /// `1/2 z^T Q z + q^T z + s + delta_coeff * delta <= 0`, `Q` PSD
    Quadratic {
        q_mat: DMatrix<f64>,
        q: DVector<f64>,
        s: f64,
        delta_coeff: f64,
    },
    /// `a^T z <= b` (box and ordering rows)
    Linear { a: DVector<f64>, b: f64 },
}

impl Constraint {
    /// Natural-unit value; feasible iff `<= 0`.
    pub fn value(&self, z: &DVector<f64>, delta: f64) -> f64 {
        match self {
            Constraint::AffineLower { g, d } => delta - (g.dot(z) + d),
            Constraint::Norm { m, v, r } => (m * z + v).norm() - r,
            Constraint::Quadratic {
                q_mat,
                q,
                s,
                delta_coeff,
            } => 0.5 * z.dot(&(q_mat * z)) + q.dot(z) + s + delta_coeff * delta,
            Constraint::Linear { a, b } => a.dot(z) - b,
        }
    }

    /// Largest `delta` this constraint admits at `z`, if it involves `delta`.
    fn delta_bound(&self, z: &DVector<f64>) -> Option<f64> {
        match self {
            Constraint::AffineLower { g, d } => Some(g.dot(z) + d),
            Constraint::Quadratic {
                q_mat,
                q,
                s,
                delta_coeff,
            } if *delta_coeff > 0.0 => {
                Some(-(0.5 * z.dot(&(q_mat * z)) + q.dot(z) + s) / delta_coeff)
            }
            _ => None,
        }
    }

    /// Smooth convex form over `y = (z, delta)` used by the interior-point core.
    fn lower(&self, n: usize) -> QuadForm {
        let embed_vec = |v: &DVector<f64>, last: f64| {
            let mut out = v.clone().resize_vertically(n + 1, 0.0);
            out[n] = last;
            out
        };
        let embed_mat = |m: &DMatrix<f64>| m.clone().resize(n + 1, n + 1, 0.0);
        match self {
            Constraint::AffineLower { g, d } => QuadForm::linear(embed_vec(&(-g), 1.0), -d),
            Constraint::Norm { m, v, r } => {
                let mt = m.transpose();
                QuadForm {
                    p: Some(embed_mat(&(&mt * m * 2.0))),
                    q: embed_vec(&(&mt * v * 2.0), 0.0),
                    r: v.norm_squared() - r * r,
                }
            }
            Constraint::Quadratic {
                q_mat,
                q,
                s,
                delta_coeff,
            } => QuadForm {
                p: Some(embed_mat(q_mat)),
                q: embed_vec(q, *delta_coeff),
                r: *s,
            },
            Constraint::Linear { a, b } => QuadForm::linear(embed_vec(a, 0.0), -b),
        }
    }
}

/// Maximize `delta` over `(z, delta)` subject to `constraints`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicSubproblem {
    pub dim: usize,
    pub constraints: Vec<Constraint>,
    /// Expansion point; the solver starts here.
    pub start: DVector<f64>,
}

impl ConicSubproblem {
    fn check(&self) -> Result<()> {
        let n = self.dim;
        if self.start.len() != n {
            return Err(Error::Dimension {
                what: "conic start point",
                expected: n,
                got: self.start.len(),
            });
        }
        let mut has_delta = false;
        for c in &self.constraints {
            let ok = match c {
                Constraint::AffineLower { g, .. } => {
                    has_delta = true;
                    g.len() == n
                }
                Constraint::Norm { m, v, .. } => m.ncols() == n && m.nrows() == v.len(),
                Constraint::Quadratic {
                    q_mat,
                    q,
                    delta_coeff,
                    ..
                } => {
                    if *delta_coeff < 0.0 {
                        return Err(Error::Contract(
                            "quadratic constraint must not reward larger delta".into(),
                        ));
                    }
                    has_delta |= *delta_coeff > 0.0;
                    let min_eig = if n == 0 {
                        0.0
                    } else {
                        let sym = (q_mat + q_mat.transpose()) * 0.5;
                        sym.symmetric_eigenvalues().min()
                    };
                    if min_eig < -1e-9 * q_mat.amax().max(1.0) {
                        return Err(Error::Contract(format!(
                            "quadratic constraint matrix is not PSD (min eigenvalue {min_eig})"
                        )));
                    }
                    q_mat.nrows() == n && q_mat.ncols() == n && q.len() == n
                }
                Constraint::Linear { a, .. } => a.len() == n,
            };
            if !ok {
                return Err(Error::Contract(
                    "constraint dimensions do not match the variable".into(),
                ));
            }
        }
        if !has_delta {
            return Err(Error::Contract(
                "no constraint bounds delta; the epigraph problem is unbounded".into(),
            ));
        }
        Ok(())
    }

    fn lowered(&self) -> IpmProblem {
        let mut c = DVector::zeros(self.dim + 1);
        c[self.dim] = -1.0;
        IpmProblem {
            c,
            constraints: self.constraints.iter().map(|k| k.lower(self.dim)).collect(),
        }
    }

    /// Largest `delta` the constraints admit at `z`.
    pub fn delta_bound(&self, z: &DVector<f64>) -> f64 {
        self.constraints
            .iter()
            .filter_map(|c| c.delta_bound(z))
            .fold(f64::INFINITY, f64::min)
    }

    fn lift(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut y = z.clone().resize_vertically(self.dim + 1, 0.0);
        y[self.dim] = self.delta_bound(z) - 1.0;
        y
    }

    /// Phase-one slack with `delta` pinned to `delta`: a value `<= 0` certifies
    /// that the pinned problem is feasible.
    pub fn feasibility_slack(&self, z: &DVector<f64>, delta: f64) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(z, delta))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Max of stationarity, primal feasibility, dual feasibility and
/// complementary slackness for `candidate` (variables, delta, multipliers).
pub fn kkt_residual(problem: &ConicSubproblem, candidate: &SubproblemSolution) -> f64 {
    let n = problem.dim;
    if candidate.variables.len() != n || candidate.multipliers.len() != problem.constraints.len() {
        return f64::INFINITY;
    }
    let lowered = problem.lowered();
    let mut y = DVector::from_column_slice(&candidate.variables).resize_vertically(n + 1, 0.0);
    y[n] = candidate.delta;
    let mut stationarity = lowered.c.clone();
    let mut primal: f64 = 0.0;
    let mut dual: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for (con, &l) in lowered.constraints.iter().zip(&candidate.multipliers) {
        let f = con.value(&y);
        stationarity.axpy(l, &con.gradient(&y), 1.0);
        primal = primal.max(f);
        dual = dual.max(-l);
        comp = comp.max((l * f).abs());
    }
    stationarity.amax().max(primal).max(dual).max(comp)
}

fn certify(
    problem: &ConicSubproblem,
    z: DVector<f64>,
    delta: f64,
    multipliers: Vec<f64>,
    iterations: usize,
) -> SubproblemSolution {
    let residuals = problem
        .constraints
        .iter()
        .map(|c| c.value(&z, delta).max(0.0))
        .collect();
    let mut sol = SubproblemSolution {
        variables: z.iter().copied().collect(),
        delta,
        status: SolveStatus::MaxIter,
        kkt_residual: f64::INFINITY,
        constraint_residuals: residuals,
        multipliers,
        iterations,
    };
    sol.kkt_residual = kkt_residual(problem, &sol);
    if sol.kkt_residual <= KKT_TOL && sol.max_violation() <= CONSTRAINT_TOL {
        sol.status = SolveStatus::Optimal;
    }
    sol
}

/// Solves the conic template with the shared primal-dual routine.
pub fn solve_conic(problem: &ConicSubproblem) -> Result<SubproblemSolution> {
    problem.check()?;
    let settings = IpmSettings::default();
    let lowered = problem.lowered();
    let out = ipm::primal_dual(&lowered, problem.lift(&problem.start), &settings);
    let n = problem.dim;
    let z = out.y.rows(0, n).into_owned();
    let delta = out.y[n];
    let mut sol = certify(
        problem,
        z,
        delta,
        out.lambda.iter().copied().collect(),
        out.iterations,
    );
    if !out.converged && sol.max_violation() > CONSTRAINT_TOL {
        sol.status = SolveStatus::Infeasible;
    }
    Ok(sol)
}

/// Weight subproblem; `variables` of the result use the interleaved real layout.
pub fn solve_awv(problem: &ConicSubproblem) -> Result<SubproblemSolution> {
    if !problem.dim.is_multiple_of(2) {
        return Err(Error::Contract(
            "weight subproblem needs an even real dimension".into(),
        ));
    }
    solve_conic(problem)
}

/// Position subproblem; `variables` of the result is the new APV.
pub fn solve_apv(problem: &ConicSubproblem) -> Result<SubproblemSolution> {
    solve_conic(problem)
}

pub fn awv_to_real(w: &[Complex64]) -> DVector<f64> {
    DVector::from_iterator(2 * w.len(), w.iter().flat_map(|c| [c.re, c.im]))
}

pub fn real_to_awv(z: &[f64]) -> Vec<Complex64> {
    z.chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect()
}

/// Rows `[Re(a^H w); Im(a^H w)]` of the real map `z -> a^H w`.
fn inner_product_rows(alpha: &[Complex64]) -> DMatrix<f64> {
    let n = alpha.len();
    let mut m = DMatrix::zeros(2, 2 * n);
    for (i, a) in alpha.iter().enumerate() {
        // conj(a) w = (ar wr + ai wi) + j (ar wi - ai wr)
        m[(0, 2 * i)] = a.re;
        m[(0, 2 * i + 1)] = a.im;
        m[(1, 2 * i)] = -a.im;
        m[(1, 2 * i + 1)] = a.re;
    }
    m
}

/// Weight subproblem at fixed positions `x` and height `h`, linearized at `w_i`.
pub fn awv_subproblem(
    scenario: &Scenario,
    w_i: &[Complex64],
    x: &[f64],
    h: f64,
) -> Result<ConicSubproblem> {
    let n = x.len();
    let mut constraints = Vec::new();
    for angle in scenario.su_angles(h)? {
        let lin = awv_linear_surrogate(w_i, x, angle, scenario.wavelength)?;
        constraints.push(Constraint::AffineLower {
            g: DVector::from_vec(lin.real_gradient()),
            d: lin.offset,
        });
    }
    for angle in scenario.pu_angles(h)? {
        let alpha = steering_vector(x, angle, scenario.wavelength)?;
        constraints.push(Constraint::Norm {
            m: inner_product_rows(&alpha),
            v: DVector::zeros(2),
            r: scenario.interference_cap.sqrt(),
        });
    }
    constraints.push(Constraint::Norm {
        m: DMatrix::identity(2 * n, 2 * n),
        v: DVector::zeros(2 * n),
        r: 1.0,
    });
    Ok(ConicSubproblem {
        dim: 2 * n,
        constraints,
        start: awv_to_real(w_i),
    })
}

/// Position subproblem at fixed weights `w` and height `h`, expanded at `x_i`.
pub fn apv_subproblem(
    scenario: &Scenario,
    w: &[Complex64],
    x_i: &[f64],
    h: f64,
) -> Result<ConicSubproblem> {
    let n = x_i.len();
    let lam = scenario.wavelength;
    let mut constraints = Vec::new();
    for angle in scenario.su_angles(h)? {
        let q = position_lower_surrogate(w, x_i, spatial_frequency(angle, lam))?;
        // q(x) >= delta
        constraints.push(Constraint::Quadratic {
            q_mat: -q.a,
            q: -q.b,
            s: -q.c,
            delta_coeff: 1.0,
        });
    }
    for angle in scenario.pu_angles(h)? {
        let freq = spatial_frequency(angle, lam);
        let up = position_upper_surrogate(w, x_i, freq)?;
        constraints.push(Constraint::Quadratic {
            q_mat: up.a,
            q: up.b,
            s: up.c - scenario.interference_cap,
            delta_coeff: 0.0,
        });
        let nn = position_nonneg_surrogate(w, x_i, freq)?;
        constraints.push(Constraint::Quadratic {
            q_mat: -nn.a,
            q: -nn.b,
            s: -nn.c,
            delta_coeff: 0.0,
        });
    }
    for i in 1..n {
        let mut a = DVector::zeros(n);
        a[i - 1] = 1.0;
        a[i] = -1.0;
        constraints.push(Constraint::Linear {
            a,
            b: -scenario.min_spacing,
        });
    }
    let half = scenario.aperture / 2.0;
    for i in 0..n {
        let mut a = DVector::zeros(n);
        a[i] = 1.0;
        constraints.push(Constraint::Linear {
            a: a.clone(),
            b: half,
        });
        constraints.push(Constraint::Linear { a: -a, b: half });
    }
    Ok(ConicSubproblem {
        dim: n,
        constraints,
        start: DVector::from_column_slice(x_i),
    })
}

/// Height subproblem at fixed `w` and `x`, expanded at `h_i`.
pub fn height_subproblem(
    scenario: &Scenario,
    w: &[Complex64],
    x: &[f64],
    h_i: f64,
    h_max: f64,
    trust_radius: Option<f64>,
) -> Result<HeightSubproblem> {
    let lam = scenario.wavelength;
    let lower_quads = scenario
        .su_positions
        .iter()
        .map(|&s| height_lower_surrogate(w, x, s, h_i, lam))
        .collect::<Result<Vec<_>>>()?;
    let upper_quads = scenario
        .pu_positions
        .iter()
        .map(|&p| height_upper_surrogate(w, x, p, h_i, lam))
        .collect::<Result<Vec<_>>>()?;
    Ok(HeightSubproblem {
        lower_quads,
        upper_quads,
        h_min: scenario.min_height,
        h_max,
        cap: scenario.interference_cap,
        trust_center: trust_radius.map(|_| h_i),
        trust_radius,
    })
}
