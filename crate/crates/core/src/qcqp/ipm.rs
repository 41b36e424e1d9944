//! Primal-dual interior-point method for
//!
//! ```text
//! minimize    c^T y
//! subject to  f_i(y) = 1/2 y^T P_i y + q_i^T y + r_i <= 0,   P_i PSD
//! ```
//!
//! in slack form `f(y) + s = 0`, `s, lambda > 0`, with Mehrotra
//! predictor-corrector steps. The centering parameter is kept at or above
//! `1 / reduction`, so the complementarity target drops by at most that
//! factor per step. The start only needs `f` defined, not strict
//! feasibility: slacks are initialised to `max(-f_i(y0), slack_floor)` and the
//! primal residual is driven to zero along the way.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct QuadForm {
    pub p: Option<DMatrix<f64>>,
    pub q: DVector<f64>,
    pub r: f64,
}

impl QuadForm {
    pub fn linear(q: DVector<f64>, r: f64) -> Self {
        Self { p: None, q, r }
    }

    pub fn value(&self, y: &DVector<f64>) -> f64 {
        let lin = self.q.dot(y) + self.r;
        match &self.p {
            Some(p) => 0.5 * y.dot(&(p * y)) + lin,
            None => lin,
        }
    }

    pub fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.p {
            Some(p) => p * y + &self.q,
            None => self.q.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IpmProblem {
    pub c: DVector<f64>,
    pub constraints: Vec<QuadForm>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    /// Largest reduction of the complementarity target per step.
    pub reduction: f64,
    pub max_iter: usize,
    /// Target for the scaled KKT merit.
    pub tol: f64,
    pub slack_floor: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            reduction: 10.0,
            max_iter: 100,
            tol: 1e-10,
            slack_floor: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutcome {
    pub y: DVector<f64>,
    pub lambda: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const STEP_FRACTION: f64 = 0.99;

fn solve_spd(mut h: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    let scale = h.diagonal().amax().max(1.0);
    for k in 0..6 {
        let ridge = scale * 1e-14 * 100f64.powi(k);
        for i in 0..h.nrows() {
            h[(i, i)] += ridge;
        }
        if let Some(ch) = h.clone().cholesky() {
            return Some(ch.solve(rhs));
        }
    }
    h.lu().solve(rhs)
}

/// Largest step in `(0, 1]` keeping `v + a dv >= 0`.
fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(1.0, f64::min)
}

struct Direction {
    dy: DVector<f64>,
    ds: DVector<f64>,
    dl: DVector<f64>,
}

/// Runs the iteration from `y0` and returns the iterate with the best merit.
pub(crate) fn primal_dual(problem: &IpmProblem, y0: DVector<f64>, settings: &IpmSettings) -> IpmOutcome {
    let m = problem.constraints.len();
    let d = problem.c.len();
    let mut y = y0;
    let mut s = DVector::from_iterator(
        m,
        problem
            .constraints
            .iter()
            .map(|c| (-c.value(&y)).max(settings.slack_floor)),
    );
    let mut lambda = DVector::from_element(m, 1.0);
    let sigma_min = 1.0 / settings.reduction;

    let mut best = (f64::INFINITY, y.clone(), lambda.clone());
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let f = DVector::from_iterator(m, problem.constraints.iter().map(|c| c.value(&y)));
        let grads: Vec<DVector<f64>> = problem.constraints.iter().map(|c| c.gradient(&y)).collect();
        let mut rd = problem.c.clone();
        let mut scale = 1.0 + problem.c.amax();
        for (g, &l) in grads.iter().zip(lambda.iter()) {
            rd.axpy(l, g, 1.0);
            scale = scale.max(1.0 + l * g.amax());
        }
        let rp = &f + &s;
        let mu = if m == 0 { 0.0 } else { s.dot(&lambda) / m as f64 };
        let merit = (rd.amax() / scale).max(rp.amax()).max(mu);
        if merit.is_finite() && merit < best.0 {
            best = (merit, y.clone(), lambda.clone());
        }
        if merit <= settings.tol {
            converged = true;
            break;
        }
        if iterations >= settings.max_iter || !merit.is_finite() {
            break;
        }
        iterations += 1;

        // Reduced system (H + G^T W G) dy = -rd - G^T (W rp - rc / s),
        // H = sum l_i P_i, W = diag(l / s).
        let w = lambda.component_div(&s);
        let mut k = DMatrix::<f64>::zeros(d, d);
        for (i, con) in problem.constraints.iter().enumerate() {
            if let Some(p) = &con.p {
                k += p * lambda[i];
            }
            k.ger(w[i], &grads[i], &grads[i], 1.0);
        }
        let direction = |rc: &DVector<f64>| -> Option<Direction> {
            let mut rhs = -&rd;
            for i in 0..m {
                rhs.axpy(-(w[i] * rp[i] - rc[i] / s[i]), &grads[i], 1.0);
            }
            let dy = solve_spd(k.clone(), &rhs)?;
            let gdy = DVector::from_iterator(m, grads.iter().map(|g| g.dot(&dy)));
            let dl = DVector::from_iterator(m, (0..m).map(|i| w[i] * (gdy[i] + rp[i]) - rc[i] / s[i]));
            let ds = -&rp - gdy;
            Some(Direction { dy, ds, dl })
        };

        let rc_aff = s.component_mul(&lambda);
        let Some(aff) = direction(&rc_aff) else {
            break;
        };
        let a_aff = max_step(&s, &aff.ds).min(max_step(&lambda, &aff.dl));
        let mu_aff = (&s + &aff.ds * a_aff).dot(&(&lambda + &aff.dl * a_aff)) / m as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(sigma_min, 1.0);
        let rc = rc_aff + aff.ds.component_mul(&aff.dl) - DVector::from_element(m, sigma * mu);
        let Some(dir) = direction(&rc) else {
            break;
        };
        let a = (STEP_FRACTION * max_step(&s, &dir.ds).min(max_step(&lambda, &dir.dl))).min(1.0);
        y += &dir.dy * a;
        s += &dir.ds * a;
        lambda += &dir.dl * a;
    }

    let (_, y, lambda) = best;
    IpmOutcome {
        y,
        lambda,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// minimize -y_0 - y_1 subject to ||y||^2 <= 1
    fn disc_problem() -> IpmProblem {
        IpmProblem {
            c: DVector::from_vec(vec![-1.0, -1.0]),
            constraints: vec![QuadForm {
                p: Some(DMatrix::identity(2, 2) * 2.0),
                q: DVector::zeros(2),
                r: -1.0,
            }],
        }
    }

    #[test]
    fn linear_objective_on_disc() {
        let out = primal_dual(&disc_problem(), DVector::zeros(2), &IpmSettings::default());
        assert!(out.converged);
        let v = 1.0 / 2f64.sqrt();
        assert!((out.y[0] - v).abs() < 1e-8 && (out.y[1] - v).abs() < 1e-8);
        assert!((out.lambda[0] - v).abs() < 1e-8);
        assert!(out.iterations <= 100);
    }

    #[test]
    fn infeasible_start_is_recovered() {
        let out = primal_dual(
            &disc_problem(),
            DVector::from_vec(vec![3.0, -2.0]),
            &IpmSettings::default(),
        );
        assert!(out.converged);
        assert!(disc_problem().constraints[0].value(&out.y) < 1e-9);
    }

    #[test]
    fn box_constrained_lp() {
        // minimize y_0 - 2 y_1 on [-1, 1]^2
        let mk = |i: usize, s: f64| {
            let mut q = DVector::zeros(2);
            q[i] = s;
            QuadForm::linear(q, -1.0)
        };
        let p = IpmProblem {
            c: DVector::from_vec(vec![1.0, -2.0]),
            constraints: vec![mk(0, 1.0), mk(0, -1.0), mk(1, 1.0), mk(1, -1.0)],
        };
        let out = primal_dual(&p, DVector::zeros(2), &IpmSettings::default());
        assert!(out.converged);
        assert!((out.y[0] + 1.0).abs() < 1e-8);
        assert!((out.y[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn empty_feasible_set_does_not_converge() {
        // y_0 <= -1 and -y_0 <= -1
        let p = IpmProblem {
            c: DVector::from_vec(vec![1.0]),
            constraints: vec![
                QuadForm::linear(DVector::from_vec(vec![1.0]), 1.0),
                QuadForm::linear(DVector::from_vec(vec![-1.0]), 1.0),
            ],
        };
        let out = primal_dual(&p, DVector::zeros(1), &IpmSettings::default());
        assert!(!out.converged);
        assert!(out.iterations <= 100);
    }
}
