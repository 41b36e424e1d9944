//! Successive-convex-approximation bounds on the beamforming gain.
//!
//! The gain toward a fixed angle expands as `sum_{n,m} kappa_nm cos(f_nm)` with
//! `kappa_nm = |w_n||w_m|`. Around an expansion point each `cos(f_nm)` is
//! replaced by its second-order Taylor model with the curvature term swapped
//! for a bound on its magnitude; the sign of that term picks the bound
//! direction. Every quadratic surrogate in this module (height lower/upper,
//! position lower/upper/non-negativity) comes out of the single assembler
//! [`assemble`]. The weight surrogate is the first-order expansion of the
//! convex map `w -> |w^H alpha|^2`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::scenario::{spatial_frequency, steering_vector, weight_phase};
use crate::{Error, Result};

/// `a h^2 + b h + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarQuadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ScalarQuadratic {
    pub fn eval(&self, h: f64) -> f64 {
        (self.a * h + self.b) * h + self.c
    }

    pub fn derivative(&self, h: f64) -> f64 {
        2.0 * self.a * h + self.b
    }

    pub fn constant(c: f64) -> Self {
        Self { a: 0.0, b: 0.0, c }
    }
}

/// `1/2 x^T A x + b^T x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorQuadratic {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

impl VectorQuadratic {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        0.5 * x.dot(&(&self.a * &x)) + self.b.dot(&x) + self.c
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let x = DVector::from_column_slice(x);
        &self.a * &x + &self.b
    }

    /// Largest absolute entry of `A` minus its transpose.
    pub fn asymmetry(&self) -> f64 {
        (&self.a - self.a.transpose()).amax()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        eigenvalues(&self.a).into_iter().fold(f64::MIN, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigenvalues(&self.a).into_iter().fold(f64::MAX, f64::min)
    }

    /// Tolerance for definiteness checks: `1e-9` scaled by the largest entry of `A`.
    pub fn definiteness_tol(&self) -> f64 {
        1e-9 * self.a.amax()
    }

    pub fn is_nsd(&self) -> bool {
        self.max_eigenvalue() <= self.definiteness_tol()
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -self.definiteness_tol()
    }
}

fn eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
}

/// First-order under-estimator of the gain in the weights:
/// `G(w) >= Re(sum_n coeffs_n w_n) + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSurrogate {
    pub coeffs: Vec<Complex64>,
    pub offset: f64,
}

impl LinearSurrogate {
    pub fn eval(&self, w: &[Complex64]) -> f64 {
        self.coeffs
            .iter()
            .zip(w)
            .map(|(c, w)| (c * w).re)
            .sum::<f64>()
            + self.offset
    }

    /// Gradient with respect to `z = [Re w_1, Im w_1, ..., Re w_N, Im w_N]`.
    pub fn real_gradient(&self) -> Vec<f64> {
        self.coeffs.iter().flat_map(|c| [c.re, -c.im]).collect()
    }
}

/// The iterate around which a surrogate is built.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpansionPoint {
    Height(f64),
    Apv(Vec<f64>),
    Awv(Vec<Complex64>),
}

impl ExpansionPoint {
    pub fn kind(&self) -> &'static str {
        match self {
            ExpansionPoint::Height(_) => "height",
            ExpansionPoint::Apv(_) => "apv",
            ExpansionPoint::Awv(_) => "awv",
        }
    }
}

/// Which side of the gain the surrogate sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundDirection {
    Lower,
    Upper,
}

/// One `kappa cos(f)` term, where locally `f - f0 = slope * u^T (z - z0)`
/// and the curvature of `cos(f)` along `u` is bounded by `curvature`.
struct Term {
    kappa: f64,
    phase: f64,
    /// Sparse direction vector `u` as (index, coefficient).
    support: [(usize, f64); 2],
    support_len: usize,
    slope: f64,
    curvature: f64,
}

/// Second-order Taylor assembly of `sum kappa cos(f)` around `point`, with the
/// curvature of every term replaced by its bound in the requested direction.
/// Returns `(A, b, c)` of `1/2 z^T A z + b^T z + c`.
fn assemble(
    point: &[f64],
    terms: impl Iterator<Item = Term>,
    direction: BoundDirection,
) -> VectorQuadratic {
    let dim = point.len();
    let mut value = 0.0;
    let mut grad = DVector::<f64>::zeros(dim);
    let mut curv = DMatrix::<f64>::zeros(dim, dim);
    for t in terms {
        if t.kappa == 0.0 {
            continue;
        }
        value += t.kappa * t.phase.cos();
        let g = -t.kappa * t.phase.sin() * t.slope;
        let h = t.kappa * t.curvature;
        let support = &t.support[..t.support_len];
        for &(i, ui) in support {
            grad[i] += g * ui;
            for &(j, uj) in support {
                curv[(i, j)] += h * ui * uj;
            }
        }
    }
    let z0 = DVector::from_column_slice(point);
    let cz0 = &curv * &z0;
    let quad0 = 0.5 * z0.dot(&cz0);
    let (a, b, c) = match direction {
        // value + g.(z - z0) - 1/2 (z - z0)^T C (z - z0)
        BoundDirection::Lower => (-curv, &grad + &cz0, value - grad.dot(&z0) - quad0),
        BoundDirection::Upper => (curv, &grad - &cz0, value - grad.dot(&z0) + quad0),
    };
    VectorQuadratic { a, b, c }
}

fn check_pair(w: &[Complex64], x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Domain("empty antenna position vector".into()));
    }
    if w.len() != x.len() {
        return Err(Error::Dimension {
            what: "antenna weights vs positions",
            expected: x.len(),
            got: w.len(),
        });
    }
    Ok(())
}

/// Derivatives in `h` of `chi * (-g / sqrt(h^2 + g^2))` for ground coordinate `g`.
pub fn gamma_derivatives(chi_nm: f64, ground: f64, h: f64) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("height must be positive, got {h}")));
    }
    let r2 = h * h + ground * ground;
    let r = r2.sqrt();
    let first = chi_nm * ground * h / (r2 * r);
    let second = chi_nm * ground * (ground * ground - 2.0 * h * h) / (r2 * r2 * r);
    Ok((first, second))
}

fn height_surrogate(
    w: &[Complex64],
    x: &[f64],
    ground: f64,
    h_i: f64,
    wavelength: f64,
    direction: BoundDirection,
) -> Result<ScalarQuadratic> {
    check_pair(w, x)?;
    if !(h_i > 0.0) {
        return Err(Error::Domain(format!(
            "expansion height must be positive, got {h_i}"
        )));
    }
    let k = 2.0 * std::f64::consts::PI / wavelength;
    let cos_angle = -ground / h_i.hypot(ground);
    let amp: Vec<f64> = w.iter().map(|v| v.norm()).collect();
    let phase: Vec<f64> = w.iter().copied().map(weight_phase).collect();
    let n = x.len();
    let mut terms = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let chi = k * (x[i] - x[j]);
            let (d1, d2) = gamma_derivatives(chi, ground, h_i)?;
            terms.push(Term {
                kappa: amp[i] * amp[j],
                phase: chi * cos_angle - (phase[i] - phase[j]),
                support: [(0, 1.0), (0, 0.0)],
                support_len: 1,
                slope: d1,
                curvature: (d1.powi(4) + d2 * d2).sqrt(),
            });
        }
    }
    let q = assemble(&[h_i], terms.into_iter(), direction);
    Ok(ScalarQuadratic {
        a: 0.5 * q.a[(0, 0)],
        b: q.b[0],
        c: q.c,
    })
}

/// Concave quadratic in `h` tangent to the gain toward the secondary user at
/// ground coordinate `su_ground`, expanded at height `h_i`.
pub fn height_lower_surrogate(
    w: &[Complex64],
    x: &[f64],
    su_ground: f64,
    h_i: f64,
    wavelength: f64,
) -> Result<ScalarQuadratic> {
    height_surrogate(w, x, su_ground, h_i, wavelength, BoundDirection::Lower)
}

/// Convex quadratic in `h` tangent to the gain toward a primary user.
pub fn height_upper_surrogate(
    w: &[Complex64],
    x: &[f64],
    pu_ground: f64,
    h_i: f64,
    wavelength: f64,
) -> Result<ScalarQuadratic> {
    height_surrogate(w, x, pu_ground, h_i, wavelength, BoundDirection::Upper)
}

/// `G(w) >= 2 Re{w_i^H a a^H w} - G(w_i)` with `a = alpha(x, angle)`.
pub fn awv_linear_surrogate(
    w_i: &[Complex64],
    x: &[f64],
    angle: f64,
    wavelength: f64,
) -> Result<LinearSurrogate> {
    check_pair(w_i, x)?;
    let alpha = steering_vector(x, angle, wavelength)?;
    // t_i = w_i^H a
    let t_i: Complex64 = w_i.iter().zip(&alpha).map(|(w, a)| w.conj() * a).sum();
    // w_i^H a a^H w = t_i * sum conj(a_n) w_n
    let coeffs = alpha.iter().map(|a| 2.0 * t_i * a.conj()).collect();
    Ok(LinearSurrogate {
        coeffs,
        offset: -t_i.norm_sqr(),
    })
}

fn position_surrogate(
    w: &[Complex64],
    x_i: &[f64],
    spatial_freq: f64,
    direction: BoundDirection,
) -> Result<VectorQuadratic> {
    check_pair(w, x_i)?;
    let amp: Vec<f64> = w.iter().map(|v| v.norm()).collect();
    let phase: Vec<f64> = w.iter().copied().map(weight_phase).collect();
    let n = x_i.len();
    let terms = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| Term {
        kappa: amp[i] * amp[j],
        phase: spatial_freq * (x_i[i] - x_i[j]) - (phase[i] - phase[j]),
        support: [(i, 1.0), (j, -1.0)],
        support_len: if i == j { 0 } else { 2 },
        slope: spatial_freq,
        curvature: spatial_freq * spatial_freq,
    });
    Ok(assemble(x_i, terms, direction))
}

/// Concave global under-estimator of the secondary-user gain in the positions.
/// `spatial_freq` is `2pi/lambda cos(angle)` toward the user.
pub fn position_lower_surrogate(
    w: &[Complex64],
    x_i: &[f64],
    spatial_freq: f64,
) -> Result<VectorQuadratic> {
    position_surrogate(w, x_i, spatial_freq, BoundDirection::Lower)
}

/// Convex global over-estimator of a primary-user gain in the positions.
pub fn position_upper_surrogate(
    w: &[Complex64],
    x_i: &[f64],
    pu_spatial_freq: f64,
) -> Result<VectorQuadratic> {
    position_surrogate(w, x_i, pu_spatial_freq, BoundDirection::Upper)
}

/// Concave under-estimator of a primary-user gain, used as `q(x) >= 0` so the
/// relaxed interference constraint cannot rely on a negative gain.
pub fn position_nonneg_surrogate(
    w: &[Complex64],
    x_i: &[f64],
    pu_spatial_freq: f64,
) -> Result<VectorQuadratic> {
    position_surrogate(w, x_i, pu_spatial_freq, BoundDirection::Lower)
}

/// Convenience: spatial frequency toward a ground user at height `h`.
pub fn user_spatial_frequency(ground: f64, h: f64, wavelength: f64) -> Result<f64> {
    Ok(spatial_frequency(
        crate::scenario::steering_angle(ground, h)?,
        wavelength,
    ))
}
