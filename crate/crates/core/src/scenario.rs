//! Problem instance, steering geometry and exact beamforming gain.
//!
//! Users sit on the ground line `z = 0` at signed x-coordinates; the UAV hovers
//! above the origin at height `h` and carries a line array of movable antennas
//! along the x-axis. The steering angle toward a user at ground coordinate `g`
//! is `arccos(-g / sqrt(h^2 + g^2))`, measured from the +x axis with the minus
//! sign on the coordinate kept as-is.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, FEASIBILITY_TOL};

/// Immutable problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Ground x-coordinates of the primary users (meters).
    pub pu_positions: Vec<f64>,
    /// Ground x-coordinates of the secondary users (meters).
    pub su_positions: Vec<f64>,
    /// Carrier wavelength (meters).
    pub wavelength: f64,
    /// Length of the line region; antennas live in `[-D/2, D/2]`.
    pub aperture: f64,
    /// Minimum distance between adjacent antennas.
    pub min_spacing: f64,
    /// Minimum hovering height.
    pub min_height: f64,
    /// Interference cap on every primary-user gain (linear scale).
    pub interference_cap: f64,
    pub num_antennas: usize,
    /// Outer-loop convergence precision on the max-min gain.
    pub tolerance: f64,
}

impl Default for Scenario {
    /// Two primary users, two secondary users, eight antennas at half-wavelength
    /// minimum spacing in an eight-spacing aperture.
    fn default() -> Self {
        let wavelength = 0.1;
        let min_spacing = wavelength / 2.0;
        Self {
            pu_positions: vec![-56.71, 17.32],
            su_positions: vec![-11.91, 5.77],
            wavelength,
            aperture: 8.0 * min_spacing,
            min_spacing,
            min_height: 10.0,
            interference_cap: 0.1,
            num_antennas: 8,
            tolerance: 1e-3,
        }
    }
}

impl Scenario {
    /// Checks every field invariant. Aperture infeasibility is reported as its
    /// own variant so callers can tell it apart from malformed input.
    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(Error::InvalidScenario {
                field: "num_antennas",
                reason: "must be at least 1".into(),
            });
        }
        let positive = [
            ("wavelength", self.wavelength),
            ("aperture", self.aperture),
            ("min_spacing", self.min_spacing),
            ("min_height", self.min_height),
            ("interference_cap", self.interference_cap),
            ("tolerance", self.tolerance),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidScenario {
                    field,
                    reason: format!("must be finite and strictly positive, got {value}"),
                });
            }
        }
        if self.su_positions.is_empty() {
            return Err(Error::InvalidScenario {
                field: "su_positions",
                reason: "at least one secondary user is required".into(),
            });
        }
        for (field, list) in [
            ("su_positions", &self.su_positions),
            ("pu_positions", &self.pu_positions),
        ] {
            if let Some(bad) = list.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidScenario {
                    field,
                    reason: format!("non-finite coordinate {bad}"),
                });
            }
        }
        let span = (self.num_antennas as f64 - 1.0) * self.min_spacing;
        if span > self.aperture {
            return Err(Error::InfeasibleAperture {
                n: self.num_antennas,
                min_spacing: self.min_spacing,
                aperture: self.aperture,
            });
        }
        Ok(())
    }

    /// Steering angles toward every secondary user at height `h`.
    pub fn su_angles(&self, h: f64) -> Result<Vec<f64>> {
        self.su_positions
            .iter()
            .map(|&s| steering_angle(s, h))
            .collect()
    }

    /// Steering angles toward every primary user at height `h`.
    pub fn pu_angles(&self, h: f64) -> Result<Vec<f64>> {
        self.pu_positions
            .iter()
            .map(|&p| steering_angle(p, h))
            .collect()
    }

    /// Exact gain toward every secondary user.
    pub fn su_gains(&self, config: &AntennaConfig) -> Result<Vec<f64>> {
        self.su_angles(config.height)?
            .into_iter()
            .map(|a| beamforming_gain(&config.awv, &config.apv, a, self.wavelength))
            .collect()
    }

    /// Exact gain toward every primary user.
    pub fn pu_gains(&self, config: &AntennaConfig) -> Result<Vec<f64>> {
        self.pu_angles(config.height)?
            .into_iter()
            .map(|a| beamforming_gain(&config.awv, &config.apv, a, self.wavelength))
            .collect()
    }

    /// The max-min objective: smallest exact gain over the secondary users.
    pub fn min_su_gain(&self, config: &AntennaConfig) -> Result<f64> {
        Ok(self
            .su_gains(config)?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }

    /// Largest exact gain over the primary users; zero when there are none.
    pub fn max_pu_gain(&self, config: &AntennaConfig) -> Result<f64> {
        Ok(self.pu_gains(config)?.into_iter().fold(0.0, f64::max))
    }

    /// Default upper end of the height search bracket.
    pub fn default_max_height(&self) -> f64 {
        let far = self
            .pu_positions
            .iter()
            .chain(&self.su_positions)
            .fold(self.min_height, |acc, v| acc.max(v.abs()));
        20.0 * far
    }

    /// Copy of the scenario keeping only the secondary user at `index`.
    pub fn with_single_su(&self, index: usize) -> Result<Scenario> {
        let s = *self.su_positions.get(index).ok_or_else(|| {
            Error::Domain(format!(
                "secondary user {index} out of range (L = {})",
                self.su_positions.len()
            ))
        })?;
        Ok(Scenario {
            su_positions: vec![s],
            ..self.clone()
        })
    }
}

/// A candidate solution: positions, weights and hovering height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaConfig {
    pub apv: Vec<f64>,
    pub awv: Vec<Complex64>,
    pub height: f64,
}

impl AntennaConfig {
    pub fn awv_norm(&self) -> f64 {
        l2_norm(&self.awv)
    }
}

pub(crate) fn l2_norm(w: &[Complex64]) -> f64 {
    w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Steering angle toward a ground user, in `[0, pi]`.
pub fn steering_angle(ground_x: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("height must be positive, got {h}")));
    }
    let c = (-ground_x / h.hypot(ground_x)).clamp(-1.0, 1.0);
    Ok(c.acos())
}

/// Phase progression per meter along the array toward `angle`.
pub fn spatial_frequency(angle: f64, wavelength: f64) -> f64 {
    2.0 * PI / wavelength * angle.cos()
}

/// Far-field steering vector `exp(j 2pi/lambda x_n cos(angle))`.
pub fn steering_vector(apv: &[f64], angle: f64, wavelength: f64) -> Result<Vec<Complex64>> {
    if apv.is_empty() {
        return Err(Error::Domain("empty antenna position vector".into()));
    }
    if !(wavelength > 0.0) {
        return Err(Error::Domain(format!(
            "wavelength must be positive, got {wavelength}"
        )));
    }
    let freq = spatial_frequency(angle, wavelength);
    Ok(apv
        .iter()
        .map(|&x| Complex64::from_polar(1.0, freq * x))
        .collect())
}

fn check_lengths(awv: &[Complex64], apv: &[f64]) -> Result<()> {
    if apv.is_empty() {
        return Err(Error::Domain("empty antenna position vector".into()));
    }
    if awv.len() != apv.len() {
        return Err(Error::Dimension {
            what: "antenna weights vs positions",
            expected: apv.len(),
            got: awv.len(),
        });
    }
    Ok(())
}

/// `|w^H alpha(x, angle)|^2`.
pub fn beamforming_gain(awv: &[Complex64], apv: &[f64], angle: f64, wavelength: f64) -> Result<f64> {
    check_lengths(awv, apv)?;
    let alpha = steering_vector(apv, angle, wavelength)?;
    let inner: Complex64 = awv.iter().zip(&alpha).map(|(w, a)| w.conj() * a).sum();
    Ok(inner.norm_sqr())
}

/// Phase of a weight, with the phase of an exact zero defined as 0.
pub(crate) fn weight_phase(w: Complex64) -> f64 {
    if w == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        w.arg()
    }
}

/// The same gain expanded as
/// `sum_n sum_m |w_n||w_m| cos(k (x_n - x_m) cos(angle) - (arg w_n - arg w_m))`.
pub fn gain_double_sum(awv: &[Complex64], apv: &[f64], angle: f64, wavelength: f64) -> Result<f64> {
    check_lengths(awv, apv)?;
    if !(wavelength > 0.0) {
        return Err(Error::Domain(format!(
            "wavelength must be positive, got {wavelength}"
        )));
    }
    let freq = spatial_frequency(angle, wavelength);
    let amp: Vec<f64> = awv.iter().map(|w| w.norm()).collect();
    let phase: Vec<f64> = awv.iter().copied().map(weight_phase).collect();
    let mut total = 0.0;
    for n in 0..apv.len() {
        for m in 0..apv.len() {
            let arg = freq * (apv[n] - apv[m]) - (phase[n] - phase[m]);
            total += amp[n] * amp[m] * arg.cos();
        }
    }
    Ok(total)
}

/// Gain of a configuration over a list of angles.
pub fn beam_pattern(config: &AntennaConfig, angles: &[f64], wavelength: f64) -> Result<Vec<f64>> {
    if angles.is_empty() {
        return Err(Error::Domain("empty angle grid".into()));
    }
    angles
        .iter()
        .map(|&a| beamforming_gain(&config.awv, &config.apv, a, wavelength))
        .collect()
}

/// Constraint families checked by [`validate_config`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// Antenna vectors have the wrong length.
    Dimension,
    /// Adjacent antennas closer than the minimum spacing.
    Spacing,
    /// Antenna left of `-D/2`.
    ApertureLower,
    /// Antenna right of `D/2`.
    ApertureUpper,
    /// Weight vector norm above 1.
    Power,
    /// Primary-user gain above the cap.
    Interference,
    /// UAV below the minimum height.
    Height,
}

/// One violated constraint. `residual` is the positive amount of violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ConstraintKind,
    pub index: Option<usize>,
    pub residual: f64,
}

/// Lists every violated constraint; empty iff the configuration is feasible
/// within [`FEASIBILITY_TOL`].
pub fn validate_config(scenario: &Scenario, config: &AntennaConfig) -> Vec<Violation> {
    let tol = FEASIBILITY_TOL;
    let n = scenario.num_antennas;
    let mut out = Vec::new();
    let mut push = |kind, index, residual: f64| {
        if residual > tol || residual.is_nan() {
            out.push(Violation {
                kind,
                index,
                residual,
            });
        }
    };

    if config.apv.len() != n {
        push(
            ConstraintKind::Dimension,
            Some(0),
            (config.apv.len() as f64 - n as f64).abs(),
        );
    }
    if config.awv.len() != n {
        push(
            ConstraintKind::Dimension,
            Some(1),
            (config.awv.len() as f64 - n as f64).abs(),
        );
    }
    for (i, pair) in config.apv.windows(2).enumerate() {
        push(
            ConstraintKind::Spacing,
            Some(i + 1),
            scenario.min_spacing - (pair[1] - pair[0]),
        );
    }
    let half = scenario.aperture / 2.0;
    for (i, &x) in config.apv.iter().enumerate() {
        push(ConstraintKind::ApertureLower, Some(i), -half - x);
        push(ConstraintKind::ApertureUpper, Some(i), x - half);
    }
    push(ConstraintKind::Power, None, config.awv_norm() - 1.0);
    push(
        ConstraintKind::Height,
        None,
        scenario.min_height - config.height,
    );
    if config.apv.len() == config.awv.len() && !config.apv.is_empty() {
        if let Ok(angles) = scenario.pu_angles(config.height) {
            for (k, angle) in angles.into_iter().enumerate() {
                if let Ok(g) =
                    beamforming_gain(&config.awv, &config.apv, angle, scenario.wavelength)
                {
                    push(
                        ConstraintKind::Interference,
                        Some(k),
                        g - scenario.interference_cap,
                    );
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matched(apv: &[f64], angle: f64, wavelength: f64) -> Vec<Complex64> {
        let n = apv.len() as f64;
        steering_vector(apv, angle, wavelength)
            .unwrap()
            .into_iter()
            .map(|a| a / n.sqrt())
            .collect()
    }

    #[test]
    fn overhead_user_is_broadside() {
        assert_eq!(steering_angle(0.0, 10.0).unwrap(), PI / 2.0);
        assert_eq!(steering_angle(0.0, 123.0).unwrap(), PI / 2.0);
    }

    #[test]
    fn first_secondary_user_angle() {
        // arccos(11.91 / hypot(10, 11.91))
        let expected = (11.91f64 / (100.0f64 + 11.91 * 11.91).sqrt()).acos();
        let got = steering_angle(-11.91, 10.0).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.6984).abs() < 1e-4);
    }

    #[test]
    fn mirrored_users_sum_to_pi() {
        for c in [0.3, 5.0, 17.32, 56.71] {
            let a = steering_angle(c, 12.0).unwrap();
            let b = steering_angle(-c, 12.0).unwrap();
            assert!((a + b - PI).abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_height_is_rejected() {
        assert!(matches!(steering_angle(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(steering_angle(1.0, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn steering_vector_special_cases() {
        let lam = 0.1;
        let ones = steering_vector(&[-0.2, 0.03, 0.4], PI / 2.0, lam).unwrap();
        for a in ones {
            assert!((a - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
        let single = steering_vector(&[0.0], 1.1, lam).unwrap();
        assert_eq!(single, vec![Complex64::new(1.0, 0.0)]);
        let flip = steering_vector(&[lam / 2.0], 0.0, lam).unwrap();
        assert!((flip[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(steering_vector(&[], 0.3, lam).is_err());
    }

    #[test]
    fn matched_weights_reach_full_gain() {
        let lam = 0.1;
        let apv = [-0.175, -0.1, -0.02, 0.05, 0.11, 0.19];
        let angle = 0.83;
        let w = matched(&apv, angle, lam);
        assert!((l2_norm(&w) - 1.0).abs() < 1e-12);
        let g = beamforming_gain(&w, &apv, angle, lam).unwrap();
        assert!((g - apv.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn single_element_gain_is_one_everywhere() {
        let w = [Complex64::new(1.0, 0.0)];
        for angle in [0.0, 0.4, 1.57, 3.0] {
            let g = beamforming_gain(&w, &[0.13], angle, 0.1).unwrap();
            assert!((g - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let w = [Complex64::new(1.0, 0.0); 2];
        assert!(matches!(
            beamforming_gain(&w, &[0.0, 0.1, 0.2], 0.5, 0.1),
            Err(Error::Dimension { .. })
        ));
        assert!(gain_double_sum(&w, &[0.0], 0.5, 0.1).is_err());
    }

    #[test]
    fn double_sum_special_cases() {
        let w = [Complex64::new(0.3, -0.4)];
        let g = gain_double_sum(&w, &[0.07], 0.9, 0.1).unwrap();
        assert!((g - 0.25).abs() < 1e-15);

        // a zero weight drops its row and column
        let w = [
            Complex64::new(0.5, 0.1),
            Complex64::new(0.0, 0.0),
            Complex64::new(-0.2, 0.3),
        ];
        let apv = [-0.1, 0.0, 0.08];
        let full = gain_double_sum(&w, &apv, 1.2, 0.1).unwrap();
        let reduced =
            gain_double_sum(&[w[0], w[2]], &[apv[0], apv[2]], 1.2, 0.1).unwrap();
        assert!((full - reduced).abs() < 1e-14);
    }

    #[test]
    fn double_sum_matches_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..=16);
            let apv: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let awv: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let angle = rng.gen_range(0.0..PI);
            let a = beamforming_gain(&awv, &apv, angle, 0.1).unwrap();
            let b = gain_double_sum(&awv, &apv, angle, 0.1).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn beam_pattern_single_angle_and_peak() {
        let lam = 0.1;
        let apv: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5) * 0.05).collect();
        let target = 1.0;
        let cfg = AntennaConfig {
            awv: matched(&apv, target, lam),
            apv: apv.clone(),
            height: 10.0,
        };
        let single = beam_pattern(&cfg, &[0.4], lam).unwrap();
        assert_eq!(
            single,
            vec![beamforming_gain(&cfg.awv, &cfg.apv, 0.4, lam).unwrap()]
        );

        let grid: Vec<f64> = (0..1801).map(|i| PI * i as f64 / 1800.0).collect();
        let pattern = beam_pattern(&cfg, &grid, lam).unwrap();
        let (best, _) = pattern
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let nearest = (0..grid.len())
            .min_by(|&a, &b| {
                (grid[a] - target)
                    .abs()
                    .partial_cmp(&(grid[b] - target).abs())
                    .unwrap()
            })
            .unwrap();
        assert_eq!(best, nearest);
        assert!(beam_pattern(&cfg, &[], lam).is_err());
    }

    fn boundary_config(s: &Scenario) -> AntennaConfig {
        let n = s.num_antennas;
        let apv: Vec<f64> = (0..n)
            .map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * s.min_spacing)
            .collect();
        AntennaConfig {
            apv,
            awv: vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n],
            height: s.min_height,
        }
    }

    #[test]
    fn boundary_feasible_config_has_empty_report() {
        let s = Scenario {
            pu_positions: vec![],
            ..Scenario::default()
        };
        let cfg = boundary_config(&s);
        assert!(validate_config(&s, &cfg).is_empty());
    }

    #[test]
    fn half_spacing_is_one_spacing_violation() {
        let s = Scenario {
            pu_positions: vec![],
            num_antennas: 2,
            ..Scenario::default()
        };
        let d0 = s.min_spacing;
        let cfg = AntennaConfig {
            apv: vec![-d0 / 4.0, d0 / 4.0],
            awv: vec![Complex64::new(0.5, 0.0); 2],
            height: 10.0,
        };
        let report = validate_config(&s, &cfg);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].kind, ConstraintKind::Spacing);
        assert!((report[0].residual - d0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn low_height_is_one_height_violation() {
        let s = Scenario {
            pu_positions: vec![],
            ..Scenario::default()
        };
        let mut cfg = boundary_config(&s);
        cfg.height = s.min_height - 1.0;
        let report = validate_config(&s, &cfg);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].kind, ConstraintKind::Height);
        assert!((report[0].residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interference_and_power_are_reported() {
        let s = Scenario::default();
        let mut cfg = boundary_config(&s);
        cfg.awv.iter_mut().for_each(|w| *w *= 2.0);
        let report = validate_config(&s, &cfg);
        assert!(report.iter().any(|v| v.kind == ConstraintKind::Power));
        let g = s.max_pu_gain(&cfg).unwrap();
        assert_eq!(
            report
                .iter()
                .any(|v| v.kind == ConstraintKind::Interference),
            g > s.interference_cap + FEASIBILITY_TOL
        );
    }

    #[test]
    fn scenario_validation() {
        assert!(Scenario::default().validate().is_ok());
        let bad = Scenario {
            num_antennas: 0,
            ..Scenario::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidScenario {
                field: "num_antennas",
                ..
            })
        ));
        let tight = Scenario {
            num_antennas: 10,
            ..Scenario::default()
        };
        assert!(matches!(
            tight.validate(),
            Err(Error::InfeasibleAperture { .. })
        ));
        let no_su = Scenario {
            su_positions: vec![],
            ..Scenario::default()
        };
        assert!(no_su.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn weights(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
                .prop_map(|v| v.into_iter().map(|(r, i)| Complex64::new(r, i)).collect())
        }

        proptest! {
            #[test]
            fn gain_is_bounded_by_cauchy_schwarz(
                (apv, awv) in (1usize..=16).prop_flat_map(|n| {
                    (prop::collection::vec(-0.5f64..0.5, n), weights(n))
                }),
                angle in 0.0f64..PI,
            ) {
                let g = beamforming_gain(&awv, &apv, angle, 0.1).unwrap();
                let bound = apv.len() as f64 * l2_norm(&awv).powi(2);
                prop_assert!(g >= 0.0);
                prop_assert!(g <= bound * (1.0 + 1e-12) + 1e-12);
            }

            #[test]
            fn steering_vector_has_unit_modulus(
                apv in prop::collection::vec(-1.0f64..1.0, 1..20),
                angle in 0.0f64..PI,
            ) {
                for a in steering_vector(&apv, angle, 0.1).unwrap() {
                    prop_assert!((a.norm() - 1.0).abs() < 1e-12);
                }
            }

            #[test]
            fn angle_increases_in_ground_coordinate(
                a in -100.0f64..100.0,
                delta in 0.01f64..50.0,
                h in 0.5f64..200.0,
            ) {
                let lo = steering_angle(a, h).unwrap();
                let hi = steering_angle(a + delta, h).unwrap();
                prop_assert!(hi > lo);
                prop_assert_eq!(steering_angle(0.0, h).unwrap(), PI / 2.0);
            }
        }
    }
}
