//! Scenario documents.
//!
//! A scenario is a flat TOML table. Every key is optional:
//!
//! ```toml
//! num_antennas = 8           # N
//! wavelength = 0.1           # lambda, meters
//! min_spacing = 0.05         # D0, defaults to wavelength / 2
//! aperture = 0.4             # D, defaults to num_antennas * min_spacing
//! min_height = 10.0          # H0, meters
//! interference_cap = 0.1     # eta, linear gain
//! tolerance = 1e-3           # outer-loop precision
//! su_positions = [-11.91, 5.77]
//! pu_positions = [-56.71, 17.32]
//! ```
//!
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use uma_core::scenario::Scenario;
use uma_core::Error as CoreError;

use crate::CliError;

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    num_antennas: Option<usize>,
    wavelength: Option<f64>,
    min_spacing: Option<f64>,
    aperture: Option<f64>,
    min_height: Option<f64>,
    interference_cap: Option<f64>,
    tolerance: Option<f64>,
    su_positions: Option<Vec<f64>>,
    pu_positions: Option<Vec<f64>>,
}

/// Command-line values applied on top of the document.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct Overrides {
    pub interference_cap: Option<f64>,
    pub num_antennas: Option<usize>,
    pub min_height: Option<f64>,
}

/// Parses a scenario document with no overrides.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    parse_scenario_with(text, &Overrides::default())
}

pub fn parse_scenario_with(text: &str, overrides: &Overrides) -> Result<Scenario, CliError> {
    let doc: ScenarioDoc = toml::from_str(text).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
    let base = Scenario::default();
    let wavelength = doc.wavelength.unwrap_or(base.wavelength);
    let min_spacing = doc.min_spacing.unwrap_or(wavelength / 2.0);
    let num_antennas = overrides
        .num_antennas
        .or(doc.num_antennas)
        .unwrap_or(base.num_antennas);
    let scenario = Scenario {
        pu_positions: doc.pu_positions.unwrap_or(base.pu_positions),
        su_positions: doc.su_positions.unwrap_or(base.su_positions),
        wavelength,
        aperture: doc.aperture.unwrap_or(num_antennas as f64 * min_spacing),
        min_spacing,
        min_height: overrides
            .min_height
            .or(doc.min_height)
            .unwrap_or(base.min_height),
        interference_cap: overrides
            .interference_cap
            .or(doc.interference_cap)
            .unwrap_or(base.interference_cap),
        num_antennas,
        tolerance: doc.tolerance.unwrap_or(base.tolerance),
    };
    scenario.validate().map_err(|e| match e {
        CoreError::InfeasibleAperture { .. } => CliError::Infeasible(e.to_string()),
        CoreError::InvalidScenario { field, reason } => {
            CliError::Config(format!("scenario field `{field}`{}: {reason}", flag_hint(field, overrides)))
        }
        other => CliError::Config(other.to_string()),
    })?;
    Ok(scenario)
}

fn flag_hint(field: &str, o: &Overrides) -> &'static str {
    match field {
        "interference_cap" if o.interference_cap.is_some() => " (from --eta)",
        "num_antennas" if o.num_antennas.is_some() => " (from --n)",
        "min_height" if o.min_height.is_some() => " (from --h0)",
        _ => "",
    }
}

/// Writes every field explicitly; `parse_scenario` reads it back unchanged.
pub fn emit_scenario(scenario: &Scenario) -> String {
    let doc = ScenarioDoc {
        num_antennas: Some(scenario.num_antennas),
        wavelength: Some(scenario.wavelength),
        min_spacing: Some(scenario.min_spacing),
        aperture: Some(scenario.aperture),
        min_height: Some(scenario.min_height),
        interference_cap: Some(scenario.interference_cap),
        tolerance: Some(scenario.tolerance),
        su_positions: Some(scenario.su_positions.clone()),
        pu_positions: Some(scenario.pu_positions.clone()),
    };
    toml::to_string(&doc).expect("scenario fields are plain numbers")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_reference() {
        assert_eq!(parse_scenario("").unwrap(), Scenario::default());
    }

    #[test]
    fn antenna_count_scales_default_aperture() {
        let s = parse_scenario("num_antennas = 10").unwrap();
        assert!((s.aperture - 0.5).abs() < 1e-15);
        let s = parse_scenario("num_antennas = 10\naperture = 0.6").unwrap();
        assert_eq!(s.aperture, 0.6);
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse_scenario("num_antennas = 0").unwrap_err();
        assert!(matches!(e, CliError::Config(ref m) if m.contains("num_antennas")), "{e}");
        let e = parse_scenario("hieght = 3").unwrap_err();
        assert!(e.to_string().contains("hieght"), "{e}");
        let e = parse_scenario("min_height = 10\nmin_height = 11").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = parse_scenario("aperture = 0.1").unwrap_err();
        assert!(matches!(e, CliError::Infeasible(_)));
        let e = parse_scenario_with(
            "",
            &Overrides {
                interference_cap: Some(-1.0),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(e.to_string().contains("--eta"), "{e}");
    }
}
