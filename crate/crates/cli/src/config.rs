//! TOML run configuration.
//!
//! ```toml
//! [model.clones]
//! kind = "constant"
//! rate = 1.0
//!
//! [model.anchors]
//! kind = "piecewise"
//! breakpoints = [0.0, 10.0]
//! rates = [1.0, 2.0, 0.5]
//!
//! [model.lengths]
//! kind = "deterministic"
//! value = 1.0
//!
//! [run]
//! G = 200.0
//! reps = 10000
//! seed = 1
//! quantities = ["rho", "variance_constants"]
//!
//! [output]
//! format = "csv"
//! ```
//!
//! Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use islands_core::formulas::{InhomogeneousRanges, QmcConfig};
use islands_core::{IntensityMeasure, LengthLaw, Lengths, ModelSpec, QuadConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(default)]
    pub quad: QuadConfig,
    #[serde(default)]
    pub qmc: QmcConfig,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub clones: IntensityConfig,
    pub anchors: IntensityConfig,
    pub lengths: LengthsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntensityConfig {
    Constant {
        rate: f64,
    },
    /// `rates[0]` left of the first breakpoint, the last rate right of the last.
    Piecewise {
        breakpoints: Vec<f64>,
        rates: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LengthsConfig {
    Fixed(LengthLaw),
    ByPosition(ByPositionConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ByPositionConfig {
    pub breakpoints: Vec<f64>,
    pub laws: Vec<LengthLaw>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    #[serde(rename = "G")]
    pub window: f64,
    pub reps: usize,
    pub seed: u64,
    /// Exact quantities for `exact`; empty means a default set.
    pub quantities: Vec<String>,
    /// Test suites for `verify`; empty means all suites that apply.
    pub tests: Vec<String>,
    /// Positions for one-point quantities.
    pub points: Vec<f64>,
    pub pairs: Vec<[f64; 2]>,
    /// Window lengths for `variance_exact`, `tau_bound` and `third_moment`.
    pub windows: Vec<f64>,
    /// Separations for `mixing_bound`.
    pub distances: Vec<f64>,
    pub phi_args: Vec<f64>,
    /// Time grid in `(0, 1]` for the Wiener covariance check.
    pub grid: Vec<f64>,
    /// Left-end slices and length classes of the reparametrization check.
    pub boxes: [usize; 2],
    /// Directory for CSV dumps of the first replication in `simulate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            window: 100.0,
            reps: 10_000,
            seed: 1,
            quantities: Vec::new(),
            tests: Vec::new(),
            points: vec![0.0],
            pairs: vec![[0.0, 0.3]],
            windows: Vec::new(),
            distances: vec![1.0],
            phi_args: vec![1.0],
            grid: vec![0.5, 1.0],
            boxes: [8, 4],
            dump: None,
        }
    }
}

/// Axes of a cartesian parameter grid around a homogeneous base model.
/// Absent axes keep the base value; an empty axis yields an empty grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    /// Multiplies every length of the base law.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length_scale: Option<Vec<f64>>,
    pub quantities: Vec<String>,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            kappa: None,
            alpha: None,
            length_scale: None,
            quantities: vec!["rho".into()],
        }
    }
}

/// Explicit parameter ranges for the inhomogeneous envelopes; anything left
/// out is read off the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths_minus: Option<LengthLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths_plus: Option<LengthLaw>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl IntensityConfig {
    fn build(&self) -> islands_core::Result<IntensityMeasure> {
        match self {
            IntensityConfig::Constant { rate } => IntensityMeasure::constant(*rate),
            IntensityConfig::Piecewise { breakpoints, rates } => {
                IntensityMeasure::piecewise(breakpoints.clone(), rates.clone())
            }
        }
    }

    fn rates(&self) -> Vec<f64> {
        match self {
            IntensityConfig::Constant { rate } => vec![*rate],
            IntensityConfig::Piecewise { rates, .. } => rates.clone(),
        }
    }
}

impl LengthsConfig {
    fn build(&self) -> islands_core::Result<Lengths> {
        match self {
            LengthsConfig::Fixed(law) => {
                law.validate()?;
                Ok(Lengths::Fixed(law.clone()))
            }
            LengthsConfig::ByPosition(b) => {
                Lengths::by_position(b.breakpoints.clone(), b.laws.clone())
            }
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Schema-level checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<(), CliError> {
        self.model_spec()?;
        self.quad.validate().map_err(CliError::config)?;
        let r = &self.run;
        if !(r.window >= 0.0 && r.window.is_finite()) {
            return Err(CliError::Config(format!(
                "run.G must be finite and >= 0, got {}",
                r.window
            )));
        }
        let finite = |name: &str, xs: &[f64]| {
            if xs.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "run.{name} must hold finite numbers"
                )))
            }
        };
        finite("points", &r.points)?;
        finite("windows", &r.windows)?;
        finite("distances", &r.distances)?;
        finite("phi_args", &r.phi_args)?;
        finite("grid", &r.grid)?;
        if r.pairs.iter().flatten().any(|x| !x.is_finite()) {
            return Err(CliError::Config(
                "run.pairs must hold finite numbers".into(),
            ));
        }
        for q in &r.quantities {
            if !crate::commands::EXACT_QUANTITIES.contains(&q.as_str()) {
                return Err(CliError::Config(format!("unknown quantity {q:?}")));
            }
        }
        for t in &r.tests {
            if !crate::commands::SUITES.contains(&t.as_str()) {
                return Err(CliError::Config(format!("unknown test suite {t:?}")));
            }
        }
        if let Some(scan) = &self.scan {
            for q in &scan.quantities {
                if !crate::commands::SCAN_QUANTITIES.contains(&q.as_str()) {
                    return Err(CliError::Config(format!("unknown scan quantity {q:?}")));
                }
            }
            for axis in [&scan.kappa, &scan.alpha, &scan.length_scale]
                .into_iter()
                .flatten()
            {
                if axis.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(CliError::Config(
                        "scan axes must hold finite values >= 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let m = &self.model;
        ModelSpec::new(
            m.clones.build().map_err(CliError::config)?,
            m.anchors.build().map_err(CliError::config)?,
            m.lengths.build().map_err(CliError::config)?,
        )
        .map_err(CliError::config)
    }

    /// Parameter ranges for the envelopes: explicit `[bounds]` entries win,
    /// otherwise the extreme rates of the model and its single length law.
    pub fn ranges(&self) -> Result<InhomogeneousRanges, CliError> {
        let b = self.bounds.clone().unwrap_or_default();
        let extremes = |xs: Vec<f64>| {
            [
                xs.iter().copied().fold(f64::INFINITY, f64::min),
                xs.iter().copied().fold(0.0, f64::max),
            ]
        };
        let [kappa_minus, kappa_plus] = b
            .kappa
            .unwrap_or_else(|| extremes(self.model.clones.rates()));
        let [alpha_minus, alpha_plus] = b
            .alpha
            .unwrap_or_else(|| extremes(self.model.anchors.rates()));
        let fixed = match &self.model.lengths {
            LengthsConfig::Fixed(law) => Some(law.clone()),
            LengthsConfig::ByPosition(_) => None,
        };
        let pick = |explicit: Option<LengthLaw>, side: &str| {
            explicit.or_else(|| fixed.clone()).ok_or_else(|| {
                CliError::Config(format!(
                    "position-dependent lengths need bounds.lengths_{side}"
                ))
            })
        };
        Ok(InhomogeneousRanges {
            kappa_minus,
            kappa_plus,
            alpha_minus,
            alpha_plus,
            lengths_minus: pick(b.lengths_minus, "minus")?,
            lengths_plus: pick(b.lengths_plus, "plus")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[model.clones]
kind = "constant"
rate = 1.0

[model.anchors]
kind = "constant"
rate = 1.0

[model.lengths]
kind = "deterministic"
value = 1.0
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::parse(BASIC).unwrap();
        assert_eq!(cfg.run, RunSection::default());
        assert_eq!(cfg.quad, QuadConfig::default());
        assert!(cfg.model_spec().unwrap().is_homogeneous());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for extra in [
            "\n[run]\nwindow = 3.0\n",
            "\n[quad]\nabstol = 1e-9\n",
            "\n[output]\nfmt = \"csv\"\n",
        ] {
            let text = format!("{BASIC}{extra}");
            assert!(
                matches!(RunConfig::parse(&text), Err(CliError::Config(_))),
                "{extra}"
            );
        }
        let bad_law = BASIC.replace("value = 1.0", "value = 1.0\nmean = 2.0");
        assert!(RunConfig::parse(&bad_law).is_err());
    }

    #[test]
    fn invalid_models_are_config_errors() {
        let negative = BASIC.replacen("rate = 1.0", "rate = -1.0", 1);
        assert!(matches!(
            RunConfig::parse(&negative),
            Err(CliError::Config(_))
        ));
        let unknown = format!("{BASIC}\n[run]\nquantities = [\"entropy\"]\n");
        assert!(RunConfig::parse(&unknown).is_err());
    }

    #[test]
    fn by_position_lengths_parse() {
        let text = BASIC.replace(
            "[model.lengths]\nkind = \"deterministic\"\nvalue = 1.0",
            "[model.lengths]\nbreakpoints = [5.0]\nlaws = [{ kind = \"deterministic\", value = 1.0 }, { kind = \"exponential\", mean = 2.0 }]",
        );
        let cfg = RunConfig::parse(&text).unwrap();
        assert!(matches!(cfg.model.lengths, LengthsConfig::ByPosition(_)));
        assert!(cfg.ranges().is_err());
    }

    #[test]
    fn serialization_round_trips() {
        let text = format!(
            "{BASIC}\n[run]\nG = 5.0\npairs = [[0.0, 1.5]]\ndump = \"out\"\n[scan]\nkappa = []\n[output]\nformat = \"json\"\n"
        );
        let cfg = RunConfig::parse(&text).unwrap();
        let once = cfg.to_toml().unwrap();
        let again = RunConfig::parse(&once).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(once, again.to_toml().unwrap());
    }

    #[test]
    fn ranges_come_from_the_model() {
        let text = BASIC.replacen(
            "kind = \"constant\"\nrate = 1.0",
            "kind = \"piecewise\"\nbreakpoints = [1.0]\nrates = [0.5, 2.0]",
            1,
        );
        let r = RunConfig::parse(&text).unwrap().ranges().unwrap();
        assert_eq!(
            (r.kappa_minus, r.kappa_plus, r.alpha_minus, r.alpha_plus),
            (0.5, 2.0, 1.0, 1.0)
        );
    }
}
