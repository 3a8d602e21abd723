//! Unit system, physical constants and the experiment configuration.
//!
//! Lengths are micrometres and every momentum or angular frequency is carried
//! as a vacuum wavenumber in μm⁻¹ (ω/c). Filter widths, pump waists and the
//! crystal length therefore all carry μm. Photon energies enter in eV and are
//! converted once through [`HBAR_C_EV_UM`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;

/// ħc in eV·μm. Every eV → μm⁻¹ conversion goes through this constant.
pub const HBAR_C_EV_UM: f64 = 0.197_326_98;

/// Speed of light in μm/s.
pub const SPEED_OF_LIGHT_UM_PER_S: f64 = 2.997_924_58e14;

/// Minimum value of Ω·k₀ and Ω_y·k₀ for which the narrowband 2-D reduction is accepted.
pub const NARROWBAND_GUARD: f64 = 1.0e3;

/// Converts a photon energy in eV to a vacuum wavenumber in μm⁻¹.
pub fn energy_to_wavenumber(energy_ev: f64) -> Result<f64> {
    if !(energy_ev > 0.0) || !energy_ev.is_finite() {
        return Err(Error::Domain(format!(
            "photon energy must be positive and finite, got {energy_ev} eV"
        )));
    }
    Ok(energy_ev / HBAR_C_EV_UM)
}

/// Phase-matching and propagation treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Exact Δk_z and the exact obliquity factor k_z/k.
    Exact,
    /// Second-order Δk_z and k_z/k replaced by 1.
    Paraxial,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Exact => "exact",
            Regime::Paraxial => "paraxial",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Regime::Exact),
            "paraxial" => Ok(Regime::Paraxial),
            other => Err(Error::config("regime", format!("unknown regime `{other}`"))),
        }
    }
}

/// How the six-dimensional momentum integrals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reduction {
    /// Frequency and k_y filters collapsed analytically; 2-D transverse integral.
    #[serde(rename = "reduced2d")]
    Reduced2D,
    /// Full 6-D filtered momentum space, evaluated by Monte Carlo.
    #[serde(rename = "full6d")]
    Full6D,
}

/// Integration measure over the reduced (k_ix, k_sx) plane.
///
/// Collapsing the narrowband |k| filter of d³k = (k/k_z) dk_x dk_y dk leaves
/// the on-shell weight k₀/k_z per photon. `Flat` drops it and integrates
/// dk_ix dk_sx literally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    #[default]
    OnShell,
    Flat,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::OnShell => "on_shell",
            Measure::Flat => "flat",
        }
    }
}

/// Fully validated experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub pump_waist_um: f64,
    pub pump_waist_y_um: f64,
    pub crystal_length_um: f64,
    pub filter_omega_um: f64,
    pub filter_omega_y_um: f64,
    pub channel_energy_ev: f64,
    pub regime: Regime,
    pub reduction: Reduction,
    pub measure: Measure,
    pub quadrature: QuadratureSpec,
}

/// On-disk layout; optional keys are filled in by [`ExperimentConfig::from_raw`].
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    pump_waist_um: f64,
    pump_waist_y_um: Option<f64>,
    crystal_length_um: f64,
    filter_omega_um: f64,
    filter_omega_y_um: f64,
    channel_energy_ev: f64,
    #[serde(default = "default_regime")]
    regime: Regime,
    #[serde(default = "default_reduction")]
    reduction: Reduction,
    #[serde(default)]
    measure: Measure,
    #[serde(default)]
    quadrature: QuadratureSpec,
}

fn default_regime() -> Regime {
    Regime::Exact
}

fn default_reduction() -> Reduction {
    Reduction::Reduced2D
}

impl ExperimentConfig {
    /// Sodium 3S→4P dipole line with narrowband frequency and k_y filters.
    pub fn sodium_dipole() -> Self {
        Self {
            pump_waist_um: 50.0,
            pump_waist_y_um: 50.0,
            crystal_length_um: 0.1,
            filter_omega_um: 4.0e8,
            filter_omega_y_um: 1.0e7,
            channel_energy_ev: 3.753_293,
            regime: Regime::Exact,
            reduction: Reduction::Reduced2D,
            measure: Measure::OnShell,
            quadrature: QuadratureSpec::default(),
        }
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let cfg = Self {
            pump_waist_um: raw.pump_waist_um,
            pump_waist_y_um: raw.pump_waist_y_um.unwrap_or(raw.pump_waist_um),
            crystal_length_um: raw.crystal_length_um,
            filter_omega_um: raw.filter_omega_um,
            filter_omega_y_um: raw.filter_omega_y_um,
            channel_energy_ev: raw.channel_energy_ev,
            regime: raw.regime,
            reduction: raw.reduction,
            measure: raw.measure,
            quadrature: raw.quadrature,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses and validates the TOML config text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            what: "experiment config".into(),
            reason: e.to_string(),
        })?;
        Self::from_raw(raw)
    }

    pub fn to_toml_string(&self) -> String {
        // Every field is a plain number, string or table, so this cannot fail.
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Carrier wavenumber k₀ in μm⁻¹.
    pub fn k0(&self) -> f64 {
        self.channel_energy_ev / HBAR_C_EV_UM
    }

    pub fn narrowband_ok(&self) -> bool {
        let k0 = self.k0();
        self.filter_omega_um * k0 > NARROWBAND_GUARD
            && self.filter_omega_y_um * k0 > NARROWBAND_GUARD
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pump_waist_um", self.pump_waist_um),
            ("pump_waist_y_um", self.pump_waist_y_um),
            ("crystal_length_um", self.crystal_length_um),
            ("filter_omega_um", self.filter_omega_um),
            ("filter_omega_y_um", self.filter_omega_y_um),
            ("channel_energy_ev", self.channel_energy_ev),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::config(
                    field,
                    format!("must be strictly positive and finite, got {value}"),
                ));
            }
        }
        if self.reduction == Reduction::Reduced2D && !self.narrowband_ok() {
            return Err(Error::config(
                "reduction",
                format!(
                    "reduced2d needs filter_omega_um·k0 and filter_omega_y_um·k0 above {NARROWBAND_GUARD:e} \
                     (got {:.3e}, {:.3e}); use full6d",
                    self.filter_omega_um * self.k0(),
                    self.filter_omega_y_um * self.k0()
                ),
            ));
        }
        self.quadrature.validate()
    }

    pub fn with_crystal_length(mut self, length_um: f64) -> Self {
        self.crystal_length_um = length_um;
        self
    }

    /// Sets both pump waists.
    pub fn with_pump_waist(mut self, waist_um: f64) -> Self {
        self.pump_waist_um = waist_um;
        self.pump_waist_y_um = waist_um;
        self
    }

    pub fn with_regime(mut self, regime: Regime) -> Self {
        self.regime = regime;
        self
    }

    pub fn with_energy(mut self, energy_ev: f64) -> Self {
        self.channel_energy_ev = energy_ev;
        self
    }

    pub fn with_reduction(mut self, reduction: Reduction) -> Self {
        self.reduction = reduction;
        self
    }

    pub fn with_measure(mut self, measure: Measure) -> Self {
        self.measure = measure;
        self
    }

    pub fn with_quadrature(mut self, quadrature: QuadratureSpec) -> Self {
        self.quadrature = quadrature;
        self
    }
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = r#"
pump_waist_um = 50.0
crystal_length_um = 0.1
filter_omega_um = 4e8
filter_omega_y_um = 1e7
channel_energy_ev = 3.753293
regime = "exact"
reduction = "reduced2d"

[quadrature]
method = "adaptive_subdivision"
rel_tol = 1e-6
max_evals = 10000000
seed = 7
"#;

    #[test]
    fn dipole_energy_converts() {
        let k = energy_to_wavenumber(3.753_293).unwrap();
        assert!((k / 19.0208 - 1.0).abs() < 1e-4, "{k}");
        assert_eq!(energy_to_wavenumber(HBAR_C_EV_UM).unwrap(), 1.0);
        let k = energy_to_wavenumber(4.594_759).unwrap();
        assert!((k / (4.594_759 / 0.197_326_98) - 1.0).abs() < 1e-12);
        assert!((k / 23.2853 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn non_positive_energy_is_rejected() {
        assert!(matches!(energy_to_wavenumber(0.0), Err(Error::Domain(_))));
        assert!(matches!(energy_to_wavenumber(-1.0), Err(Error::Domain(_))));
        assert!(energy_to_wavenumber(f64::NAN).is_err());
    }

    #[test]
    fn parses_fig3_config_and_defaults_waist_y() {
        let cfg = ExperimentConfig::from_toml_str(FIG3).unwrap();
        assert_eq!(cfg.pump_waist_um, 50.0);
        assert_eq!(cfg.pump_waist_y_um, 50.0);
        assert_eq!(cfg.filter_omega_y_um, 1e7);
        assert_eq!(cfg.quadrature.seed, 7);
        assert_eq!(cfg.measure, Measure::OnShell);
    }

    #[test]
    fn negative_length_names_the_field() {
        let text = FIG3.replace("crystal_length_um = 0.1", "crystal_length_um = -1");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("crystal_length"), "{err}");
    }

    #[test]
    fn narrowband_guard_refuses_reduced2d() {
        let text = FIG3.replace("filter_omega_um = 4e8", "filter_omega_um = 10");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("full6d"), "{err}");
        let text = text.replace("\"reduced2d\"", "\"full6d\"");
        assert!(ExperimentConfig::from_toml_str(&text).is_ok());
    }

    #[test]
    fn unknown_keys_and_garbage_fail_to_parse() {
        let err = ExperimentConfig::from_toml_str("pump_waist_um = ").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let text = format!("bogus = 1\n{FIG3}");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn load_config_reads_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("na_dipole.cfg");
        std::fs::write(&path, FIG3).unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.crystal_length_um, 0.1);
        let missing = load_config(dir.path().join("nope.cfg")).unwrap_err();
        assert!(matches!(missing, Error::Io { .. }));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn wavenumber_is_linear(e in 1e-3f64..100.0, a in 1e-3f64..1e3) {
                let lhs = energy_to_wavenumber(a * e).unwrap();
                let rhs = a * energy_to_wavenumber(e).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
                prop_assert!(energy_to_wavenumber(e * 1.001).unwrap() > energy_to_wavenumber(e).unwrap());
            }

            #[test]
            fn config_round_trips(
                wp in 0.5f64..200.0,
                wy in prop::option::of(0.5f64..200.0),
                len in 1e-3f64..1e3,
                paraxial in any::<bool>(),
                seed in 0u64..=i64::MAX as u64,
            ) {
                let mut cfg = ExperimentConfig::sodium_dipole().with_crystal_length(len);
                cfg.pump_waist_um = wp;
                cfg.pump_waist_y_um = wy.unwrap_or(wp);
                cfg.regime = if paraxial { Regime::Paraxial } else { Regime::Exact };
                cfg.quadrature.seed = seed;
                let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
                prop_assert_eq!(back, cfg);
            }
        }
    }
}
