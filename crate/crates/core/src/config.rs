//! Strict, versioned JSON configuration of an experiment.
//!
//! Units are spelled out in field names. Unknown keys are rejected, and
//! [`ExperimentConfig::validate`] reports violations with the dotted path of
//! the offending field.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::memory::SwitchShape;
use crate::modes::ModeIndex;

pub const CONFIG_SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: String,
    pub basis: BasisConfig,
    pub cases: Vec<CaseConfig>,
    pub source: SourceConfig,
    pub discriminators: DiscriminatorPair,
    pub ensemble: EnsembleConfig,
    pub schedule: ScheduleConfig,
    pub numerics: NumericsConfig,
    pub detectors: DetectorConfig,
    pub background: BackgroundConfig,
    pub windows: WindowConfig,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub waist_um: f64,
    pub p_max: usize,
    pub l_max: usize,
    pub n_r: usize,
    pub n_theta: usize,
    pub extent_waists: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeAmplitude {
    pub p: u32,
    pub l: i32,
    pub amplitude_re: f64,
    #[serde(default)]
    pub amplitude_im: f64,
}

/// One input mode sent through the setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    pub modes: Vec<ModeAmplitude>,
    /// Phase-only SLM acting on a Gaussian beam, rather than exact synthesis.
    pub phase_only: bool,
    pub slm_input_waist_um: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    HalfGaussian,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub shape: PulseShape,
    /// Intensity FWHM of the (parent) Gaussian.
    pub width_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub mean_photons: f64,
    pub pulse: PulseConfig,
}

/// Fork plus single-mode fiber on one detection path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub l_shift: i32,
    pub efficiency: f64,
    pub crosstalk: f64,
    pub radial_acceptance: Vec<f64>,
    pub fiber_waist_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorPair {
    /// Path matched to `l = +1` (channel `1`).
    pub plus: DiscriminatorConfig,
    /// Path matched to `l = −1` (channel `-1`).
    pub minus: DiscriminatorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub optical_depth: f64,
    pub gamma_over_2pi_mhz: f64,
    pub gamma_s_over_2pi_khz: f64,
    pub length_mm: f64,
    /// `null` for a uniform control field.
    pub control_waist_um: Option<f64>,
    pub signal_waist_um: f64,
    pub n_shells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub omega0_over_2pi_mhz: f64,
    /// Start of the switch-off ramp, relative to the input pulse peak.
    pub off_time_us: f64,
    pub switch_us: f64,
    /// Time the control stays fully off.
    pub hold_us: f64,
    pub shape: SwitchShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    pub n_z: usize,
    pub dt_ns: f64,
    pub t_start_us: f64,
    pub t_end_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub quantum_efficiency: f64,
    pub dark_rate_hz: f64,
    pub bin_width_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundConfig {
    /// Control photons per second reaching the filtering stage.
    pub control_photon_rate_hz: f64,
    pub attenuation_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    /// Absolute input window around the pulse peak.
    pub input_us: [f64; 2],
    /// Retrieval window relative to the control switch-on.
    pub retrieval_after_on_us: [f64; 2],
}

fn check(ok: bool, path: &str, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(path, msg))
    }
}

fn positive(x: f64, path: &str) -> Result<()> {
    check(x > 0.0 && x.is_finite(), path, "must be a positive finite number")
}

fn fraction(x: f64, path: &str) -> Result<()> {
    check((0.0..=1.0).contains(&x), path, "must lie in [0, 1]")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(
                if path == "." { "<root>".to_string() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact serialization of the effective config. The
    /// output directory does not affect results and is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let canonical = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn on_time_us(&self) -> f64 {
        self.schedule.off_time_us + self.schedule.switch_us + self.schedule.hold_us
    }

    pub fn retrieval_window_us(&self) -> [f64; 2] {
        let on = self.on_time_us();
        [
            on + self.windows.retrieval_after_on_us[0],
            on + self.windows.retrieval_after_on_us[1],
        ]
    }

    pub fn gamma(&self) -> f64 {
        TAU * self.ensemble.gamma_over_2pi_mhz * 1e6
    }

    pub fn gamma_s(&self) -> f64 {
        TAU * self.ensemble.gamma_s_over_2pi_khz * 1e3
    }

    pub fn omega0(&self) -> f64 {
        TAU * self.schedule.omega0_over_2pi_mhz * 1e6
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.schema_version == CONFIG_SCHEMA_VERSION,
            "schema_version",
            &format!("unsupported version, expected \"{CONFIG_SCHEMA_VERSION}\""),
        )?;

        let b = &self.basis;
        positive(b.waist_um, "basis.waist_um")?;
        positive(b.extent_waists, "basis.extent_waists")?;
        check(
            b.n_r >= 2 * (2 * b.p_max + b.l_max + 1),
            "basis.n_r",
            "too few radial nodes for p_max and l_max",
        )?;
        check(
            b.n_theta >= 4 * b.l_max.max(1),
            "basis.n_theta",
            "must be at least 4·l_max",
        )?;

        check(!self.cases.is_empty(), "cases", "at least one case is required")?;
        for (i, c) in self.cases.iter().enumerate() {
            let at = |f: &str| format!("cases[{i}].{f}");
            check(
                !c.name.is_empty()
                    && c.name
                        .chars()
                        .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-'),
                &at("name"),
                "must be a non-empty file-name-safe identifier",
            )?;
            check(
                self.cases.iter().filter(|o| o.name == c.name).count() == 1,
                &at("name"),
                "case names must be unique",
            )?;
            check(!c.modes.is_empty(), &at("modes"), "at least one mode is required")?;
            for (k, m) in c.modes.iter().enumerate() {
                check(
                    m.amplitude_re.is_finite() && m.amplitude_im.is_finite(),
                    &at(&format!("modes[{k}]")),
                    "amplitude must be finite",
                )?;
                check(
                    m.p as usize <= b.p_max && m.l.unsigned_abs() as usize <= b.l_max,
                    &at(&format!("modes[{k}]")),
                    "mode outside the basis truncation",
                )?;
            }
            check(
                c.modes.iter().any(|m| m.amplitude_re != 0.0 || m.amplitude_im != 0.0),
                &at("modes"),
                "target carries no power",
            )?;
            positive(c.slm_input_waist_um, &at("slm_input_waist_um"))?;
        }

        positive(self.source.mean_photons, "source.mean_photons")?;
        positive(self.source.pulse.width_us, "source.pulse.width_us")?;

        for (name, d) in [
            ("plus", &self.discriminators.plus),
            ("minus", &self.discriminators.minus),
        ] {
            let at = |f: &str| format!("discriminators.{name}.{f}");
            check(
                (d.l_shift.unsigned_abs() as usize) < b.n_theta / 2,
                &at("l_shift"),
                "winding shift not representable on the grid",
            )?;
            fraction(d.efficiency, &at("efficiency"))?;
            fraction(d.crosstalk, &at("crosstalk"))?;
            for (p, a) in d.radial_acceptance.iter().enumerate() {
                fraction(*a, &at(&format!("radial_acceptance[{p}]")))?;
            }
            check(
                d.radial_acceptance.len() <= b.p_max + 1,
                &at("radial_acceptance"),
                "longer than p_max + 1",
            )?;
            positive(d.fiber_waist_um, &at("fiber_waist_um"))?;
        }
        let e = &self.ensemble;
        positive(e.optical_depth, "ensemble.optical_depth")?;
        positive(e.gamma_over_2pi_mhz, "ensemble.gamma_over_2pi_mhz")?;
        check(
            e.gamma_s_over_2pi_khz >= 0.0 && e.gamma_s_over_2pi_khz.is_finite(),
            "ensemble.gamma_s_over_2pi_khz",
            "must be non-negative",
        )?;
        positive(e.length_mm, "ensemble.length_mm")?;
        positive(e.signal_waist_um, "ensemble.signal_waist_um")?;
        if let Some(wc) = e.control_waist_um {
            check(
                wc >= e.signal_waist_um,
                "ensemble.control_waist_um",
                "must be at least the signal waist",
            )?;
        }
        check(e.n_shells >= 1, "ensemble.n_shells", "at least one shell")?;

        let s = &self.schedule;
        check(
            s.omega0_over_2pi_mhz >= 0.0 && s.omega0_over_2pi_mhz.is_finite(),
            "schedule.omega0_over_2pi_mhz",
            "must be non-negative",
        )?;
        check(s.off_time_us.is_finite(), "schedule.off_time_us", "must be finite")?;
        positive(s.switch_us, "schedule.switch_us")?;
        check(
            s.hold_us >= 0.0 && s.hold_us.is_finite(),
            "schedule.hold_us",
            "must be non-negative",
        )?;

        let n = &self.numerics;
        check(n.n_z >= 2, "numerics.n_z", "at least two z intervals")?;
        positive(n.dt_ns, "numerics.dt_ns")?;
        check(
            n.dt_ns * 1e-9 * self.gamma() <= 0.25,
            "numerics.dt_ns",
            "does not resolve 1/Γ (need dt·Γ ≤ 0.25)",
        )?;
        check(
            n.dt_ns * 1e-3 <= s.switch_us / 10.0,
            "numerics.dt_ns",
            "does not resolve the control switch",
        )?;
        check(
            n.t_start_us < s.off_time_us,
            "numerics.t_start_us",
            "must precede the switch-off",
        )?;
        let retrieval = self.retrieval_window_us();
        check(
            n.t_end_us >= retrieval[1],
            "numerics.t_end_us",
            "must cover the retrieval window",
        )?;
        check(
            n.t_start_us <= self.windows.input_us[0],
            "numerics.t_start_us",
            "must precede the input window",
        )?;

        let d = &self.detectors;
        fraction(d.quantum_efficiency, "detectors.quantum_efficiency")?;
        check(
            d.dark_rate_hz >= 0.0 && d.dark_rate_hz.is_finite(),
            "detectors.dark_rate_hz",
            "must be non-negative",
        )?;
        positive(d.bin_width_ns, "detectors.bin_width_ns")?;
        let k = d.bin_width_ns / n.dt_ns;
        check(
            k >= 1.0 && (k - k.round()).abs() < 1e-6,
            "detectors.bin_width_ns",
            "must be a whole multiple of numerics.dt_ns",
        )?;

        let g = &self.background;
        check(
            g.control_photon_rate_hz >= 0.0 && g.control_photon_rate_hz.is_finite(),
            "background.control_photon_rate_hz",
            "must be non-negative",
        )?;
        check(
            g.attenuation_db >= 0.0,
            "background.attenuation_db",
            "must be non-negative",
        )?;

        let w = &self.windows;
        check(
            w.input_us[0] < w.input_us[1],
            "windows.input_us",
            "start must precede end",
        )?;
        check(
            w.retrieval_after_on_us[0] >= 0.0 && w.retrieval_after_on_us[0] < w.retrieval_after_on_us[1],
            "windows.retrieval_after_on_us",
            "must start at or after switch-on and have start < end",
        )?;
        check(
            w.input_us[1] <= retrieval[0] || w.input_us[0] >= retrieval[1],
            "windows",
            "input and retrieval windows overlap",
        )?;

        check(self.trials > 0, "trials", "must be positive")?;
        Ok(())
    }

    pub fn case_modes(&self, case: &CaseConfig) -> Vec<(ModeIndex, f64, f64)> {
        case.modes
            .iter()
            .map(|m| (ModeIndex::new(m.p, m.l), m.amplitude_re, m.amplitude_im))
            .collect()
    }
}

/// Replaces the scalar at dotted `path` (array indices as `cases.0.name`)
/// in a JSON document.
pub fn set_path(doc: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let next = match cur {
            serde_json::Value::Object(map) => map.get_mut(*part),
            serde_json::Value::Array(items) => part.parse::<usize>().ok().and_then(|k| items.get_mut(k)),
            _ => None,
        };
        cur = next.ok_or_else(|| Error::config(path, format!("`{}` does not resolve", parts[..=i].join("."))))?;
    }
    if cur.is_object() || cur.is_array() {
        return Err(Error::config(path, "does not name a scalar field"));
    }
    *cur = value;
    Ok(())
}
