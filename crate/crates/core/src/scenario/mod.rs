//! Scenario configuration and the end-to-end pipeline:
//! topology → Raman noise → DPS link (oracle or Monte Carlo) → sifting → key rate.

mod bundled;
mod calibrate;
mod report;
mod sweep;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::keyrate::{binary_entropy, dps_shrink_factor, secure_rate, KeyRateConfig};
use crate::link::{
    click_rate_oracle, simulate_timetags, DelayInterferometer, DetectorModel, OracleRates,
    TransmitterConfig,
};
use crate::raman::{
    odn_noise_at_bob, ChannelPlan, Direction, QuantumChannel, RamanContribution, RamanProfile,
    WavelengthChannel, C_BAND_POWER_DBM,
};
use crate::repro::config_hash;
use crate::sifting::{apply_gate, qber_composition_oracle, sift_and_score, GateConfig, QberReport};
use crate::topology::OdnTopology;

pub use bundled::{
    bundled_scenario, bundled_scenarios, bundled_sweep, bundled_sweeps, BundledSweep,
};
pub use calibrate::{
    calibrate, calibrate_baseline, Anchor, BaselineCalibration, CalibrationResult, FreeParameter,
    Observable,
};
pub use report::{emit_report, sidecar_path, Format, Report, ReportMeta};
pub use sweep::{apply_axis, run_sweep, SweepResult, SweepRow, SweepSpec, SWEEP_COLUMNS};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Raman scale that puts one upstream C-band channel at 360 counts/s
/// (2:16 split, 16 km reach, DWDM receive filter).
pub const CALIBRATED_RAMAN_SCALE: f64 = 0.860_750_182_5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Oracle,
    MonteCarlo,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Mode::Oracle),
            "monte_carlo" | "monte-carlo" | "mc" => Ok(Mode::MonteCarlo),
            _ => Err(Error::Lookup {
                kind: "mode",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: Mode,
    /// Simulated seconds per Monte Carlo run.
    pub duration_s: f64,
    pub seed: u64,
    /// Replaces the ODN path loss, e.g. for back-to-back attenuator sweeps.
    pub loss_budget_db: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Oracle,
            duration_s: 30.0,
            seed: 1,
            loss_budget_db: None,
        }
    }
}

/// Shorthand for the standard channel sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comb {
    /// 32 downstream L-band channels.
    LBand,
    /// 20 downstream C-band channels.
    CBand,
    /// 5 downstream CWDM channels.
    Cwdm,
    /// Continuous upstream C-band transmitters from 1550 nm.
    UpstreamCBand {
        count: usize,
        #[serde(default = "default_upstream_power")]
        power_dbm: f64,
    },
}

fn default_upstream_power() -> f64 {
    C_BAND_POWER_DBM
}

impl Comb {
    pub fn channels(&self) -> Vec<WavelengthChannel> {
        match self {
            Comb::LBand => ChannelPlan::l_band_comb(),
            Comb::CBand => ChannelPlan::c_band_comb(),
            Comb::Cwdm => ChannelPlan::cwdm_set(),
            Comb::UpstreamCBand { count, power_dbm } => {
                ChannelPlan::upstream_c_band(*count, *power_dbm)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelsSection {
    pub combs: Vec<Comb>,
    pub channels: Vec<WavelengthChannel>,
    pub quantum: QuantumChannel,
}

impl ChannelsSection {
    pub fn plan(&self) -> ChannelPlan {
        let mut plan = ChannelPlan {
            channels: Vec::new(),
            quantum: self.quantum.clone(),
        };
        for comb in &self.combs {
            plan.channels.extend(comb.channels());
        }
        plan.channels.extend(self.channels.iter().cloned());
        plan
    }

    /// Replaces every upstream classical channel by `count` C-band transmitters.
    pub fn set_upstream_count(&mut self, count: usize) {
        self.combs
            .retain(|c| !matches!(c, Comb::UpstreamCBand { .. }));
        self.channels.retain(|c| c.direction != Direction::Upstream);
        if count > 0 {
            self.combs.push(Comb::UpstreamCBand {
                count,
                power_dbm: C_BAND_POWER_DBM,
            });
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSection {
    #[serde(flatten)]
    pub model: DetectorModel,
    pub interferometer: DelayInterferometer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RamanSection {
    /// `shift_THz,coefficient` CSV; the built-in silica curve when absent.
    pub table_csv: Option<PathBuf>,
    /// Temperature of the built-in curve.
    pub temperature_k: f64,
    pub scale: f64,
}

impl Default for RamanSection {
    fn default() -> Self {
        Self {
            table_csv: None,
            temperature_k: 300.0,
            scale: CALIBRATED_RAMAN_SCALE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateSection {
    pub gate_fraction: f64,
    pub slot_phase_s: Option<f64>,
}

impl Default for GateSection {
    fn default() -> Self {
        let g = GateConfig::default();
        Self {
            gate_fraction: g.gate_fraction,
            slot_phase_s: g.slot_phase_s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub name: String,
    pub description: String,
    pub topology: OdnTopology,
    pub channels: ChannelsSection,
    pub transmitter: TransmitterConfig,
    pub detector: DetectorSection,
    pub raman: RamanSection,
    pub gate: GateSection,
    pub keyrate: KeyRateConfig,
    pub run: RunConfig,
    /// Directory that relative file references are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            name: String::new(),
            description: String::new(),
            topology: OdnTopology::default(),
            channels: ChannelsSection::default(),
            transmitter: TransmitterConfig::default(),
            detector: DetectorSection::default(),
            raman: RamanSection::default(),
            gate: GateSection::default(),
            keyrate: KeyRateConfig::default(),
            run: RunConfig::default(),
            base_dir: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    pub(crate) fn from_value(value: serde_json::Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::config("<config>", e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hash of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn gate_config(&self) -> GateConfig {
        GateConfig {
            gate_fraction: self.gate.gate_fraction,
            symbol_period_s: self.transmitter.symbol_period_s(),
            slot_phase_s: self.gate.slot_phase_s,
        }
    }

    pub fn raman_profile(&self) -> Result<RamanProfile> {
        match &self.raman.table_csv {
            Some(path) => RamanProfile::from_csv_path(&self.resolve(path), self.raman.scale),
            None => Ok(RamanProfile::silica(self.raman.temperature_k).with_scale(self.raman.scale)),
        }
    }

    /// Quantum path loss used by the link: the override if present, else
    /// the ODN's upstream path at the quantum wavelength.
    pub fn loss_budget_db(&self) -> Result<f64> {
        match self.run.loss_budget_db {
            Some(b) => Ok(b),
            None => self
                .topology
                .upstream_quantum_loss(self.channels.quantum.center_nm),
        }
    }

    /// Checks every section and reports all failing fields at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.schema != SCHEMA_VERSION {
            errors.push(FieldError::new(
                "schema",
                format!(
                    "unsupported schema {}, expected {SCHEMA_VERSION}",
                    self.schema
                ),
            ));
        }
        self.topology.check("topology", &mut errors);
        self.transmitter.check("transmitter", &mut errors);
        self.detector.model.check("detector", &mut errors);
        if !(self.detector.interferometer.delay_s > 0.0) {
            errors.push(FieldError::new(
                "detector.interferometer.delay_s",
                "must be > 0",
            ));
        }
        self.gate_config().check("gate", &mut errors);

        let (lo, hi) = self.topology.feeder_up.attenuation.hull();
        let q = self.channels.quantum.center_nm;
        if !(lo..=hi).contains(&q) {
            errors.push(FieldError::new(
                "channels.quantum.center_nm",
                format!("{q} nm is outside the attenuation table [{lo}, {hi}] nm"),
            ));
        }
        if self.channels.quantum.direction != Direction::Upstream {
            errors.push(FieldError::new(
                "channels.quantum.direction",
                "only an upstream quantum channel is modelled",
            ));
        }
        for (i, c) in self.channels.channels.iter().enumerate() {
            if !(lo..=hi).contains(&c.center_nm) {
                errors.push(FieldError::new(
                    format!("channels.channels[{i}].center_nm"),
                    format!(
                        "{} nm is outside the attenuation table [{lo}, {hi}] nm",
                        c.center_nm
                    ),
                ));
            }
            if !c.launch_power_dbm.is_finite() {
                errors.push(FieldError::new(
                    format!("channels.channels[{i}].launch_power_dbm"),
                    "must be finite",
                ));
            }
        }

        if let Some(path) = &self.raman.table_csv {
            let full = self.resolve(path);
            if !full.is_file() {
                errors.push(FieldError::new(
                    "raman.table_csv",
                    format!("file {} does not exist", full.display()),
                ));
            }
        } else if !(self.raman.temperature_k > 0.0) {
            errors.push(FieldError::new("raman.temperature_k", "must be > 0"));
        }
        if !(self.raman.scale >= 0.0) || !self.raman.scale.is_finite() {
            errors.push(FieldError::new("raman.scale", "must be finite and >= 0"));
        }
        if !(self.keyrate.ec_inefficiency >= 1.0) {
            errors.push(FieldError::new("keyrate.ec_inefficiency", "must be >= 1"));
        }
        if self.run.mode == Mode::MonteCarlo && !(self.run.duration_s > 0.0) {
            errors.push(FieldError::new(
                "run.duration_s",
                "must be > 0 in monte_carlo mode",
            ));
        }
        if let Some(b) = self.run.loss_budget_db {
            if !(b >= 0.0) || !b.is_finite() {
                errors.push(FieldError::new(
                    "run.loss_budget_db",
                    "must be finite and >= 0",
                ));
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub ec_inefficiency: f64,
    pub binary_entropy: f64,
    pub shrink_factor: f64,
    pub secure_rate_bs: f64,
    pub secure_bits_per_pulse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub mode: Mode,
    /// Seed and duration only apply to Monte Carlo runs.
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
    pub path_loss_db: f64,
    pub raman: RamanContribution,
    /// Raman clicks/s at the detector, before gating.
    pub raman_counts_s: f64,
    pub dark_counts_s: f64,
    /// Closed-form prediction, reported in both modes.
    pub oracle: OracleRates,
    /// QBER of the closed-form rates, reported in both modes.
    pub oracle_qber: f64,
    pub qber: f64,
    pub raw_rate_bs: f64,
    /// Tag counts of a Monte Carlo run.
    pub counts: Option<QberReport>,
    pub keyrate: KeyRateReport,
}

/// Closed-form QBER for the oracle rates.
fn oracle_qber(cfg: &ScenarioConfig, rates: &OracleRates) -> Result<f64> {
    let v = cfg
        .detector
        .interferometer
        .effective_visibility(&cfg.transmitter);
    qber_composition_oracle(
        rates.signal_rate,
        (1.0 - v) / 2.0,
        rates.uncorrelated_rate(),
    )
}

pub(crate) fn keyrate_report(
    cfg: &ScenarioConfig,
    raw_rate: f64,
    qber: f64,
) -> Result<KeyRateReport> {
    let f = cfg.keyrate.ec_inefficiency;
    let secure = secure_rate(raw_rate, qber, f)?;
    Ok(KeyRateReport {
        ec_inefficiency: f,
        binary_entropy: binary_entropy(qber)?,
        shrink_factor: dps_shrink_factor(qber)?,
        secure_rate_bs: secure,
        secure_bits_per_pulse: secure / cfg.transmitter.symbol_rate_hz,
    })
}

/// Raman contribution of the configured channel plan at the receiver.
pub fn raman_at_receiver(cfg: &ScenarioConfig) -> Result<RamanContribution> {
    let profile = cfg.raman_profile()?;
    odn_noise_at_bob(
        &cfg.channels.plan(),
        &cfg.topology,
        &cfg.topology.co_filter,
        &profile,
    )
}

/// Runs the full pipeline for one configuration.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    cfg.validate()?;
    let path_loss_db = cfg.loss_budget_db()?;
    let raman = raman_at_receiver(cfg)?;
    let noise = raman.total_at_receiver;
    let det = &cfg.detector.model;
    let tx = &cfg.transmitter;
    let oracle = click_rate_oracle(tx, path_loss_db, det, noise, cfg.gate.gate_fraction)?;
    let oracle_qber = oracle_qber(cfg, &oracle)?;

    let (qber, raw_rate_bs, counts, seed, duration_s) = match cfg.run.mode {
        Mode::Oracle => (oracle_qber, oracle.total_rate, None, None, None),
        Mode::MonteCarlo => {
            let sim = simulate_timetags(
                tx,
                &cfg.detector.interferometer,
                path_loss_db,
                det,
                noise,
                cfg.run.duration_s,
                cfg.run.seed,
            )?;
            let gated = apply_gate(&sim.stream, &cfg.gate_config())?;
            let report = sift_and_score(&gated, &sim.truth, tx.symbol_period_s())?;
            (
                report.qber,
                report.raw_rate,
                Some(report),
                Some(cfg.run.seed),
                Some(cfg.run.duration_s),
            )
        }
    };

    Ok(ScenarioReport {
        name: cfg.name.clone(),
        mode: cfg.run.mode,
        seed,
        duration_s,
        path_loss_db,
        raman,
        raman_counts_s: noise,
        dark_counts_s: det.dark_rate,
        oracle,
        oracle_qber,
        qber,
        raw_rate_bs,
        counts,
        keyrate: keyrate_report(cfg, raw_rate_bs, qber)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_gives_defaults() {
        let cfg = ScenarioConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = ScenarioConfig::default();
        cfg.channels.combs = vec![
            Comb::LBand,
            Comb::UpstreamCBand {
                count: 2,
                power_dbm: 1.0,
            },
        ];
        cfg.run.mode = Mode::MonteCarlo;
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn validation_lists_every_failing_field() {
        let text = r#"{
            "schema": 2,
            "transmitter": {"mean_photon_number": -1},
            "detector": {"efficiency": 1.5},
            "gate": {"gate_fraction": 0},
            "keyrate": {"ec_inefficiency": 0.5}
        }"#;
        let cfg = ScenarioConfig::from_json(text).unwrap();
        let Err(Error::Config(fields)) = cfg.validate() else {
            panic!("expected config error");
        };
        let names: Vec<&str> = fields.iter().map(|f| f.field.as_str()).collect();
        for expected in [
            "schema",
            "transmitter.mean_photon_number",
            "detector.efficiency",
            "gate.gate_fraction",
            "keyrate.ec_inefficiency",
        ] {
            assert!(
                names.contains(&expected),
                "{expected} missing from {names:?}"
            );
        }
    }

    #[test]
    fn missing_raman_table_is_reported() {
        let mut cfg = ScenarioConfig::default();
        cfg.raman.table_csv = Some(PathBuf::from("/nonexistent/raman.csv"));
        let Err(Error::Config(fields)) = cfg.validate() else {
            panic!("expected config error");
        };
        assert_eq!(fields[0].field, "raman.table_csv");
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("oracle".parse::<Mode>().unwrap(), Mode::Oracle);
        assert_eq!("monte_carlo".parse::<Mode>().unwrap(), Mode::MonteCarlo);
        assert!("fast".parse::<Mode>().is_err());
    }

    #[test]
    fn upstream_count_replaces_upstream_channels() {
        let mut ch = ChannelsSection {
            combs: vec![
                Comb::CBand,
                Comb::UpstreamCBand {
                    count: 4,
                    power_dbm: 2.5,
                },
            ],
            ..ChannelsSection::default()
        };
        ch.set_upstream_count(2);
        let plan = ch.plan();
        let up = plan
            .channels
            .iter()
            .filter(|c| c.direction == Direction::Upstream)
            .count();
        assert_eq!(up, 2);
        assert_eq!(plan.channels.len(), 22);
        ch.set_upstream_count(0);
        assert_eq!(ch.plan().channels.len(), 20);
    }

    #[test]
    fn oracle_run_reports_consistent_keyrate() {
        let r = run_scenario(&ScenarioConfig::default()).unwrap();
        assert!(r.counts.is_none());
        assert_eq!(r.raman_counts_s, 0.0);
        let k = &r.keyrate;
        assert!((k.secure_bits_per_pulse * 1e9 - k.secure_rate_bs).abs() < 1e-9);
        assert!(r.qber > 0.0 && r.qber < 0.5);
    }
}
