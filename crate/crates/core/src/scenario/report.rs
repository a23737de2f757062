//! Report files: JSON with full detail, or plot-ready CSV plus a JSON
//! sidecar carrying the provenance fields.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    CalibrationResult, ScenarioConfig, ScenarioReport, SweepResult, SweepSpec, SCHEMA_VERSION,
    TOOLKIT_VERSION,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::Lookup {
                kind: "format",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub toolkit_version: String,
    pub schema: u32,
    pub config_hash: String,
}

impl ReportMeta {
    pub fn for_config(cfg: &ScenarioConfig) -> Self {
        Self {
            toolkit_version: TOOLKIT_VERSION.to_string(),
            schema: SCHEMA_VERSION,
            config_hash: cfg.hash(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)] // built once per command
pub enum Report {
    Scenario {
        meta: ReportMeta,
        result: ScenarioReport,
    },
    Sweep {
        meta: ReportMeta,
        spec: SweepSpec,
        result: SweepResult,
    },
    Calibration {
        meta: ReportMeta,
        result: CalibrationResult,
        /// Input configuration with the fitted value written in.
        calibrated_config: ScenarioConfig,
    },
}

const SCENARIO_COLUMNS: [&str; 8] = [
    "name",
    "path_loss_db",
    "raman_counts_s",
    "dark_counts_s",
    "raw_rate_bs",
    "qber",
    "secure_rate_bs",
    "secure_bits_per_pulse",
];

impl Report {
    pub fn scenario(cfg: &ScenarioConfig, result: ScenarioReport) -> Self {
        Report::Scenario {
            meta: ReportMeta::for_config(cfg),
            result,
        }
    }

    pub fn sweep(cfg: &ScenarioConfig, spec: SweepSpec, result: SweepResult) -> Self {
        Report::Sweep {
            meta: ReportMeta::for_config(cfg),
            spec,
            result,
        }
    }

    pub fn calibration(cfg: &ScenarioConfig, result: CalibrationResult) -> Self {
        let mut calibrated_config = cfg.clone();
        result.apply(&mut calibrated_config);
        Report::Calibration {
            meta: ReportMeta::for_config(cfg),
            result,
            calibrated_config,
        }
    }

    pub fn meta(&self) -> &ReportMeta {
        match self {
            Report::Scenario { meta, .. }
            | Report::Sweep { meta, .. }
            | Report::Calibration { meta, .. } => meta,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        match self {
            Report::Sweep { result, .. } => result.write_csv(&mut buf)?,
            Report::Scenario { result: r, .. } => {
                let mut wtr = csv::Writer::from_writer(&mut buf);
                wtr.write_record(SCENARIO_COLUMNS)?;
                let mut row = vec![r.name.clone()];
                row.extend(
                    [
                        r.path_loss_db,
                        r.raman_counts_s,
                        r.dark_counts_s,
                        r.raw_rate_bs,
                        r.qber,
                        r.keyrate.secure_rate_bs,
                        r.keyrate.secure_bits_per_pulse,
                    ]
                    .map(|v| v.to_string()),
                );
                wtr.write_record(row)?;
                wtr.flush().map_err(|e| Error::io("<csv>", e))?;
            }
            Report::Calibration { result, .. } => {
                let mut wtr = csv::Writer::from_writer(&mut buf);
                wtr.write_record(["parameter", "value", "residual", "iterations"])?;
                wtr.write_record([
                    result.parameter.name().to_string(),
                    result.value.to_string(),
                    result.residual.to_string(),
                    result.iterations.to_string(),
                ])?;
                wtr.flush().map_err(|e| Error::io("<csv>", e))?;
            }
        }
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(self.to_json()),
            Format::Csv => self.to_csv(),
        }
    }
}

/// Sidecar path for a CSV report: `<file>.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes `report` to `path`. CSV output gets a sidecar with the toolkit
/// version and config hash so the table itself stays plot-ready.
pub fn emit_report(report: &Report, format: Format, path: &Path) -> Result<()> {
    let body = report.render(format)?;
    std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
    if format == Format::Csv {
        let meta = serde_json::to_string_pretty(report.meta())? + "\n";
        let side = sidecar_path(path);
        std::fs::write(&side, meta).map_err(|e| Error::io(side, e))?;
    }
    Ok(())
}
