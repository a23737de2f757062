//! One-dimensional parameter sweeps.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{run_scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::repro::{derive_seed, stream};

/// Column order of the sweep CSV.
pub const SWEEP_COLUMNS: [&str; 8] = [
    "axis_value",
    "path_loss_db",
    "raman_counts_s",
    "dark_counts_s",
    "raw_rate_bs",
    "qber",
    "secure_rate_bs",
    "secure_bits_per_pulse",
];

/// Axis and values to sweep. Besides any numeric dotted path into the
/// scenario JSON (e.g. `topology.splitter.ports`), the axis may be
/// `reach_km` (both feeders set to reach minus drop), `upstream_count`
/// (number of continuous upstream C-band channels) or `loss_budget_db`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub path_loss_db: f64,
    pub raman_counts_s: f64,
    pub dark_counts_s: f64,
    pub raw_rate_bs: f64,
    pub qber: f64,
    pub secure_rate_bs: f64,
    pub secure_bits_per_pulse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(SWEEP_COLUMNS)?;
        for r in &self.rows {
            wtr.write_record(
                [
                    r.axis_value,
                    r.path_loss_db,
                    r.raman_counts_s,
                    r.dark_counts_s,
                    r.raw_rate_bs,
                    r.qber,
                    r.secure_rate_bs,
                    r.secure_bits_per_pulse,
                ]
                .map(|v| v.to_string()),
            )?;
        }
        wtr.flush().map_err(|e| Error::io("<sweep csv>", e))?;
        Ok(())
    }

    /// Column by name, in row order.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = SWEEP_COLUMNS
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Lookup {
                kind: "sweep column",
                name: name.to_string(),
            })?;
        Ok(self
            .rows
            .iter()
            .map(|r| {
                [
                    r.axis_value,
                    r.path_loss_db,
                    r.raman_counts_s,
                    r.dark_counts_s,
                    r.raw_rate_bs,
                    r.qber,
                    r.secure_rate_bs,
                    r.secure_bits_per_pulse,
                ][idx]
            })
            .collect())
    }
}

fn axis_error(axis: &str, message: impl Into<String>) -> Error {
    Error::config(format!("sweep.axis `{axis}`"), message)
}

/// Returns a copy of `cfg` with `axis` set to `value`.
pub fn apply_axis(cfg: &ScenarioConfig, axis: &str, value: f64) -> Result<ScenarioConfig> {
    let mut out = cfg.clone();
    match axis {
        "reach_km" => {
            out.topology
                .set_reach(value)
                .map_err(|e| axis_error(axis, e.to_string()))?;
            return Ok(out);
        }
        "upstream_count" => {
            if !(value >= 0.0) || value.fract() != 0.0 {
                return Err(axis_error(axis, format!("{value} is not a channel count")));
            }
            out.channels.set_upstream_count(value as usize);
            return Ok(out);
        }
        "loss_budget_db" => {
            out.run.loss_budget_db = Some(value);
            return Ok(out);
        }
        _ => {}
    }

    let mut root = serde_json::to_value(cfg)?;
    let mut node = &mut root;
    let parts: Vec<&str> = axis.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(axis_error(
                axis,
                format!("`{}` is not a section", parts[..i].join(".")),
            ));
        };
        node = map
            .get_mut(*part)
            .ok_or_else(|| axis_error(axis, format!("no field `{part}`")))?;
    }
    *node = match node {
        Value::Number(n) if n.is_u64() || n.is_i64() => {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(axis_error(
                    axis,
                    format!("{value} is not a non-negative integer"),
                ));
            }
            Value::from(value as u64)
        }
        // optional numeric fields serialize as null when unset
        Value::Number(_) | Value::Null => Value::from(value),
        _ => return Err(axis_error(axis, "not a numeric field")),
    };
    let mut swept =
        ScenarioConfig::from_value(root).map_err(|e| axis_error(axis, e.to_string()))?;
    swept.base_dir = cfg.base_dir.clone();
    Ok(swept)
}

/// Runs every sweep point in parallel. Rows come back in sweep order and
/// point `i` of a Monte Carlo sweep uses its own seed derived from the
/// master seed, so the table does not depend on scheduling.
pub fn run_sweep(cfg: &ScenarioConfig, spec: &SweepSpec) -> Result<SweepResult> {
    if spec.values.is_empty() {
        return Err(Error::config("sweep.values", "must not be empty"));
    }
    let configs = spec
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut c = apply_axis(cfg, &spec.axis, v)?;
            c.run.seed = derive_seed(cfg.run.seed, stream::SWEEP_BASE + i as u64);
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = configs
        .par_iter()
        .zip(spec.values.par_iter())
        .map(|(c, &v)| {
            let r = run_scenario(c)?;
            Ok(SweepRow {
                axis_value: v,
                path_loss_db: r.path_loss_db,
                raman_counts_s: r.raman_counts_s,
                dark_counts_s: r.dark_counts_s,
                raw_rate_bs: r.raw_rate_bs,
                qber: r.qber,
                secure_rate_bs: r.keyrate.secure_rate_bs,
                secure_bits_per_pulse: r.keyrate.secure_bits_per_pulse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        axis: spec.axis.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_path_sets_integer_and_float_fields() {
        let cfg = ScenarioConfig::default();
        let c = apply_axis(&cfg, "topology.splitter.ports", 32.0).unwrap();
        assert_eq!(c.topology.splitter.ports, 32);
        let c = apply_axis(&cfg, "transmitter.mean_photon_number", 0.2).unwrap();
        assert_eq!(c.transmitter.mean_photon_number, 0.2);
        let c = apply_axis(&cfg, "run.loss_budget_db", 12.0).unwrap();
        assert_eq!(c.run.loss_budget_db, Some(12.0));
        let c = apply_axis(&cfg, "detector.dark_rate", 100.0).unwrap();
        assert_eq!(c.detector.model.dark_rate, 100.0);
    }

    #[test]
    fn unresolvable_axes_are_config_errors() {
        let cfg = ScenarioConfig::default();
        for axis in ["topology.nothing", "name", "topology.splitter.ports.x"] {
            assert!(
                matches!(apply_axis(&cfg, axis, 1.0), Err(Error::Config(_))),
                "{axis}"
            );
        }
        assert!(apply_axis(&cfg, "topology.splitter.ports", 2.5).is_err());
        assert!(apply_axis(&cfg, "upstream_count", -1.0).is_err());
        assert!(apply_axis(&cfg, "reach_km", 0.5).is_err());
    }

    #[test]
    fn special_axes() {
        let cfg = ScenarioConfig::default();
        let c = apply_axis(&cfg, "reach_km", 20.0).unwrap();
        assert_eq!(c.topology.reach_km(), 20.0);
        let c = apply_axis(&cfg, "upstream_count", 3.0).unwrap();
        assert_eq!(c.channels.plan().channels.len(), 3);
    }

    #[test]
    fn budget_sweep_rate_decreases() {
        let cfg = ScenarioConfig::default();
        let spec = SweepSpec {
            axis: "loss_budget_db".into(),
            values: (10..=30).map(f64::from).collect(),
        };
        let res = run_sweep(&cfg, &spec).unwrap();
        assert_eq!(res.rows.len(), 21);
        let rate = res.column("raw_rate_bs").unwrap();
        assert!(rate.windows(2).all(|w| w[1] < w[0]));
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 22);
        assert_eq!(text.lines().next().unwrap(), SWEEP_COLUMNS.join(","));
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let spec = SweepSpec {
            axis: "reach_km".into(),
            values: vec![],
        };
        assert!(matches!(
            run_sweep(&ScenarioConfig::default(), &spec),
            Err(Error::Config(_))
        ));
    }
}
