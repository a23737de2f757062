//! Fitting one free parameter to measured anchor values.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{bundled_scenario, run_scenario, Mode, ScenarioConfig, ScenarioReport};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: u32 = 100;
/// Largest accepted root-find residual, relative to the anchor target.
pub const RESIDUAL_TOLERANCE: f64 = 0.005;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParameter {
    RamanScale,
    ExcessLoss,
    Visibility,
}

impl FreeParameter {
    pub fn name(self) -> &'static str {
        match self {
            FreeParameter::RamanScale => "raman_scale",
            FreeParameter::ExcessLoss => "excess_loss",
            FreeParameter::Visibility => "visibility",
        }
    }

    pub fn get(self, cfg: &ScenarioConfig) -> f64 {
        match self {
            FreeParameter::RamanScale => cfg.raman.scale,
            FreeParameter::ExcessLoss => cfg.detector.model.excess_loss_db,
            FreeParameter::Visibility => cfg.transmitter.visibility,
        }
    }

    pub fn set(self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            FreeParameter::RamanScale => cfg.raman.scale = value,
            FreeParameter::ExcessLoss => cfg.detector.model.excess_loss_db = value,
            FreeParameter::Visibility => cfg.transmitter.visibility = value,
        }
    }

    /// Search interval.
    pub fn bracket(self) -> (f64, f64) {
        match self {
            FreeParameter::RamanScale => (0.0, 1e6),
            FreeParameter::ExcessLoss => (-20.0, 60.0),
            FreeParameter::Visibility => (0.5, 1.0),
        }
    }
}

impl fmt::Display for FreeParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FreeParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raman_scale" => Ok(FreeParameter::RamanScale),
            "excess_loss" | "excess_loss_db" => Ok(FreeParameter::ExcessLoss),
            "visibility" => Ok(FreeParameter::Visibility),
            _ => Err(Error::Lookup {
                kind: "free parameter",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    #[serde(rename = "raman_counts_s")]
    RamanCounts,
    #[serde(rename = "raw_rate_bs")]
    RawRate,
    #[serde(rename = "qber")]
    Qber,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::RamanCounts => "raman_counts_s",
            Observable::RawRate => "raw_rate_bs",
            Observable::Qber => "qber",
        }
    }

    pub fn measure(self, report: &ScenarioReport) -> f64 {
        match self {
            Observable::RamanCounts => report.raman_counts_s,
            Observable::RawRate => report.raw_rate_bs,
            Observable::Qber => report.qber,
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raman_counts_s" => Ok(Observable::RamanCounts),
            "raw_rate_bs" => Ok(Observable::RawRate),
            "qber" => Ok(Observable::Qber),
            _ => Err(Error::Lookup {
                kind: "observable",
                name: s.to_string(),
            }),
        }
    }
}

/// A measured value the model should reproduce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    /// Bundled scenario name, a scenario file, or empty for the
    /// configuration being calibrated.
    #[serde(default)]
    pub scenario: String,
    pub observable: Observable,
    pub target: f64,
}

impl Anchor {
    pub fn new(scenario: &str, observable: Observable, target: f64) -> Self {
        Self {
            scenario: scenario.to_string(),
            observable,
            target,
        }
    }

    fn config(&self, base: &ScenarioConfig) -> Result<ScenarioConfig> {
        if self.scenario.is_empty() || self.scenario == "self" {
            return Ok(base.clone());
        }
        if let Ok(cfg) = bundled_scenario(&self.scenario) {
            return Ok(cfg);
        }
        let path = Path::new(&self.scenario);
        let path = match &base.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        };
        ScenarioConfig::from_path(&path)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub parameter: FreeParameter,
    pub value: f64,
    /// Largest |model − target| over the anchors, in the anchor's units.
    pub residual: f64,
    /// Model − target per anchor.
    pub residuals: Vec<f64>,
    pub anchors: Vec<Anchor>,
    pub iterations: u32,
}

impl CalibrationResult {
    /// Writes the fitted value into `cfg`.
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        self.parameter.set(cfg, self.value);
    }
}

struct Problem {
    parameter: FreeParameter,
    configs: Vec<ScenarioConfig>,
    anchors: Vec<Anchor>,
}

impl Problem {
    fn residuals(&self, x: f64) -> Result<Vec<f64>> {
        self.configs
            .iter()
            .zip(&self.anchors)
            .map(|(cfg, a)| {
                let mut c = cfg.clone();
                self.parameter.set(&mut c, x);
                let r = run_scenario(&c)?;
                Ok(a.observable.measure(&r) - a.target)
            })
            .collect()
    }

    fn result(&self, value: f64, iterations: u32) -> Result<CalibrationResult> {
        let residuals = self.residuals(value)?;
        Ok(CalibrationResult {
            parameter: self.parameter,
            value,
            residual: residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
            residuals,
            anchors: self.anchors.clone(),
            iterations,
        })
    }

    fn error(&self, reason: &str, (lo, hi): (f64, f64), (f_lo, f_hi): (f64, f64)) -> Error {
        Error::Calibration {
            parameter: self.parameter.name().to_string(),
            reason: reason.to_string(),
            lo,
            hi,
            f_lo,
            f_hi,
        }
    }

    /// Illinois false position on the single anchor, with a bisection step
    /// whenever the bracket fails to halve.
    fn root(&self) -> Result<CalibrationResult> {
        let f = |x: f64| -> Result<f64> { Ok(self.residuals(x)?[0]) };
        let (mut a, mut b) = self.parameter.bracket();
        let (mut fa, mut fb) = (f(a)?, f(b)?);
        if fa == 0.0 {
            return self.result(a, 0);
        }
        if fb == 0.0 {
            return self.result(b, 0);
        }
        if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
            return Err(self.error("no sign change over the bracket", (a, b), (fa, fb)));
        }
        let target = self.anchors[0].target.abs().max(f64::MIN_POSITIVE);
        let mut side = 0i8;
        for iteration in 1..=MAX_ITERATIONS {
            let width = (b - a).abs();
            let mut x = (a * fb - b * fa) / (fb - fa);
            if !x.is_finite() || x <= a.min(b) || x >= a.max(b) {
                x = 0.5 * (a + b);
            }
            let fx = f(x)?;
            if fx.abs() <= 1e-12 * target || width <= 1e-13 * (1.0 + x.abs()) {
                if fx.abs() > RESIDUAL_TOLERANCE * target {
                    return Err(self.error(
                        "bracket collapsed on a discontinuity",
                        (a, b),
                        (fa, fb),
                    ));
                }
                return self.result(x, iteration);
            }
            if fx.signum() == fb.signum() {
                b = x;
                fb = fx;
                if side == -1 {
                    fa /= 2.0;
                }
                side = -1;
            } else {
                a = x;
                fa = fx;
                if side == 1 {
                    fb /= 2.0;
                }
                side = 1;
            }
            if (b - a).abs() > 0.5 * width {
                // slow progress: bisect once
                let m = 0.5 * (a + b);
                let fm = f(m)?;
                if fm.signum() == fb.signum() {
                    b = m;
                    fb = fm;
                } else {
                    a = m;
                    fa = fm;
                }
                side = 0;
            }
        }
        Err(self.error(
            &format!("no convergence in {MAX_ITERATIONS} iterations"),
            (a, b),
            (fa, fb),
        ))
    }

    /// Golden-section minimum of the summed squared relative residuals.
    fn least_squares(&self) -> Result<CalibrationResult> {
        let cost = |x: f64| -> Result<f64> {
            Ok(self
                .residuals(x)?
                .iter()
                .zip(&self.anchors)
                .map(|(r, a)| (r / a.target.abs().max(f64::MIN_POSITIVE)).powi(2))
                .sum())
        };
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = self.parameter.bracket();
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (cost(c)?, cost(d)?);
        for _ in 0..MAX_ITERATIONS {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = cost(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = cost(d)?;
            }
        }
        self.result(0.5 * (a + b), MAX_ITERATIONS)
    }
}

/// Fits `parameter` so the oracle reproduces the anchors: an exact root
/// for a single anchor, least squares in relative units for several.
pub fn calibrate(
    config: &ScenarioConfig,
    anchors: &[Anchor],
    parameter: FreeParameter,
) -> Result<CalibrationResult> {
    if anchors.is_empty() {
        return Err(Error::Argument(
            "calibration needs at least one anchor".to_string(),
        ));
    }
    let configs = anchors
        .iter()
        .map(|a| {
            let mut c = a.config(config)?;
            c.run.mode = Mode::Oracle;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let problem = Problem {
        parameter,
        configs,
        anchors: anchors.to_vec(),
    };
    if anchors.len() == 1 {
        problem.root()
    } else {
        problem.least_squares()
    }
}

/// The three fits that pin the model: Raman scale on the 360 counts/s
/// noise anchor, then excess loss on the 2.7 kb/s raw rate and visibility
/// on the 3.77% QBER of the baseline PON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineCalibration {
    pub raman_scale: CalibrationResult,
    pub excess_loss: CalibrationResult,
    pub visibility: CalibrationResult,
}

pub const RAMAN_ANCHOR_COUNTS: f64 = 360.0;
pub const BASELINE_RAW_RATE: f64 = 2700.0;
pub const BASELINE_QBER: f64 = 0.0377;

impl BaselineCalibration {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        self.raman_scale.apply(cfg);
        self.excess_loss.apply(cfg);
        self.visibility.apply(cfg);
    }
}

pub fn calibrate_baseline() -> Result<BaselineCalibration> {
    let raman_anchor = bundled_scenario("raman-anchor")?;
    let raman_scale = calibrate(
        &raman_anchor,
        &[Anchor::new(
            "self",
            Observable::RamanCounts,
            RAMAN_ANCHOR_COUNTS,
        )],
        FreeParameter::RamanScale,
    )?;
    let mut baseline = bundled_scenario("N")?;
    raman_scale.apply(&mut baseline);
    let excess_loss = calibrate(
        &baseline,
        &[Anchor::new("self", Observable::RawRate, BASELINE_RAW_RATE)],
        FreeParameter::ExcessLoss,
    )?;
    excess_loss.apply(&mut baseline);
    let visibility = calibrate(
        &baseline,
        &[Anchor::new("self", Observable::Qber, BASELINE_QBER)],
        FreeParameter::Visibility,
    )?;
    Ok(BaselineCalibration {
        raman_scale,
        excess_loss,
        visibility,
    })
}
