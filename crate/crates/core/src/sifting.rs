//! Temporal gating, sifting against the transmitted pattern and QBER.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::link::{DifferentialTruth, TimeTagStream};

/// Number of trial phases scanned when the slot phase is estimated.
pub const PHASE_SCAN_POINTS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    /// Width of the acceptance window as a fraction of the symbol period.
    pub gate_fraction: f64,
    pub symbol_period_s: f64,
    /// Offset (seconds) between tag time zero and the slot grid;
    /// estimated from the tags when absent.
    pub slot_phase_s: Option<f64>,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            gate_fraction: 0.3,
            symbol_period_s: 1e-9,
            slot_phase_s: None,
        }
    }
}

impl GateConfig {
    pub fn ungated() -> Self {
        Self {
            gate_fraction: 1.0,
            ..Self::default()
        }
    }

    pub(crate) fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        if !(self.gate_fraction > 0.0 && self.gate_fraction <= 1.0) {
            errors.push(FieldError::new(
                format!("{prefix}.gate_fraction"),
                "must be in (0, 1]",
            ));
        }
        if !(self.symbol_period_s > 0.0) || !self.symbol_period_s.is_finite() {
            errors.push(FieldError::new(
                format!("{prefix}.symbol_period_s"),
                "must be > 0",
            ));
        }
        if let Some(phase) = self.slot_phase_s {
            if !phase.is_finite() {
                errors.push(FieldError::new(
                    format!("{prefix}.slot_phase_s"),
                    "must be finite",
                ));
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.check("gate", &mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}

/// True when `time_ps` lies in the closed window of width
/// `fraction · period` centred on the middle of its slot.
fn in_window(time_ps: f64, phase_ps: f64, period_ps: f64, fraction: f64) -> bool {
    let offset = (time_ps - phase_ps).rem_euclid(period_ps) - period_ps / 2.0;
    offset.abs() <= fraction * period_ps / 2.0 + 1e-9
}

/// Slot phase (ps, in (−T/2, T/2]) maximising the number of tags inside the
/// gate over a 64-point scan. Phases whose count is within 2√max of the best
/// form a plateau (the pulse fits inside the gate); the plateau centre is
/// returned so that background fluctuations do not pick the phase. A flat
/// scan, as for a full-period gate, gives zero.
pub fn estimate_slot_phase(stream: &TimeTagStream, gate: &GateConfig) -> f64 {
    const N: usize = PHASE_SCAN_POINTS;
    let period_ps = gate.symbol_period_s * 1e12;
    let step = period_ps / N as f64;
    let counts: Vec<usize> = (0..N)
        .map(|j| {
            let phase = j as f64 * step;
            stream
                .tags
                .iter()
                .filter(|t| in_window(t.time_ps as f64, phase, period_ps, gate.gate_fraction))
                .count()
        })
        .collect();
    let best = (0..N)
        .max_by_key(|&j| (counts[j], std::cmp::Reverse(j)))
        .unwrap_or(0);
    let floor = counts[best] as f64 - 2.0 * (counts[best] as f64).sqrt();
    let on = |j: usize| counts[j % N] as f64 >= floor;
    if (0..N).all(on) {
        return 0.0;
    }
    // walk the circular plateau around the best phase
    let mut lo = 0;
    while on(best + N - lo - 1) {
        lo += 1;
    }
    let mut hi = 0;
    while on(best + hi + 1) {
        hi += 1;
    }
    let centre = (best as f64 + (hi as f64 - lo as f64) / 2.0).rem_euclid(N as f64) * step;
    if centre > period_ps / 2.0 {
        centre - period_ps
    } else {
        centre
    }
}

/// Keeps only tags inside the gate. Without an explicit slot phase, a
/// stream that was gated before keeps its phase and a raw stream gets an
/// estimated one, so applying the same gate twice is a no-op.
pub fn apply_gate(stream: &TimeTagStream, gate: &GateConfig) -> Result<TimeTagStream> {
    gate.validate()?;
    let period_ps = gate.symbol_period_s * 1e12;
    let phase_ps = match (gate.slot_phase_s, stream.slot_phase_ps) {
        (Some(s), _) => s * 1e12,
        (None, Some(p)) => p,
        (None, None) => estimate_slot_phase(stream, gate),
    };
    let tags: Vec<_> = stream
        .tags
        .iter()
        .copied()
        .filter(|t| in_window(t.time_ps as f64, phase_ps, period_ps, gate.gate_fraction))
        .collect();
    let rejected = (stream.tags.len() - tags.len()) as u64;
    Ok(TimeTagStream {
        tags,
        duration_s: stream.duration_s,
        gated_rejected: stream.gated_rejected + rejected,
        slot_phase_ps: Some(phase_ps),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QberReport {
    pub qber: f64,
    /// Sifted clicks per second.
    pub raw_rate: f64,
    pub sifted: u64,
    pub errors: u64,
    pub gated_rejected: u64,
    pub duration_s: f64,
}

/// Maps every tag to its slot, reads the announced bit from the port and
/// counts disagreements with `truth`.
pub fn sift_and_score(
    stream: &TimeTagStream,
    truth: &(impl DifferentialTruth + ?Sized),
    symbol_period_s: f64,
) -> Result<QberReport> {
    if !(symbol_period_s > 0.0) {
        return Err(Error::Argument(format!(
            "symbol period must be > 0, got {symbol_period_s}"
        )));
    }
    if stream.tags.is_empty() {
        return Err(Error::Undefined(
            "no tags to sift; QBER is undefined".to_string(),
        ));
    }
    let period_ps = symbol_period_s * 1e12;
    let phase = stream.slot_phase_ps.unwrap_or(0.0);
    let mut errors = 0u64;
    for tag in &stream.tags {
        let slot = ((tag.time_ps as f64 - phase) / period_ps).floor();
        let expected = (slot >= 0.0)
            .then(|| truth.bit(slot as u64))
            .flatten()
            .ok_or_else(|| {
                Error::Data(format!(
                    "tag at {} ps maps to slot {slot}, outside the transmitted pattern",
                    tag.time_ps
                ))
            })?;
        if tag.port.bit() != expected {
            errors += 1;
        }
    }
    let sifted = stream.tags.len() as u64;
    Ok(QberReport {
        qber: errors as f64 / sifted as f64,
        raw_rate: sifted as f64 / stream.duration_s,
        sifted,
        errors,
        gated_rejected: stream.gated_rejected,
        duration_s: stream.duration_s,
    })
}

/// QBER of a mix of signal clicks with intrinsic error `e_int` and
/// uncorrelated clicks, which are wrong half the time.
pub fn qber_composition_oracle(
    signal_rate: f64,
    e_int: f64,
    uncorrelated_rate: f64,
) -> Result<f64> {
    if signal_rate < 0.0 || uncorrelated_rate < 0.0 || !(0.0..=0.5).contains(&e_int) {
        return Err(Error::Argument(format!(
            "rates must be >= 0 and e_int in [0, 0.5]; got S={signal_rate}, e={e_int}, B={uncorrelated_rate}"
        )));
    }
    let total = signal_rate + uncorrelated_rate;
    if total <= 0.0 {
        return Err(Error::Undefined(
            "zero total rate; QBER is undefined".to_string(),
        ));
    }
    Ok((e_int * signal_rate + 0.5 * uncorrelated_rate) / total)
}
