//! DPS quantum channel: phase-encoded weak coherent pulses, lossy
//! propagation, one-symbol delay-interferometer demodulation and a
//! free-running SPAD with dead time and after-pulsing.
//!
//! The Monte Carlo is event driven. Signal detections are drawn by geometric
//! skipping over symbol slots, background clicks as a Poisson process, and
//! after-pulses as one pending event per detector; all three are merged in
//! time order through the detector's dead time. An after-pulse fires a
//! random delay after the detector re-arms unless another click registers
//! first, which is exactly the process the closed-form oracle describes.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::repro::{derive_seed, rng, splitmix64, stream};
use crate::units::loss_to_transmission;

/// Interference visibility that reproduces the 3.77% baseline QBER once
/// dark counts are included (see `scenario::calibrate`).
pub const CALIBRATED_VISIBILITY: f64 = 0.986_515_649_2;
/// Receiver loss lump (DI, filter, single-port monitoring, carving, connectors).
pub const CALIBRATED_EXCESS_LOSS_DB: f64 = 17.833_101_68;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternSource {
    /// Phases drawn from the run's pattern seed.
    Seeded,
    /// Explicit phase bits (0 → 0, 1 → π), repeated cyclically.
    Explicit(Vec<u8>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransmitterConfig {
    pub symbol_rate_hz: f64,
    pub mean_photon_number: f64,
    /// Fraction of the symbol period occupied by the carved pulse.
    pub carve_duty: f64,
    pub visibility: f64,
    pub pattern: PatternSource,
}

impl Default for TransmitterConfig {
    fn default() -> Self {
        Self {
            symbol_rate_hz: 1e9,
            mean_photon_number: 0.1,
            carve_duty: 0.2,
            visibility: CALIBRATED_VISIBILITY,
            pattern: PatternSource::Seeded,
        }
    }
}

impl TransmitterConfig {
    pub fn intrinsic_error(&self) -> f64 {
        (1.0 - self.visibility) / 2.0
    }

    pub fn symbol_period_s(&self) -> f64 {
        1.0 / self.symbol_rate_hz
    }

    pub(crate) fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        if !(self.symbol_rate_hz > 0.0) || !self.symbol_rate_hz.is_finite() {
            errors.push(FieldError::new(
                format!("{prefix}.symbol_rate_hz"),
                "must be > 0",
            ));
        }
        if !(self.mean_photon_number > 0.0) {
            errors.push(FieldError::new(
                format!("{prefix}.mean_photon_number"),
                "must be > 0",
            ));
        }
        if !(self.carve_duty > 0.0 && self.carve_duty <= 1.0) {
            errors.push(FieldError::new(
                format!("{prefix}.carve_duty"),
                "must be in (0, 1]",
            ));
        }
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            errors.push(FieldError::new(
                format!("{prefix}.visibility"),
                "must be in (0, 1]",
            ));
        }
        if let PatternSource::Explicit(bits) = &self.pattern {
            if bits.len() < 2 || bits.iter().any(|&b| b > 1) {
                errors.push(FieldError::new(
                    format!("{prefix}.pattern"),
                    "explicit pattern needs >= 2 entries, each 0 or 1",
                ));
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitoredPorts {
    /// Only the constructive DI output carries a detector.
    One,
    Both,
}

impl MonitoredPorts {
    pub fn detectors(self) -> usize {
        match self {
            MonitoredPorts::One => 1,
            MonitoredPorts::Both => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Dark counts per second, all monitored detectors together.
    pub dark_rate: f64,
    pub dead_time_s: f64,
    /// Probability that a detection is followed by an after-pulse once the
    /// detector re-arms.
    pub afterpulse_prob: f64,
    /// Mean after-pulse delay measured from the end of the dead time.
    pub afterpulse_decay_s: f64,
    pub monitored_ports: MonitoredPorts,
    /// Receiver loss not accounted for by the ODN.
    pub excess_loss_db: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency: 0.10,
            dark_rate: 520.0,
            dead_time_s: 10e-6,
            afterpulse_prob: 0.02,
            afterpulse_decay_s: 5e-6,
            monitored_ports: MonitoredPorts::One,
            excess_loss_db: CALIBRATED_EXCESS_LOSS_DB,
        }
    }
}

impl DetectorModel {
    /// Detection efficiency of the whole receiver behind `loss_budget_db`.
    pub fn overall_efficiency(&self, loss_budget_db: f64) -> f64 {
        self.efficiency * loss_to_transmission(loss_budget_db + self.excess_loss_db)
    }

    pub(crate) fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.efficiency) {
            errors.push(FieldError::new(
                format!("{prefix}.efficiency"),
                "must be in [0, 1]",
            ));
        }
        if !(self.dark_rate >= 0.0) {
            errors.push(FieldError::new(
                format!("{prefix}.dark_rate"),
                "must be >= 0",
            ));
        }
        if !(self.dead_time_s >= 0.0) {
            errors.push(FieldError::new(
                format!("{prefix}.dead_time_s"),
                "must be >= 0",
            ));
        }
        if !unit(self.afterpulse_prob) {
            errors.push(FieldError::new(
                format!("{prefix}.afterpulse_prob"),
                "must be in [0, 1]",
            ));
        }
        if !(self.afterpulse_decay_s > 0.0) {
            errors.push(FieldError::new(
                format!("{prefix}.afterpulse_decay_s"),
                "must be > 0",
            ));
        }
        if !self.excess_loss_db.is_finite() {
            errors.push(FieldError::new(
                format!("{prefix}.excess_loss_db"),
                "must be finite",
            ));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayInterferometer {
    pub delay_s: f64,
}

impl Default for DelayInterferometer {
    fn default() -> Self {
        Self { delay_s: 1e-9 }
    }
}

impl DelayInterferometer {
    /// Visibility left after a delay mismatch: the overlap of adjacent
    /// carved pulses, zero once they no longer overlap.
    pub fn effective_visibility(&self, tx: &TransmitterConfig) -> f64 {
        let period = tx.symbol_period_s();
        let mismatch = (self.delay_s - period).abs() / (tx.carve_duty * period);
        if mismatch < 1e-9 {
            return tx.visibility;
        }
        tx.visibility * (1.0 - mismatch).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Port {
    Constructive,
    Destructive,
}

impl Port {
    /// Differential bit announced by a click at this port.
    pub fn bit(self) -> u8 {
        match self {
            Port::Constructive => 0,
            Port::Destructive => 1,
        }
    }

    pub fn for_bit(bit: u8) -> Self {
        if bit == 0 {
            Port::Constructive
        } else {
            Port::Destructive
        }
    }

    fn index(self) -> usize {
        self.bit() as usize
    }

    fn flipped(self) -> Self {
        Port::for_bit(1 - self.bit())
    }
}

/// Where a tag came from; for debugging only, estimators never read it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Signal,
    Dark,
    Raman,
    Afterpulse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTag {
    pub time_ps: u64,
    pub port: Port,
    pub origin: Origin,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeTagStream {
    pub tags: Vec<TimeTag>,
    pub duration_s: f64,
    /// Tags removed by temporal gating so far.
    pub gated_rejected: u64,
    /// Slot phase (ps) resolved by the last gating step, if any.
    pub slot_phase_ps: Option<f64>,
}

impl TimeTagStream {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn rate(&self) -> f64 {
        self.tags.len() as f64 / self.duration_s
    }

    /// `time_ps,port` rows, port 0 = constructive, 1 = destructive.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["time_ps", "port"])?;
        for tag in &self.tags {
            wtr.write_record([tag.time_ps.to_string(), tag.port.bit().to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<tag csv>", e))?;
        Ok(())
    }

    /// Reads a tag CSV; origins are unknown and reported as `Signal`.
    pub fn read_csv<R: Read>(reader: R, duration_s: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut tags = Vec::new();
        let mut last = 0u64;
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let parse_err = || Error::Data(format!("tag row {}: malformed", i + 1));
            let time_ps: u64 = row
                .get(0)
                .ok_or_else(parse_err)?
                .parse()
                .map_err(|_| parse_err())?;
            let port = match row.get(1).ok_or_else(parse_err)? {
                "0" => Port::Constructive,
                "1" => Port::Destructive,
                _ => return Err(parse_err()),
            };
            if time_ps < last {
                return Err(Error::Data(format!(
                    "tag row {}: time goes backwards",
                    i + 1
                )));
            }
            last = time_ps;
            tags.push(TimeTag {
                time_ps,
                port,
                origin: Origin::Signal,
            });
        }
        Ok(Self {
            tags,
            duration_s,
            ..Self::default()
        })
    }
}

/// Ground-truth differential bit per DI output slot. Slot `k` carries the
/// phase difference between pulses `k - 1` and `k`, so slot 0 has none.
pub trait DifferentialTruth {
    fn bit(&self, slot: u64) -> Option<u8>;
}

impl DifferentialTruth for [u8] {
    fn bit(&self, slot: u64) -> Option<u8> {
        let idx = usize::try_from(slot.checked_sub(1)?).ok()?;
        self.get(idx).copied()
    }
}

impl DifferentialTruth for Vec<u8> {
    fn bit(&self, slot: u64) -> Option<u8> {
        self.as_slice().bit(slot)
    }
}

/// Phase pattern over a run of `slots` symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternTruth {
    pub slots: u64,
    pub source: TruthSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSource {
    Seeded { seed: u64 },
    Explicit { phases: Vec<u8> },
}

impl PatternTruth {
    pub fn phase(&self, symbol: u64) -> u8 {
        match &self.source {
            TruthSource::Seeded { seed } => {
                (splitmix64(seed ^ symbol.wrapping_mul(0xd6e8_feb8_6659_fd93)) >> 63) as u8
            }
            TruthSource::Explicit { phases } => phases[(symbol % phases.len() as u64) as usize],
        }
    }
}

impl DifferentialTruth for PatternTruth {
    fn bit(&self, slot: u64) -> Option<u8> {
        if slot == 0 || slot >= self.slots {
            return None;
        }
        Some(self.phase(slot) ^ self.phase(slot - 1))
    }
}

fn pattern_truth(tx: &TransmitterConfig, slots: u64, seed: u64) -> PatternTruth {
    let source = match &tx.pattern {
        PatternSource::Seeded => TruthSource::Seeded {
            seed: derive_seed(seed, stream::PATTERN),
        },
        PatternSource::Explicit(phases) => TruthSource::Explicit {
            phases: phases.clone(),
        },
    };
    PatternTruth { slots, source }
}

/// Phase list (0 → 0, 1 → π) and the differential bits it encodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseTrain {
    pub phases: Vec<u8>,
    pub bits: Vec<u8>,
}

pub fn differential_bits(phases: &[u8]) -> Vec<u8> {
    phases.windows(2).map(|w| w[0] ^ w[1]).collect()
}

pub fn generate_phase_train(
    tx: &TransmitterConfig,
    n_symbols: usize,
    seed: u64,
) -> Result<PhaseTrain> {
    if n_symbols < 2 {
        return Err(Error::Argument(format!(
            "a phase train needs at least 2 symbols, got {n_symbols}"
        )));
    }
    let truth = pattern_truth(tx, n_symbols as u64, seed);
    let phases: Vec<u8> = (0..n_symbols as u64).map(|k| truth.phase(k)).collect();
    let bits = differential_bits(&phases);
    Ok(PhaseTrain { phases, bits })
}

/// Closed-form count rates at the receiver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleRates {
    /// Signal clicks inside the gate.
    pub signal_rate: f64,
    /// Dark and Raman clicks inside the gate.
    pub background_rate: f64,
    /// After-pulses inside the gate.
    pub afterpulse_rate: f64,
    pub total_rate: f64,
    /// Fraction of time the detectors are armed.
    pub live_fraction: f64,
}

impl OracleRates {
    /// Clicks carrying no information about the key bit.
    pub fn uncorrelated_rate(&self) -> f64 {
        self.background_rate + self.afterpulse_rate
    }
}

/// Registered rates for Poisson input at `input_rate` per detector with
/// non-paralysable dead time and re-arm after-pulsing:
/// R_reg = R / (1 + R·τ_d − p_ap/(1 + R·τ_ap)); live = 1 − R_reg·τ_d.
fn registered_rate(input_rate: f64, det: &DetectorModel) -> (f64, f64) {
    let r = input_rate;
    let survive = 1.0 / (1.0 + r * det.afterpulse_decay_s);
    let total = r / (1.0 + r * det.dead_time_s - det.afterpulse_prob * survive);
    let live = 1.0 - total * det.dead_time_s;
    (total, live)
}

/// Signal, background and after-pulse click rates behind `loss_budget_db`,
/// with uncorrelated clicks thinned by `gate_fraction` and signal clicks by
/// the part of the carve window outside the gate.
pub fn click_rate_oracle(
    tx: &TransmitterConfig,
    loss_budget_db: f64,
    det: &DetectorModel,
    noise_rate: f64,
    gate_fraction: f64,
) -> Result<OracleRates> {
    if !(loss_budget_db >= 0.0) {
        return Err(Error::Argument(format!(
            "loss budget must be >= 0, got {loss_budget_db}"
        )));
    }
    if !(gate_fraction > 0.0 && gate_fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "gate fraction must be in (0, 1], got {gate_fraction}"
        )));
    }
    if !(noise_rate >= 0.0) {
        return Err(Error::Argument(format!(
            "noise rate must be >= 0, got {noise_rate}"
        )));
    }
    let eta = det.overall_efficiency(loss_budget_db);
    let p_click = -(-tx.mean_photon_number * eta).exp_m1();
    let signal_in = tx.symbol_rate_hz * p_click;
    let background_in = det.dark_rate + noise_rate;
    let detectors = det.monitored_ports.detectors() as f64;
    let per_detector = (signal_in + background_in) / detectors;
    let (registered, live) = registered_rate(per_detector, det);
    let afterpulse_raw = detectors * (registered - per_detector * live);
    let signal_gate = (gate_fraction / tx.carve_duty).min(1.0);
    let signal_rate = signal_in * live * signal_gate;
    let background_rate = background_in * live * gate_fraction;
    let afterpulse_rate = afterpulse_raw * gate_fraction;
    Ok(OracleRates {
        signal_rate,
        background_rate,
        afterpulse_rate,
        total_rate: signal_rate + background_rate + afterpulse_rate,
        live_fraction: live,
    })
}

/// A simulated run: the raw tag stream and the pattern it was driven by.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub stream: TimeTagStream,
    pub truth: PatternTruth,
}

#[derive(Clone, Copy)]
struct Pending {
    time_ps: f64,
    port: Port,
    origin: Origin,
}

struct SignalSource {
    slot: u64,
    slots: u64,
    log_miss: f64,
    accept: [f64; 2],
    correct_port: f64,
    ports: MonitoredPorts,
    period_ps: f64,
    duty: f64,
    rng: rand_chacha::ChaCha8Rng,
}

impl SignalSource {
    fn next(&mut self, truth: &PatternTruth) -> Option<Pending> {
        if !self.log_miss.is_finite() || self.log_miss == 0.0 {
            return None;
        }
        loop {
            let u: f64 = 1.0 - self.rng.random::<f64>();
            let skip = (u.ln() / self.log_miss).floor();
            if skip >= (self.slots - self.slot) as f64 {
                self.slot = self.slots;
                return None;
            }
            self.slot += 1 + skip as u64;
            if self.slot >= self.slots {
                return None;
            }
            let bit = truth.bit(self.slot)?;
            if self.rng.random::<f64>() >= self.accept[bit as usize] {
                continue;
            }
            let port = match self.ports {
                MonitoredPorts::One => Port::Constructive,
                MonitoredPorts::Both => {
                    let expected = Port::for_bit(bit);
                    if self.rng.random::<f64>() < self.correct_port {
                        expected
                    } else {
                        expected.flipped()
                    }
                }
            };
            let jitter = (self.rng.random::<f64>() - 0.5) * self.duty * self.period_ps;
            let time_ps = (self.slot as f64 + 0.5) * self.period_ps + jitter;
            return Some(Pending {
                time_ps,
                port,
                origin: Origin::Signal,
            });
        }
    }
}

/// Monte Carlo tag stream for `duration_s` of transmission behind
/// `loss_budget_db`, with `noise_rate` extra background (Raman) clicks/s.
pub fn simulate_timetags(
    tx: &TransmitterConfig,
    di: &DelayInterferometer,
    loss_budget_db: f64,
    det: &DetectorModel,
    noise_rate: f64,
    duration_s: f64,
    seed: u64,
) -> Result<Simulation> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::Argument(format!(
            "duration must be > 0, got {duration_s}"
        )));
    }
    if !(loss_budget_db >= 0.0) || !(noise_rate >= 0.0) {
        return Err(Error::Argument(
            "loss budget and noise rate must be >= 0".to_string(),
        ));
    }
    let period_ps = 1e12 / tx.symbol_rate_hz;
    let duration_ps = duration_s * 1e12;
    let slots = (duration_s * tx.symbol_rate_hz).floor() as u64;
    let truth = pattern_truth(tx, slots, seed);
    let visibility = di.effective_visibility(tx);
    let mu_eta = tx.mean_photon_number * det.overall_efficiency(loss_budget_db);

    // per-slot click probabilities by differential bit
    let (p_bit, correct_port) = match det.monitored_ports {
        MonitoredPorts::One => {
            let p0 = -(-mu_eta * (1.0 + visibility)).exp_m1();
            let p1 = -(-mu_eta * (1.0 - visibility)).exp_m1();
            ([p0, p1], 1.0)
        }
        MonitoredPorts::Both => {
            let p = -(-mu_eta).exp_m1();
            ([p, p], (1.0 + visibility) / 2.0)
        }
    };
    let p_max = p_bit[0].max(p_bit[1]);
    let mut signal = SignalSource {
        slot: 0,
        slots,
        log_miss: (-p_max).ln_1p(),
        accept: if p_max > 0.0 {
            [p_bit[0] / p_max, p_bit[1] / p_max]
        } else {
            [0.0, 0.0]
        },
        correct_port,
        ports: det.monitored_ports,
        period_ps,
        duty: tx.carve_duty,
        rng: rng(derive_seed(seed, stream::SIGNAL)),
    };

    let background_rate = det.dark_rate + noise_rate;
    let mut bg_rng = rng(derive_seed(seed, stream::BACKGROUND));
    let bg_gap =
        (background_rate > 0.0).then(|| Exp::new(background_rate * 1e-12).expect("positive rate"));
    let mut bg_time = 0.0;
    let mut next_background = |rng: &mut rand_chacha::ChaCha8Rng| -> Option<Pending> {
        let gap = bg_gap.as_ref()?;
        bg_time += gap.sample(rng);
        if bg_time >= duration_ps {
            return None;
        }
        let origin = if rng.random::<f64>() * background_rate < det.dark_rate {
            Origin::Dark
        } else {
            Origin::Raman
        };
        let port = match det.monitored_ports {
            MonitoredPorts::One => Port::Constructive,
            MonitoredPorts::Both => {
                if rng.random::<bool>() {
                    Port::Constructive
                } else {
                    Port::Destructive
                }
            }
        };
        Some(Pending {
            time_ps: bg_time,
            port,
            origin,
        })
    };

    let mut ap_rng = rng(derive_seed(seed, stream::AFTERPULSE));
    let ap_delay = Exp::new(1.0 / (det.afterpulse_decay_s * 1e12)).expect("positive decay");
    let dead_ps = (det.dead_time_s * 1e12).round() as u64;
    // at most one pending after-pulse per detector; a later registered
    // click supersedes it
    let mut afterpulse: [Option<u64>; 2] = [None, None];
    let mut dead_until = [0u64; 2];

    let mut next_sig = signal.next(&truth);
    let mut next_bg = next_background(&mut bg_rng);
    let mut tags = Vec::new();

    loop {
        let t_sig = next_sig.map_or(f64::INFINITY, |p| p.time_ps);
        let t_bg = next_bg.map_or(f64::INFINITY, |p| p.time_ps);
        let ap_idx = match (afterpulse[0], afterpulse[1]) {
            (Some(a), Some(b)) => Some(if a <= b { 0 } else { 1 }),
            (Some(_), None) => Some(0),
            (None, Some(_)) => Some(1),
            (None, None) => None,
        };
        let t_ap = ap_idx.map_or(f64::INFINITY, |i| afterpulse[i].expect("pending") as f64);
        let event = if t_sig.is_infinite() && t_bg.is_infinite() && t_ap.is_infinite() {
            break;
        } else if t_ap <= t_sig && t_ap <= t_bg {
            let idx = ap_idx.expect("finite");
            let t = afterpulse[idx].take().expect("pending");
            Pending {
                time_ps: t as f64,
                port: if idx == 0 {
                    Port::Constructive
                } else {
                    Port::Destructive
                },
                origin: Origin::Afterpulse,
            }
        } else if t_sig <= t_bg {
            let e = next_sig.expect("finite");
            next_sig = signal.next(&truth);
            e
        } else {
            let e = next_bg.expect("finite");
            next_bg = next_background(&mut bg_rng);
            e
        };

        let time_ps = event.time_ps as u64;
        let detector = match det.monitored_ports {
            MonitoredPorts::One => 0,
            MonitoredPorts::Both => event.port.index(),
        };
        if time_ps < dead_until[detector] {
            continue;
        }
        dead_until[detector] = time_ps + dead_ps;
        afterpulse[event.port.index()] = None;
        tags.push(TimeTag {
            time_ps,
            port: event.port,
            origin: event.origin,
        });
        if det.afterpulse_prob > 0.0 && ap_rng.random::<f64>() < det.afterpulse_prob {
            let t = time_ps as f64 + dead_ps as f64 + ap_delay.sample(&mut ap_rng);
            if t < duration_ps {
                afterpulse[event.port.index()] = Some(t as u64);
            }
        }
    }

    Ok(Simulation {
        stream: TimeTagStream {
            tags,
            duration_s,
            gated_rejected: 0,
            slot_phase_ps: None,
        },
        truth,
    })
}

/// Metadata written next to an exported tag CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagSidecar {
    pub seed: u64,
    pub config_hash: String,
    pub duration_s: f64,
    pub symbol_rate_hz: f64,
    pub tags: usize,
    pub truth: PatternTruth,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(v: f64) -> TransmitterConfig {
        TransmitterConfig {
            visibility: v,
            ..TransmitterConfig::default()
        }
    }

    fn quiet(ports: MonitoredPorts) -> DetectorModel {
        DetectorModel {
            dark_rate: 0.0,
            dead_time_s: 0.0,
            afterpulse_prob: 0.0,
            monitored_ports: ports,
            ..DetectorModel::default()
        }
    }

    #[test]
    fn differential_bits_examples() {
        assert_eq!(differential_bits(&[0, 0, 0]), vec![0, 0]);
        assert_eq!(differential_bits(&[0, 1, 0]), vec![1, 1]);
    }

    #[test]
    fn phase_train_is_deterministic() {
        let a = generate_phase_train(&tx(1.0), 1000, 7).unwrap();
        let b = generate_phase_train(&tx(1.0), 1000, 7).unwrap();
        let c = generate_phase_train(&tx(1.0), 1000, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.bits, differential_bits(&a.phases));
        let ones = a.phases.iter().filter(|&&p| p == 1).count();
        assert!((400..600).contains(&ones), "{ones}");
        assert!(generate_phase_train(&tx(1.0), 1, 7).is_err());
    }

    #[test]
    fn explicit_pattern_is_used() {
        let t = TransmitterConfig {
            pattern: PatternSource::Explicit(vec![0, 1, 0]),
            ..tx(1.0)
        };
        let train = generate_phase_train(&t, 3, 0).unwrap();
        assert_eq!(train.phases, vec![0, 1, 0]);
        assert_eq!(train.bits, vec![1, 1]);
    }

    #[test]
    fn truth_slot_mapping() {
        let bits = vec![1u8, 0, 1];
        assert_eq!(bits.bit(0), None);
        assert_eq!(bits.bit(1), Some(1));
        assert_eq!(bits.bit(3), Some(1));
        assert_eq!(bits.bit(4), None);
        let train = generate_phase_train(&tx(1.0), 64, 3).unwrap();
        let truth = pattern_truth(&tx(1.0), 64, 3);
        for slot in 1..64 {
            assert_eq!(truth.bit(slot), train.bits.bit(slot));
        }
    }

    #[test]
    fn oracle_without_photons_is_background_only() {
        let t = TransmitterConfig {
            mean_photon_number: 1e-300,
            ..tx(1.0)
        };
        let det = DetectorModel {
            dead_time_s: 0.0,
            afterpulse_prob: 0.0,
            ..DetectorModel::default()
        };
        let r = click_rate_oracle(&t, 18.0, &det, 100.0, 0.3).unwrap();
        assert!(r.signal_rate < 1e-200);
        assert!((r.background_rate - 620.0 * 0.3).abs() < 1e-9);
    }

    #[test]
    fn oracle_linear_regime_halves_per_3db() {
        let det = quiet(MonitoredPorts::One);
        let a = click_rate_oracle(&tx(1.0), 20.0, &det, 0.0, 1.0)
            .unwrap()
            .total_rate;
        let b = click_rate_oracle(&tx(1.0), 20.0 + 10.0 * 2f64.log10(), &det, 0.0, 1.0)
            .unwrap()
            .total_rate;
        assert!((a / b - 2.0).abs() < 0.02 * 2.0);
    }

    #[test]
    fn oracle_matches_spec_form_without_afterpulses() {
        let det = DetectorModel {
            afterpulse_prob: 0.0,
            ..DetectorModel::default()
        };
        let t = tx(0.95);
        let r = click_rate_oracle(&t, 18.0, &det, 300.0, 0.3).unwrap();
        let s = 1e9 * (1.0 - (-0.1 * 0.1 * 10f64.powf(-(18.0 + det.excess_loss_db) / 10.0)).exp());
        let raw = s + 520.0 + 300.0;
        let derate = 1.0 / (1.0 + raw * det.dead_time_s);
        assert!((r.signal_rate - s * derate).abs() < 1e-9 * s);
        assert!((r.background_rate - 820.0 * 0.3 * derate).abs() < 1e-9);
        assert!(r.afterpulse_rate.abs() < 1e-9);
    }

    #[test]
    fn oracle_rejects_bad_arguments() {
        let det = DetectorModel::default();
        assert!(click_rate_oracle(&tx(1.0), -1.0, &det, 0.0, 0.3).is_err());
        assert!(click_rate_oracle(&tx(1.0), 10.0, &det, 0.0, 0.0).is_err());
        assert!(click_rate_oracle(&tx(1.0), 10.0, &det, -5.0, 0.3).is_err());
    }

    #[test]
    fn perfect_visibility_has_no_wrong_port_tags() {
        let sim = simulate_timetags(
            &tx(1.0),
            &DelayInterferometer::default(),
            5.0,
            &quiet(MonitoredPorts::Both),
            0.0,
            0.2,
            11,
        )
        .unwrap();
        assert!(sim.stream.len() > 1000);
        for tag in &sim.stream.tags {
            let slot = tag.time_ps / 1000;
            assert_eq!(Some(tag.port.bit()), sim.truth.bit(slot));
        }
    }

    #[test]
    fn wrong_port_fraction_tracks_visibility() {
        let sim = simulate_timetags(
            &tx(0.9246),
            &DelayInterferometer::default(),
            0.0,
            &DetectorModel {
                excess_loss_db: 0.0,
                ..quiet(MonitoredPorts::Both)
            },
            0.0,
            0.02,
            5,
        )
        .unwrap();
        let n = sim.stream.len() as f64;
        let wrong = sim
            .stream
            .tags
            .iter()
            .filter(|t| Some(t.port.bit()) != sim.truth.bit(t.time_ps / 1000))
            .count() as f64;
        let frac = wrong / n;
        let sigma = (0.0377 * (1.0 - 0.0377) / n).sqrt();
        assert!(n > 1e5, "{n}");
        assert!((frac - 0.0377).abs() < 4.0 * sigma, "{frac} +- {sigma}");
    }

    #[test]
    fn dead_time_gaps_and_determinism() {
        let det = DetectorModel {
            monitored_ports: MonitoredPorts::Both,
            ..DetectorModel::default()
        };
        let run = |seed| {
            simulate_timetags(
                &tx(0.95),
                &DelayInterferometer::default(),
                8.0,
                &det,
                1e4,
                0.5,
                seed,
            )
            .unwrap()
            .stream
        };
        let a = run(1);
        let b = run(1);
        assert_eq!(a, b);
        assert_ne!(a, run(2));
        let dead = (det.dead_time_s * 1e12) as u64;
        for port in [Port::Constructive, Port::Destructive] {
            let times: Vec<u64> = a
                .tags
                .iter()
                .filter(|t| t.port == port)
                .map(|t| t.time_ps)
                .collect();
            assert!(times.windows(2).all(|w| w[1] - w[0] >= dead));
        }
        assert!(a.tags.windows(2).all(|w| w[0].time_ps <= w[1].time_ps));
        assert!(a.tags.iter().any(|t| t.origin == Origin::Afterpulse));
    }

    #[test]
    fn detuned_interferometer_degrades_visibility() {
        let t = tx(0.98);
        assert_eq!(
            DelayInterferometer::default().effective_visibility(&t),
            0.98
        );
        let half = DelayInterferometer { delay_s: 1.1e-9 };
        assert!((half.effective_visibility(&t) - 0.49).abs() < 1e-9);
        let off = DelayInterferometer { delay_s: 2e-9 };
        assert_eq!(off.effective_visibility(&t), 0.0);
    }

    #[test]
    fn rejects_nonpositive_duration() {
        let r = simulate_timetags(
            &tx(1.0),
            &DelayInterferometer::default(),
            10.0,
            &DetectorModel::default(),
            0.0,
            0.0,
            1,
        );
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn tag_csv_round_trip() {
        let sim = simulate_timetags(
            &tx(0.95),
            &DelayInterferometer::default(),
            10.0,
            &DetectorModel::default(),
            0.0,
            0.01,
            3,
        )
        .unwrap();
        let mut buf = Vec::new();
        sim.stream.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_ps,port\n"));
        let back = TimeTagStream::read_csv(buf.as_slice(), 0.01).unwrap();
        assert_eq!(back.len(), sim.stream.len());
        for (a, b) in back.tags.iter().zip(&sim.stream.tags) {
            assert_eq!((a.time_ps, a.port), (b.time_ps, b.port));
        }
        assert!(TimeTagStream::read_csv("time_ps,port\n5,0\n3,1\n".as_bytes(), 1.0).is_err());
        assert!(TimeTagStream::read_csv("time_ps,port\n5,2\n".as_bytes(), 1.0).is_err());
    }
}
