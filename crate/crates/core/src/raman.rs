//! Raman crosstalk from classical WDM channels into the quantum band.
//!
//! Scattering is treated in the linear, undepleted-pump regime: every
//! classical channel contributes noise proportional to its launch power, a
//! tabulated scattering coefficient at its frequency offset from the quantum
//! channel, the receiver noise bandwidth, and a geometric fiber factor.
//!
//! For an upstream quantum channel on a dual-feeder ODN the directional
//! bookkeeping is:
//!
//! * upstream classical channels co-propagate with the quantum signal over the
//!   drop and the upstream feeder (TDMA members count as one continuous
//!   transmitter);
//! * downstream channels backscatter in each of the N drops; the N-fold sum
//!   cancels one of the two splitter passes, leaving a single-pass loss;
//! * downstream forward scattering in the downstream feeder only reaches the
//!   upstream feeder through the splitter's finite directivity.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{FiberSpan, FilterProfile, OdnTopology};
use crate::units::{dbm_to_mw, mw_to_photon_rate, wavelength_to_thz, BOLTZMANN, PLANCK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Downstream,
    Upstream,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Band {
    L,
    C,
    #[serde(rename = "CWDM")]
    Cwdm,
    #[default]
    #[serde(rename = "other")]
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavelengthChannel {
    pub center_nm: f64,
    pub launch_power_dbm: f64,
    pub direction: Direction,
    #[serde(default)]
    pub band: Band,
    #[serde(default)]
    pub tdma_member: bool,
}

impl WavelengthChannel {
    pub fn new(center_nm: f64, launch_power_dbm: f64, direction: Direction, band: Band) -> Self {
        Self {
            center_nm,
            launch_power_dbm,
            direction,
            band,
            tdma_member: false,
        }
    }

    pub fn launch_power_mw(&self) -> f64 {
        dbm_to_mw(self.launch_power_dbm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumChannel {
    pub center_nm: f64,
    pub direction: Direction,
}

impl Default for QuantumChannel {
    fn default() -> Self {
        Self {
            center_nm: 1310.0,
            direction: Direction::Upstream,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    #[serde(default)]
    pub channels: Vec<WavelengthChannel>,
    #[serde(default)]
    pub quantum: QuantumChannel,
}

/// Per-channel launch powers of the three downstream combs, dBm.
pub const L_BAND_POWER_DBM: f64 = -1.9;
pub const C_BAND_POWER_DBM: f64 = 2.5;
pub const CWDM_POWER_DBM: f64 = -0.7;

impl ChannelPlan {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with(mut self, channels: impl IntoIterator<Item = WavelengthChannel>) -> Self {
        self.channels.extend(channels);
        self
    }

    /// 32 downstream channels on a 100 GHz grid from 190.0 THz down.
    pub fn l_band_comb() -> Vec<WavelengthChannel> {
        grid(
            190.0,
            -0.1,
            32,
            L_BAND_POWER_DBM,
            Direction::Downstream,
            Band::L,
        )
    }

    /// 20 downstream channels on a 200 GHz grid from 195.9 THz down.
    pub fn c_band_comb() -> Vec<WavelengthChannel> {
        grid(
            195.9,
            -0.2,
            20,
            C_BAND_POWER_DBM,
            Direction::Downstream,
            Band::C,
        )
    }

    /// Five downstream CWDM channels, 1430–1510 nm.
    pub fn cwdm_set() -> Vec<WavelengthChannel> {
        (0..5)
            .map(|i| {
                WavelengthChannel::new(
                    1430.0 + 20.0 * f64::from(i),
                    CWDM_POWER_DBM,
                    Direction::Downstream,
                    Band::Cwdm,
                )
            })
            .collect()
    }

    /// `n` continuous upstream C-band channels from 1550 nm on a 100 GHz grid.
    pub fn upstream_c_band(n: usize, power_dbm: f64) -> Vec<WavelengthChannel> {
        let f0 = wavelength_to_thz(1550.0);
        (0..n)
            .map(|i| {
                WavelengthChannel::new(
                    wavelength_to_thz(f0 - 0.1 * i as f64),
                    power_dbm,
                    Direction::Upstream,
                    Band::C,
                )
            })
            .collect()
    }
}

fn grid(
    start_thz: f64,
    step_thz: f64,
    n: usize,
    power_dbm: f64,
    direction: Direction,
    band: Band,
) -> Vec<WavelengthChannel> {
    (0..n)
        .map(|i| {
            let f = start_thz + step_thz * i as f64;
            WavelengthChannel::new(wavelength_to_thz(f), power_dbm, direction, band)
        })
        .collect()
}

/// Frequency shift in THz from pump to signal; positive for Stokes
/// (signal red of the pump), negative for anti-Stokes.
pub fn frequency_shift_thz(pump_nm: f64, signal_nm: f64) -> f64 {
    wavelength_to_thz(pump_nm) - wavelength_to_thz(signal_nm)
}

/// Scattering coefficient table in (km·nm)⁻¹ for a 1 mW pump, indexed by
/// signed frequency shift, times a global calibration scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamanProfile {
    table: Vec<(f64, f64)>,
    pub scale: f64,
}

/// Silica Raman response as Gaussian components (cm⁻¹ position, relative
/// amplitude, FWHM cm⁻¹), positions and amplitudes from the Hollenbeck &
/// Cantrell multi-vibrational-mode fit.
const SILICA_MODES: [(f64, f64, f64); 13] = [
    (56.25, 1.00, 52.10),
    (100.00, 11.40, 110.42),
    (231.25, 36.67, 175.00),
    (362.50, 67.67, 162.50),
    (463.00, 74.00, 135.33),
    (497.00, 4.50, 24.50),
    (611.50, 6.80, 41.50),
    (691.67, 4.60, 155.00),
    (793.67, 4.20, 59.50),
    (835.50, 4.50, 64.30),
    (930.00, 2.70, 150.00),
    (1080.00, 3.10, 91.00),
    (1215.00, 3.00, 160.00),
];
const WAVENUMBERS_PER_THZ: f64 = 33.356_409_5;
/// Peak (Stokes) coefficient of the built-in table, (km·nm)⁻¹ per mW.
const SILICA_PEAK_COEFFICIENT: f64 = 1e-9;
const SILICA_TABLE_SPAN_THZ: f64 = 45.0;
const SILICA_TABLE_STEP_THZ: f64 = 0.25;

fn silica_gain(shift_thz: f64) -> f64 {
    let nu = shift_thz.abs() * WAVENUMBERS_PER_THZ;
    SILICA_MODES
        .iter()
        .map(|&(pos, amp, fwhm)| {
            let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
            let g = |x: f64| (-(x * x) / (2.0 * sigma * sigma)).exp();
            amp * (g(nu - pos) - g(nu + pos))
        })
        .sum()
}

fn thermal_occupation(shift_thz: f64, temperature_k: f64) -> f64 {
    let x = PLANCK * shift_thz.abs() * 1e12 / (BOLTZMANN * temperature_k);
    1.0 / x.exp_m1()
}

impl RamanProfile {
    pub fn new(mut table: Vec<(f64, f64)>, scale: f64) -> Result<Self> {
        table.sort_by(|a, b| a.0.total_cmp(&b.0));
        let profile = Self { table, scale };
        profile.check()?;
        Ok(profile)
    }

    /// Temperature-weighted silica scattering curve: gain × (n + 1) on the
    /// Stokes side, gain × n on the anti-Stokes side, n the Bose occupation.
    pub fn silica(temperature_k: f64) -> Self {
        let steps = (SILICA_TABLE_SPAN_THZ / SILICA_TABLE_STEP_THZ).round() as i32;
        let raw: Vec<(f64, f64)> = (-steps..=steps)
            .map(|i| {
                let shift = f64::from(i) * SILICA_TABLE_STEP_THZ;
                // g ~ shift and n ~ 1/shift near zero; take the finite limit
                let s = if i == 0 { 1e-4 } else { shift };
                let n = thermal_occupation(s, temperature_k);
                let weight = if s > 0.0 { n + 1.0 } else { n };
                (shift, silica_gain(s) * weight)
            })
            .collect();
        let peak = raw.iter().map(|p| p.1).fold(0.0, f64::max);
        let table = raw
            .into_iter()
            .map(|(s, v)| (s, v / peak * SILICA_PEAK_COEFFICIENT))
            .collect();
        Self { table, scale: 1.0 }
    }

    pub fn table(&self) -> &[(f64, f64)] {
        &self.table
    }

    pub fn shift_range(&self) -> (f64, f64) {
        (self.table[0].0, self.table[self.table.len() - 1].0)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Unscaled table value at a signed shift.
    pub fn table_value(&self, shift_thz: f64) -> Result<f64> {
        let (lo, hi) = self.shift_range();
        if !(lo..=hi).contains(&shift_thz) {
            return Err(Error::Range {
                quantity: "Raman frequency shift (THz)",
                value: shift_thz,
                min: lo,
                max: hi,
            });
        }
        Ok(crate::topology::interpolate(&self.table, shift_thz))
    }

    pub fn check(&self) -> Result<()> {
        if self.table.len() < 2 {
            return Err(Error::Argument(
                "Raman table needs at least two rows".into(),
            ));
        }
        if self.table.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Argument("Raman table has duplicate shifts".into()));
        }
        if let Some(&(s, c)) = self
            .table
            .iter()
            .find(|p| !(p.1 >= 0.0) || !p.0.is_finite())
        {
            return Err(Error::Argument(format!(
                "Raman coefficient at {s} THz must be >= 0, got {c}"
            )));
        }
        let (lo, hi) = self.shift_range();
        if lo > -40.0 || hi < 40.0 {
            return Err(Error::Argument(format!(
                "Raman table must cover ±40 THz, covers [{lo}, {hi}]"
            )));
        }
        for &(s, anti) in self.table.iter().filter(|p| p.0 < 0.0) {
            if let Ok(stokes) = self.table_value(-s) {
                if anti > stokes * (1.0 + 1e-9) {
                    return Err(Error::Argument(format!(
                        "anti-Stokes coefficient at {s} THz exceeds the Stokes value"
                    )));
                }
            }
        }
        if !(self.scale >= 0.0) || !self.scale.is_finite() {
            return Err(Error::Argument(format!(
                "Raman scale must be finite and >= 0, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    /// Reads `shift_THz,coefficient` rows (header optional).
    pub fn from_csv_reader<R: Read>(reader: R, scale: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut table = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(Error::Data(format!("row {}: expected two columns", i + 1)));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(s), Ok(c)) => table.push((s, c)),
                _ if i == 0 => continue,
                _ => {
                    return Err(Error::Data(format!(
                        "row {}: cannot parse `{},{}`",
                        i + 1,
                        &record[0],
                        &record[1]
                    )))
                }
            }
        }
        Self::new(table, scale)
    }

    pub fn from_csv_path(path: &Path, scale: f64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, scale)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["shift_thz", "coefficient"])?;
        for &(s, c) in &self.table {
            wtr.write_record([s.to_string(), c.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

impl Default for RamanProfile {
    fn default() -> Self {
        Self::silica(300.0)
    }
}

/// Scaled coefficient for light scattered from `pump_nm` into `signal_nm`.
pub fn raman_coefficient(profile: &RamanProfile, pump_nm: f64, signal_nm: f64) -> Result<f64> {
    let shift = frequency_shift_thz(pump_nm, signal_nm);
    Ok(profile.table_value(shift)? * profile.scale)
}

/// A classical pump entering a fiber span.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pump {
    pub power_mw: f64,
    pub wavelength_nm: f64,
}

fn check_inputs(pump: &Pump, coefficient: f64, bandwidth_nm: f64) -> Result<()> {
    if !(pump.power_mw >= 0.0) || !(coefficient >= 0.0) || !(bandwidth_nm >= 0.0) {
        return Err(Error::Domain(format!(
            "Raman rate inputs must be non-negative (pump {} mW, coefficient {coefficient}, \
             bandwidth {bandwidth_nm} nm)",
            pump.power_mw
        )));
    }
    Ok(())
}

/// Co-propagating Raman photons/s leaving the far end of `span` inside a
/// `bandwidth_nm` window at `quantum_nm`. The fiber factor is the exact
/// integral ∫₀ᴸ e^(−α_p z) e^(−α_q (L−z)) dz, i.e. L·e^(−αL) for α_p = α_q.
pub fn forward_raman_rate(
    pump: Pump,
    coefficient: f64,
    span: &FiberSpan,
    bandwidth_nm: f64,
    quantum_nm: f64,
) -> Result<f64> {
    check_inputs(&pump, coefficient, bandwidth_nm)?;
    let alpha_p = span.nepers_per_km(pump.wavelength_nm)?;
    let alpha_q = span.nepers_per_km(quantum_nm)?;
    let factor = forward_factor(span.length_km, alpha_p, alpha_q);
    let noise_mw = pump.power_mw * coefficient * bandwidth_nm * factor;
    Ok(mw_to_photon_rate(noise_mw, quantum_nm))
}

fn forward_factor(length: f64, alpha_p: f64, alpha_q: f64) -> f64 {
    if length == 0.0 {
        return 0.0;
    }
    let d = alpha_p - alpha_q;
    if (d * length).abs() < 1e-9 {
        return length * (-alpha_q * length).exp();
    }
    // e^(-aq L) (1 - e^(-d L)) / d
    (-alpha_q * length).exp() * -(-d * length).exp_m1() / d
}

/// Counter-propagating Raman photons/s leaving the pump's input end of
/// `span`: (1 − e^(−2αL))/(2α) with α the mean of pump and quantum
/// attenuation in nepers/km.
pub fn backward_raman_rate(
    pump: Pump,
    coefficient: f64,
    span: &FiberSpan,
    bandwidth_nm: f64,
    quantum_nm: f64,
) -> Result<f64> {
    check_inputs(&pump, coefficient, bandwidth_nm)?;
    let alpha = 0.5 * (span.nepers_per_km(pump.wavelength_nm)? + span.nepers_per_km(quantum_nm)?);
    let factor = backward_factor(span.length_km, alpha);
    let noise_mw = pump.power_mw * coefficient * bandwidth_nm * factor;
    Ok(mw_to_photon_rate(noise_mw, quantum_nm))
}

fn backward_factor(length: f64, alpha: f64) -> f64 {
    let x = 2.0 * alpha * length;
    if x == 0.0 {
        return length;
    }
    -(-x).exp_m1() / (2.0 * alpha)
}

/// Raman count rates reaching the quantum receiver, by origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RamanContribution {
    /// Downstream forward scattering in the downstream feeder (leaks via directivity).
    pub delta_f: f64,
    /// Downstream backscatter from the N drop fibers.
    pub delta_d: f64,
    /// Upstream classical channels co-propagating with the quantum signal.
    pub upstream_copropagating: f64,
    pub total_at_receiver: f64,
}

impl RamanContribution {
    fn add(&mut self, other: RamanContribution) {
        self.delta_f += other.delta_f;
        self.delta_d += other.delta_d;
        self.upstream_copropagating += other.upstream_copropagating;
        self.total_at_receiver = self.delta_f + self.delta_d + self.upstream_copropagating;
    }

    fn scaled(self, k: f64) -> Self {
        Self {
            delta_f: self.delta_f * k,
            delta_d: self.delta_d * k,
            upstream_copropagating: self.upstream_copropagating * k,
            total_at_receiver: self.total_at_receiver * k,
        }
    }
}

/// Noise from a single classical channel, see module docs for the paths.
pub fn channel_noise_at_bob(
    channel: &WavelengthChannel,
    quantum_nm: f64,
    topo: &OdnTopology,
    rx_filter: &FilterProfile,
    profile: &RamanProfile,
) -> Result<RamanContribution> {
    let bandwidth = rx_filter.collected_bandwidth_nm()?;
    let coefficient = raman_coefficient(profile, channel.center_nm, quantum_nm)?;
    let pump = Pump {
        power_mw: channel.launch_power_mw(),
        wavelength_nm: channel.center_nm,
    };
    let split = topo.splitter.transmission();
    let feeder_up_q = topo.feeder_up.transmission(quantum_nm)?;
    let mut out = RamanContribution::default();
    match channel.direction {
        Direction::Upstream => {
            let from_drop =
                forward_raman_rate(pump, coefficient, &topo.drop, bandwidth, quantum_nm)?
                    * split
                    * feeder_up_q;
            let feeder_pump = Pump {
                power_mw: pump.power_mw * topo.drop.transmission(pump.wavelength_nm)? * split,
                ..pump
            };
            let from_feeder = forward_raman_rate(
                feeder_pump,
                coefficient,
                &topo.feeder_up,
                bandwidth,
                quantum_nm,
            )?;
            out.upstream_copropagating = from_drop + from_feeder;
        }
        Direction::Downstream => {
            let n = f64::from(topo.splitter.ports);
            let drop_pump = Pump {
                power_mw: pump.power_mw
                    * topo.feeder_down.transmission(pump.wavelength_nm)?
                    * split,
                ..pump
            };
            let per_drop =
                backward_raman_rate(drop_pump, coefficient, &topo.drop, bandwidth, quantum_nm)?;
            out.delta_d = n * per_drop * split * feeder_up_q;
            let feeder_forward =
                forward_raman_rate(pump, coefficient, &topo.feeder_down, bandwidth, quantum_nm)?;
            out.delta_f = feeder_forward * topo.splitter.directivity_transmission() * feeder_up_q;
        }
    }
    out.total_at_receiver = out.delta_f + out.delta_d + out.upstream_copropagating;
    Ok(out)
}

/// Raman counts/s at the quantum receiver for a whole channel plan.
pub fn odn_noise_at_bob(
    plan: &ChannelPlan,
    topo: &OdnTopology,
    rx_filter: &FilterProfile,
    profile: &RamanProfile,
) -> Result<RamanContribution> {
    let quantum_nm = plan.quantum.center_nm;
    let mut total = RamanContribution::default();
    let mut tdma = RamanContribution::default();
    let mut tdma_members = 0usize;
    for channel in &plan.channels {
        let c = channel_noise_at_bob(channel, quantum_nm, topo, rx_filter, profile)?;
        if channel.tdma_member && channel.direction == Direction::Upstream {
            tdma.add(c);
            tdma_members += 1;
        } else {
            total.add(c);
        }
    }
    if tdma_members > 0 {
        // one ONU transmits at a time: the group acts as its time average
        total.add(tdma.scaled(1.0 / tdma_members as f64));
    }
    Ok(total)
}

/// Noise-bandwidth ratio of two filters in dB, 10·log10(ENBW_a / ENBW_b).
pub fn filter_noise_rejection(filter_a: &FilterProfile, filter_b: &FilterProfile) -> Result<f64> {
    Ok(10.0 * (filter_a.noise_bandwidth_nm()? / filter_b.noise_bandwidth_nm()?).log10())
}

/// Launch power that makes a `wide` receive filter collect the same Raman
/// noise as `narrow` would at `channel_power_dbm`.
pub fn equivalent_dwdm_power(
    channel_power_dbm: f64,
    wide: &FilterProfile,
    narrow: &FilterProfile,
) -> Result<f64> {
    Ok(channel_power_dbm - filter_noise_rejection(wide, narrow)?)
}
