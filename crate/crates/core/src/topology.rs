//! Dual-feeder optical distribution network: fiber spans, the 2:N splitter,
//! add/drop filters, and wavelength-dependent loss along explicit paths.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::units::{db_to_nepers, loss_to_transmission};

/// Piecewise-linear attenuation map, wavelength (nm) → dB/km.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct AttenuationTable {
    points: Vec<(f64, f64)>,
}

impl AttenuationTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Argument("attenuation table is empty".into()));
        }
        if let Some(&(nm, db)) = points
            .iter()
            .find(|(nm, db)| !nm.is_finite() || !db.is_finite() || *db <= 0.0)
        {
            return Err(Error::Argument(format!(
                "attenuation entry ({nm} nm, {db} dB/km) must be finite and positive"
            )));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Argument(
                "attenuation table has duplicate wavelengths".into(),
            ));
        }
        Ok(Self { points })
    }

    /// Standard single-mode fiber: 0.37 dB/km at 1310 nm, 0.21 dB/km at
    /// 1550 nm, with O-band and L-band edge points so every classical band
    /// in 1260–1625 nm lies inside the hull.
    pub fn standard_smf() -> Self {
        Self {
            points: vec![
                (1260.0, 0.40),
                (1310.0, 0.37),
                (1550.0, 0.21),
                (1625.0, 0.24),
            ],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn hull(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Attenuation in dB/km, linearly interpolated between table points.
    pub fn at(&self, nm: f64) -> Result<f64> {
        let (lo, hi) = self.hull();
        if !(lo..=hi).contains(&nm) {
            return Err(Error::Range {
                quantity: "wavelength (nm)",
                value: nm,
                min: lo,
                max: hi,
            });
        }
        Ok(interpolate(&self.points, nm))
    }
}

impl TryFrom<Vec<(f64, f64)>> for AttenuationTable {
    type Error = Error;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<AttenuationTable> for Vec<(f64, f64)> {
    fn from(t: AttenuationTable) -> Self {
        t.points
    }
}

impl Default for AttenuationTable {
    fn default() -> Self {
        Self::standard_smf()
    }
}

/// Linear interpolation over sorted `(x, y)` points; `x` must lie in the hull.
pub(crate) fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let idx = points.partition_point(|p| p.0 < x);
    if idx == 0 {
        return points[0].1;
    }
    if idx == points.len() {
        return points[points.len() - 1].1;
    }
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    if x1 == x {
        return y1;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSpan {
    pub length_km: f64,
    #[serde(default)]
    pub attenuation: AttenuationTable,
}

impl FiberSpan {
    pub fn new(length_km: f64, attenuation: AttenuationTable) -> Result<Self> {
        if !(length_km >= 0.0) || !length_km.is_finite() {
            return Err(Error::Domain(format!(
                "fiber length must be finite and >= 0, got {length_km}"
            )));
        }
        Ok(Self {
            length_km,
            attenuation,
        })
    }

    pub fn smf(length_km: f64) -> Self {
        Self {
            length_km,
            attenuation: AttenuationTable::standard_smf(),
        }
    }

    pub fn attenuation_at(&self, nm: f64) -> Result<f64> {
        self.attenuation.at(nm)
    }

    pub fn nepers_per_km(&self, nm: f64) -> Result<f64> {
        self.attenuation_at(nm).map(db_to_nepers)
    }

    pub fn loss_db(&self, nm: f64) -> Result<f64> {
        Ok(self.length_km * self.attenuation_at(nm)?)
    }

    pub fn transmission(&self, nm: f64) -> Result<f64> {
        self.loss_db(nm).map(loss_to_transmission)
    }
}

/// Attenuation (dB/km) of `span` at `nm`.
pub fn attenuation_at(span: &FiberSpan, nm: f64) -> Result<f64> {
    span.attenuation_at(nm)
}

/// Effective interaction length (1 − e^(−αL))/α with α in nepers/km.
pub fn effective_length(length_km: f64, attenuation_db_per_km: f64) -> Result<f64> {
    if !(length_km >= 0.0) || !(attenuation_db_per_km >= 0.0) {
        return Err(Error::Domain(format!(
            "effective length needs non-negative inputs, got L = {length_km} km, \
             attenuation = {attenuation_db_per_km} dB/km"
        )));
    }
    let alpha = db_to_nepers(attenuation_db_per_km);
    let x = alpha * length_km;
    // -expm1(-x)/alpha keeps full precision as alpha -> 0
    if x == 0.0 {
        return Ok(length_km);
    }
    Ok(-(-x).exp_m1() / alpha)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Splitter {
    /// Ports on the drop side, N of a 2:N splitter.
    pub ports: u32,
    #[serde(default)]
    pub excess_loss_db: f64,
    /// Isolation between the two feeder-side ports.
    #[serde(default = "default_directivity")]
    pub directivity_db: f64,
}

fn default_directivity() -> f64 {
    55.0
}

impl Splitter {
    pub fn new(ports: u32) -> Self {
        Self {
            ports,
            excess_loss_db: 0.0,
            directivity_db: default_directivity(),
        }
    }

    pub fn ideal_split_loss_db(&self) -> f64 {
        10.0 * f64::from(self.ports).log10()
    }

    pub fn loss_db(&self) -> f64 {
        self.ideal_split_loss_db() + self.excess_loss_db
    }

    pub fn transmission(&self) -> f64 {
        loss_to_transmission(self.loss_db())
    }

    pub fn directivity_transmission(&self) -> f64 {
        loss_to_transmission(self.directivity_db)
    }

    fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        if self.ports == 0 || !self.ports.is_power_of_two() {
            errors.push(FieldError::new(
                format!("{prefix}.ports"),
                format!("must be a power of two >= 1, got {}", self.ports),
            ));
        }
        if !(self.excess_loss_db >= 0.0) {
            errors.push(FieldError::new(
                format!("{prefix}.excess_loss_db"),
                "must be >= 0",
            ));
        }
        if !(self.directivity_db >= 0.0) {
            errors.push(FieldError::new(
                format!("{prefix}.directivity_db"),
                "must be >= 0",
            ));
        }
    }
}

impl Default for Splitter {
    fn default() -> Self {
        Self::new(16)
    }
}

/// Band-pass filter. Without a table the passband is a flat top of width
/// `fwhm_nm`; with a table the shape (dB below peak, absolute wavelengths)
/// is interpolated in linear transmission and `fwhm_nm` is informational.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterProfile {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    #[serde(default)]
    pub insertion_loss_db: f64,
    #[serde(default = "default_rejection")]
    pub rejection_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

fn default_rejection() -> f64 {
    40.0
}

/// Gaussian DWDM passband with 1.22 nm FWHM.
pub const DWDM_FWHM_NM: f64 = 1.22;
/// Flat-top CWDM passband used when no measured shape is supplied.
pub const CWDM_FLAT_WIDTH_NM: f64 = 13.0;
const CWDM_MEASURED_TOP_NM: f64 = 16.0;
const CWDM_MEASURED_SKIRT_NM: f64 = 4.11;

impl FilterProfile {
    pub fn flat(center_nm: f64, width_nm: f64) -> Self {
        Self {
            center_nm,
            fwhm_nm: width_nm,
            insertion_loss_db: 0.0,
            rejection_db: default_rejection(),
            table: None,
        }
    }

    pub fn cwdm_flat(center_nm: f64) -> Self {
        Self::flat(center_nm, CWDM_FLAT_WIDTH_NM)
    }

    pub fn dwdm_flat(center_nm: f64) -> Self {
        Self::flat(center_nm, DWDM_FWHM_NM)
    }

    /// DWDM add/drop with a sampled Gaussian passband (1.22 nm FWHM,
    /// 0.05 nm grid over ±2.5 nm, floor at the rejection level).
    pub fn dwdm_measured(center_nm: f64) -> Self {
        let rejection = default_rejection();
        let shape_db = |offset: f64| {
            let db = 10.0
                * std::f64::consts::LOG10_E
                * 4.0
                * std::f64::consts::LN_2
                * (offset / DWDM_FWHM_NM).powi(2);
            db.min(rejection)
        };
        let table = (-50..=50)
            .map(|i| {
                let offset = f64::from(i) * 0.05;
                (center_nm + offset, shape_db(offset))
            })
            .collect();
        Self {
            center_nm,
            fwhm_nm: DWDM_FWHM_NM,
            insertion_loss_db: 0.0,
            rejection_db: rejection,
            table: Some(table),
        }
    }

    /// CWDM add/drop with a 16 nm flat top and 4.11 nm linear skirts down to
    /// -30 dB; its noise bandwidth sits 11.9 dB above [`Self::dwdm_measured`].
    pub fn cwdm_measured(center_nm: f64) -> Self {
        let half = CWDM_MEASURED_TOP_NM / 2.0;
        let edge = half + CWDM_MEASURED_SKIRT_NM;
        Self {
            center_nm,
            fwhm_nm: CWDM_MEASURED_TOP_NM + CWDM_MEASURED_SKIRT_NM,
            insertion_loss_db: 0.0,
            rejection_db: default_rejection(),
            table: Some(vec![
                (center_nm - edge, 30.0),
                (center_nm - half, 0.0),
                (center_nm + half, 0.0),
                (center_nm + edge, 30.0),
            ]),
        }
    }

    /// Total loss in dB at `nm`, including insertion loss.
    pub fn transmission_db(&self, nm: f64) -> f64 {
        let out_of_band = self.insertion_loss_db + self.rejection_db;
        match &self.table {
            Some(t) if !t.is_empty() => {
                if nm < t[0].0 || nm > t[t.len() - 1].0 {
                    return out_of_band;
                }
                let linear: Vec<(f64, f64)> = t
                    .iter()
                    .map(|&(x, db)| (x, loss_to_transmission(db)))
                    .collect();
                let tr = interpolate(&linear, nm);
                (self.insertion_loss_db - 10.0 * tr.log10()).min(out_of_band)
            }
            _ => {
                if (nm - self.center_nm).abs() <= self.fwhm_nm / 2.0 {
                    self.insertion_loss_db
                } else {
                    out_of_band
                }
            }
        }
    }

    /// In-band (peak) power transmission.
    pub fn peak_transmission(&self) -> f64 {
        let shape_min = self
            .table
            .as_ref()
            .and_then(|t| t.iter().map(|p| p.1).reduce(f64::min))
            .unwrap_or(0.0);
        loss_to_transmission(self.insertion_loss_db + shape_min)
    }

    /// Equivalent noise bandwidth ∫T(λ)dλ / T_peak in nm.
    pub fn noise_bandwidth_nm(&self) -> Result<f64> {
        let bw = match &self.table {
            Some(t) if t.len() >= 2 => {
                let linear: Vec<(f64, f64)> = t
                    .iter()
                    .map(|&(x, db)| (x, loss_to_transmission(db)))
                    .collect();
                let peak = linear.iter().map(|p| p.1).fold(0.0, f64::max);
                let area: f64 = linear
                    .windows(2)
                    .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
                    .sum();
                if peak > 0.0 {
                    area / peak
                } else {
                    0.0
                }
            }
            Some(_) => 0.0,
            None => self.fwhm_nm,
        };
        if !(bw > 0.0) {
            return Err(Error::Domain(format!(
                "filter at {} nm has zero noise bandwidth",
                self.center_nm
            )));
        }
        Ok(bw)
    }

    /// Optical noise collected per unit spectral density: ENBW × peak transmission (nm).
    pub fn collected_bandwidth_nm(&self) -> Result<f64> {
        Ok(self.noise_bandwidth_nm()? * self.peak_transmission())
    }

    pub(crate) fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        if !(self.fwhm_nm > 0.0) {
            errors.push(FieldError::new(format!("{prefix}.fwhm_nm"), "must be > 0"));
        }
        if !(self.rejection_db >= 0.0) {
            errors.push(FieldError::new(
                format!("{prefix}.rejection_db"),
                "must be >= 0",
            ));
        }
        if let Some(t) = &self.table {
            let sorted = t.windows(2).all(|w| w[0].0 < w[1].0);
            if !sorted {
                errors.push(FieldError::new(
                    format!("{prefix}.table"),
                    "wavelengths must be strictly increasing",
                ));
            }
            let covers = t.first().is_some_and(|f| f.0 <= self.center_nm)
                && t.last().is_some_and(|l| l.0 >= self.center_nm);
            if !covers {
                errors.push(FieldError::new(
                    format!("{prefix}.table"),
                    "must contain the center wavelength",
                ));
            }
        }
    }
}

/// Named element of the ODN, as used in explicit paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Element {
    OnuFilter,
    Drop,
    Splitter,
    FeederUp,
    FeederDown,
    CoFilter,
}

impl Element {
    pub const ALL: [Element; 6] = [
        Element::OnuFilter,
        Element::Drop,
        Element::Splitter,
        Element::FeederUp,
        Element::FeederDown,
        Element::CoFilter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Element::OnuFilter => "onu_filter",
            Element::Drop => "drop",
            Element::Splitter => "splitter",
            Element::FeederUp => "feeder_up",
            Element::FeederDown => "feeder_down",
            Element::CoFilter => "co_filter",
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Element {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Element::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Lookup {
                kind: "ODN element",
                name: s.to_string(),
            })
    }
}

/// ONU transmitter to the CO receiver, upstream through the splitter.
pub const UPSTREAM_QUANTUM_PATH: [Element; 5] = [
    Element::OnuFilter,
    Element::Drop,
    Element::Splitter,
    Element::FeederUp,
    Element::CoFilter,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdnTopology {
    pub feeder_down: FiberSpan,
    pub feeder_up: FiberSpan,
    pub splitter: Splitter,
    /// Identical at every one of the N drop ports.
    pub drop: FiberSpan,
    pub onu_filter: FilterProfile,
    /// Receive filter in front of the quantum receiver at the CO.
    pub co_filter: FilterProfile,
    /// Named taps, each the path from the ONU transmitter to the tap.
    #[serde(default = "default_probes")]
    pub probes: BTreeMap<String, Vec<Element>>,
}

fn default_probes() -> BTreeMap<String, Vec<Element>> {
    let mut probes = BTreeMap::new();
    probes.insert(
        "rho".to_string(),
        vec![Element::OnuFilter, Element::Drop, Element::Splitter],
    );
    probes.insert("bob".to_string(), UPSTREAM_QUANTUM_PATH.to_vec());
    probes
}

impl Default for OdnTopology {
    /// 13.2 km downstream / 15.1 km upstream feeders, 2:16 split, 1 km drop.
    fn default() -> Self {
        Self {
            feeder_down: FiberSpan::smf(13.2),
            feeder_up: FiberSpan::smf(15.1),
            splitter: Splitter::default(),
            drop: FiberSpan::smf(1.0),
            onu_filter: FilterProfile::cwdm_flat(1310.0),
            co_filter: FilterProfile::dwdm_measured(1310.0),
            probes: default_probes(),
        }
    }
}

impl OdnTopology {
    /// Loss in dB of one element at `nm`.
    pub fn element_loss(&self, element: Element, nm: f64) -> Result<f64> {
        match element {
            Element::OnuFilter => Ok(self.onu_filter.transmission_db(nm)),
            Element::CoFilter => Ok(self.co_filter.transmission_db(nm)),
            Element::Drop => self.drop.loss_db(nm),
            Element::FeederUp => self.feeder_up.loss_db(nm),
            Element::FeederDown => self.feeder_down.loss_db(nm),
            Element::Splitter => Ok(self.splitter.loss_db()),
        }
    }

    /// Sum of element losses along an explicit ordered path.
    pub fn path_loss(&self, nm: f64, path: &[Element]) -> Result<f64> {
        path.iter().map(|&e| self.element_loss(e, nm)).sum()
    }

    /// Like [`Self::path_loss`] with element ids given by name.
    pub fn path_loss_by_name<S: AsRef<str>>(&self, nm: f64, path: &[S]) -> Result<f64> {
        let elements = path
            .iter()
            .map(|s| s.as_ref().parse())
            .collect::<Result<Vec<Element>>>()?;
        self.path_loss(nm, &elements)
    }

    pub fn probe(&self, name: &str) -> Result<&[Element]> {
        self.probes
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Lookup {
                kind: "probe point",
                name: name.to_string(),
            })
    }

    pub fn upstream_quantum_loss(&self, nm: f64) -> Result<f64> {
        self.path_loss(nm, &UPSTREAM_QUANTUM_PATH)
    }

    /// ODN reach seen by an ONU: drop plus upstream feeder.
    pub fn reach_km(&self) -> f64 {
        self.drop.length_km + self.feeder_up.length_km
    }

    /// Sets both feeders to `reach_km - drop`, keeping the drop length.
    pub fn set_reach(&mut self, reach_km: f64) -> Result<()> {
        let feeder = reach_km - self.drop.length_km;
        if !(feeder >= 0.0) {
            return Err(Error::Domain(format!(
                "reach {reach_km} km is shorter than the {} km drop",
                self.drop.length_km
            )));
        }
        self.feeder_up.length_km = feeder;
        self.feeder_down.length_km = feeder;
        Ok(())
    }

    pub(crate) fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        for (name, span) in [
            ("feeder_down", &self.feeder_down),
            ("feeder_up", &self.feeder_up),
            ("drop", &self.drop),
        ] {
            if !(span.length_km >= 0.0) || !span.length_km.is_finite() {
                errors.push(FieldError::new(
                    format!("{prefix}.{name}.length_km"),
                    "must be finite and >= 0",
                ));
            }
        }
        self.splitter.check(&format!("{prefix}.splitter"), errors);
        self.onu_filter
            .check(&format!("{prefix}.onu_filter"), errors);
        self.co_filter.check(&format!("{prefix}.co_filter"), errors);
    }
}
