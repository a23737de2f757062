//! Unit conversions shared by the optical and counting models.

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Speed of light expressed as nm·THz, for wavelength ↔ frequency.
pub const C_NM_THZ: f64 = 299_792.458;
/// dB per neper of power attenuation, 10·log10(e).
pub const DB_PER_NEPER: f64 = 4.342_944_819_032_518;

pub fn db_to_nepers(db: f64) -> f64 {
    db / DB_PER_NEPER
}

/// Power transmission factor of a loss given in dB.
pub fn loss_to_transmission(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

pub fn wavelength_to_thz(nm: f64) -> f64 {
    C_NM_THZ / nm
}

/// Photon energy at `nm`, in joules.
pub fn photon_energy(nm: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / (nm * 1e-9)
}

/// Photon flux (photons/s) carried by `mw` milliwatts at `nm`.
pub fn mw_to_photon_rate(mw: f64, nm: f64) -> f64 {
    mw * 1e-3 / photon_energy(nm)
}
