//! Secure key rate of DPS QKD against general individual attacks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Error-correction inefficiency used unless configured otherwise.
pub const DEFAULT_EC_INEFFICIENCY: f64 = 1.45;

/// Binary Shannon entropy in bits; h(0) = h(1) = 0.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Range {
            quantity: "probability",
            value: p,
            min: 0.0,
            max: 1.0,
        });
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Privacy-amplification shrink factor
/// τ(e) = −log2(1 − e² − (1 − 6e)²/2), zero for e ≥ 1/6.
pub fn dps_shrink_factor(e: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&e) {
        return Err(Error::Range {
            quantity: "qber",
            value: e,
            min: 0.0,
            max: 0.5,
        });
    }
    if e >= 1.0 / 6.0 {
        return Ok(0.0);
    }
    let collision = e * e + (1.0 - 6.0 * e).powi(2) / 2.0;
    Ok(-(1.0 - collision).log2())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KeyRateConfig {
    pub ec_inefficiency: f64,
}

impl Default for KeyRateConfig {
    fn default() -> Self {
        Self {
            ec_inefficiency: DEFAULT_EC_INEFFICIENCY,
        }
    }
}

/// Secure bits per second: R_sift · max(0, τ(e) − f_ec · h(e)).
pub fn secure_rate(sifted_rate: f64, qber: f64, ec_inefficiency: f64) -> Result<f64> {
    if !(sifted_rate >= 0.0) {
        return Err(Error::Argument(format!(
            "sifted rate must be >= 0, got {sifted_rate}"
        )));
    }
    if !(ec_inefficiency >= 1.0) {
        return Err(Error::Argument(format!(
            "error-correction inefficiency must be >= 1, got {ec_inefficiency}"
        )));
    }
    let tau = dps_shrink_factor(qber)?;
    let leak = ec_inefficiency * binary_entropy(qber)?;
    Ok(sifted_rate * (tau - leak).max(0.0))
}

/// QBER above which the secure fraction vanishes.
pub fn positivity_threshold(ec_inefficiency: f64) -> Result<f64> {
    if !(ec_inefficiency >= 1.0) {
        return Err(Error::Argument(format!(
            "error-correction inefficiency must be >= 1, got {ec_inefficiency}"
        )));
    }
    let margin = |e: f64| -> f64 {
        dps_shrink_factor(e).unwrap_or(0.0) - ec_inefficiency * binary_entropy(e).unwrap_or(1.0)
    };
    // margin is positive near zero and negative at 1/6; bisect
    let (mut lo, mut hi) = (1e-12, 1.0 / 6.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if margin(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.0377).unwrap() - 0.2317).abs() < 1e-4);
        assert!(binary_entropy(1.2).is_err());
    }

    #[test]
    fn shrink_factor_values() {
        assert!((dps_shrink_factor(0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((dps_shrink_factor(0.0377).unwrap() - 0.5163).abs() < 1e-4);
        assert_eq!(dps_shrink_factor(0.2).unwrap(), 0.0);
        assert!(dps_shrink_factor(-0.01).is_err());
    }

    #[test]
    fn baseline_secure_rate() {
        let r = secure_rate(2700.0, 0.0377, 1.45).unwrap();
        assert!((r - 487.0).abs() < 3.0, "{r}");
        assert_eq!(secure_rate(2700.0, 0.1, 1.45).unwrap(), 0.0);
        assert!(secure_rate(-1.0, 0.01, 1.45).is_err());
        assert!(secure_rate(1.0, 0.01, 0.9).is_err());
    }

    #[test]
    fn low_ec_inefficiency_still_clamps_at_six_percent() {
        // tau(0.06) = 0.337 < 1.16 * h(0.06) = 0.380
        assert!((dps_shrink_factor(0.06).unwrap() - 0.337).abs() < 1e-3);
        assert!((1.16 * binary_entropy(0.06).unwrap() - 0.380).abs() < 1e-3);
        assert_eq!(secure_rate(2700.0, 0.06, 1.16).unwrap(), 0.0);
    }

    #[test]
    fn shrink_factor_monotonicity() {
        // e² + (1 − 6e)²/2 is smallest at e = 3/19, so τ falls up to there
        // and rises slightly over the last sliver before 1/6
        let turn = 3.0 / 19.0;
        let falling: Vec<f64> = (0..=1000)
            .map(|i| dps_shrink_factor(turn * f64::from(i) / 1000.0).unwrap())
            .collect();
        assert!(falling.windows(2).all(|w| w[1] < w[0]));
        let rising: Vec<f64> = (0..=100)
            .map(|i| {
                dps_shrink_factor(turn + (1.0 / 6.0 - turn) * f64::from(i) / 100.0 * 0.999_999)
                    .unwrap()
            })
            .collect();
        assert!(rising.windows(2).all(|w| w[1] > w[0]));
        assert!(rising[100] < 0.041);
    }

    #[test]
    fn threshold_near_five_percent() {
        let t = positivity_threshold(1.45).unwrap();
        assert!((t - 0.049).abs() < 0.001, "{t}");
        assert!(secure_rate(1000.0, t * 0.99, 1.45).unwrap() > 0.0);
        assert_eq!(secure_rate(1000.0, t * 1.01, 1.45).unwrap(), 0.0);
        assert!(positivity_threshold(1.0).unwrap() > t);
    }
}
