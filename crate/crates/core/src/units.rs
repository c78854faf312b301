//! Unit conversions. Everything past the config boundary is in Watt.

use crate::{Error, Result};

/// Converts a power level in dBm to Watt.
pub fn dbm_to_watt(dbm: f64) -> Result<f64> {
    if !dbm.is_finite() {
        return Err(Error::NonFinite("dBm"));
    }
    Ok(10f64.powf(dbm / 10.0) * 1e-3)
}

/// Converts a strictly positive power in Watt to dBm.
pub fn watt_to_dbm(watt: f64) -> Result<f64> {
    if !watt.is_finite() {
        return Err(Error::NonFinite("Watt"));
    }
    if watt <= 0.0 {
        return Err(Error::invalid("watt", "must be strictly positive"));
    }
    Ok(10.0 * (watt * 1e3).log10())
}

/// Thermal noise power over `bandwidth_hz` for a spectral density in dBm/Hz.
pub fn noise_power(psd_dbm_hz: f64, bandwidth_hz: f64) -> Result<f64> {
    if !bandwidth_hz.is_finite() || bandwidth_hz <= 0.0 {
        return Err(Error::invalid("bandwidth_hz", "must be strictly positive"));
    }
    dbm_to_watt(psd_dbm_hz + 10.0 * bandwidth_hz.log10())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub const NATS_PER_BIT: f64 = std::f64::consts::LN_2;

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / NATS_PER_BIT
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn reference_levels() {
        assert_relative_eq!(dbm_to_watt(30.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(dbm_to_watt(0.0).unwrap(), 1e-3, max_relative = 1e-15);
    }

    #[test]
    fn table_power_cap() {
        // 10^(2.103) mW by hand: 126.765 mW
        let p = dbm_to_watt(21.03).unwrap();
        assert!((p - 0.1268).abs() < 1e-4, "{p}");
    }

    #[test]
    fn noise_examples() {
        let n = noise_power(-173.0, 10_930.0).unwrap();
        // -173 + 10 log10(10930) = -132.6138 dBm
        assert!((watt_to_dbm(n).unwrap() + 132.61).abs() < 0.01);
        assert!((n - 5.48e-17).abs() / 5.48e-17 < 2e-3, "{n:e}");
        assert_eq!(noise_power(-173.0, 1.0).unwrap(), dbm_to_watt(-173.0).unwrap());
        assert_relative_eq!(noise_power(0.0, 10.0).unwrap(), 1e-2, max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(dbm_to_watt(f64::NAN).is_err());
        assert!(dbm_to_watt(f64::INFINITY).is_err());
        assert!(noise_power(-173.0, 0.0).is_err());
        assert!(noise_power(-173.0, -5.0).is_err());
        assert!(watt_to_dbm(0.0).is_err());
    }

    proptest! {
        #[test]
        fn dbm_round_trip(exp in -20.0f64..3.0, mant in 1.0f64..10.0) {
            let x = mant * 10f64.powf(exp);
            let back = dbm_to_watt(watt_to_dbm(x).unwrap()).unwrap();
            prop_assert!(((back - x) / x).abs() < 1e-12);
        }
    }
}
