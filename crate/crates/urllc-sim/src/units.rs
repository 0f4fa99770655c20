//! dB / dBm / linear conversions.
//!
//! Everything inside the simulator works in linear power units (milliwatts
//! for absolute powers, dimensionless ratios for gains); dB shows up only at
//! interfaces and in logs.

/// Dimensionless dB ratio to linear ratio.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear ratio to dB.
#[inline]
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Absolute power in dBm to milliwatts.
#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Milliwatts to dBm.
#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for &x in &[-169.0, -104.0, -3.0, 0.0, 20.0, 30.0] {
            assert!((linear_to_db(db_to_linear(x)) - x).abs() < 1e-12);
            assert!((mw_to_dbm(dbm_to_mw(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_points() {
        assert_eq!(dbm_to_mw(0.0), 1.0);
        assert_eq!(dbm_to_mw(30.0), 1000.0);
        assert!((db_to_linear(3.0103) - 2.0).abs() < 1e-4);
    }
}
