//! Power unit conversions.

/// `x` dBm to watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * watt.log10() + 30.0
}

/// Linear ratio to decibels.
pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_reference_points() {
        assert!((dbm_to_watt(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watt(0.0) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_watt(-86.0) - 10f64.powf(-11.6)).abs() < 1e-25);
        assert!((watt_to_dbm(dbm_to_watt(15.0)) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn db_round_trip() {
        assert!((to_db(from_db(-8.7)) + 8.7).abs() < 1e-12);
        assert!((to_db(0.5) + 3.0103).abs() < 1e-4);
    }
}
