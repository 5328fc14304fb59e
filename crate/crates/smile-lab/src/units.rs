//! Daily/annual conversions. The model steps in days and stores daily
//! quantities; user-facing vols are annualized. 252 trading days per year by
//! default, configurable everywhere it matters.

pub const DEFAULT_TRADING_DAYS: f64 = 252.0;

/// Daily vol (per sqrt(day)) to annualized vol.
pub fn annualize_vol(daily: f64, trading_days: f64) -> f64 {
    daily * trading_days.sqrt()
}

/// Annualized vol to daily (per sqrt(day)).
pub fn daily_vol(annual: f64, trading_days: f64) -> f64 {
    annual / trading_days.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let annual = 0.179;
        let d = daily_vol(annual, DEFAULT_TRADING_DAYS);
        assert!((annualize_vol(d, DEFAULT_TRADING_DAYS) - annual).abs() < 1e-15);
        assert!((d - 0.011276).abs() < 1e-5);
    }
}
