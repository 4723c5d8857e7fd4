//! CSV float formatting: '.' decimal, no locale, 17 significant digits so
//! every double round-trips exactly.

/// `{:.16e}` gives one leading digit plus 16 fractional digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_exact() {
        for &x in &[
            0.0,
            -1.0,
            std::f64::consts::PI,
            1.0 / 3.0,
            2f64.powi(-20),
            6.02214076e23,
            -4.155936261036245,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }
}
