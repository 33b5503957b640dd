//! Stable float formatting for machine-readable outputs.

/// Rounds `x` to 6 significant digits. Non-finite values pass through.
pub fn round_sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// `x` rounded to 6 significant digits, printed in shortest form.
pub fn fmt_sig6(x: f64) -> String {
    format!("{}", round_sig6(x))
}
