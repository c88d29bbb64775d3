//! Text encodings shared by every CSV the runner writes.

/// Nine significant digits in scientific notation; parses back to the
/// same value whenever the input already had at most nine digits.
pub fn sig9(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_owned()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else {
        format!("{v:.8e}")
    }
}

/// Empty cell for a missing value.
pub fn sig9_opt(v: Option<f64>) -> String {
    v.map(sig9).unwrap_or_default()
}

/// The value a reader gets back from [`sig9`].
pub fn through_sig9(v: f64) -> f64 {
    sig9(v).parse().expect("sig9 output parses")
}
