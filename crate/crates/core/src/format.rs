//! Fixed numeric formatting for CSV output so repeated runs are byte-identical.

/// Nine significant digits in scientific notation; `-inf`/`inf`/`nan` verbatim.
pub fn sig9(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.8e}")
    }
}

/// `10 log10(x)`, `-inf` for zero.
pub fn db(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * x.log10()
    }
}
