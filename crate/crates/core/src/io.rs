//! Text output shared by the CSV writers.

/// Fixed 17-significant-digit scientific form; non-finite values print as
/// `inf`, `-inf` or `nan`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        // `+ 0.0` turns −0 into +0.
        format!("{:.16e}", x + 0.0)
    }
}
