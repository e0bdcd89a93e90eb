//! Locale-independent CSV number formatting: six significant digits,
//! '.' decimal separator.

pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = 5 - exponent;
    if (0..=17).contains(&decimals) {
        format!("{:.*}", decimals as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

pub fn opt_sig6(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), sig6)
}
