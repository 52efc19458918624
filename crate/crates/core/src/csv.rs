//! Locale-independent CSV formatting helpers.

/// 17 significant digits, `.` decimal point, shortest exponent form.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{:.16e}", v);
    // Trim trailing zeros of the mantissa; keep the exponent.
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp == 0 {
        mantissa.to_string()
    } else {
        format!("{mantissa}e{exp}")
    }
}

/// Quotes a field if it contains a delimiter or quote.
pub fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// `t1,...,tn,x1,...,xd`
pub fn coordinate_header(n: usize, d: usize) -> String {
    (1..=n)
        .map(|i| format!("t{i}"))
        .chain((1..=d).map(|k| format!("x{k}")))
        .collect::<Vec<_>>()
        .join(",")
}
