//! Number formatting for terminal output.

/// Formats `v` with `sig` significant digits, dropping trailing zeros but
/// keeping at least one decimal (`0.0`, `60.0`, `0.60653066`). Very large
/// or small magnitudes switch to exponent notation.
pub fn sig(v: f64, sig: usize) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0.0".to_string();
    }
    let sig = sig.max(1);
    // Round first so that e.g. 9.99999999 moves to the next decade.
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..sig as i32).contains(&exp) {
        let m = trim(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    trim(&format!("{v:.decimals$}"))
}

fn trim(s: &str) -> String {
    if !s.contains('.') {
        return format!("{s}.0");
    }
    let t = s.trim_end_matches('0');
    if t.ends_with('.') {
        format!("{t}0")
    } else {
        t.to_string()
    }
}

/// Comma-separated list with [`sig`] formatting.
pub fn sig_list(values: &[f64], digits: usize) -> String {
    values.iter().map(|v| sig(*v, digits)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_digits() {
        assert_eq!(sig((-0.5f64).exp(), 8), "0.60653066");
        assert_eq!(sig(0.0, 8), "0.0");
        assert_eq!(sig(60.0, 8), "60.0");
        assert_eq!(sig(-20.0, 8), "-20.0");
        assert_eq!(sig(0.25, 8), "0.25");
        assert_eq!(sig(123456789.0, 8), "1.2345679e8");
        assert_eq!(sig(1.5e-7, 8), "1.5e-7");
        assert_eq!(sig(9.999999999, 8), "10.0");
        assert_eq!(sig(1e-5, 8), "0.00001");
    }
}
