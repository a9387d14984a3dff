//! Number formatting shared by every CSV and report writer.

/// Significant digits used for all numeric outputs.
pub const SIG_DIGITS: usize = 6;

/// Format `x` with [`SIG_DIGITS`] significant digits, trailing zeros trimmed.
///
/// Magnitudes outside `[1e-4, 1e9)` switch to exponent notation.
pub fn sig(x: f64) -> String {
    sig_n(x, SIG_DIGITS)
}

pub fn sig_n(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    // Round first so that e.g. 999999.7 picks the exponent of 1e6.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let fixed = format!("{:.*}", decimals, x);
    let out = trim_zeros(&fixed);
    if out == "-0" {
        "0".to_string()
    } else {
        out
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig(1.308634), "1.30863");
        assert_eq!(sig(-0.881634), "-0.881634");
        assert_eq!(sig(820.0), "820");
        assert_eq!(sig(34.64101615), "34.641");
        assert_eq!(sig(0.0), "0");
        assert_eq!(sig(100.0), "100");
        assert_eq!(sig(999999.7), "1000000");
        assert_eq!(sig(1.5e-7), "1.5e-7");
        assert_eq!(sig(0.01418), "0.01418");
        assert_eq!(sig(-1e-12), "-1e-12");
    }
}
