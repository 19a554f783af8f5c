use crate::stats::TestResult;

pub const NA: &str = "NA";

/// C-style `%.{decimals}e`: signed exponent of at least two digits.
pub fn fmt_sci(x: f64, decimals: usize) -> String {
    if !x.is_finite() {
        return NA.to_string();
    }
    let s = format!("{x:.decimals$e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!(
        "{mantissa}e{}{:02}",
        if exp < 0 { '-' } else { '+' },
        exp.abs()
    )
}

/// Statistic with 13 significant digits.
pub fn fmt_statistic(w: f64) -> String {
    fmt_sci(w, 12)
}

/// p-value with 6 significant digits. Values below the normal `f64` range
/// are rendered from `-log10 p`.
pub fn fmt_p(result: &TestResult) -> String {
    if result.p_value > 1e-300 {
        return fmt_sci(result.p_value, 5);
    }
    let t = -result.neg_log10_p;
    let mut exp = t.floor();
    let mut mantissa = format!("{:.5}", 10f64.powf(t - exp));
    if mantissa.starts_with("10") {
        mantissa = "1.00000".to_string();
        exp += 1.0;
    }
    let exp = exp as i64;
    format!(
        "{mantissa}e{}{:02}",
        if exp < 0 { '-' } else { '+' },
        exp.abs()
    )
}

pub fn fmt_fixed(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.6}"),
        _ => NA.to_string(),
    }
}

/// `-log10` of a formatted p-value, exact even where the value underflows.
pub fn parse_neg_log10(text: &str) -> Option<f64> {
    let text = text.trim();
    if text == NA {
        return None;
    }
    let p: f64 = text.parse().ok()?;
    if p > 1e-300 {
        return Some((-p.log10()).max(0.0));
    }
    let (mantissa, exp) = text.split_once(['e', 'E'])?;
    let mantissa: f64 = mantissa.parse().ok()?;
    let exp: f64 = exp.parse().ok()?;
    (mantissa > 0.0).then(|| -(mantissa.log10() + exp))
}

pub fn parse_value(text: &str) -> Option<f64> {
    match text.trim() {
        NA => None,
        t => t.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_matches_c_printf() {
        assert_eq!(fmt_sci(0.035015, 5), "3.50150e-02");
        assert_eq!(fmt_sci(1.0, 5), "1.00000e+00");
        assert_eq!(fmt_sci(0.0, 3), "0.000e+00");
        assert_eq!(fmt_sci(123456.0, 2), "1.23e+05");
        assert_eq!(fmt_sci(1e-120, 1), "1.0e-120");
        assert_eq!(fmt_statistic(4.444444444444445), "4.444444444444e+00");
    }

    #[test]
    fn tiny_p_from_log() {
        let r = TestResult::from_statistic(5000.0, 1).unwrap();
        let text = fmt_p(&r);
        assert!(
            text.starts_with(|c: char| c.is_ascii_digit()) && text.contains("e-10"),
            "{text}"
        );
        let back = parse_neg_log10(&text).unwrap();
        assert!((back - r.neg_log10_p).abs() < 1e-5 * r.neg_log10_p);
    }

    #[test]
    fn neg_log10_parsing() {
        assert_eq!(parse_neg_log10("NA"), None);
        assert!((parse_neg_log10("5.00000e-08").unwrap() - 7.30103).abs() < 1e-5);
        assert_eq!(parse_neg_log10("1.00000e+00"), Some(0.0));
        assert!((parse_neg_log10("2.50000e-400").unwrap() - 399.60206).abs() < 1e-5);
    }
}
