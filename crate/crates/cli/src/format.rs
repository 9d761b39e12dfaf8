//! Locale-independent numeric rendering for CSV output.

use std::fmt::Write as _;

/// Renders `x` with 17 significant digits, trailing zeros trimmed.
///
/// Fixed notation for decimal exponents in `-4..17`, scientific otherwise,
/// in the manner of C's `%.17g`.
pub fn g17(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("`e` formatting has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        trim_fraction(format!("{x:.decimals$}"))
    } else {
        let mut out = trim_fraction(mantissa.to_string());
        write!(out, "e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs()).unwrap();
        out
    }
}

fn trim_fraction(mut s: String) -> String {
    if s.contains('.') {
        let keep = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(keep);
    }
    s
}

/// CSV text with a header line and one row per entry, `\n` line endings.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = (usize, Vec<f64>)>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for (n, values) in rows {
        write!(out, "{n}").unwrap();
        for v in values {
            out.push(',');
            out.push_str(&g17(v));
        }
        out.push('\n');
    }
    out
}
