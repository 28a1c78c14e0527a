//! Numeric rendering shared by prompt serialization, response parsing, and
//! duplicate detection. Every value that reaches an LLM or a dedup key goes
//! through the same formatter so the two sides can never disagree.

/// Significant digits used for prompt text and dedup keys.
pub const SIG_FIGS: usize = 6;

/// Formats with [`SIG_FIGS`] significant digits.
pub fn format_value(v: f64) -> String {
    format_sig(v, SIG_FIGS)
}

/// Formats `v` with `sig` significant digits: plain decimal notation for
/// magnitudes in [1e-4, 1e6), exponent notation outside. Trailing
/// fractional zeros are trimmed, so integral values render bare
/// ("15", not "15.0000").
pub fn format_sig(v: f64, sig: usize) -> String {
    assert!(sig > 0);
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    // Round to `sig` digits before routing: rounding can carry a value
    // across the notation boundary (9.99999e-5 becomes 1e-4), and the
    // rendering must match what its reader will re-format.
    let rounded: f64 = format!("{:.*e}", sig - 1, v).parse().expect("exponent form parses");
    let a = rounded.abs();
    if (1e-4..1e6).contains(&a) {
        let exp = a.log10().floor() as i32;
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_fraction(format!("{rounded:.decimals$}"))
    } else {
        let s = format!("{:.*e}", sig - 1, rounded);
        let (mantissa, exp) = s.split_once('e').expect("exponent notation");
        format!("{}e{exp}", trim_fraction(mantissa.to_string()))
    }
}

fn trim_fraction(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
