//! Number formatting for the command line: lossless structured documents and
//! short human-readable values.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

/// Significant digits of numbers in structured output; enough to round-trip any f64.
pub const STRUCTURED_DIGITS: usize = 17;
/// Significant digits of numbers in human-readable output.
pub const HUMAN_DIGITS: usize = 6;

/// Single-line JSON whose floats always carry 17 significant digits.
struct FullPrecision;

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.prec$e}", prec = STRUCTURED_DIGITS - 1)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` as a single-line JSON document. Non-finite floats become `null`.
pub fn to_structured<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, FullPrecision);
    value.serialize(&mut ser)?;
    // The formatter writes only ASCII.
    Ok(String::from_utf8(out).expect("JSON output is UTF-8"))
}

/// `x` rounded to six significant digits, without trailing zeros.
pub fn human(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.prec$e}", prec = HUMAN_DIGITS - 1)
        .parse()
        .expect("formatted float parses");
    if (1e-4..1e6).contains(&rounded.abs()) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// `[a, b, ...]` with each entry in [`human`] form.
pub fn human_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|&v| human(v)).collect();
    format!("[{}]", items.join(", "))
}
