//! Deterministic text output: fixed column orders and 17-significant-digit
//! floats, so identical runs emit identical bytes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// 17 significant digits; enough to round-trip any f64.
pub fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes to `out` when given, else to stdout.
pub fn emit(out: Option<&Path>, content: &str) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, content),
        None => io::stdout().write_all(content.as_bytes()),
    }
}
