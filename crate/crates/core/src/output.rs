//! Plain-text CSV helpers: LF line endings, `.` decimal separator, 17 significant digits.

use std::io::{self, Write};

/// Formats a real with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a header and rows of reals.
pub fn write_table<W: Write>(mut w: W, header: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_real(*v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
