//! CSV output with fixed float formatting.

use std::io::{self, Write};

/// Scientific notation with 9 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()
    }

    pub fn to_string_lossy(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv cells are UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_float(9.1e-5), "9.10000000e-5");
        assert_eq!(fmt_float(0.0), "0.00000000e0");
        assert_eq!(fmt_float(-22.5e-3), "-2.25000000e-2");
        let x = 1.234_567_891_23e-7;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), 1.23456789e-7);
    }

    #[test]
    fn table_layout() {
        let mut t = CsvTable::new(["a_A", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.to_string_lossy(), "a_A,b\n1,2\n");
    }
}
