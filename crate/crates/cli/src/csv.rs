//! Plain CSV text builders. Floats are written with 17 significant digits so
//! values round-trip exactly.

use std::fmt::Write;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Default)]
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[String]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Table { text }
    }

    pub fn with_header(header: &str) -> Self {
        Table {
            text: format!("{header}\n"),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        let mut first = true;
        for v in values {
            if !first {
                self.text.push(',');
            }
            first = false;
            write!(self.text, "{v:.16e}").expect("write to string");
        }
        self.text.push('\n');
    }

    /// Row whose entries may be missing (written as empty fields).
    pub fn row_opt(&mut self, values: &[Option<f64>]) {
        let cells: Vec<String> = values
            .iter()
            .map(|v| v.map(num).unwrap_or_default())
            .collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// `prefix_1..prefix_n`.
pub fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["t".into(), "a".into()]);
        t.row(&[0.0, 1.5]);
        t.row_opt(&[Some(1.0), None]);
        let s = t.finish();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,a");
        assert_eq!(lines[1], "0.0000000000000000e0,1.5000000000000000e0");
        assert_eq!(lines[2], "1.0000000000000000e0,");
    }
}
