//! CSV tables with `#` header comments.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

/// One output table. Values are formatted by the caller; missing values are
/// written as empty fields.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    comments: Vec<String>,
    columns: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &'static [&'static str]) -> Self {
        Self {
            name,
            comments: Vec::new(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn prepend_comments(&mut self, lines: impl IntoIterator<Item = String>) {
        let mut all: Vec<String> = lines.into_iter().collect();
        all.append(&mut self.comments);
        self.comments = all;
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width for table {}",
            self.name
        );
        self.rows.push(row);
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            for line in c.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(self.render().as_bytes())
    }

    pub fn save(&self, dir: &Path) -> io::Result<()> {
        std::fs::write(dir.join(format!("{}.csv", self.name)), self.render())
    }
}

/// Shortest round-trip representation, in exponent form for very small or
/// very large magnitudes; non-finite values as `nan`/`inf`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if x == 0.0 || (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
