//! Comma-separated result tables: one header line, data rows, and a footer of
//! `#` comment lines carrying the fingerprint and seeds.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    /// Floats use 17 significant digits so every double survives a round
    /// trip through the text.
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) if x.is_nan() => "NaN".to_string(),
            Cell::Num(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.to_string(),
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<i64> for Cell {
    fn from(n: i64) -> Self {
        Cell::Int(n)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    /// Column names with their unit suffix.
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Footer lines, written after a `# ` prefix.
    pub footer: Vec<String>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        ResultTable {
            header: header.into_iter().map(Into::into).collect(),
            ..ResultTable::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.footer.push(line.into());
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        let mut out = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        for line in &self.footer {
            writeln!(out, "# {line}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 table")
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.write_to(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        let mut t = ResultTable::new(["n_r", "fom_m2_s4", "error"]);
        t.push(vec![
            Cell::Int(3),
            Cell::Num(1.5e-10),
            Cell::Text(String::new()),
        ]);
        t.push(vec![
            Cell::Int(5),
            Cell::Num(f64::NAN),
            Cell::Text("bad, very bad".into()),
        ]);
        t.note("fingerprint abc");
        assert_eq!(
            t.to_csv(),
            "n_r,fom_m2_s4,error\n3,1.5000000000000000e-10,\n5,NaN,\"bad, very bad\"\n# fingerprint abc\n"
        );
    }

    proptest! {
        #[test]
        fn floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let s = Cell::Num(x).render();
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
