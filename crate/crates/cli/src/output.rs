//! Result tables and their CSV, JSON and plain-text renderings.

use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        ryu::Buffer::new().format_finite(v).to_string()
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            other => other.text(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

/// Command result: a table plus optional structured metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub meta: Map<String, Value>,
}

impl Report {
    pub fn new(command: &'static str, header: &[&str]) -> Self {
        Report { command, header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new(), meta: Map::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn json_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("command".into(), Value::from(self.command));
        for (k, v) in &self.meta {
            obj.insert(k.clone(), v.clone());
        }
        let rows = self
            .rows
            .iter()
            .map(|row| Value::Object(self.header.iter().cloned().zip(row.iter().map(Cell::json)).collect()))
            .collect();
        obj.insert("rows".into(), Value::Array(rows));
        Value::Object(obj)
    }

    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.json_value()).expect("serializable");
        s.push('\n');
        s
    }

    pub fn meta_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&Value::Object(self.meta.clone())).expect("serializable");
        s.push('\n');
        s
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("{k}: {v}\n"));
        }
        if !self.meta.is_empty() {
            out.push('\n');
        }
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::text).collect()).collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| cells.iter().map(|r| r[j].len()).chain([self.header[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |items: Vec<&str>| {
            items.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect::<Vec<_>>().join("  ")
        };
        out.push_str(&line(self.header.iter().map(String::as_str).collect()));
        out.push('\n');
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row.iter().map(String::as_str).collect()));
            out.push('\n');
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv(),
            Format::Json => self.json(),
            Format::Table => self.table(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip_numbers() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 2.5e17, -0.0, 5e-324, f64::MAX] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(1e-20), "1e-20");
    }

    #[test]
    fn csv_has_one_header_line() {
        let mut r = Report::new("amplitude", &["t", "re", "im", "abs"]);
        r.push(vec![0.0.into(), 1.0.into(), 0.0.into(), 1.0.into()]);
        assert_eq!(r.csv(), "t,re,im,abs\n0.0,1.0,0.0,1.0\n");
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut r = Report::new("spectrum", &["omega", "mu"]);
        let vals = [0.1 + 0.2, std::f64::consts::PI, 1e-300];
        for v in vals {
            r.push(vec![v.into(), (1.0 / v).into()]);
        }
        let back: Value = serde_json::from_str(&r.json()).unwrap();
        for (row, v) in back["rows"].as_array().unwrap().iter().zip(vals) {
            assert_eq!(row["omega"].as_f64().unwrap().to_bits(), v.to_bits());
            assert_eq!(row["mu"].as_f64().unwrap().to_bits(), (1.0 / v).to_bits());
        }
    }
}
