//! Report values and their JSON/CSV renderings.

use std::str::FromStr;

use serde_json::{Number, Value};

/// A float at 17 significant digits; non-finite values become null.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&format!("{x:.16e}")).expect("valid JSON number"))
    } else {
        Value::Null
    }
}

pub fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().copied().map(num).collect())
}

/// Rows for CSV output under a fixed column schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn to_csv(table: &Table) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(table.columns).expect("in-memory write");
    for row in &table.rows {
        w.write_record(row.iter().map(cell))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn to_json(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.25).to_string(), "2.5000000000000000e-1");
        assert_eq!(num(1.0 / 3.0).to_string(), "3.3333333333333331e-1");
        assert_eq!(num(f64::NAN), Value::Null);
        let back: f64 = num(0.1 + 0.2).to_string().parse().unwrap();
        assert_eq!(back.to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn csv_quotes_and_blanks() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![Value::String("x,y".into()), Value::Null]);
        t.push(vec![num(1.0), Value::Bool(true)]);
        assert_eq!(to_csv(&t), "a,b\n\"x,y\",\n1.0000000000000000e+0,true\n");
    }
}
