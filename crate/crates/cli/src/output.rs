use std::fmt::Write as _;

use serde_json::{Map, Value};

use crate::args::Format;

pub const LOG_CONVENTION: &str = "natural logarithm unless a name says log2";

/// One result: named scalars and an optional table.
#[derive(Debug, Clone, Default)]
pub struct Output {
    pub fields: Vec<(String, Value)>,
    pub table: Option<Table>,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Output {
    pub fn field(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.fields.push((key.to_string(), value.into()));
        self
    }

    pub fn real(&mut self, key: &str, value: f64) -> &mut Self {
        self.field(key, real(value))
    }

    pub fn default_format(&self) -> Format {
        if self.table.is_some() {
            Format::Csv
        } else {
            Format::Json
        }
    }
}

/// Non-finite reals become null in JSON.
pub fn real(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn opt_real(x: Option<f64>) -> Value {
    x.map_or(Value::Null, real)
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) if n.is_f64() => format!("{:.16e}", n.as_f64().expect("f64")),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn metadata_pairs(config: &Value, rng: &str) -> Vec<(String, Value)> {
    vec![
        ("tool".into(), Value::from("shuffle-lab")),
        ("version".into(), Value::from(env!("CARGO_PKG_VERSION"))),
        ("config".into(), config.clone()),
        ("rng".into(), Value::from(rng)),
        ("log".into(), Value::from(LOG_CONVENTION)),
    ]
}

pub fn render(out: &Output, format: Format, config: &Value, rng: &str) -> String {
    match format {
        Format::Csv => render_csv(out, config, rng),
        Format::Json => render_json(out, config, rng),
    }
}

fn render_csv(out: &Output, config: &Value, rng: &str) -> String {
    let mut s = String::new();
    for (k, v) in metadata_pairs(config, rng) {
        let text = match v {
            Value::String(t) => t,
            other => other.to_string(),
        };
        writeln!(s, "# {k}: {text}").unwrap();
    }
    match &out.table {
        Some(table) => {
            for (k, v) in &out.fields {
                writeln!(s, "# {k}: {}", csv_cell(v)).unwrap();
            }
            writeln!(s, "{}", table.columns.join(",")).unwrap();
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(csv_cell).collect();
                writeln!(s, "{}", cells.join(",")).unwrap();
            }
        }
        None => {
            let keys: Vec<&str> = out.fields.iter().map(|(k, _)| k.as_str()).collect();
            writeln!(s, "{}", keys.join(",")).unwrap();
            let cells: Vec<String> = out.fields.iter().map(|(_, v)| csv_cell(v)).collect();
            writeln!(s, "{}", cells.join(",")).unwrap();
        }
    }
    s
}

fn render_json(out: &Output, config: &Value, rng: &str) -> String {
    let mut root = Map::new();
    root.insert("metadata".into(), Value::Object(metadata_pairs(config, rng).into_iter().collect()));
    for (k, v) in &out.fields {
        root.insert(k.clone(), v.clone());
    }
    if let Some(table) = &out.table {
        let rows: Vec<Value> = table
            .rows
            .iter()
            .map(|row| Value::Object(table.columns.iter().cloned().zip(row.iter().cloned()).collect()))
            .collect();
        root.insert(table.name.clone(), Value::Array(rows));
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(root)).expect("serializable");
    text.push('\n');
    text
}
