//! Output formats.

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
}

pub fn render<T: Serialize>(report: &T, format: Format) -> Result<String, serde_json::Error> {
    let v = serde_json::to_value(report)?;
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&v)? + "\n",
        Format::Text => {
            let mut out = String::new();
            text(&v, "", &mut out);
            out
        }
    })
}

/// One `path: value` line per scalar; arrays of scalars stay on one line.
fn text(v: &Value, path: &str, out: &mut String) {
    let join = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                text(x, &join(k), out);
            }
        }
        Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let parts: Vec<String> = items.iter().map(scalar).collect();
            out.push_str(&format!("{path}: [{}]\n", parts.join(", ")));
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                text(x, &join(&i.to_string()), out);
            }
        }
        _ => out.push_str(&format!("{path}: {}\n", scalar(v))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
