use serde::Serialize;
use serde_json::{json, Value};

use corrkit::config::{OutputFormat, RunConfig};

/// Result of one subcommand before rendering.
pub struct Outcome {
    pub command: &'static str,
    pub result: Value,
    /// `false` when the computed answer is negative.
    pub verdict: bool,
    /// Human-readable lines printed above the table view.
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn new<T: Serialize>(command: &'static str, result: &T) -> Result<Self, String> {
        Ok(Outcome {
            command,
            result: serde_json::to_value(result).map_err(|e| e.to_string())?,
            verdict: true,
            summary: Vec::new(),
        })
    }

    pub fn verdict(mut self, ok: bool) -> Self {
        self.verdict = ok;
        self
    }

    pub fn line(mut self, s: impl Into<String>) -> Self {
        self.summary.push(s.into());
        self
    }

    pub fn exit_code(&self) -> u8 {
        if self.verdict {
            0
        } else {
            1
        }
    }
}

/// Envelope with the configuration that produced the result.
pub fn envelope(outcome: &Outcome, config: &RunConfig) -> Value {
    json!({
        "command": outcome.command,
        "version": env!("CARGO_PKG_VERSION"),
        "verdict": outcome.verdict,
        "config": config,
        "result": outcome.result,
    })
}

pub fn render(outcome: &Outcome, config: &RunConfig) -> String {
    match config.format {
        OutputFormat::Json => {
            serde_json::to_string_pretty(&envelope(outcome, config)).expect("JSON values serialize") + "\n"
        }
        OutputFormat::Table => table(outcome),
    }
}

/// Aligned `key  value` rows for scalars and short numeric arrays.
fn table(outcome: &Outcome) -> String {
    let mut out = String::new();
    for line in &outcome.summary {
        out.push_str(line);
        out.push('\n');
    }
    let mut rows = Vec::new();
    flatten("", &outcome.result, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        out.push_str(&format!("{k:<width$}  {v}\n"));
    }
    out.push_str(&format!(
        "{:<width$}  {}\n",
        "verdict",
        if outcome.verdict { "yes" } else { "no" }
    ));
    out
}

const INLINE_MAX: usize = 8;

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(match n.as_f64() {
            Some(f) if n.is_f64() => format!("{f:.10}"),
            _ => n.to_string(),
        }),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                flatten(&key(k), child, rows);
            }
        }
        Value::Array(items) => {
            let scalars: Option<Vec<String>> = items.iter().map(scalar).collect();
            match scalars {
                Some(s) if s.len() <= INLINE_MAX => rows.push((prefix.to_string(), format!("[{}]", s.join(", ")))),
                _ => rows.push((prefix.to_string(), format!("[{} entries]", items.len()))),
            }
        }
        other => rows.push((prefix.to_string(), scalar(other).unwrap_or_default())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_flattens_nested_values() {
        let o = Outcome::new("x", &json!({"a": 1, "b": {"c": 0.5, "d": [1, 2]}, "e": [[1], [2]]})).unwrap();
        let t = table(&o);
        assert!(t.contains("b.c"));
        assert!(t.contains("[1, 2]"));
        assert!(t.contains("[2 entries]"));
    }
}
