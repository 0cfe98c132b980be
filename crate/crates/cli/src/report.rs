use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use treeharm_core::rational;

/// Result of one command: the report, text for stdout and failed checks.
#[derive(Debug, Default)]
pub struct Outcome {
    pub report: Value,
    pub stdout: Option<String>,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn is_fraction(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    let mut parts = body.splitn(2, '/');
    let num = parts.next().unwrap_or("");
    let ok = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    ok(num) && parts.next().is_none_or(ok)
}

fn approx(s: &str) -> Value {
    rational::parse(s)
        .ok()
        .and_then(|q| serde_json::Number::from_f64(rational::approx(&q)))
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

/// Adds a `<key>_approx` decimal next to every exact fraction string (or
/// list of them) in a report.
pub fn annotate(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut out = Map::new();
            for (k, v) in map {
                let extra = match &v {
                    Value::String(s) if is_fraction(s) => Some(approx(s)),
                    Value::Array(items)
                        if !items.is_empty() && items.iter().all(|i| matches!(i, Value::String(s) if is_fraction(s))) =>
                    {
                        Some(Value::Array(items.iter().map(|i| approx(i.as_str().unwrap())).collect()))
                    }
                    _ => None,
                };
                out.insert(k.clone(), annotate(v));
                if let Some(a) = extra {
                    if !k.ends_with("_approx") {
                        out.insert(format!("{k}_approx"), a);
                    }
                }
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(annotate).collect()),
        other => other,
    }
}

pub fn to_report<T: Serialize>(x: &T) -> Result<Value> {
    Ok(annotate(serde_json::to_value(x)?))
}

pub fn render(v: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes the report to `path`, or returns it for stdout.
pub fn emit(report: &Value, path: Option<&Path>) -> Result<Option<String>> {
    let text = render(report)?;
    match path {
        Some(p) => {
            write_text(p, &text)?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_get_approximations() {
        let v = serde_json::json!({"d": "1/3", "xs": ["1/2", "-3"], "name": "scalar", "n": 3, "nested": [{"r": "7"}]});
        let a = annotate(v);
        assert_eq!(a["d_approx"], serde_json::json!(1.0 / 3.0));
        assert_eq!(a["xs_approx"], serde_json::json!([0.5, -3.0]));
        assert!(a.get("name_approx").is_none());
        assert_eq!(a["nested"][0]["r_approx"], serde_json::json!(7.0));
        assert!(is_fraction("-12/5") && !is_fraction("1/") && !is_fraction("a/b") && !is_fraction(""));
    }
}
