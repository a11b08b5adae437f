//! Human-readable rendering of a JSON report: one `path  value` line per
//! scalar, matrices abbreviated to their shape.

use serde_json::Value;

pub fn render(value: &Value) -> String {
    let mut lines = Vec::new();
    walk(value, String::new(), &mut lines);
    let width = lines.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in lines {
        let pad = width - k.chars().count();
        out.push_str(&format!("{k}{}  {v}\n", " ".repeat(pad)));
    }
    out
}

fn walk(value: &Value, path: String, lines: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                walk(v, p, lines);
            }
        }
        Value::Array(items) => {
            if let Some(shape) = matrix_shape(value) {
                lines.push((path, shape));
            } else if items.iter().all(is_scalar) {
                let parts: Vec<String> = items.iter().map(scalar).collect();
                lines.push((path, format!("[{}]", parts.join(", "))));
            } else {
                for (i, v) in items.iter().enumerate() {
                    walk(v, format!("{path}[{i}]"), lines);
                }
            }
        }
        other => lines.push((path, scalar(other))),
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

/// `[re, im]` entries count as scalars of a matrix.
fn is_entry(v: &Value) -> bool {
    match v {
        Value::Number(_) => true,
        Value::Array(a) => a.len() == 2 && a.iter().all(Value::is_number),
        _ => false,
    }
}

fn matrix_shape(v: &Value) -> Option<String> {
    let rows = v.as_array()?;
    let first = rows.first()?.as_array()?;
    if first.len() == 2 && first.iter().all(Value::is_number) {
        // a vector of complex entries
        return rows.iter().all(is_entry).then(|| format!("<vector {}>", rows.len()));
    }
    let ok = rows
        .iter()
        .all(|r| r.as_array().is_some_and(|r| r.len() == first.len() && r.iter().all(is_entry)));
    ok.then(|| format!("<matrix {}x{}>", rows.len(), first.len()))
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format!("{x:.7}"),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}
