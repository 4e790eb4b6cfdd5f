use serde_json::Value;
use std::fmt::Write;

/// Float with `digits` significant digits, plain notation for moderate exponents.
pub fn format_float(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    if !x.is_finite() {
        return "null".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..16).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(1) as usize;
        let s = format!("{x:.decimals$}");
        // `{:.N}` may round up into the next decade; the digit count is still bounded.
        trim_zeros(&s)
    } else {
        let s = format!("{x:.prec$e}", prec = digits - 1);
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        format!("{}e{e}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return format!("{s}.0");
    }
    let t = s.trim_end_matches('0');
    if t.ends_with('.') {
        format!("{t}0")
    } else {
        t.to_string()
    }
}

fn number(n: &serde_json::Number, digits: usize) -> String {
    if n.is_f64() {
        format_float(n.as_f64().expect("f64 number"), digits)
    } else {
        n.to_string()
    }
}

/// Pretty JSON with floats at 17 significant digits.
pub fn to_json(value: &Value) -> String {
    let mut out = String::new();
    write_json(value, 0, &mut out);
    out.push('\n');
    out
}

fn write_json(value: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&number(n, 17)),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // Arrays of scalars stay on one line.
            if items.iter().all(|v| !v.is_object() && !v.is_array()) {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_json(v, indent, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, v) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_json(v, indent + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, v)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push_str(": ");
                write_json(v, indent + 1, out);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Two-column `key value` table of the leaves, floats at 6 significant digits.
/// Arrays longer than `max_items` are summarized by their length.
pub fn to_table(value: &Value, max_items: usize) -> String {
    let mut rows: Vec<(String, String)> = Vec::new();
    flatten(value, String::new(), max_items, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v}");
    }
    out
}

fn flatten(value: &Value, prefix: String, max_items: usize, rows: &mut Vec<(String, String)>) {
    let key = |suffix: &str| {
        if prefix.is_empty() {
            suffix.to_string()
        } else {
            format!("{prefix}.{suffix}")
        }
    };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(v, key(k), max_items, rows);
            }
        }
        Value::Array(items) if items.len() > max_items => {
            rows.push((prefix, format!("[{} items]", items.len())));
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(v, key(&i.to_string()), max_items, rows);
            }
        }
        Value::Number(n) => rows.push((prefix, number(n, 6))),
        Value::String(s) => rows.push((prefix, s.clone())),
        Value::Bool(b) => rows.push((prefix, b.to_string())),
        Value::Null => rows.push((prefix, "null".into())),
    }
}
