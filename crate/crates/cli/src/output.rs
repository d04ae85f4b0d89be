use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::Value;

pub const SIG_DIGITS: usize = 12;

/// Subtrees kept at full precision so they can be fed back into `verify`
/// or `region eval`.
const EXACT_KEYS: [&str; 3] = ["certificate", "argument", "input"];

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().expect("formatted float parses")
}

pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => {
            for (k, item) in map.iter_mut() {
                if !EXACT_KEYS.contains(&k.as_str()) {
                    round_json(item);
                }
            }
        }
        _ => {}
    }
}

pub fn json_text(mut v: Value) -> String {
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(-2.0 / 3.0 * 1e-7), -6.66666666667e-8);
        assert_eq!(round_sig(0.0), 0.0);
        assert!(round_sig(f64::NAN).is_nan());
    }

    #[test]
    fn exact_subtrees_untouched() {
        let mut v = json!({ "value": 0.1234567890123456, "certificate": { "alpha": 0.1234567890123456 } });
        round_json(&mut v);
        assert_eq!(v["value"], json!(0.123456789012));
        assert_eq!(v["certificate"]["alpha"], json!(0.1234567890123456));
    }
}
