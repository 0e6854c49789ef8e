//! JSON config files with command-line overrides.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::usage;

/// Flag overrides as dotted keys (`dims.h1`) and values; `None` means the
/// flag was not given.
pub type Overrides = Vec<(&'static str, Option<Value>)>;

/// Reads `path` (a JSON object; absent means `{}`), applies `overrides`, and
/// deserializes. Returns the config and its fully resolved JSON form,
/// defaults included.
pub fn resolve<T: DeserializeOwned + Serialize>(
    path: Option<&Path>,
    overrides: Overrides,
    needs_seed: bool,
) -> Result<(T, Value)> {
    let mut root = match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            let v: Value =
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
            match v {
                Value::Object(m) => m,
                _ => return Err(usage(format!("{}: config must be a JSON object", p.display()))),
            }
        }
        None => Map::new(),
    };
    for (key, value) in overrides {
        if let Some(v) = value {
            set_dotted(&mut root, key, v);
        }
    }
    if needs_seed && !root.contains_key("seed") {
        return Err(usage(
            "training commands need a seed: pass --seed or set \"seed\" in the config",
        ));
    }
    let what = path.map_or_else(|| "command-line config".to_string(), |p| p.display().to_string());
    let cfg: T =
        serde_json::from_value(Value::Object(root)).with_context(|| format!("invalid config in {what}"))?;
    let resolved = serde_json::to_value(&cfg).expect("config serializes");
    Ok((cfg, resolved))
}

fn set_dotted(root: &mut Map<String, Value>, key: &str, v: Value) {
    match key.split_once('.') {
        None => {
            root.insert(key.to_string(), v);
        }
        Some((head, rest)) => {
            let child = root
                .entry(head.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            if !child.is_object() {
                *child = Value::Object(Map::new());
            }
            set_dotted(child.as_object_mut().expect("object"), rest, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;
    use serde_json::json;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Inner {
        h1: usize,
        h2: usize,
    }

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Cfg {
        seed: u64,
        lr: f64,
        dims: Inner,
    }

    #[test]
    fn flags_override_file_and_fill_nested_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 1, "lr": 0.5, "dims": {"h1": 4, "h2": 5}}"#).unwrap();
        let (cfg, resolved): (Cfg, Value) = resolve(
            Some(&p),
            vec![
                ("seed", Some(json!(9))),
                ("dims.h2", Some(json!(7))),
                ("lr", None),
            ],
            true,
        )
        .unwrap();
        assert_eq!(
            cfg,
            Cfg {
                seed: 9,
                lr: 0.5,
                dims: Inner { h1: 4, h2: 7 }
            }
        );
        assert_eq!(
            resolved,
            json!({"seed": 9, "lr": 0.5, "dims": {"h1": 4, "h2": 7}})
        );
    }

    #[test]
    fn missing_seed_and_unknown_keys_are_usage_errors() {
        let r: Result<(Cfg, Value)> = resolve(None, vec![], true);
        assert!(r.unwrap_err().to_string().contains("seed"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 1, "typo": 2}"#).unwrap();
        let err = resolve::<Cfg>(Some(&p), vec![], true).unwrap_err();
        assert_eq!(crate::error::classify(&err).0, crate::error::EXIT_USAGE);
    }
}
