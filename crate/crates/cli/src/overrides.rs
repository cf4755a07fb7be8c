//! `--<field> <value>` overrides applied to the JSON form of a config.
//!
//! A flag names a config field by its key (`--subdivisions 2`) or by a dotted key path suffix
//! when the key alone is ambiguous (`--warp-xy.max 4`). Dashes map to underscores. Values are
//! parsed as JSON and fall back to plain strings.

use anyhow::{bail, Context, Result};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: Value,
}

/// Splits raw trailing arguments into overrides. Accepts `--key value` and `--key=value`.
pub fn parse_overrides(args: &[String]) -> Result<Vec<Override>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            bail!("unexpected argument {arg:?}; overrides take the form --<field> <value>");
        };
        let (key, raw) = match flag.split_once('=') {
            Some((k, v)) => (k, v.to_string()),
            None => {
                let v = it.next().with_context(|| format!("missing value for --{flag}"))?;
                (flag, v.clone())
            }
        };
        if key.is_empty() {
            bail!("empty override name");
        }
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        out.push(Override {
            path: key.split('.').map(|s| s.replace('-', "_")).collect(),
            value,
        });
    }
    Ok(out)
}

fn collect_paths(value: &Value, prefix: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    if let Value::Object(map) = value {
        for (k, v) in map {
            prefix.push(k.clone());
            out.push(prefix.clone());
            collect_paths(v, prefix, out);
            prefix.pop();
        }
    }
}

/// Applies every override to `config`, which must contain all fields (serialize a fully
/// defaulted config first).
pub fn apply_overrides(config: &mut Value, overrides: &[Override]) -> Result<()> {
    let mut paths = Vec::new();
    collect_paths(config, &mut Vec::new(), &mut paths);
    for o in overrides {
        let matches: Vec<&Vec<String>> = paths.iter().filter(|p| p.ends_with(&o.path)).collect();
        let target = match matches.as_slice() {
            [one] => *one,
            [] => bail!("unknown config field --{}", o.path.join(".")),
            many => bail!(
                "--{} is ambiguous; use one of: {}",
                o.path.join("."),
                many.iter().map(|p| p.join(".")).collect::<Vec<_>>().join(", ")
            ),
        };
        let mut slot = &mut *config;
        for key in target {
            slot = slot.get_mut(key).expect("path collected from this tree");
        }
        *slot = o.value.clone();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_both_forms() {
        let o = parse_overrides(&args(&["--in-plane-degrees", "[0, 90]", "--name=demo", "--focal", "null"])).unwrap();
        assert_eq!(o[0].path, vec!["in_plane_degrees"]);
        assert_eq!(o[0].value, json!([0, 90]));
        assert_eq!(o[1].value, json!("demo"));
        assert_eq!(o[2].value, Value::Null);
        assert!(parse_overrides(&args(&["--size"])).is_err());
        assert!(parse_overrides(&args(&["size", "3"])).is_err());
    }

    #[test]
    fn applies_unique_and_dotted_keys() {
        let mut cfg = json!({
            "viewsphere": {"subdivisions": 3},
            "augmentation": {"warp_xy": {"min": 0, "max": 10}, "warp_z": {"min": 0, "max": 0.005}}
        });
        let o = parse_overrides(&args(&["--subdivisions", "2", "--warp-xy.max", "4"])).unwrap();
        apply_overrides(&mut cfg, &o).unwrap();
        assert_eq!(cfg["viewsphere"]["subdivisions"], json!(2));
        assert_eq!(cfg["augmentation"]["warp_xy"]["max"], json!(4));

        let err = apply_overrides(&mut cfg, &parse_overrides(&args(&["--max", "1"])).unwrap()).unwrap_err();
        assert!(err.to_string().contains("ambiguous"), "{err}");
        let err = apply_overrides(&mut cfg, &parse_overrides(&args(&["--nope", "1"])).unwrap()).unwrap_err();
        assert!(err.to_string().contains("unknown"), "{err}");
    }
}
