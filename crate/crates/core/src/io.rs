//! Manifest reading and JSON report writing.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::planner::ModelManifest;

fn schema(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        field: field.into(),
        message: message.into(),
    }
}

fn check_manifest_value(v: &Value) -> Result<()> {
    let obj = v.as_object().ok_or_else(|| schema("$", "manifest must be a JSON object"))?;
    match obj.get("model_name") {
        Some(Value::String(_)) => {}
        Some(_) => return Err(schema("model_name", "must be a string")),
        None => return Err(schema("model_name", "missing")),
    }
    match obj.get("fixed_params") {
        Some(n) if n.as_u64().is_some() => {}
        Some(_) => return Err(schema("fixed_params", "must be a nonnegative integer")),
        None => return Err(schema("fixed_params", "missing")),
    }
    let layers = match obj.get("layers") {
        Some(Value::Array(a)) => a,
        Some(_) => return Err(schema("layers", "must be an array")),
        None => return Err(schema("layers", "missing")),
    };
    for (i, layer) in layers.iter().enumerate() {
        let at = |f: &str| format!("layers[{i}].{f}");
        let l = layer
            .as_object()
            .ok_or_else(|| schema(format!("layers[{i}]"), "must be an object"))?;
        match l.get("name") {
            Some(Value::String(_)) => {}
            Some(_) => return Err(schema(at("name"), "must be a string")),
            None => return Err(schema(at("name"), "missing")),
        }
        for dim in ["rows", "cols"] {
            match l.get(dim).map(Value::as_u64) {
                Some(Some(n)) if n >= 1 => {}
                Some(_) => return Err(schema(at(dim), "must be an integer >= 1")),
                None => return Err(schema(at(dim), "missing")),
            }
        }
        if let Some(b) = l.get("has_bias") {
            if !b.is_boolean() {
                return Err(schema(at("has_bias"), "must be a boolean"));
            }
        }
        for p in ["weight_path", "bias_path"] {
            if let Some(v) = l.get(p) {
                if !(v.is_string() || v.is_null()) {
                    return Err(schema(at(p), "must be a string path"));
                }
            }
        }
    }
    Ok(())
}

/// Parses and validates a manifest. Relative weight and bias paths are
/// resolved against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<ModelManifest> {
    let value: Value = serde_json::from_str(text)?;
    check_manifest_value(&value)?;
    let mut manifest: ModelManifest = serde_json::from_value(value)?;
    manifest.validate()?;
    for layer in &mut manifest.layers {
        for p in [&mut layer.weight_path, &mut layer.bias_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
    }
    Ok(manifest)
}

/// Reads a manifest file; relative paths inside it are taken relative to
/// the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<ModelManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base)
}

/// Pretty JSON with a trailing newline. Keys follow struct field order.
pub fn to_report_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_report<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_report_json(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(text: &str) -> String {
        match parse_manifest(text, Path::new("")) {
            Err(Error::Schema { field, .. }) => field,
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_manifest() {
        let m = parse_manifest(r#"{"model_name": "toy", "fixed_params": 0, "layers": []}"#, Path::new("")).unwrap();
        assert_eq!(m.model_name, "toy");
        assert!(m.layers.is_empty());
    }

    #[test]
    fn schema_errors_name_the_field() {
        assert_eq!(
            field_of(r#"{"model_name":"t","fixed_params":0,"layers":[{"name":"a","rows":0,"cols":3}]}"#),
            "layers[0].rows"
        );
        assert_eq!(field_of(r#"{"model_name":"t","layers":[]}"#), "fixed_params");
        assert_eq!(field_of(r#"{"model_name":"t","fixed_params":-1,"layers":[]}"#), "fixed_params");
        assert_eq!(field_of(r#"{"model_name":3,"fixed_params":0,"layers":[]}"#), "model_name");
        assert_eq!(
            field_of(r#"{"model_name":"t","fixed_params":0,"layers":[{"name":"a","rows":2,"cols":2.5}]}"#),
            "layers[0].cols"
        );
        assert_eq!(
            field_of(r#"{"model_name":"t","fixed_params":0,"layers":[{"name":"a","rows":2,"cols":2,"has_bias":"yes"}]}"#),
            "layers[0].has_bias"
        );
        assert_eq!(field_of("[]"), "$");
    }

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let text = r#"{"model_name":"t","fixed_params":0,"layers":[
            {"name":"a","rows":2,"cols":2,"weight_path":"w/a.npy","bias_path":"/abs/b.npy"}]}"#;
        let m = parse_manifest(text, Path::new("/models/toy")).unwrap();
        assert_eq!(m.layers[0].weight_path.as_deref(), Some(Path::new("/models/toy/w/a.npy")));
        assert_eq!(m.layers[0].bias_path.as_deref(), Some(Path::new("/abs/b.npy")));
    }
}
