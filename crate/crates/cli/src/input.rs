use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

/// Reads and deserializes a JSON file; errors name the offending path.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            format!("invalid JSON: {inner}")
        } else {
            format!("invalid JSON at {path}: {inner}")
        }
    })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use corrkit::quantum::CorrelationTable;

    #[test]
    fn pointer_to_bad_entry() {
        let err = parse_json::<CorrelationTable>(r#"{"p": [[[[0.5, "x"]]]]}"#).unwrap_err();
        assert!(err.contains("p[0][0][0][1]"), "{err}");
    }

    #[test]
    fn syntax_error_reported() {
        let err = parse_json::<CorrelationTable>("{").unwrap_err();
        assert!(err.starts_with("invalid JSON"), "{err}");
    }
}
