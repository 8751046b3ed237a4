//! Experiment files: flat TOML tables of `key = value`.
//!
//! Keys are case-insensitive and `-` is read as `_`. Command-line overrides
//! arrive as strings, so every accessor also accepts the textual form; lists
//! may then be comma separated.

use std::collections::BTreeMap;
use std::path::Path;

use toml::Value;

use crate::error::CliError;

#[derive(Clone, Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, Value>,
}

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Integer(i) => Some(i.to_string()),
        Value::Float(f) => Some(f.to_string()),
        Value::Boolean(b) => Some(b.to_string()),
        _ => None,
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        let mut entries = BTreeMap::new();
        for (k, v) in table {
            if v.is_table() {
                return Err(CliError::Config(format!("[{k}]: sections are not supported")));
            }
            let key = normalize_key(&k);
            if entries.insert(key.clone(), v).is_some() {
                return Err(CliError::Config(format!("duplicate key '{key}'")));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Command-line values win over the file.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(normalize_key(key), Value::String(value.to_string()));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Rejects keys outside `allowed` (plus the shared ones).
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        const SHARED: [&str; 5] = ["command", "seed", "out", "grid_n", "tol"];
        for k in self.entries.keys() {
            if !SHARED.contains(&k.as_str()) && !allowed.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown key '{k}'")));
            }
        }
        Ok(())
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.str_opt(key).unwrap_or_else(|| default.to_string())
    }

    pub fn str_opt(&self, key: &str) -> Option<String> {
        self.entries.get(key).and_then(scalar_text)
    }

    pub fn required(&self, key: &str) -> Result<String, CliError> {
        self.str_opt(key).ok_or_else(|| CliError::Config(format!("missing key '{key}'")))
    }

    fn parse_value<T: std::str::FromStr>(&self, key: &str, v: &Value) -> Result<T, CliError> {
        let text = scalar_text(v).ok_or_else(|| CliError::Config(format!("'{key}' must be a single value")))?;
        self.parse_as(key, &text)
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str, v: &str) -> Result<T, CliError> {
        v.trim()
            .parse()
            .map_err(|_| CliError::Config(format!("'{key}': cannot parse '{v}'")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.entries.get(key) {
            Some(v) => self.parse_value(key, v),
            None => Ok(default),
        }
    }

    pub fn positive_f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.f64_or(key, default)?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(CliError::Config(format!("'{key}' must be positive (got {v})")));
        }
        Ok(v)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.entries.get(key) {
            Some(v) => self.parse_value(key, v),
            None => Ok(default),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.entries.get(key) {
            Some(v) => self.parse_value(key, v),
            None => Ok(default),
        }
    }

    pub fn list_or<T: std::str::FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>, CliError> {
        let Some(v) = self.entries.get(key) else {
            return Ok(default.to_vec());
        };
        let out: Result<Vec<T>, _> = match v {
            Value::Array(items) => items.iter().map(|t| self.parse_value(key, t)).collect(),
            other => {
                let text = scalar_text(other).unwrap_or_default();
                let inner = text.trim();
                let inner = inner.strip_prefix('[').and_then(|s| s.strip_suffix(']')).unwrap_or(inner);
                inner.split(',').filter(|t| !t.trim().is_empty()).map(|t| self.parse_as(key, t)).collect()
            }
        };
        let out = out?;
        if out.is_empty() {
            return Err(CliError::Config(format!("'{key}' is an empty list")));
        }
        Ok(out)
    }

    /// Two reals `x,y`.
    pub fn pair_or(&self, key: &str, default: (f64, f64)) -> Result<(f64, f64), CliError> {
        if !self.contains(key) {
            return Ok(default);
        }
        match self.list_or::<f64>(key, &[])?.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(CliError::Config(format!("'{key}' needs two values"))),
        }
    }

    pub fn tol_or(&self, default: f64) -> Result<f64, CliError> {
        self.positive_f64_or("tol", default)
    }

    pub fn grid_n_or(&self, default: usize) -> Result<usize, CliError> {
        let n = self.usize_or("grid_n", default)?;
        if n < 8 {
            return Err(CliError::Config(format!("grid_n must be at least 8 (got {n})")));
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_strings_and_arrays() {
        let c = Config::parse("# x\nfamily = \"harmonic\"\nDegrees = [1, 2,3]\ngrid-n=64\ntol = 1e-9\n").unwrap();
        assert_eq!(c.str_or("family", ""), "harmonic");
        assert_eq!(c.list_or::<u32>("degrees", &[]).unwrap(), vec![1, 2, 3]);
        assert_eq!(c.grid_n_or(0).unwrap(), 64);
        assert_eq!(c.tol_or(1.0).unwrap(), 1e-9);
    }

    #[test]
    fn command_line_strings_are_accepted() {
        let mut c = Config::default();
        c.set("R-list", "10,100");
        c.set("seed", 7);
        assert_eq!(c.list_or::<f64>("r_list", &[]).unwrap(), vec![10.0, 100.0]);
        assert_eq!(c.u64_or("seed", 0).unwrap(), 7);
        assert_eq!(c.f64_or("seed", 0.0).unwrap(), 7.0);
    }

    #[test]
    fn rejects_sections_duplicates_and_garbage() {
        assert!(Config::parse("[order]\nr = 1\n").is_err());
        assert!(Config::parse("a = 1\nA = 2\n").is_err());
        assert!(Config::parse("just words\n").is_err());
        let c = Config::parse("tol = -1\n").unwrap();
        assert!(c.tol_or(1e-9).is_err());
        let c = Config::parse("tol = [1, 2]\n").unwrap();
        assert!(c.tol_or(1e-9).is_err());
    }

    #[test]
    fn unknown_keys_are_schema_errors() {
        let c = Config::parse("seed = 3\ncolour = \"red\"\n").unwrap();
        assert!(c.check_keys(&["family"]).is_err());
        assert!(c.check_keys(&["colour"]).is_ok());
    }
}
