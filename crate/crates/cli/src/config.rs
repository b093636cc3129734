//! Flat `key = value` configuration files and flag/file/default resolution.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{}:{}: expected `key = value`",
                    origin.display(),
                    i + 1
                )));
            };
            let key = k.trim().replace('-', "_");
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!(
                    "{}:{}: duplicate key {key}",
                    origin.display(),
                    i + 1
                )));
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::parse(&text, p)
            }
        }
    }

    /// Rejects keys the command does not understand.
    pub fn check_keys(&self, known: &[&str]) -> Result<(), CliError> {
        for k in self.values.keys() {
            if !known.contains(&k.as_str()) {
                return Err(CliError::Usage(format!("unknown config key {k:?}")));
            }
        }
        Ok(())
    }

    /// Flag value, else file value, else default.
    pub fn resolve<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(s) => s.parse().map_err(|e| CliError::Usage(format!("config key {key}: {e}"))),
            None => Ok(default),
        }
    }

    /// Like `resolve` with no default.
    pub fn resolve_opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|s| s.parse().map_err(|e| CliError::Usage(format!("config key {key}: {e}"))))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let f = ConfigFile::parse("window = 12\n# comment\nalpha = 0.5 # trailing\n", Path::new("c")).unwrap();
        assert_eq!(f.resolve("window", Some(8usize), 10).unwrap(), 8);
        assert_eq!(f.resolve("window", None, 10usize).unwrap(), 12);
        assert_eq!(f.resolve("beta", None, 1.0f64).unwrap(), 1.0);
        assert_eq!(f.resolve("alpha", None, 1.0f64).unwrap(), 0.5);
        assert!(f.check_keys(&["window"]).is_err());
        assert!(f.check_keys(&["window", "alpha"]).is_ok());
    }

    #[test]
    fn malformed_lines_are_usage_errors() {
        assert!(ConfigFile::parse("window 12\n", Path::new("c")).is_err());
        assert!(ConfigFile::parse("a = 1\na = 2\n", Path::new("c")).is_err());
        let f = ConfigFile::parse("window = x\n", Path::new("c")).unwrap();
        assert!(f.resolve("window", None, 10usize).is_err());
    }
}
