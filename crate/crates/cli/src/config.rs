//! Flat `key = value` run configuration files.
//!
//! Keys are the long command-line flag names (`epochs`, `lr`,
//! `max-classes`, ...); `_` and `-` are interchangeable and `#` starts a
//! comment. List values (`schemes`, `exclude-class`) are comma separated.

use std::collections::BTreeMap;
use std::path::Path;

use augbench_core::{Error, Result};

const KNOWN_KEYS: &[&str] = &[
    "dataset-root",
    "out",
    "schemes",
    "scheme",
    "seed",
    "epochs",
    "minibatch",
    "lr",
    "momentum",
    "l2",
    "clip-norm",
    "exclude-class",
    "max-classes",
    "max-per-class",
    "jitter-hue",
    "jitter-saturation",
    "jitter-brightness",
    "pca-scale",
    "alpha-std",
    "no-timing",
    "fold",
];

/// Longer spellings accepted for a few keys.
const ALIASES: &[(&str, &str)] = &[
    ("learning-rate", "lr"),
    ("output-dir", "out"),
    ("excluded-classes", "exclude-class"),
    ("s-p", "pca-scale"),
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            let mut key = key.trim().replace('_', "-");
            if let Some((_, canon)) = ALIASES.iter().find(|(a, _)| *a == key) {
                key = canon.to_string();
            }
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(parse_err(format!("unknown key `{key}`")));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                Error::FileNotFound(path.to_path_buf())
            } else {
                Error::Io { path: path.to_path_buf(), source }
            }
        })?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Typed value for `key`, if present.
    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::InvalidArgument(format!("config key `{key}`: {e}"))))
            .transpose()
    }

    pub fn list(&self, key: &str) -> Option<Vec<String>> {
        self.raw(key).map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_aliases() {
        let cfg = ConfigFile::parse("# run\nepochs = 15\nlearning_rate=0.02  # faster\nschemes = none, crop\n\nmax_classes = 5\n").unwrap();
        assert_eq!(cfg.get::<usize>("epochs").unwrap(), Some(15));
        assert_eq!(cfg.get::<f64>("lr").unwrap(), Some(0.02));
        assert_eq!(cfg.list("schemes").unwrap(), ["none", "crop"]);
        assert_eq!(cfg.get::<usize>("max-classes").unwrap(), Some(5));
        assert_eq!(cfg.get::<u64>("seed").unwrap(), None);
    }

    #[test]
    fn reports_line_numbers() {
        match ConfigFile::parse("epochs = 3\nbogus\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match ConfigFile::parse("epochs = 3\n\ncolour = red\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_values_are_invalid_arguments() {
        let cfg = ConfigFile::parse("epochs = many").unwrap();
        assert!(matches!(cfg.get::<usize>("epochs"), Err(Error::InvalidArgument(_))));
    }
}
