//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! # comment
//! [train]
//! depth = 3
//! hidden_width = 32
//!
//! [simulate]
//! schemes = pre_reform, spa_68
//! ```
//!
//! Values are resolved command line first, then config file, then the
//! built-in default. Every resolved value is recorded for the manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    values: BTreeMap<(String, String), String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        cfg.path = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| CliError::Input(format!("{origin}:{}: {msg}", n + 1));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| bad("unterminated section header"))?;
                section = name.trim().to_string();
                if section.is_empty() {
                    return Err(bad("empty section name"));
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad("expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(bad("empty key"));
            }
            if values
                .insert((section.clone(), key.to_string()), value.trim().to_string())
                .is_some()
            {
                return Err(bad(&format!("duplicate key {key}")));
            }
        }
        Ok(Self { path: None, values })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .map(String::as_str)
    }

    /// Relative paths in a config file are taken relative to the file.
    fn resolve_path(&self, raw: &str) -> PathBuf {
        let p = PathBuf::from(raw);
        match self.path.as_ref().and_then(|c| c.parent()) {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        }
    }

    /// Keys never read in a section the command did read, reported as a
    /// warning so that typos do not silently fall back to defaults. Sections
    /// belonging to other commands are left alone, as are the top level and
    /// `[data]`, which every command shares.
    pub fn unused<'a>(&'a self, seen: &'a Resolver) -> impl Iterator<Item = String> + 'a {
        let touched = |section: &str| {
            let prefix = format!("{section}.");
            seen.record
                .keys()
                .chain(&seen.probed)
                .any(|k| k.starts_with(&prefix))
        };
        self.values
            .keys()
            .filter(move |(s, _)| !s.is_empty() && s != "data" && touched(s))
            .map(|(s, k)| format!("{s}.{k}"))
            .filter(move |k| !seen.record.contains_key(k) && !seen.probed.contains(k))
    }
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

fn parse_value<T: FromStr>(section: &str, key: &str, raw: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    raw.parse()
        .map_err(|e| CliError::Input(format!("config {section}.{key} = {raw:?}: {e}")))
}

/// Resolves settings and remembers what was used.
pub struct Resolver<'a> {
    cfg: &'a ConfigFile,
    pub record: BTreeMap<String, Value>,
    probed: std::collections::BTreeSet<String>,
}

impl<'a> Resolver<'a> {
    pub fn new(cfg: &'a ConfigFile) -> Self {
        Self {
            cfg,
            record: BTreeMap::new(),
            probed: Default::default(),
        }
    }

    fn note(&mut self, section: &str, key: &str, v: Value) {
        self.record.insert(qualified(section, key), v);
    }

    pub fn optional<T>(
        &mut self,
        section: &str,
        key: &str,
        cli: Option<T>,
    ) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match cli {
            Some(v) => Some(v),
            None => match self.cfg.raw(section, key) {
                Some(raw) => Some(parse_value(section, key, raw)?),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.note(section, key, Value::String(v.to_string()));
        } else {
            self.probed.insert(qualified(section, key));
        }
        Ok(v)
    }

    pub fn value<T>(
        &mut self,
        section: &str,
        key: &str,
        cli: Option<T>,
        default: T,
    ) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.optional(section, key, cli)?.unwrap_or(default);
        self.note(section, key, Value::String(v.to_string()));
        Ok(v)
    }

    pub fn flag(&mut self, section: &str, key: &str, cli: bool) -> Result<bool, CliError> {
        let v = if cli {
            true
        } else {
            match self.cfg.raw(section, key) {
                Some(raw) => parse_value(section, key, raw)?,
                None => false,
            }
        };
        self.note(section, key, Value::Bool(v));
        Ok(v)
    }

    pub fn list<T>(
        &mut self,
        section: &str,
        key: &str,
        cli: Vec<T>,
        default: Vec<T>,
    ) -> Result<Vec<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = if !cli.is_empty() {
            cli
        } else if let Some(raw) = self.cfg.raw(section, key) {
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| parse_value(section, key, s))
                .collect::<Result<_, _>>()?
        } else {
            default
        };
        let shown = v.iter().map(|x| Value::String(x.to_string())).collect();
        self.note(section, key, Value::Array(shown));
        Ok(v)
    }

    pub fn path(&mut self, section: &str, key: &str, cli: Option<PathBuf>) -> Option<PathBuf> {
        let p = cli.or_else(|| {
            self.cfg
                .raw(section, key)
                .map(|raw| self.cfg.resolve_path(raw))
        });
        match &p {
            Some(p) => self.note(section, key, Value::String(p.display().to_string())),
            None => {
                self.probed.insert(qualified(section, key));
            }
        }
        p
    }

    pub fn paths(&mut self, section: &str, key: &str, cli: Vec<PathBuf>) -> Vec<PathBuf> {
        let v: Vec<PathBuf> = if !cli.is_empty() {
            cli
        } else {
            self.cfg.raw(section, key).map_or_else(Vec::new, |raw| {
                raw.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| self.cfg.resolve_path(s))
                    .collect()
            })
        };
        let shown = v
            .iter()
            .map(|p| Value::String(p.display().to_string()))
            .collect();
        self.note(section, key, Value::Array(shown));
        v
    }

    pub fn require_path(
        &mut self,
        section: &str,
        key: &str,
        cli: Option<PathBuf>,
    ) -> Result<PathBuf, CliError> {
        self.path(section, key, cli).ok_or_else(|| {
            CliError::Input(format!(
                "no {key} input: pass --{} or set `{key}` under [{section}] in the config file",
                key.replace('_', "-")
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_comments_and_whitespace() {
        let cfg = ConfigFile::parse(
            "# top\nseed_note = 1\n[train]\n depth = 3  # inline\nhidden_width=32\n\n[simulate]\nschemes = a, b ,c\n",
            "t",
        )
        .unwrap();
        let mut r = Resolver::new(&cfg);
        assert_eq!(r.value::<usize>("train", "depth", None, 6).unwrap(), 3);
        assert_eq!(
            r.value::<usize>("train", "hidden_width", Some(8), 64)
                .unwrap(),
            8
        );
        assert_eq!(r.value::<usize>("train", "steps", None, 100).unwrap(), 100);
        let l: Vec<String> = r.list("simulate", "schemes", vec![], vec![]).unwrap();
        assert_eq!(l, ["a", "b", "c"]);
        assert_eq!(r.optional::<u32>("", "seed_note", None).unwrap(), Some(1));
        assert_eq!(r.record["train.depth"], Value::String("3".into()));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(ConfigFile::parse("[train\n", "t").is_err());
        assert!(ConfigFile::parse("depth 3\n", "t").is_err());
        assert!(ConfigFile::parse("[a]\nx=1\nx=2\n", "t").is_err());
        let cfg = ConfigFile::parse("[train]\ndepth = three\n", "t").unwrap();
        let err = Resolver::new(&cfg)
            .value::<usize>("train", "depth", None, 1)
            .unwrap_err();
        assert!(err.to_string().contains("train.depth"));
    }

    #[test]
    fn unused_keys_are_listed() {
        let cfg = ConfigFile::parse(
            "[train]\ndepht = 3\ndepth = 2\n[simulate]\nscale = 1\n",
            "t",
        )
        .unwrap();
        let mut r = Resolver::new(&cfg);
        r.value::<usize>("train", "depth", None, 1).unwrap();
        let unused: Vec<_> = cfg.unused(&r).collect();
        assert_eq!(unused, ["train.depht"]);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = ConfigFile::parse("[data]\nmortality = m.csv\n", "t").unwrap();
        cfg.path = Some(PathBuf::from("/cfg/dir/run.cfg"));
        let mut r = Resolver::new(&cfg);
        assert_eq!(
            r.path("data", "mortality", None).unwrap(),
            PathBuf::from("/cfg/dir/m.csv")
        );
    }
}
