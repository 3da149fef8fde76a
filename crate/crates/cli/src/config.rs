//! `key = value` files with `[section]` headers.
//!
//! Values are read through typed getters that remember what was asked for;
//! `finish` then reports every bad value and every key nobody read, so a
//! config is validated as a whole before anything runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug)]
pub struct Config {
    entries: BTreeMap<String, (String, usize)>,
    used: BTreeMap<String, String>,
    problems: Vec<String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, Vec<String>> {
        let mut entries = BTreeMap::new();
        let mut problems = Vec::new();
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                problems.push(format!("line {line_no}: expected key = value"));
                continue;
            };
            let key = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            if entries.insert(key.clone(), (value.trim().to_string(), line_no)).is_some() {
                problems.push(format!("line {line_no}: {key} given twice"));
            }
        }
        if problems.is_empty() {
            Ok(Self {
                entries,
                used: BTreeMap::new(),
                problems,
            })
        } else {
            Err(problems)
        }
    }

    /// Injects a value from the command line, overriding the file.
    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), (value, 0));
    }

    pub fn problem(&mut self, msg: String) {
        self.problems.push(msg);
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.entries.get(key).map(|(v, _)| v.clone())
    }

    fn record(&mut self, key: &str, shown: String) {
        self.used.insert(key.to_string(), shown);
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        let v = self.raw(key).unwrap_or_else(|| default.to_string());
        self.record(key, v.clone());
        v
    }

    pub fn optional_string(&mut self, key: &str) -> Option<String> {
        let v = self.raw(key);
        if let Some(v) = &v {
            self.record(key, v.clone());
        }
        v
    }

    pub fn choice(&mut self, key: &str, default: &str, allowed: &[&str]) -> String {
        let v = self.string(key, default);
        if !allowed.contains(&v.as_str()) {
            self.problems
                .push(format!("{key}: '{v}' is not one of {}", allowed.join(", ")));
        }
        v
    }

    pub fn get<T>(&mut self, key: &str, default: T) -> T
    where
        T: FromStr + ToString + Clone,
    {
        match self.raw(key) {
            None => {
                self.record(key, default.to_string());
                default
            }
            Some(v) => match v.parse::<T>() {
                Ok(x) => {
                    self.record(key, v);
                    x
                }
                Err(_) => {
                    self.problems.push(format!("{key}: cannot parse '{v}'"));
                    self.record(key, v);
                    default
                }
            },
        }
    }

    /// A number that must lie in `range`.
    pub fn number(&mut self, key: &str, default: f64, range: std::ops::RangeInclusive<f64>) -> f64 {
        let v = self.get(key, default);
        if !(v.is_finite() && range.contains(&v)) {
            self.problems.push(format!(
                "{key}: {v} is outside [{}, {}]",
                range.start(),
                range.end()
            ));
        }
        v
    }

    pub fn count(&mut self, key: &str, default: usize, min: usize) -> usize {
        let v = self.get(key, default);
        if v < min {
            self.problems.push(format!("{key}: {v} is below the minimum {min}"));
        }
        v
    }

    pub fn list<T: FromStr + ToString>(&mut self, key: &str, default: &[T]) -> Vec<T> {
        let Some(v) = self.raw(key) else {
            let shown = default.iter().map(T::to_string).collect::<Vec<_>>().join(",");
            self.record(key, shown);
            return default.iter().map(|x| x.to_string().parse().ok().expect("round trip")).collect();
        };
        let mut out = Vec::new();
        for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse() {
                Ok(x) => out.push(x),
                Err(_) => self.problems.push(format!("{key}: cannot parse list item '{item}'")),
            }
        }
        if out.is_empty() {
            self.problems.push(format!("{key}: empty list"));
        }
        self.record(key, v);
        out
    }

    pub fn take_problems(&mut self) -> Vec<String> {
        std::mem::take(&mut self.problems)
    }

    /// Every problem found, including keys that were never read.
    pub fn finish(&mut self) -> Result<(), Vec<String>> {
        let unknown: Vec<String> = self
            .entries
            .iter()
            .filter(|(k, _)| !self.used.contains_key(*k))
            .map(|(k, (_, line))| match line {
                0 => format!("{k}: unknown key"),
                l => format!("line {l}: {k}: unknown key"),
            })
            .collect();
        self.problems.extend(unknown);
        if self.problems.is_empty() {
            Ok(())
        } else {
            Err(std::mem::take(&mut self.problems))
        }
    }

    /// The resolved configuration, defaults included, in file syntax.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.used.iter().filter(|(k, _)| !k.contains('.')) {
            let _ = writeln!(out, "{key} = {value}");
        }
        let mut section = None;
        for (key, value) in &self.used {
            let Some((sec, name)) = key.split_once('.') else {
                continue;
            };
            if section != Some(sec) {
                let _ = writeln!(out, "[{sec}]");
                section = Some(sec);
            }
            let _ = writeln!(out, "{name} = {value}");
        }
        out
    }
}
