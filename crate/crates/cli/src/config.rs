//! `key = value` run configuration. Command-line flags override file values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use tiwork::leakage::LeakageKind;
use tiwork::present_ti::{parse_block, Key80, TrojanMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    U64,
    Usize,
    F64,
    OnOff,
    Block,
    Key,
    Mode,
    Model,
    Acquisition,
    Text,
}

const KEYS: &[(&str, Kind)] = &[
    ("seed", Kind::U64),
    ("sigma", Kind::F64),
    ("alpha", Kind::F64),
    ("model", Kind::Model),
    ("samples_per_cycle", Kind::Usize),
    ("n_traces", Kind::U64),
    ("mode", Kind::Mode),
    ("prng", Kind::OnOff),
    ("key", Kind::Key),
    ("fixed_pt", Kind::Block),
    ("acquisition", Kind::Acquisition),
    ("order", Kind::Usize),
    ("nibble", Kind::Usize),
    ("bit", Kind::Usize),
    ("t_from", Kind::F64),
    ("t_to", Kind::F64),
    ("t_steps", Kind::Usize),
    ("setup_margin", Kind::F64),
    ("population", Kind::Usize),
    ("generations", Kind::Usize),
    ("mutation_rate", Kind::F64),
    ("crossover_rate", Kind::F64),
    ("target_delay", Kind::F64),
    ("c", Kind::F64),
    ("period", Kind::F64),
    ("vectors", Kind::Usize),
    ("netlist", Kind::Text),
    ("delays", Kind::Text),
    ("out", Kind::Text),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// `on`/`off` switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OnOff(pub bool);

impl FromStr for OnOff {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "on" | "true" | "1" | "yes" => Ok(OnOff(true)),
            "off" | "false" | "0" | "no" => Ok(OnOff(false)),
            _ => Err(format!("expected on/off, got `{s}`")),
        }
    }
}

/// A 64-bit block written in hex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block(pub u64);

impl FromStr for Block {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_block(s).map(Block).map_err(|e| e.to_string())
    }
}

fn check(kind: Kind, v: &str) -> Result<(), String> {
    let e = |x: Result<(), String>| x;
    match kind {
        Kind::U64 => e(v.parse::<u64>().map(|_| ()).map_err(|x| x.to_string())),
        Kind::Usize => e(v.parse::<usize>().map(|_| ()).map_err(|x| x.to_string())),
        Kind::F64 => match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(()),
            Ok(_) => Err("not finite".into()),
            Err(x) => Err(x.to_string()),
        },
        Kind::OnOff => v.parse::<OnOff>().map(|_| ()),
        Kind::Block => v.parse::<Block>().map(|_| ()),
        Kind::Key => v.parse::<Key80>().map(|_| ()).map_err(|x| x.to_string()),
        Kind::Mode => v.parse::<TrojanMode>().map(|_| ()).map_err(|x| x.to_string()),
        Kind::Model => v.parse::<LeakageKind>().map(|_| ()).map_err(|x| x.to_string()),
        Kind::Acquisition => match v {
            "fixed-vs-random" | "random" => Ok(()),
            _ => Err("expected fixed-vs-random or random".into()),
        },
        Kind::Text => {
            if v.is_empty() {
                Err("empty value".into())
            } else {
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parses and type-checks every entry; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| ConfigError(format!("config line {}: {m}", ln + 1));
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            let kind = KEYS
                .iter()
                .find(|(name, _)| *name == k)
                .map(|&(_, kind)| kind)
                .ok_or_else(|| err(format!("unknown key `{k}`")))?;
            check(kind, v).map_err(|m| err(format!("{k}: {m}")))?;
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(err(format!("duplicate key `{k}`")));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Value of a validated key.
    pub fn get<T: FromStr>(&self, key: &str) -> Option<T> {
        debug_assert!(KEYS.iter().any(|(k, _)| *k == key), "unregistered key {key}");
        self.values.get(key).and_then(|v| v.parse().ok())
    }

    /// `flag`, else the file value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> T {
        flag.or_else(|| self.get(key)).unwrap_or(default)
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Option<T> {
        flag.or_else(|| self.get(key))
    }
}
