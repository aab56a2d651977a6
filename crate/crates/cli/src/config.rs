//! Flat `key=value` run configuration.
//!
//! Keys (defaults in brackets):
//!
//! | key | meaning |
//! |-----|---------|
//! | `L` | box length [1] |
//! | `eta` | barrier strength [5] |
//! | `gas` | `btg`, `ftg` or `ideal_bose`; selects a gas target |
//! | `N` | particle count for a gas target [1] |
//! | `modes` | comma list of box modes; the default target [1] |
//! | `t_min`, `t_max`, `t_points` | time grid [0.01, 100, 50] |
//! | `t_spacing` | `linear` or `log` [log] |
//! | `tol` | spectral tolerance [1e-8] |
//! | `count` | number of poles for `poles` [5] |
//! | `eta_list`, `N_list`, `gas_list` | sweep axes |
//! | `out` | output directory [.] |
//! | `workers` | worker threads [available cores] |
//!
//! Blank lines and lines starting with `#` are ignored. Result keys written
//! to `.meta` sidecars are accepted and ignored, so a sidecar is itself a
//! config that reproduces the run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use tgdecay_core::{GasKind, GasSpec, ModeIndex, SpectralOptions, TimeGrid, TimeSpacing, TrapSpec};

use crate::error::CliError;
use crate::output::fmt_exact;

const CONFIG_KEYS: &[&str] = &[
    "L", "eta", "gas", "N", "modes", "t_min", "t_max", "t_points", "t_spacing", "tol", "count", "eta_list",
    "N_list", "gas_list", "out", "workers",
];

/// Keys that sidecars add on top of the configuration.
pub const RESULT_KEYS: &[&str] = &[
    "status",
    "failed_rows",
    "descriptor",
    "gamma_1",
    "exponential_slope",
    "exponential_t_start",
    "exponential_t_end",
    "longtime_slope",
    "longtime_t_start",
    "longtime_t_end",
];

/// What a decay run follows: a gas, or a set of single modes.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Gas(GasSpec),
    Modes(Vec<ModeIndex>),
}

impl Target {
    pub fn orbitals(&self) -> Vec<ModeIndex> {
        match self {
            Target::Gas(g) => g.orbitals(),
            Target::Modes(m) => m.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub trap: TrapSpec,
    pub target: Target,
    pub times: TimeGrid,
    pub tol: f64,
    pub count: usize,
    pub out: PathBuf,
    pub workers: usize,
    pub eta_list: Option<Vec<f64>>,
    pub n_list: Option<Vec<usize>>,
    pub gas_list: Option<Vec<GasKind>>,
}

/// Parses `key=value` lines into `pairs`, later keys overriding earlier ones.
pub fn parse_pairs(text: &str, pairs: &mut BTreeMap<String, String>) -> Result<(), CliError> {
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("line {}: expected key=value, got '{line}'", i + 1)))?;
        pairs.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(())
}

/// Reads an optional config file and applies `key=value` overrides on top.
pub fn load(config: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut pairs = BTreeMap::new();
    if let Some(path) = config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        parse_pairs(&text, &mut pairs)?;
    }
    parse_pairs(&overrides.join("\n"), &mut pairs)?;
    RunConfig::from_pairs(&pairs)
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::usage(format!("{key}: cannot parse '{v}'")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| number(key, s))
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, CliError> {
        for k in pairs.keys() {
            if !CONFIG_KEYS.contains(&k.as_str()) && !RESULT_KEYS.contains(&k.as_str()) {
                return Err(CliError::usage(format!("unknown key '{k}'")));
            }
        }
        let get = |k: &str| pairs.get(k).map(String::as_str);
        let length: f64 = get("L").map(|v| number("L", v)).transpose()?.unwrap_or(1.0);
        let eta: f64 = get("eta").map(|v| number("eta", v)).transpose()?.unwrap_or(5.0);
        let trap = TrapSpec::new(length, eta)?;

        let target = match (get("gas"), get("modes")) {
            (Some(_), Some(_)) => return Err(CliError::usage("set either gas or modes, not both")),
            (Some(kind), None) => {
                let kind: GasKind = kind.parse()?;
                let n: usize = get("N").map(|v| number("N", v)).transpose()?.unwrap_or(1);
                Target::Gas(GasSpec::new(kind, n)?)
            }
            (None, modes) => {
                if get("N").is_some() {
                    return Err(CliError::usage("N needs a gas"));
                }
                let ns: Vec<u32> = modes.map(|v| list("modes", v)).transpose()?.unwrap_or(vec![1]);
                if ns.is_empty() {
                    return Err(CliError::Domain("modes list is empty".into()));
                }
                Target::Modes(ns.into_iter().map(ModeIndex::new).collect::<Result<_, _>>()?)
            }
        };

        let t_min = get("t_min").map(|v| number("t_min", v)).transpose()?.unwrap_or(0.01);
        let t_max = get("t_max").map(|v| number("t_max", v)).transpose()?.unwrap_or(100.0);
        let t_points = get("t_points").map(|v| number("t_points", v)).transpose()?.unwrap_or(50);
        let spacing = match get("t_spacing").unwrap_or("log") {
            "log" | "logarithmic" => TimeSpacing::Logarithmic,
            "linear" | "lin" => TimeSpacing::Linear,
            other => return Err(CliError::usage(format!("t_spacing: unknown spacing '{other}'"))),
        };
        let times = TimeGrid::new(spacing, t_min, t_max, t_points)?;

        let tol: f64 = get("tol").map(|v| number("tol", v)).transpose()?.unwrap_or(1e-8);
        if !(tol > 0.0 && tol < 1.0) {
            return Err(CliError::Domain(format!("tol must lie in (0, 1), got {tol}")));
        }
        let count = get("count").map(|v| number("count", v)).transpose()?.unwrap_or(5);
        let out = PathBuf::from(get("out").unwrap_or("."));
        let workers = match get("workers") {
            Some(v) => number("workers", v)?,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        if workers == 0 {
            return Err(CliError::usage("workers must be >= 1"));
        }
        let eta_list = get("eta_list").map(|v| list("eta_list", v)).transpose()?;
        let n_list = get("N_list").map(|v| list("N_list", v)).transpose()?;
        let gas_list = get("gas_list")
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<GasKind>().map_err(CliError::from))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        Ok(Self {
            trap,
            target,
            times,
            tol,
            count,
            out,
            workers,
            eta_list,
            n_list,
            gas_list,
        })
    }

    pub fn spectral_options(&self) -> SpectralOptions {
        SpectralOptions::with_tol(self.tol)
    }

    /// Everything that determines the numbers in the output, in a fixed order.
    /// `out` and `workers` are left out: they do not change results.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut p: Vec<(String, String)> = vec![
            ("L".into(), fmt_exact(self.trap.length)),
            ("eta".into(), fmt_exact(self.trap.eta)),
        ];
        match &self.target {
            Target::Gas(g) => {
                p.push(("gas".into(), g.kind.label().into()));
                p.push(("N".into(), g.n.to_string()));
            }
            Target::Modes(m) => {
                let ns: Vec<u32> = m.iter().map(|n| n.get()).collect();
                p.push(("modes".into(), join(&ns)));
            }
        }
        let spacing = match self.times.spacing {
            TimeSpacing::Linear => "linear",
            TimeSpacing::Logarithmic => "log",
        };
        p.extend([
            ("t_min".into(), fmt_exact(self.times.t_min)),
            ("t_max".into(), fmt_exact(self.times.t_max)),
            ("t_points".into(), self.times.points.to_string()),
            ("t_spacing".into(), spacing.into()),
            ("tol".into(), fmt_exact(self.tol)),
            ("count".into(), self.count.to_string()),
        ]);
        if let Some(l) = &self.eta_list {
            let etas: Vec<String> = l.iter().map(|&e| fmt_exact(e)).collect();
            p.push(("eta_list".into(), etas.join(",")));
        }
        if let Some(l) = &self.n_list {
            p.push(("N_list".into(), join(l)));
        }
        if let Some(l) = &self.gas_list {
            let labels: Vec<&str> = l.iter().map(|g| g.label()).collect();
            p.push(("gas_list".into(), labels.join(",")));
        }
        p
    }
}
