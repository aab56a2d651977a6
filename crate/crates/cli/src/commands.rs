//! The `poles`, `decay` and `sweep` subcommands.

use std::path::PathBuf;

use rayon::prelude::*;
use tgdecay_core::gas::combine_trapped;
use tgdecay_core::poles::find_poles;
use tgdecay_core::{CurveKind, DecayCurve, GasSpec, Propagator, SlopeFit};

use crate::config::{RunConfig, Target};
use crate::error::CliError;
use crate::output::{csv_text, fmt_num, meta_text, write_file};

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Numerical(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Pole table `j,k_re,k_im,E_re,Gamma,lifetime`.
pub fn poles_csv(cfg: &RunConfig) -> Result<String, CliError> {
    let poles = with_pool(cfg.workers, || find_poles(&cfg.trap, cfg.count))??;
    let header: Vec<String> = ["j", "k_re", "k_im", "E_re", "Gamma", "lifetime"].map(String::from).into();
    let rows: Vec<Vec<String>> = poles
        .poles()
        .iter()
        .map(|p| {
            vec![
                p.j.to_string(),
                fmt_num(p.k.re),
                fmt_num(p.k.im),
                fmt_num(p.energy_re),
                fmt_num(p.width),
                fmt_num(p.lifetime),
            ]
        })
        .collect();
    Ok(csv_text(&header, &rows))
}

pub fn run_poles(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let text = poles_csv(cfg)?;
    let path = cfg.out.join("poles.csv");
    write_file(&path, &text)?;
    Ok(path)
}

/// A computed decay curve ready to be written.
#[derive(Debug, Clone)]
pub struct DecayOutput {
    pub csv: String,
    pub meta: Vec<(String, String)>,
    /// Rows whose evaluation failed; written as `nan`.
    pub failed_rows: usize,
    pub first_error: Option<CliError>,
}

fn descriptor(target: &Target) -> String {
    match target {
        Target::Gas(g) => g.descriptor(),
        Target::Modes(m) => {
            let ns: Vec<String> = m.iter().map(|n| n.get().to_string()).collect();
            format!("modes {}", ns.join(";"))
        }
    }
}

fn fit_pairs(prefix: &str, fit: Option<SlopeFit>) -> Vec<(String, String)> {
    let (slope, a, b) = match fit {
        Some(f) => (fmt_num(f.slope), fmt_num(f.t_start), fmt_num(f.t_end)),
        None => ("none".into(), "none".into(), "none".into()),
    };
    vec![
        (format!("{prefix}_slope"), slope),
        (format!("{prefix}_t_start"), a),
        (format!("{prefix}_t_end"), b),
    ]
}

/// Evaluates every (time, orbital) cell on the worker pool and merges rows
/// in order.
pub fn decay_output(cfg: &RunConfig) -> Result<DecayOutput, CliError> {
    let orbitals = cfg.target.orbitals();
    let ts = cfg.times.samples();
    let m = orbitals.len();
    let propagator = Propagator::for_trap(&cfg.trap, &cfg.spectral_options());
    let cells: Vec<Result<f64, tgdecay_core::Error>> = with_pool(cfg.workers, || {
        (0..ts.len() * m)
            .into_par_iter()
            .map(|i| propagator.nonescape(orbitals[i % m], ts[i / m]))
            .collect()
    })?;

    let mut header: Vec<String> = ["t", "value", "ln_value"].map(String::from).into();
    let per_mode = m > 1;
    if per_mode {
        header.extend(orbitals.iter().map(|n| format!("P_{}", n.get())));
    }
    let mut rows = Vec::with_capacity(ts.len());
    let mut good_t = Vec::new();
    let mut good_v = Vec::new();
    let mut failed_rows = 0;
    let mut first_error = None;
    for (i, &t) in ts.iter().enumerate() {
        let row = &cells[i * m..(i + 1) * m];
        let mut line = vec![fmt_num(t)];
        match row.iter().cloned().collect::<Result<Vec<f64>, _>>() {
            Ok(p) => {
                let (value, ln_value) = match &cfg.target {
                    Target::Gas(g) if g.orbitals().len() == 1 && g.n > 1 => {
                        (combine_trapped(g, &p), (g.n as f64).ln() + p[0].ln())
                    }
                    Target::Gas(g) => {
                        let v = combine_trapped(g, &p);
                        (v, v.ln())
                    }
                    Target::Modes(_) => {
                        let v: f64 = p.iter().sum();
                        (v, v.ln())
                    }
                };
                line.push(fmt_num(value));
                line.push(fmt_num(ln_value));
                if per_mode {
                    line.extend(p.iter().map(|&v| fmt_num(v)));
                }
                good_t.push(t);
                good_v.push(value);
            }
            Err(e) => {
                failed_rows += 1;
                first_error.get_or_insert_with(|| CliError::from(e.clone()));
                line.extend(std::iter::repeat_n("nan".to_string(), 2 + if per_mode { m } else { 0 }));
            }
        }
        rows.push(line);
    }

    let kind = match cfg.target {
        Target::Gas(_) => CurveKind::TrappedNumber,
        Target::Modes(_) => CurveKind::Nonescape,
    };
    let mut curve = DecayCurve::new(kind, good_t, good_v, cfg.trap, descriptor(&cfg.target));
    if cfg.trap.eta == 0.0 {
        // No resonances: nothing to attach an exponential fit to.
        curve.annotations.exponential = None;
    }
    let mut meta = cfg.to_pairs();
    meta.push(("descriptor".into(), curve.descriptor.clone()));
    meta.push(("status".into(), if failed_rows == 0 { "ok" } else { "partial" }.into()));
    meta.push(("failed_rows".into(), failed_rows.to_string()));
    let gamma = if cfg.trap.eta > 0.0 {
        find_poles(&cfg.trap, 1)
            .ok()
            .and_then(|p| p.get(1).map(|p| fmt_num(p.width)))
            .unwrap_or_else(|| "none".into())
    } else {
        "none".into()
    };
    meta.push(("gamma_1".into(), gamma));
    meta.extend(fit_pairs("exponential", curve.annotations.exponential));
    meta.extend(fit_pairs("longtime", curve.annotations.longtime));
    Ok(DecayOutput {
        csv: csv_text(&header, &rows),
        meta,
        failed_rows,
        first_error,
    })
}

fn write_decay(cfg: &RunConfig, stem: &str) -> Result<PathBuf, CliError> {
    let out = decay_output(cfg)?;
    let path = cfg.out.join(format!("{stem}.csv"));
    write_file(&path, &out.csv)?;
    write_file(&cfg.out.join(format!("{stem}.meta")), &meta_text(&out.meta))?;
    match out.first_error {
        None => Ok(path),
        Some(e) => Err(CliError::Numerical(format!(
            "{} of {} rows failed, partial results in {} ({e})",
            out.failed_rows,
            cfg.times.points,
            path.display()
        ))),
    }
}

pub fn run_decay(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    write_decay(cfg, "decay")
}

/// One sweep point: its config, or the reason it could not be set up.
fn sweep_points(cfg: &RunConfig) -> Result<Vec<Result<RunConfig, CliError>>, CliError> {
    if cfg.eta_list.is_none() && cfg.n_list.is_none() && cfg.gas_list.is_none() {
        return Err(CliError::Domain("sweep needs eta_list, N_list or gas_list".into()));
    }
    for (name, empty) in [
        ("eta_list", cfg.eta_list.as_ref().is_some_and(Vec::is_empty)),
        ("N_list", cfg.n_list.as_ref().is_some_and(Vec::is_empty)),
        ("gas_list", cfg.gas_list.as_ref().is_some_and(Vec::is_empty)),
    ] {
        if empty {
            return Err(CliError::Domain(format!("{name} is empty")));
        }
    }
    let etas = cfg.eta_list.clone().unwrap_or(vec![cfg.trap.eta]);
    let targets: Vec<Result<Target, CliError>> = match &cfg.target {
        Target::Modes(_) if cfg.n_list.is_some() || cfg.gas_list.is_some() => {
            return Err(CliError::usage("N_list and gas_list need a gas target"));
        }
        Target::Modes(m) => vec![Ok(Target::Modes(m.clone()))],
        Target::Gas(g) => {
            let kinds = cfg.gas_list.clone().unwrap_or(vec![g.kind]);
            let ns = cfg.n_list.clone().unwrap_or(vec![g.n]);
            kinds
                .iter()
                .flat_map(|&k| ns.iter().map(move |&n| GasSpec::new(k, n).map(Target::Gas).map_err(CliError::from)))
                .collect()
        }
    };
    let mut points = Vec::new();
    for target in &targets {
        for &eta in &etas {
            points.push(target.clone().and_then(|target| {
                let trap = tgdecay_core::TrapSpec::new(cfg.trap.length, eta)?;
                Ok(RunConfig {
                    trap,
                    target,
                    eta_list: None,
                    n_list: None,
                    gas_list: None,
                    ..cfg.clone()
                })
            }));
        }
    }
    Ok(points)
}

/// Writes `point_XXX.csv`/`.meta` per sweep point and `index.csv`. Failed
/// points are recorded in the index; the first failure decides the error.
pub fn run_sweep(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let points = sweep_points(cfg)?;
    let header: Vec<String> = ["index", "gas", "N", "eta", "file", "status"].map(String::from).into();
    let mut rows = Vec::new();
    let mut first_error = None;
    for (i, point) in points.into_iter().enumerate() {
        let stem = format!("point_{i:03}");
        let (gas, n, eta) = match &point {
            Ok(p) => match &p.target {
                Target::Gas(g) => (g.kind.label().to_string(), g.n.to_string(), fmt_num(p.trap.eta)),
                Target::Modes(m) => {
                    let ns: Vec<String> = m.iter().map(|n| n.get().to_string()).collect();
                    (format!("modes:{}", ns.join(";")), String::new(), fmt_num(p.trap.eta))
                }
            },
            Err(_) => (String::new(), String::new(), String::new()),
        };
        let result = point.and_then(|p| write_decay(&p, &stem));
        let status = match &result {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("failed:{}", e.exit_code()),
        };
        if let Err(e) = result {
            eprintln!("sweep point {i}: {e}");
            first_error.get_or_insert(e);
        }
        rows.push(vec![i.to_string(), gas, n, eta, format!("{stem}.csv"), status]);
    }
    let path = cfg.out.join("index.csv");
    write_file(&path, &csv_text(&header, &rows))?;
    match first_error {
        None => Ok(path),
        Some(e) => Err(e),
    }
}
