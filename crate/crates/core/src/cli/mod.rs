//! Batch front end: `envelope`, `simulate`, `verify` and `sweep` over a JSON
//! run config.
//!
//! Output files (in the output directory):
//!
//! | file | producer | layout |
//! |------|----------|--------|
//! | `constants.json` | envelope, verify | χ, C, Δ, D, τ_max, v₀, v |
//! | `envelope.csv` | envelope, verify | `time,site,gamma,analytic_bound` |
//! | `trace.csv` | simulate, verify | `time,site,alpha[,moment_p...]` |
//! | `trace.json` | simulate, verify | full trace with metadata |
//! | `lightcone.csv` | verify | `time,site,alpha,gamma,analytic_bound` |
//! | `report.json`, `report.txt` | verify | check outcomes |
//! | `sweep.csv` | sweep | `value,v_emp,v_bound,looseness,passed` |
//!
//! CSV rows are sorted by `(time, site)`; floats use 17 significant digits.
//! The output directory is `--out-dir`, else `$LIGHTCONE_OUT_DIR`, else
//! `output.directory` from the config, else `lightcone-out`.

pub mod config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{density, fmt_float, uniform_grid, InitialState, QuantumState, SimulationTrace};
use crate::verify::{prepare_state, run_experiment, Envelopes, ExperimentOutput};
use crate::{evolve, graph::Lattice};

pub use config::{Format, RunConfig, SweepParameter};

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "LIGHTCONE_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "lightcone-out";
const DEFAULT_ENVELOPE_T_MAX: f64 = 1.0;
const DEFAULT_ENVELOPE_POINTS: usize = 101;

/// Resolves the output directory by precedence.
pub fn output_dir(cfg: &RunConfig, cli_override: Option<&Path>) -> PathBuf {
    if let Some(p) = cli_override {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    cfg.output
        .directory
        .as_deref()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).map_err(io_err(&path))?;
    f.write_all(contents).map_err(io_err(&path))?;
    Ok(())
}

#[derive(Serialize)]
struct ConstantsJson {
    chi: f64,
    c: f64,
    delta: f64,
    max_degree: usize,
    tau_max: f64,
    v0: f64,
    v: f64,
    n0: f64,
    region: Vec<usize>,
}

fn constants_json(env: &Envelopes<f64>) -> String {
    let p = &env.params;
    let doc = ConstantsJson {
        chi: p.chi,
        c: p.c,
        delta: p.delta,
        max_degree: p.max_degree,
        tau_max: p.tau_max,
        v0: p.v0,
        v: p.v,
        n0: env.n0,
        region: env.region.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("constants serialize");
    s.push('\n');
    s
}

fn envelope_csv(times: &[f64], env: &Envelopes<f64>) -> String {
    let mut s = String::from("time,site,gamma,analytic_bound\n");
    for (ti, t) in times.iter().enumerate() {
        let t = fmt_float(*t);
        for j in 0..env.distances.len() {
            let _ = writeln!(s, "{t},{j},{},{}", fmt_float(env.gamma[ti][j]), fmt_float(env.cone[ti][j]));
        }
    }
    s
}

fn lightcone_csv(trace: &SimulationTrace<f64>, env: &Envelopes<f64>) -> String {
    let mut s = String::from("time,site,alpha,gamma,analytic_bound\n");
    for (ti, t) in trace.times.iter().enumerate() {
        let t = fmt_float(*t);
        for j in 0..trace.num_sites {
            let _ = writeln!(
                s,
                "{t},{j},{},{},{}",
                fmt_float(trace.alpha[ti][j]),
                fmt_float(env.gamma[ti][j]),
                fmt_float(env.cone[ti][j])
            );
        }
    }
    s
}

fn write_trace(dir: &Path, cfg: &RunConfig, trace: &SimulationTrace<f64>) -> Result<()> {
    if cfg.output.formats.contains(&Format::Csv) {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).expect("writing to memory");
        write_file(dir, "trace.csv", &buf)?;
    }
    if cfg.output.formats.contains(&Format::Json) {
        let mut s = trace.to_json();
        s.push('\n');
        write_file(dir, "trace.json", s.as_bytes())?;
    }
    Ok(())
}

/// Site densities of the initial state.
fn initial_densities(cfg: &RunConfig, lattice: &Lattice) -> Result<(Vec<f64>, Vec<usize>)> {
    let l = lattice.num_sites();
    if cfg.initial_state.is_none() {
        // No state given: one particle at site 0.
        let mut a = vec![0.0; l];
        a[0] = 1.0;
        return Ok((a, vec![0]));
    }
    let init = cfg.build_initial_state()?;
    let species = cfg.build_species()?;
    let region = init.region(l);
    let alpha = match &init {
        InitialState::Basis(occ) => (0..l)
            .map(|j| (0..species.len()).map(|s| occ[s * l + j] as f64).sum())
            .collect(),
        InitialState::Superposition { .. } => {
            let psi: QuantumState<f64> = init.pure(init.sector_space(l, &species)?)?.into();
            (0..l).map(|j| density(&psi, j)).collect::<Result<_>>()?
        }
    };
    Ok((alpha, region))
}

/// Constants and envelope curves only; no simulation.
pub fn cmd_envelope(cfg: &RunConfig, out_dir: &Path) -> Result<i32> {
    let lattice = cfg.build_lattice()?;
    let model = cfg.build_model()?;
    let (alpha0, region) = initial_densities(cfg, &lattice)?;
    let times = match &cfg.time {
        Some(_) => cfg.build_times()?,
        None => uniform_grid(DEFAULT_ENVELOPE_T_MAX, DEFAULT_ENVELOPE_POINTS),
    };
    let env = Envelopes::compute(
        &lattice,
        model.tau_max(),
        &alpha0,
        &region,
        vec![1.0],
        &model.species,
        &times,
    )?;
    write_file(out_dir, "constants.json", constants_json(&env).as_bytes())?;
    write_file(out_dir, "envelope.csv", envelope_csv(&times, &env).as_bytes())?;
    Ok(0)
}

/// Evolves and writes the trace.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<i32> {
    let exp = cfg.build_experiment()?;
    let state = prepare_state(&exp)?;
    let mut opts = exp.evolve.clone();
    opts.moments = exp.moments.clone();
    opts.observables = exp.observables.clone();
    let trace = evolve::evolve(&exp.model, &state, &exp.times, &opts)?;
    write_trace(out_dir, cfg, &trace)?;
    Ok(0)
}

fn write_verification(dir: &Path, cfg: &RunConfig, out: &ExperimentOutput<f64>) -> Result<()> {
    write_trace(dir, cfg, &out.trace)?;
    write_file(dir, "constants.json", constants_json(&out.envelopes).as_bytes())?;
    write_file(dir, "envelope.csv", envelope_csv(&out.trace.times, &out.envelopes).as_bytes())?;
    write_file(dir, "lightcone.csv", lightcone_csv(&out.trace, &out.envelopes).as_bytes())?;
    let mut json = out.report.to_json();
    json.push('\n');
    write_file(dir, "report.json", json.as_bytes())?;
    write_file(dir, "report.txt", out.report.to_text().as_bytes())?;
    Ok(())
}

/// Evolves, checks, writes everything. Exit code 0 iff every gated check
/// passes.
pub fn cmd_verify(cfg: &RunConfig, out_dir: &Path) -> Result<i32> {
    let exp = cfg.build_experiment()?;
    let out = run_experiment(&exp)?;
    write_verification(out_dir, cfg, &out)?;
    Ok(if out.report.passed() { 0 } else { 1 })
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub v_emp: Option<f64>,
    pub v_bound: f64,
    pub looseness: Option<f64>,
    pub passed: bool,
}

/// Config with one parameter replaced.
pub fn sweep_variant(cfg: &RunConfig, parameter: SweepParameter, value: f64) -> Result<RunConfig> {
    let mut c = cfg.clone();
    c.sweep = None;
    match parameter {
        SweepParameter::Tau => {
            if c.model.tau_schedule.is_some() {
                return Err(Error::config("sweep.parameter", "a τ sweep needs a constant `model.tau`"));
            }
            c.model.tau = Some(value);
        }
        SweepParameter::U => c.model.u = config::PerSpecies::All(value),
        SweepParameter::LossRate => c.model.loss_rate = value,
    }
    c.validate()?;
    Ok(c)
}

/// Independent `verify` runs per value, in parallel; rows keep the config's
/// value order. Each run writes into `run_<index>/`.
pub fn run_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<SweepRow>> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "missing sweep block"))?;
    let variants: Vec<RunConfig> = sweep
        .values
        .iter()
        .map(|&v| sweep_variant(cfg, sweep.parameter, v))
        .collect::<Result<_>>()?;
    variants
        .par_iter()
        .zip(sweep.values.par_iter())
        .enumerate()
        .map(|(i, (c, &value))| {
            let exp = c.build_experiment()?;
            let out = run_experiment(&exp)?;
            write_verification(&out_dir.join(format!("run_{i:03}")), c, &out)?;
            let looseness = out
                .report
                .check("looseness")
                .map(|r| r.worst_margin)
                .filter(|&x| x > 0.0);
            Ok(SweepRow {
                value,
                v_emp: out.report.velocity.v_emp,
                v_bound: out.report.v,
                looseness,
                passed: out.report.passed(),
            })
        })
        .collect()
}

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Runs the sweep and writes `sweep.csv`. Exit code 0 iff every run passes.
pub fn cmd_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<i32> {
    let rows = run_sweep(cfg, out_dir)?;
    let mut s = String::from("value,v_emp,v_bound,looseness,passed\n");
    for r in &rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_float(r.value),
            opt_float(r.v_emp),
            fmt_float(r.v_bound),
            opt_float(r.looseness),
            r.passed
        );
    }
    write_file(out_dir, "sweep.csv", s.as_bytes())?;
    Ok(if rows.iter().all(|r| r.passed) { 0 } else { 1 })
}

/// Subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Envelope,
    Simulate,
    Verify,
    Sweep,
}

/// Loads the config and runs one subcommand; returns the exit code.
pub fn run(command: Command, config_path: &Path, out_dir: Option<&Path>) -> Result<i32> {
    let cfg = RunConfig::load(config_path)?;
    let dir = output_dir(&cfg, out_dir);
    match command {
        Command::Envelope => cmd_envelope(&cfg, &dir),
        Command::Simulate => cmd_simulate(&cfg, &dir),
        Command::Verify => cmd_verify(&cfg, &dir),
        Command::Sweep => cmd_sweep(&cfg, &dir),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_constants_for_grid() {
        let cfg = RunConfig::parse(
            r#"{"lattice": {"kind": "grid", "width": 10, "height": 10}, "model": {"tau": 1.0}}"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(cmd_envelope(&cfg, dir.path()).unwrap(), 0);
        let c: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("constants.json")).unwrap()).unwrap();
        assert_eq!(c["delta"], 2.0);
        assert_eq!(c["max_degree"], 4);
        let csv = std::fs::read_to_string(dir.path().join("envelope.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + DEFAULT_ENVELOPE_POINTS * 100);
    }

    #[test]
    fn out_dir_precedence() {
        let cfg = RunConfig::parse(
            r#"{"lattice": {"kind": "chain", "length": 3}, "model": {"tau": 1.0}, "output": {"directory": "cfgdir"}}"#,
        )
        .unwrap();
        assert_eq!(output_dir(&cfg, Some(Path::new("cli"))), PathBuf::from("cli"));
    }
}
