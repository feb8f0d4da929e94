//! Experiment driver: dispatches a validated [`RunConfig`] into the library,
//! writes one CSV per run plus a JSON manifest. Output bytes are a pure
//! function of (config, seed); the worker count never changes them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::config::{Mode, RunConfig};
use crate::dynamics::{compute_drift_raw, integrate_meanfield, SystemSpec};
use crate::observables::{expect_rho, expect_sde};
use crate::oracle::{
    beta_witness, coherent_product_state, error_bound_check, integrate_lindblad,
    random_admissible_pair, random_walk_ensemble, unit_state_grid, DensityMatrix, FockBasis,
    LiftedSystem,
};
use crate::output::{fmt_bool, fmt_f64, render_csv, write_text, Manifest};
use crate::sde::run_ensemble;

#[derive(Error, Debug)]
pub enum RunnerError {
    #[error(transparent)]
    Numeric(#[from] crate::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug)]
pub struct RunOutput {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs the configured experiment and writes `<mode>.csv` and
/// `manifest.json` under `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutput, RunnerError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let started = Instant::now();
    let (header, rows) = build_rows(cfg)?;
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let csv_text = render_csv(cfg.sde.seed, &header_refs, &rows);
    let csv_path = out_dir.join(format!("{}.csv", cfg.mode.as_str()));
    write_text(&csv_path, &csv_text).map_err(io_err(&csv_path))?;

    let manifest = Manifest {
        mode: cfg.mode.as_str().to_string(),
        seed: cfg.sde.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: vec![csv_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()],
        config: cfg.raw.clone(),
    };
    let manifest_path = out_dir.join("manifest.json");
    let manifest_text =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&manifest_path, &manifest_text).map_err(io_err(&manifest_path))?;
    Ok(RunOutput {
        csv_path,
        manifest_path,
    })
}

type Rows = (Vec<String>, Vec<Vec<String>>);

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn build_rows(cfg: &RunConfig) -> Result<Rows, RunnerError> {
    Ok(match cfg.mode {
        Mode::Meanfield => meanfield_rows(cfg)?,
        Mode::Sde => sde_rows(cfg)?,
        Mode::Lindblad => lindblad_rows(cfg)?,
        Mode::RandomWalk => randomwalk_rows(cfg)?,
        Mode::Verify => verify_rows(cfg)?,
        Mode::DnseDemo => dnse_demo_rows(cfg)?,
        Mode::BetaCheck => beta_check_rows(cfg)?,
    })
}

/// Snapshot row indices into a step-boundary time grid.
fn select_times(times: &[f64], requests: &[f64], t_scale: f64) -> Vec<usize> {
    let tiny = 1e-9 * t_scale.max(1.0);
    requests
        .iter()
        .map(|&q| {
            times
                .partition_point(|&b| b < q - tiny)
                .min(times.len() - 1)
        })
        .collect()
}

fn meanfield_rows(cfg: &RunConfig) -> Result<Rows, RunnerError> {
    // The mean-field flow is the n → ∞ drift: couplings drop out.
    let spec = &cfg.system;
    let mf_spec = SystemSpec::new(
        spec.h0().clone(),
        spec.tensor().clone(),
        vec![],
        spec.bosons(),
    )?;
    let sol = integrate_meanfield(
        &cfg.z0,
        |z| compute_drift_raw(z, &mf_spec),
        cfg.sde.t_final,
        cfg.sde.dt,
    )?;
    let modes = spec.modes();
    let mut head = vec!["t".to_string()];
    for j in 0..modes {
        head.push(format!("re_z{j}"));
        head.push(format!("im_z{j}"));
    }
    head.push("norm".to_string());
    let picks = select_times(&sol.times, &cfg.sde.snapshot_times, cfg.sde.t_final);
    let mut rows = Vec::with_capacity(picks.len());
    for idx in picks {
        let z = &sol.states[idx];
        let mut row = vec![fmt_f64(sol.times[idx])];
        for j in 0..modes {
            row.push(fmt_f64(z.amplitudes[j].re));
            row.push(fmt_f64(z.amplitudes[j].im));
        }
        row.push(fmt_f64(z.norm()));
        rows.push(row);
    }
    Ok((head, rows))
}

fn sde_rows(cfg: &RunConfig) -> Result<Rows, RunnerError> {
    let ens = run_ensemble(&cfg.z0, &cfg.system, &cfg.sde)?;
    let mut rows = Vec::new();
    for (i, &t) in ens.times.iter().enumerate() {
        for (name, obs) in &cfg.observables {
            let (mean, std_error) = expect_sde(obs, &ens.snapshots[i], cfg.system.bosons())?;
            rows.push(vec![
                fmt_f64(t),
                name.clone(),
                fmt_f64(mean),
                fmt_f64(std_error),
                cfg.sde.samples.to_string(),
            ]);
        }
    }
    Ok((
        header(&["t", "observable", "mean", "std_error", "samples"]),
        rows,
    ))
}

fn lindblad_rows(cfg: &RunConfig) -> Result<Rows, RunnerError> {
    let basis = FockBasis::shared(cfg.system.bosons(), cfg.system.modes())?;
    let lifted = LiftedSystem::new(&cfg.system, &basis)?;
    let rho0 = DensityMatrix::from_pure(&coherent_product_state(&cfg.z0, &basis)?);
    let snaps = integrate_lindblad(
        &rho0,
        &lifted,
        cfg.sde.t_final,
        cfg.sde.dt,
        &cfg.sde.snapshot_times,
    )?;
    density_rows(cfg, &snaps)
}

fn randomwalk_rows(cfg: &RunConfig) -> Result<Rows, RunnerError> {
    let basis = FockBasis::shared(cfg.system.bosons(), cfg.system.modes())?;
    let lifted = LiftedSystem::new(&cfg.system, &basis)?;
    let psi0 = coherent_product_state(&cfg.z0, &basis)?;
    let snaps = random_walk_ensemble(&psi0, &lifted, &cfg.sde)?;
    density_rows(cfg, &snaps)
}

fn density_rows(
    cfg: &RunConfig,
    snaps: &[(f64, DensityMatrix)],
) -> Result<Rows, RunnerError> {
    let mut rows = Vec::new();
    for (t, rho) in snaps {
        let trace = rho.trace().re;
        let min_eig = rho.min_eigenvalue()?;
        for (name, obs) in &cfg.observables {
            let value = expect_rho(obs, rho)?;
            rows.push(vec![
                fmt_f64(*t),
                name.clone(),
                fmt_f64(value),
                fmt_f64(trace),
                fmt_f64(min_eig),
            ]);
        }
    }
    Ok((
        header(&["t", "observable", "value", "trace", "min_eigenvalue"]),
        rows,
    ))
}

fn verify_rows(cfg: &RunConfig) -> Result<Rows, RunnerError> {
    let grid = unit_state_grid(
        cfg.system.modes(),
        cfg.alpha_grid,
        cfg.sde.seed ^ 0xa11a_a11a,
    );
    let report = error_bound_check(&cfg.system, &cfg.z0, &cfg.sde, &grid, cfg.bootstrap)?;
    let rows = report
        .rows
        .iter()
        .map(|row| {
            vec![
                fmt_f64(row.time),
                fmt_f64(row.trace_distance),
                fmt_f64(row.bound),
                fmt_f64(row.sigma_stat),
                fmt_bool(row.pass),
            ]
        })
        .collect();
    Ok((
        header(&["t", "trace_distance", "bound", "sigma_stat", "pass"]),
        rows,
    ))
}

fn dnse_demo_rows(cfg: &RunConfig) -> Result<Rows, RunnerError> {
    let ens = run_ensemble(&cfg.z0, &cfg.system, &cfg.sde)?;
    let basis = FockBasis::shared(cfg.system.bosons(), cfg.system.modes())?;
    let lifted = LiftedSystem::new(&cfg.system, &basis)?;
    let rho0 = DensityMatrix::from_pure(&coherent_product_state(&cfg.z0, &basis)?);
    let exact = integrate_lindblad(
        &rho0,
        &lifted,
        cfg.sde.t_final,
        cfg.sde.dt,
        &cfg.sde.snapshot_times,
    )?;
    let mut rows = Vec::new();
    for (i, &t) in ens.times.iter().enumerate() {
        for (name, obs) in &cfg.observables {
            let (mean, std_error) = expect_sde(obs, &ens.snapshots[i], cfg.system.bosons())?;
            let reference = expect_rho(obs, &exact[i].1)?;
            rows.push(vec![
                fmt_f64(t),
                name.clone(),
                fmt_f64(mean),
                fmt_f64(std_error),
                fmt_f64(reference),
                fmt_f64((mean - reference).abs()),
            ]);
        }
    }
    Ok((
        header(&["t", "observable", "sde_mean", "sde_std_error", "exact", "abs_diff"]),
        rows,
    ))
}

fn beta_check_rows(cfg: &RunConfig) -> Result<Rows, RunnerError> {
    let bosons = cfg.system.bosons();
    let modes = cfg.system.modes();
    let basis = FockBasis::shared(bosons, modes)?;
    let bound = 6.0 * bosons as f64;
    let mut rows = Vec::with_capacity(cfg.sde.samples);
    for draw in 0..cfg.sde.samples as u64 {
        let (z, w) = random_admissible_pair(cfg.sde.seed, draw, modes);
        let witness = beta_witness(&z, &w, &basis)?;
        rows.push(vec![
            draw.to_string(),
            fmt_f64(witness),
            fmt_f64(bound),
            fmt_bool(witness <= bound),
        ]);
    }
    Ok((header(&["draw", "witness", "bound", "pass"]), rows))
}
