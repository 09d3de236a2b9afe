//! Scenario execution behind the CLI subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use tdosc_core::fock::{self, TwoModeState};
use tdosc_core::{
    equivalence_residual, evolve, evolve_in_frame, frame_map, mg_discrepancy, propagator,
    push_state, single_oscillator_demo, CoreError, Direction, FramePipeline, ParamFamily,
    SystemParams, Trajectory,
};

use crate::config::{ConfigError, ScenarioConfig};
use crate::output::{fmt_f64, trajectory_csv, write_atomic};

/// Tolerances enforced by `verify` (and reported by `simulate`).
const SYMPLECTIC_LIMIT: f64 = 1e-8;
const DRIFT_LIMIT: f64 = 1e-7;
const ROUNDTRIP_LIMIT: f64 = 1e-12;
const PHYSICALITY_LIMIT: f64 = 0.5 - 1e-6;

/// Anything that can stop a run, mapped onto the documented exit codes.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Core(CoreError),
    Io(std::io::Error),
    Invariant(String),
}

impl RunError {
    /// 0 ok, 1 usage/parse, 2 invariant violation, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 1,
            RunError::Invariant(_) => 2,
            RunError::Core(e) => match e {
                CoreError::NotSymplectic { .. } | CoreError::Unphysical { .. } => 2,
                CoreError::Numerical { .. } | CoreError::Truncation { .. } => 3,
                _ => 1,
            },
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "io error: {e}"),
            RunError::Invariant(msg) => write!(f, "invariant violation: {msg}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Core(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// Where to write and whether to echo the summary.
pub struct RunOptions {
    pub output_dir: PathBuf,
    pub quiet: bool,
}

struct Summary {
    text: String,
}

impl Summary {
    fn new(title: &str) -> Self {
        Summary {
            text: format!("# {title}\n"),
        }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn kv(&mut self, key: &str, value: impl AsRef<str>) {
        let _ = writeln!(self.text, "{key} = {}", value.as_ref());
    }

    fn finish(self, opts: &RunOptions) -> Result<(), RunError> {
        write_atomic(&opts.output_dir.join("summary.txt"), &self.text)?;
        if !opts.quiet {
            print!("{}", self.text);
        }
        Ok(())
    }
}

fn csv_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.csv"))
}

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), RunError> {
    let csv = trajectory_csv(
        traj.times()
            .iter()
            .zip(traj.states())
            .map(|(t, s)| (*t, s.mean(), s.cov())),
    );
    write_atomic(path, &csv)?;
    Ok(())
}

/// Constant-mass control with the masses frozen at the window start:
/// the numerical-noise baseline for discrepancy thresholds.
fn frozen_mass_control(cfg: &ScenarioConfig) -> Result<SystemParams, RunError> {
    let t0 = cfg.grid.start();
    let p = &cfg.params;
    Ok(SystemParams::new(
        ParamFamily::Constant(p.m(0).value(t0)?),
        ParamFamily::Constant(p.m(1).value(t0)?),
        p.w(0).clone(),
        p.w(1).clone(),
        p.k().clone(),
        p.window(),
        p.ref_mass_mode(),
    )?)
}

/// Largest frame-map symplectic residual over (a sample of) grid nodes.
fn max_frame_residual(
    pipeline: FramePipeline,
    cfg: &ScenarioConfig,
) -> Result<f64, RunError> {
    let n = cfg.grid.len();
    let stride = (n / 100).max(1);
    let mut worst = 0.0_f64;
    let mut i = 0;
    while i < n {
        let m = frame_map(pipeline, &cfg.params, cfg.grid.node(i))?;
        worst = worst.max(m.residual());
        i += stride;
    }
    Ok(worst)
}

/// `simulate`: integrate every requested pipeline, write lab-frame
/// trajectory CSVs and a summary with residuals and invariant checks.
pub fn simulate(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<(), RunError> {
    let mut summary = Summary::new("simulate");
    let direct = evolve(FramePipeline::Direct, &cfg.params, &cfg.state, &cfg.grid)?;
    let mut violations: Vec<String> = Vec::new();

    for &pipeline in &cfg.pipelines {
        let traj = if pipeline == FramePipeline::Direct {
            direct.clone()
        } else {
            evolve_in_frame(pipeline, &cfg.params, &cfg.state, &cfg.grid)?
        };
        let path = csv_path(&opts.output_dir, pipeline.name());
        write_trajectory(&path, &traj)?;
        summary.kv(&format!("{pipeline}.csv"), path.display().to_string());

        if pipeline != FramePipeline::Direct {
            let r = equivalence_residual(pipeline, &cfg.params, &cfg.state, &cfg.grid)?;
            summary.kv(&format!("{pipeline}.mean_residual"), fmt_f64(r.mean));
            summary.kv(&format!("{pipeline}.cov_residual"), fmt_f64(r.cov));
        }
        let det_drift = traj.det_relative_drift();
        let purity_drift = traj.purity_relative_drift();
        summary.kv(&format!("{pipeline}.det_drift"), fmt_f64(det_drift));
        summary.kv(&format!("{pipeline}.purity_drift"), fmt_f64(purity_drift));
        if det_drift > DRIFT_LIMIT || purity_drift > DRIFT_LIMIT {
            violations.push(format!("{pipeline}: moment-invariant drift above {DRIFT_LIMIT:e}"));
        }
    }

    if cfg.pipelines.contains(&FramePipeline::MacedoGuedes) {
        let control = frozen_mass_control(cfg)?;
        let baseline = mg_discrepancy(&control, &cfg.state, &cfg.grid)?;
        let observed = mg_discrepancy(&cfg.params, &cfg.state, &cfg.grid)?;
        let threshold = 10.0 * baseline.max(1e-12);
        summary.kv("mg.baseline", fmt_f64(baseline));
        summary.kv("mg.discrepancy", fmt_f64(observed));
        summary.kv("mg.threshold", fmt_f64(threshold));
        summary.kv(
            "mg.flagged",
            if observed > threshold { "true" } else { "false" },
        );
    }

    if cfg.fock_enabled {
        let (dev_mean, dev_cov) = fock_deviation(cfg, &direct, &opts.output_dir)?;
        summary.kv("fock.mean_deviation", fmt_f64(dev_mean));
        summary.kv("fock.cov_deviation", fmt_f64(dev_cov));
    }

    summary.finish(opts)?;
    if let Some(first) = violations.into_iter().next() {
        return Err(RunError::Invariant(first));
    }
    Ok(())
}

/// `verify`: equivalence residuals and invariant checks only, no
/// trajectory files.
pub fn verify(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<(), RunError> {
    let mut summary = Summary::new("verify");
    let mut violations: Vec<String> = Vec::new();

    let direct = evolve(FramePipeline::Direct, &cfg.params, &cfg.state, &cfg.grid)?;
    let det_drift = direct.det_relative_drift();
    let purity_drift = direct.purity_relative_drift();
    let nu_min = direct.min_symplectic_eigenvalue();
    summary.kv("direct.det_drift", fmt_f64(det_drift));
    summary.kv("direct.purity_drift", fmt_f64(purity_drift));
    summary.kv("direct.min_symplectic_eigenvalue", fmt_f64(nu_min));
    if det_drift > DRIFT_LIMIT || purity_drift > DRIFT_LIMIT {
        violations.push("direct: moment-invariant drift".into());
    }
    if nu_min < PHYSICALITY_LIMIT {
        violations.push("direct: unphysical covariance along trajectory".into());
    }

    for &pipeline in &cfg.pipelines {
        let phi = propagator(pipeline, &cfg.params, &cfg.grid)?;
        let phi_res = phi.residual();
        summary.kv(&format!("{pipeline}.propagator_residual"), fmt_f64(phi_res));
        if phi_res > SYMPLECTIC_LIMIT {
            violations.push(format!("{pipeline}: propagator not symplectic"));
        }

        if pipeline == FramePipeline::Direct {
            continue;
        }
        let frame_res = max_frame_residual(pipeline, cfg)?;
        summary.kv(&format!("{pipeline}.frame_residual"), fmt_f64(frame_res));
        if frame_res > SYMPLECTIC_LIMIT {
            violations.push(format!("{pipeline}: frame map not symplectic"));
        }

        let m = frame_map(pipeline, &cfg.params, cfg.grid.start())?;
        let back = push_state(
            &push_state(&cfg.state, &m, Direction::ToFrame),
            &m,
            Direction::ToLab,
        );
        let rt = (back.mean() - cfg.state.mean())
            .abs()
            .max()
            .max((back.cov() - cfg.state.cov()).abs().max());
        summary.kv(&format!("{pipeline}.push_roundtrip"), fmt_f64(rt));
        if rt > ROUNDTRIP_LIMIT {
            violations.push(format!("{pipeline}: push_state round trip above 1e-12"));
        }

        let r = equivalence_residual(pipeline, &cfg.params, &cfg.state, &cfg.grid)?;
        summary.kv(&format!("{pipeline}.mean_residual"), fmt_f64(r.mean));
        summary.kv(&format!("{pipeline}.cov_residual"), fmt_f64(r.cov));
    }

    summary.finish(opts)?;
    if let Some(first) = violations.into_iter().next() {
        return Err(RunError::Invariant(first));
    }
    Ok(())
}

/// `compare-mg`: the dilation-free frame's discrepancy against the
/// frozen-mass numerical baseline. An above-threshold discrepancy is the
/// expected result, not an error.
pub fn compare_mg(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<(), RunError> {
    let mut summary = Summary::new("compare-mg");
    let control = frozen_mass_control(cfg)?;
    let baseline = mg_discrepancy(&control, &cfg.state, &cfg.grid)?;
    let observed = mg_discrepancy(&cfg.params, &cfg.state, &cfg.grid)?;
    let threshold = 10.0 * baseline.max(1e-12);
    summary.kv("baseline", fmt_f64(baseline));
    summary.kv("discrepancy", fmt_f64(observed));
    summary.kv("threshold", fmt_f64(threshold));
    summary.kv("ratio", fmt_f64(observed / baseline.max(1e-300)));
    summary.kv("flagged", if observed > threshold { "true" } else { "false" });
    summary.finish(opts)
}

fn fock_deviation(
    cfg: &ScenarioConfig,
    direct: &Trajectory,
    dir: &Path,
) -> Result<(f64, f64), RunError> {
    let d = cfg.fock_dim;
    let psi0 = TwoModeState::from_mean(cfg.state.mean(), d);
    let traj = fock::two_mode_evolve(
        FramePipeline::Direct,
        &cfg.params,
        &psi0,
        &cfg.grid,
        d,
    )?;
    let csv = trajectory_csv(
        traj.times()
            .iter()
            .zip(traj.means().iter().zip(traj.covs()))
            .map(|(t, (mu, cov))| (*t, mu, cov)),
    );
    write_atomic(&csv_path(dir, "fock_direct"), &csv)?;
    Ok((
        traj.max_mean_distance(direct),
        traj.max_cov_distance(direct),
    ))
}

/// `fock-check`: cross-validate Gaussian moments against truncated
/// wavefunction propagation on the direct pipeline.
pub fn fock_check(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<(), RunError> {
    let mut summary = Summary::new("fock-check");
    if cfg.state.mean().abs().max() > 2.0 {
        return Err(RunError::Config(ConfigError::Semantic {
            key: "state".into(),
            msg: "fock-check needs tail-safe amplitudes (|mean| <= 2)".into(),
        }));
    }
    let direct = evolve(FramePipeline::Direct, &cfg.params, &cfg.state, &cfg.grid)?;
    let (dev_mean, dev_cov) = fock_deviation(cfg, &direct, &opts.output_dir)?;
    summary.kv("fock_dim", format!("{}", cfg.fock_dim));
    summary.kv("mean_deviation", fmt_f64(dev_mean));
    summary.kv("cov_deviation", fmt_f64(dev_cov));
    summary.finish(opts)
}

/// `single-demo`: the one-oscillator cautionary example. Uses the `m1`
/// family as the time-dependent mass.
pub fn single_demo(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<(), RunError> {
    let mut summary = Summary::new("single-demo");
    let demo = single_oscillator_demo(cfg.params.m(0), &cfg.grid)?;

    let mut csv = String::from("t,x_direct,p_direct,x_naive,p_naive\n");
    for (i, &t) in demo.times.iter().enumerate() {
        let (xd, pd) = demo.direct_mean[i];
        let (xn, pn) = demo.naive_mean[i];
        let row = [t, xd, pd, xn, pn]
            .iter()
            .map(|v| fmt_f64(*v))
            .collect::<Vec<_>>()
            .join(",");
        csv.push_str(&row);
        csv.push('\n');
    }
    write_atomic(&csv_path(&opts.output_dir, "single_demo"), &csv)?;

    summary.kv("naive_residual", fmt_f64(demo.naive_residual));
    summary.kv("note", &demo.note);
    summary.finish(opts)
}
