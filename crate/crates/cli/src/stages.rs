//! One function per pipeline stage. Each writes its artifacts and returns
//! their paths with a one-line summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dampwave::damping::{build_aux, AuxFunctions, DampingModel};
use dampwave::heat_kernel::Grid;
use dampwave::identity::identity_report;
use dampwave::lifespan::{fit_log_lifespans, sweep, Regime, ScalingFit, Termination, INSENSITIVITY_LIMIT};
use dampwave::ode_lab::{scaling_points, OdeKind};
use dampwave::solver::{run, CapacityPolicy, RunOptions, RunOutcome, Snapshot};

use crate::artifacts::{
    decode_snapshot, encode_snapshot, num, opt_num, read_table, svg_plot, write_file, Manifest, Series, StageRecord,
    Table,
};
use crate::config::{parse_config, ExperimentConfig};
use crate::CliError;

pub const AUX_HEADER: [&str; 7] = ["t", "b", "g", "gprime", "G", "Gamma", "bg_minus_1"];
pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "max_abs_u", "l2_u", "energy", "dt"];
pub const SWEEP_HEADER: [&str; 6] = ["epsilon", "T_lo", "T_hi", "reason", "theta", "insensitivity_ratio"];
pub const FIT_HEADER: [&str; 5] = ["regime", "slope", "intercept", "r_squared", "n_points"];
pub const IDENTITY_HEADER: [&str; 10] = ["t", "A", "B", "C", "D", "E", "residual", "relative_residual", "H", "J0"];
pub const ODELAB_HEADER: [&str; 4] = ["epsilon", "T_lo", "T_hi", "tau_blowup"];

/// Name of the configuration copy stored with snapshots.
pub const SNAPSHOT_CONFIG: &str = "config.toml";

#[derive(Debug, Default)]
pub struct StageOutput {
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

fn aux_samples(cfg: &ExperimentConfig) -> (usize, f64) {
    cfg.aux.as_ref().map_or((200, 1e-10), |a| (a.samples, a.tol))
}

pub fn aux_stage(
    model: DampingModel,
    t_max: f64,
    samples: usize,
    tol: f64,
    out: &Path,
    svg: Option<&Path>,
) -> Result<StageOutput, CliError> {
    let aux = build_aux(model, t_max, samples, tol)?;
    let mut table = Table::new(&AUX_HEADER);
    for row in aux.rows() {
        table.row(row.iter().map(|&x| num(x)));
    }
    table.save(out)?;
    let mut artifacts = vec![out.to_path_buf()];
    if let Some(svg) = svg {
        let g: Vec<(f64, f64)> = aux.rows().map(|r| (r[0], r[2])).collect();
        let inv_b: Vec<(f64, f64)> = aux.rows().map(|r| (r[0], 1.0 / r[1])).collect();
        let doc = svg_plot(
            &format!("auxiliary function g, beta = {}", model.beta),
            "t",
            "value",
            &[Series { label: "g", points: g, markers: false }, Series { label: "1/b", points: inv_b, markers: false }],
        );
        write_file(svg, doc.as_bytes())?;
        artifacts.push(svg.to_path_buf());
    }
    Ok(StageOutput { artifacts, summary: format!("b* = {}, {} samples to t = {t_max}", aux.b_star, aux.ts.len()) })
}

fn aux_for_problem(cfg: &ExperimentConfig, model: DampingModel, t_end: f64) -> Result<AuxFunctions, CliError> {
    let (samples, tol) = aux_samples(cfg);
    Ok(build_aux(model, t_end, samples, tol)?)
}

pub fn simulate_stage(cfg: &ExperimentConfig, cfg_text: &str, dir: &Path) -> Result<StageOutput, CliError> {
    let params = cfg.problem_params("simulate")?;
    let data = cfg.initial_data();
    let detector = cfg.detector();
    let aux = aux_for_problem(cfg, params.model, params.t_end)?;
    let options = RunOptions {
        snapshot_stride: cfg.output.snapshot_stride,
        snapshot_capacity: if cfg.output.snapshots { CapacityPolicy::Unbounded } else { CapacityPolicy::KeepLatest(1) },
        record_trajectory: true,
    };
    let state_max = dampwave::solver::init_state(&params, &data, &aux)?.max_abs_u();
    detector.validate(state_max)?;
    let out = run(&params, &data, &aux, &detector, options)?;

    let mut artifacts = Vec::new();
    let mut table = Table::new(&TRAJECTORY_HEADER);
    for r in &out.trajectory {
        table.row([num(r.t), num(r.max_abs_u), num(r.l2_u), num(r.energy), num(r.dt)]);
    }
    let traj = dir.join("trajectory.csv");
    table.save(&traj)?;
    artifacts.push(traj);

    if cfg.output.snapshots {
        let snap_dir = dir.join("snapshots");
        for (k, s) in out.store.entries.iter().enumerate() {
            let u = snap_dir.join(format!("u_{k:06}.bin"));
            let v = snap_dir.join(format!("v_{k:06}.bin"));
            write_file(&u, &encode_snapshot(&params.grid, s.t, &s.u))?;
            write_file(&v, &encode_snapshot(&params.grid, s.t, &s.v))?;
        }
        write_file(&snap_dir.join(SNAPSHOT_CONFIG), cfg_text.as_bytes())?;
        artifacts.push(snap_dir);
    }
    if cfg.output.svg {
        let pts = out.trajectory.iter().map(|r| (r.t, r.max_abs_u.log10())).collect();
        let doc = svg_plot(
            &format!("max |u|, epsilon = {}", params.epsilon),
            "t",
            "log10 max|u|",
            &[Series { label: "max|u|", points: pts, markers: false }],
        );
        let path = dir.join("trajectory.svg");
        write_file(&path, doc.as_bytes())?;
        artifacts.push(path);
    }
    let summary = match out.outcome {
        RunOutcome::Completed { t_end } => format!("completed to t = {t_end}"),
        RunOutcome::Blowup(d) => {
            format!("blow-up ({}) in ({}, {}]", Termination::from(d.reason).name(), d.t_lo, d.t_hi)
        }
    };
    Ok(StageOutput { artifacts, summary })
}

pub fn sweep_stage(
    cfg: &ExperimentConfig,
    epsilons: &[f64],
    out: &Path,
    svg: Option<&Path>,
) -> Result<StageOutput, CliError> {
    let template = cfg.problem_params("sweep")?;
    let aux = aux_for_problem(cfg, template.model, template.t_end)?;
    let records = sweep(&template, epsilons, &cfg.initial_data(), &aux, &cfg.detector())?;
    let mut table = Table::new(&SWEEP_HEADER);
    for r in &records {
        table.row([
            num(r.epsilon),
            num(r.t_lo),
            num(r.t_hi),
            r.reason.name().to_string(),
            num(r.theta_used),
            opt_num(r.insensitivity_ratio),
        ]);
    }
    table.save(out)?;
    let mut artifacts = vec![out.to_path_buf()];
    if let Some(svg) = svg {
        let pts = records.iter().filter(|r| r.is_blowup()).map(|r| (r.epsilon.ln(), r.t_hi.ln())).collect();
        let doc = svg_plot(
            "lifespan sweep",
            "log epsilon",
            "log T",
            &[Series { label: "T(epsilon)", points: pts, markers: true }],
        );
        write_file(svg, doc.as_bytes())?;
        artifacts.push(svg.to_path_buf());
    }
    let blowups = records.iter().filter(|r| r.is_blowup()).count();
    let flagged = records.iter().filter(|r| r.flagged).count();
    Ok(StageOutput { artifacts, summary: format!("{} points, {blowups} blow-ups, {flagged} flagged", records.len()) })
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize, CliError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Usage(format!("{}: no column {name:?}", path.display())))
}

fn parse_num(s: &str) -> f64 {
    s.trim().parse().unwrap_or(f64::NAN)
}

/// `(ε, log T)` of the rows a fit may use: blow-ups with a finite `T_hi`
/// and a recorded threshold-insensitivity ratio within the limit.
pub fn usable_sweep_rows(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let (header, rows) = read_table(path)?;
    let (ie, it, ir, iq) = (
        column(&header, "epsilon", path)?,
        column(&header, "T_hi", path)?,
        column(&header, "reason", path)?,
        column(&header, "insensitivity_ratio", path)?,
    );
    let mut out = Vec::new();
    for row in rows {
        let get = |i: usize| row.get(i).map(String::as_str).unwrap_or("");
        let blowup = matches!(
            Termination::parse(get(ir)),
            Some(Termination::ThresholdCrossed | Termination::DtUnderflow | Termination::Overflow)
        );
        let (eps, t, ratio) = (parse_num(get(ie)), parse_num(get(it)), parse_num(get(iq)));
        if blowup && eps > 0.0 && t.is_finite() && t > 0.0 && ratio <= INSENSITIVITY_LIMIT {
            out.push((eps, t.ln()));
        }
    }
    Ok(out)
}

fn fit_svg(fit: &ScalingFit, title: &str) -> String {
    let (x_label, y_label) = match fit.regime {
        Regime::SubcriticalPoly => ("log epsilon", "log T"),
        Regime::CriticalExp => ("epsilon^-(p-1)", "log T"),
        Regime::CriticalDoubleExp => ("epsilon^-(p-1)", "log log T"),
    };
    let pts: Vec<(f64, f64)> = fit.xs.iter().copied().zip(fit.ys.iter().copied()).collect();
    let line = [fit.xs[0], fit.xs[fit.xs.len() - 1]].iter().map(|&x| (x, fit.intercept + fit.slope * x)).collect();
    svg_plot(
        title,
        x_label,
        y_label,
        &[
            Series { label: "data", points: pts, markers: true },
            Series {
                label: &format!("slope {:.4}, R^2 {:.4}", fit.slope, fit.r_squared),
                points: line,
                markers: false,
            },
        ],
    )
}

fn fit_row(fit: &ScalingFit) -> [String; 5] {
    [fit.regime.name().to_string(), num(fit.slope), num(fit.intercept), num(fit.r_squared), fit.n_points().to_string()]
}

pub fn fit_stage(
    regime: Regime,
    p: Option<f64>,
    input: &Path,
    out: &Path,
    svg: Option<&Path>,
) -> Result<StageOutput, CliError> {
    let p = match (regime, p) {
        (_, Some(p)) => p,
        (Regime::SubcriticalPoly, None) => 2.0,
        (_, None) => return Err(CliError::Usage(format!("regime {} needs --p", regime.name()))),
    };
    if !(p > 1.0) {
        return Err(CliError::Usage(format!("p must exceed 1 (got {p})")));
    }
    let samples = usable_sweep_rows(input)?;
    let fit = fit_log_lifespans(&samples, regime, p)?;
    let mut table = Table::new(&FIT_HEADER);
    table.row(fit_row(&fit));
    table.save(out)?;
    let mut artifacts = vec![out.to_path_buf()];
    if let Some(svg) = svg {
        write_file(svg, fit_svg(&fit, &format!("{} fit", regime.name())).as_bytes())?;
        artifacts.push(svg.to_path_buf());
    }
    Ok(StageOutput {
        artifacts,
        summary: format!("slope {}, R^2 {} over {} points", fit.slope, fit.r_squared, fit.n_points()),
    })
}

/// Snapshots stored by `simulate` in `dir`, with the configuration copy.
pub fn load_snapshots(dir: &Path) -> Result<(ExperimentConfig, Vec<Snapshot>, Grid), CliError> {
    if !dir.is_dir() {
        return Err(CliError::MissingInput(format!("snapshot directory {} does not exist", dir.display())));
    }
    let cfg_path = dir.join(SNAPSHOT_CONFIG);
    let text = fs::read_to_string(&cfg_path).map_err(|_| {
        CliError::MissingInput(format!("snapshot directory {} has no {SNAPSHOT_CONFIG}", dir.display()))
    })?;
    let cfg = parse_config(&text)?;
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| CliError::Io { path: dir.display().to_string(), source: e })?
        .filter_map(|e| e.ok().and_then(|e| e.file_name().into_string().ok()))
        .filter(|n| n.starts_with("u_") && n.ends_with(".bin"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::MissingInput(format!("snapshot directory {} contains no snapshots", dir.display())));
    }
    let params = cfg.problem_params("simulate")?;
    let grid = params.grid;
    let read = |name: &str| -> Result<crate::artifacts::SnapshotFile, CliError> {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|_| CliError::MissingInput(format!("{} is missing", path.display())))?;
        let snap = decode_snapshot(&bytes).map_err(|m| CliError::Usage(format!("{}: {m}", path.display())))?;
        if snap.dim != grid.dim || snap.points != grid.points || snap.half_width != grid.half_width {
            return Err(CliError::Numerical(dampwave::Error::GridMismatch));
        }
        Ok(snap)
    };
    let mut snaps = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let u = read(name)?;
        let v = read(&name.replacen("u_", "v_", 1))?;
        snaps.push(Snapshot { t: u.t, u: u.values, v: v.values, step_count: k, dt: f64::NAN });
    }
    Ok((cfg, snaps, grid))
}

pub fn identity_stage(run_dir: &Path, times: &[f64], out: &Path) -> Result<StageOutput, CliError> {
    let (cfg, snaps, grid) = load_snapshots(run_dir)?;
    let params = cfg.problem_params("simulate")?;
    let t_last = snaps.last().map_or(0.0, |s| s.t);
    let aux = build_aux(params.model, t_last.max(1.0), 256, 1e-11)?;
    let data = cfg.initial_data();
    let report = identity_report(&grid, &aux, &snaps, &data, params.epsilon, params.p, times)?;
    let mut table = Table::new(&IDENTITY_HEADER);
    for r in &report.rows {
        table.row([
            num(r.t),
            num(r.a),
            num(r.b),
            num(r.c),
            num(r.d),
            num(r.e),
            num(r.residual),
            num(r.relative_residual),
            num(r.h),
            num(report.j0),
        ]);
    }
    table.save(out)?;
    let failed: Vec<String> =
        report.rows.iter().filter_map(|r| r.error.as_ref().map(|e| format!("t = {}: {e}", r.t))).collect();
    let mut summary = format!("max relative residual {} over {} times", report.max_relative_residual(), times.len());
    if !failed.is_empty() {
        summary.push_str(&format!("; unevaluated: {}", failed.join("; ")));
    }
    Ok(StageOutput { artifacts: vec![out.to_path_buf()], summary })
}

pub fn odelab_stage(
    kind: OdeKind,
    beta: f64,
    p: f64,
    epsilons: &[f64],
    out: &Path,
    svg: Option<&Path>,
) -> Result<StageOutput, CliError> {
    let results = scaling_points(kind, beta, p, epsilons, 1e-9);
    let mut table = Table::new(&ODELAB_HEADER);
    let mut samples = Vec::new();
    let mut notes = Vec::new();
    for (&eps, r) in epsilons.iter().zip(&results) {
        match r {
            Ok(b) => {
                table.row([num(eps), num(b.t_lo), num(b.t_hi), num(b.s_hi)]);
                samples.push((eps, b.log_t));
            }
            Err(dampwave::Error::NoBlowupWithinHorizon { horizon }) => {
                table.row([num(eps), num(*horizon), num(f64::INFINITY), num(f64::INFINITY)]);
                notes.push(format!("epsilon {eps}: no blow-up before t = {horizon}"));
            }
            Err(e) => {
                table.row([num(eps), num(f64::NAN), num(f64::NAN), num(f64::NAN)]);
                notes.push(format!("epsilon {eps}: {e}"));
            }
        }
    }
    let mut bytes = table.into_bytes();
    let fit = fit_log_lifespans(&samples, kind.regime(), p);
    bytes.extend_from_slice(b"# fit\n");
    match &fit {
        Ok(f) => {
            bytes.extend_from_slice(format!("# {}\n# {}\n", FIT_HEADER.join(","), fit_row(f).join(",")).as_bytes());
        }
        Err(e) => bytes.extend_from_slice(format!("# unavailable: {e}\n").as_bytes()),
    }
    write_file(out, &bytes)?;
    let mut artifacts = vec![out.to_path_buf()];
    if let (Some(svg), Ok(f)) = (svg, &fit) {
        write_file(svg, fit_svg(f, &format!("{} lifespans", kind.name())).as_bytes())?;
        artifacts.push(svg.to_path_buf());
    }
    let mut summary = match &fit {
        Ok(f) => format!("{} fit: slope {}, R^2 {}", f.regime.name(), f.slope, f.r_squared),
        Err(e) => format!("no fit: {e}"),
    };
    if !notes.is_empty() {
        summary.push_str(&format!(" ({})", notes.join("; ")));
    }
    Ok(StageOutput { artifacts, summary })
}

/// `<out>` with its extension replaced by `manifest.json`.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// Runs `f` as a named stage, recording its outcome in `manifest`.
pub fn timed<F>(manifest: &mut Manifest, name: &str, f: F) -> Result<StageOutput, CliError>
where
    F: FnOnce() -> Result<StageOutput, CliError>,
{
    let start = Instant::now();
    let result = f();
    let (status, artifacts) = match &result {
        Ok(o) => ("ok".to_string(), o.artifacts.iter().map(|p| p.display().to_string()).collect()),
        Err(e) => (format!("failed (exit {}): {e}", e.exit_code()), Vec::new()),
    };
    manifest.stages.push(StageRecord {
        name: name.into(),
        status,
        wall_clock_s: start.elapsed().as_secs_f64(),
        artifacts,
    });
    result
}

/// Executes `run.stages` in order, stopping at the first failure. The
/// manifest is written either way.
pub fn run_pipeline(cfg: &ExperimentConfig, cfg_text: &str) -> Result<Vec<(String, StageOutput)>, CliError> {
    let dir = PathBuf::from(&cfg.output.dir);
    let mut manifest = Manifest::new("run", cfg_text, cfg.output.deterministic);
    let svg = cfg.output.svg;
    let mut done = Vec::new();
    let mut failure = None;
    for stage in cfg.stages() {
        let result = timed(&mut manifest, &stage, || run_stage(cfg, cfg_text, &stage, &dir, svg));
        match result {
            Ok(o) => done.push((stage, o)),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    manifest.save(&dir.join("manifest.json"))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(done),
    }
}

fn run_stage(
    cfg: &ExperimentConfig,
    cfg_text: &str,
    stage: &str,
    dir: &Path,
    svg: bool,
) -> Result<StageOutput, CliError> {
    let svg_path = |name: &str| svg.then(|| dir.join(name));
    match stage {
        "aux" => {
            let (samples, tol) = aux_samples(cfg);
            let t_max =
                cfg.aux.as_ref().and_then(|a| a.t_max).or(cfg.problem.as_ref().map(|p| p.t_end)).expect("validated");
            aux_stage(cfg.model()?, t_max, samples, tol, &dir.join("aux.csv"), svg_path("aux.svg").as_deref())
        }
        "simulate" => simulate_stage(cfg, cfg_text, dir),
        "sweep" => {
            let eps = cfg.problem.as_ref().and_then(|p| p.epsilons.clone()).expect("validated");
            sweep_stage(cfg, &eps, &dir.join("sweep.csv"), svg_path("sweep.svg").as_deref())
        }
        "fit" => {
            let p = cfg.problem.as_ref().map(|p| p.p);
            fit_stage(cfg.regime()?, p, &dir.join("sweep.csv"), &dir.join("fit.csv"), svg_path("fit.svg").as_deref())
        }
        "identity" => {
            let id = cfg.identity.as_ref().expect("validated");
            let run_dir = id.run.as_ref().map_or_else(|| dir.join("snapshots"), PathBuf::from);
            identity_stage(&run_dir, &id.times, &dir.join("identity.csv"))
        }
        "odelab" => {
            let o = cfg.odelab.as_ref().expect("validated");
            let kind = OdeKind::parse(&o.kind).expect("validated");
            odelab_stage(kind, o.beta, o.p, &o.epsilons, &dir.join("odelab.csv"), svg_path("odelab.svg").as_deref())
        }
        other => Err(CliError::Usage(format!("unknown stage {other:?}"))),
    }
}
