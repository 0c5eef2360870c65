//! Run configuration and the experiment commands behind the CLI.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::dg::{SchemeMode, Solver, SurfaceMode, VolumeMode};
use crate::flux::Dissipation;
use crate::diagnostics::{eoc, l2_error_interpolated, total_entropy, DiagnosticsRecord, DivergenceTracker, ANALYZE_POINTS};
use crate::error::{BlowUpReport, Error, Result};
use crate::mesh::build_mesh;
use crate::par;
use crate::sbp::SbpOperators;
use crate::scenarios::{self, Scenario};
use crate::state::{primitive, State};
use crate::time::{compute_dt, run, TimeControls};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "ESDG_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub order: usize,
    pub kx: usize,
    pub ky: usize,
    pub cfl: f64,
    pub dfl: f64,
    pub fixed_dt: Option<f64>,
    /// Defaults to the scenario's final time.
    pub t_final: Option<f64>,
    pub volume: VolumeMode,
    pub surface: SurfaceMode,
    /// Interface dissipation of the `es` surface flux.
    pub dissipation: Dissipation,
    pub alpha: f64,
    pub glm: bool,
    pub output_dir: Option<PathBuf>,
    /// Field dump interval in steps; 0 disables dumps.
    pub dump_every: usize,
    /// Element loops never depend on scheduling and reductions run in
    /// element order, so every run is deterministic. The key is accepted so
    /// configs can state it.
    pub deterministic: bool,
    pub threads: Option<usize>,
    pub seed: u64,
    pub max_steps: usize,
}

impl RunConfig {
    pub fn new(scenario: &str) -> Self {
        RunConfig {
            scenario: scenario.to_string(),
            order: 3,
            kx: 10,
            ky: 10,
            cfl: 0.5,
            dfl: 0.5,
            fixed_dt: None,
            t_final: None,
            volume: VolumeMode::EcSplit,
            surface: SurfaceMode::Es,
            dissipation: Dissipation::llf(),
            alpha: 0.0,
            glm: true,
            output_dir: None,
            dump_every: 0,
            deterministic: true,
            threads: None,
            seed: 0,
            max_steps: 10_000_000,
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        scenarios::by_name(&self.scenario)
    }

    pub fn mode(&self, scenario: &Scenario) -> SchemeMode {
        let mut mode = SchemeMode::new(self.volume, self.surface, self.glm);
        mode.source = scenario.source.clone();
        mode.dissipation = self.dissipation;
        mode
    }

    pub fn solver(&self, scenario: &Scenario) -> Result<Solver> {
        let ops = SbpOperators::new(self.order)?;
        let mesh = build_mesh(scenario.bounds, self.kx, self.ky, &ops)?;
        Solver::new(mesh, ops, scenario.gas.with_alpha(self.alpha), self.mode(scenario))
    }

    pub fn controls(&self, scenario: &Scenario) -> TimeControls {
        TimeControls {
            cfl: self.cfl,
            dfl: self.dfl,
            t_final: self.t_final.unwrap_or(scenario.t_final),
            max_steps: self.max_steps,
            fixed_dt: self.fixed_dt,
        }
    }

    /// Thread count from the config, else from [`THREADS_ENV`].
    pub fn thread_count(&self) -> Result<Option<usize>> {
        if self.threads.is_some() {
            return Ok(self.threads);
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .map(Some)
                .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
            Err(_) => Ok(None),
        }
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse '{v}'"))
}

/// Parses `key = value` lines; `#` starts a comment. `scenario` overrides
/// (or supplies) the scenario key.
pub fn parse_config(text: &str, scenario: Option<&str>) -> Result<RunConfig> {
    let mut cfg = RunConfig::new("");
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| Error::ConfigLine { line, msg };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got '{content}'")))?;
        let (key, v) = (key.trim(), value.trim());
        let res: std::result::Result<(), String> = (|| {
            match key {
                "scenario" => {
                    scenarios::by_name(v).map_err(|e| e.to_string())?;
                    cfg.scenario = v.to_string();
                }
                "order" | "N" => cfg.order = parse_num(v)?,
                "kx" => cfg.kx = parse_num(v)?,
                "ky" => cfg.ky = parse_num(v)?,
                "cells" => {
                    cfg.kx = parse_num(v)?;
                    cfg.ky = cfg.kx;
                }
                "cfl" => cfg.cfl = parse_num(v)?,
                "dfl" => cfg.dfl = parse_num(v)?,
                "fixed_dt" => cfg.fixed_dt = Some(parse_num(v)?),
                "t_final" => cfg.t_final = Some(parse_num(v)?),
                "volume" => {
                    cfg.volume = match v {
                        "ec_split" => VolumeMode::EcSplit,
                        "standard" => VolumeMode::Standard,
                        _ => return Err(format!("volume must be ec_split or standard, got '{v}'")),
                    }
                }
                "surface" => {
                    cfg.surface = match v {
                        "ec" => SurfaceMode::Ec,
                        "es" => SurfaceMode::Es,
                        _ => return Err(format!("surface must be ec or es, got '{v}'")),
                    }
                }
                "dissipation" => {
                    cfg.dissipation = match v {
                        "llf" => Dissipation::llf(),
                        "matrix" => Dissipation::matrix(),
                        "none" => Dissipation::None,
                        _ => return Err(format!("dissipation must be llf, matrix or none, got '{v}'")),
                    }
                }
                "alpha" => cfg.alpha = parse_num(v)?,
                "glm" => cfg.glm = parse_bool(v)?,
                "output_dir" => cfg.output_dir = Some(PathBuf::from(v)),
                "dump_every" => cfg.dump_every = parse_num(v)?,
                "deterministic" => cfg.deterministic = parse_bool(v)?,
                "threads" => {
                    let n: usize = parse_num(v)?;
                    if n == 0 {
                        return Err("threads must be positive".into());
                    }
                    cfg.threads = Some(n);
                }
                "seed" => cfg.seed = parse_num(v)?,
                "max_steps" => cfg.max_steps = parse_num(v)?,
                _ => return Err(format!("unknown key '{key}'")),
            }
            Ok(())
        })();
        res.map_err(err)?;
    }
    if let Some(name) = scenario {
        scenarios::by_name(name)?;
        cfg.scenario = name.to_string();
    }
    if cfg.scenario.is_empty() {
        return Err(Error::Config("missing scenario".into()));
    }
    if cfg.order == 0 || cfg.kx == 0 || cfg.ky == 0 {
        return Err(Error::Config("order, kx and ky must be positive".into()));
    }
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<DiagnosticsRecord>,
    pub field: Vec<State>,
    pub time: f64,
    pub failure: Option<BlowUpReport>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes `x,y,rho,v1,v2,v3,p,B1,B2,B3,psi`, one row per node in element
/// order, with 17 significant digits.
pub fn write_field(path: &Path, solver: &Solver, u: &[State]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "x,y,rho,v1,v2,v3,p,B1,B2,B3,psi")?;
    let nn = solver.mesh.nodes_per_element();
    for (e, nodes) in solver.mesh.node_coords.iter().enumerate() {
        for (k, &(x, y)) in nodes.iter().enumerate() {
            let q = crate::state::Primitive::from_conserved(&u[e * nn + k], solver.gas.gamma);
            let vals = [x, y, q.rho, q.v[0], q.v[1], q.v[2], q.p, q.b[0], q.b[1], q.b[2], q.psi];
            let row: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(f, "{}", row.join(","))?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Runs one configuration. Blow-ups are reported in the outcome; other
/// failures are errors. With an output directory, writes `diagnostics.csv`
/// and field dumps.
pub fn run_case(cfg: &RunConfig) -> Result<RunOutcome> {
    let scenario = cfg.scenario()?;
    let solver = cfg.solver(&scenario)?;
    let controls = cfg.controls(&scenario);
    let u0 = solver.project(|x, y| (scenario.initial)(x, y));
    let threads = cfg.thread_count()?;
    let mut diag = match &cfg.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut w = create(dir, "diagnostics.csv")?;
            writeln!(w, "{}", DiagnosticsRecord::CSV_HEADER)?;
            Some(w)
        }
        None => None,
    };
    let mut records = Vec::new();
    let mut tracker = DivergenceTracker::default();
    let result = par::with_threads(threads, || {
        run(&solver, u0, 0.0, &controls, |info, u| {
            let rec = DiagnosticsRecord::compute(&solver, u, info.step, info.time, info.dt, &mut tracker)?;
            if let Some(w) = diag.as_mut() {
                writeln!(w, "{}", rec.csv_row())?;
            }
            records.push(rec);
            let last = info.time >= controls.t_final;
            if let Some(dir) = &cfg.output_dir {
                if cfg.dump_every > 0 && (info.step % cfg.dump_every == 0 || last) {
                    write_field(&dir.join(format!("fields_{:06}.csv", info.step)), &solver, u)?;
                }
            }
            Ok(())
        })
    });
    if let Some(mut w) = diag {
        w.flush()?;
    }
    match result {
        Ok(r) => Ok(RunOutcome { records, field: r.field, time: r.time, failure: None }),
        Err(Error::BlowUp(report)) => {
            Ok(RunOutcome { records, field: Vec::new(), time: report.time, failure: Some(report) })
        }
        Err(e) => Err(e),
    }
}

/// Exit code convention: 0 success, 1 configuration or I/O error, 2 blow-up.
pub fn cmd_run(cfg: &RunConfig) -> i32 {
    match run_case(cfg) {
        Ok(RunOutcome { failure: None, .. }) => 0,
        Ok(RunOutcome { failure: Some(report), .. }) => {
            eprintln!("{report}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub h: f64,
    /// Errors of `(rho, v1, v2, v3, p, B1, B2, B3, psi)`.
    pub errors: [f64; 9],
    /// Orders against the previous level.
    pub eoc: Option<[f64; 9]>,
}

pub const ERROR_COLUMNS: [&str; 9] = ["rho", "v1", "v2", "v3", "p", "B1", "B2", "B3", "psi"];

/// Runs the scenario (which must have an exact solution) on `cells x cells`
/// meshes and measures L2 errors of the polynomial solution at the final
/// time.
pub fn convergence(cfg: &RunConfig, meshes: &[usize]) -> Result<(Vec<ConvergenceRow>, Option<[f64; 9]>)> {
    let scenario = cfg.scenario()?;
    let reference = scenario
        .reference
        .clone()
        .ok_or_else(|| Error::Config(format!("scenario '{}' has no exact solution", scenario.name)))?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &k in meshes {
        let mut level = cfg.clone();
        level.kx = k;
        level.ky = k;
        level.output_dir = None;
        let solver = level.solver(&scenario)?;
        let out = run_case(&level)?;
        if let Some(report) = out.failure {
            return Err(Error::BlowUp(report));
        }
        let errors = l2_error_interpolated(&solver, &out.field, |x, y, t| reference(x, y, t), out.time, ANALYZE_POINTS)?;
        let h = (scenario.bounds.x1 - scenario.bounds.x0) / k as f64;
        let eoc_row = rows.last().map(|prev| {
            std::array::from_fn(|v| {
                eoc(&[(prev.h, prev.errors[v]), (h, errors[v])])
                    .ok()
                    .and_then(|(o, _)| o.first().copied())
                    .unwrap_or(f64::NAN)
            })
        });
        rows.push(ConvergenceRow { cells: k, h, errors, eoc: eoc_row });
    }
    let avg = (rows.len() > 1).then(|| {
        std::array::from_fn(|v| {
            let orders: Vec<f64> = rows.iter().filter_map(|r| r.eoc.map(|o| o[v])).collect();
            orders.iter().sum::<f64>() / orders.len() as f64
        })
    });
    Ok((rows, avg))
}

pub fn write_eoc_csv(path: &Path, rows: &[ConvergenceRow], avg: Option<[f64; 9]>) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    let err_cols: Vec<String> = ERROR_COLUMNS.iter().map(|c| format!("err_{c}")).collect();
    let eoc_cols: Vec<String> = ERROR_COLUMNS.iter().map(|c| format!("eoc_{c}")).collect();
    writeln!(f, "h,{},{}", err_cols.join(","), eoc_cols.join(","))?;
    let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(",");
    for r in rows {
        let eocs = r.eoc.map(|o| o.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",")).unwrap_or_else(|| ",".repeat(8));
        writeln!(f, "{:.6e},{},{}", r.h, fmt(&r.errors), eocs)?;
    }
    if let Some(a) = avg {
        let eocs: Vec<String> = a.iter().map(|x| format!("{x:.4}")).collect();
        writeln!(f, "avg,{},{}", ",".repeat(8), eocs.join(","))?;
    }
    f.flush()?;
    Ok(())
}

pub fn cmd_convergence(cfg: &RunConfig, meshes: &[usize]) -> i32 {
    let result = convergence(cfg, meshes).and_then(|(rows, avg)| {
        if let Some(dir) = &cfg.output_dir {
            std::fs::create_dir_all(dir)?;
            write_eoc_csv(&dir.join("eoc.csv"), &rows, avg)?;
        }
        Ok((rows, avg))
    });
    match result {
        Ok((rows, avg)) => {
            println!("{:>6} {:>12} {:>12} {:>8}", "cells", "L2(rho)", "L2(p)", "EOC(rho)");
            for r in &rows {
                let o = r.eoc.map(|o| format!("{:.3}", o[0])).unwrap_or_default();
                println!("{:>6} {:>12.4e} {:>12.4e} {:>8}", r.cells, r.errors[0], r.errors[4], o);
            }
            if let Some(a) = avg {
                println!("avg EOC rho {:.3}  p {:.3}  B1 {:.3}", a[0], a[4], a[5]);
            }
            0
        }
        Err(Error::BlowUp(r)) => {
            eprintln!("{r}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CflLevel {
    pub dt: f64,
    pub steps: usize,
    /// `|S(T) - S(0)|`.
    pub entropy_change: f64,
    /// Ratio to the previous level's entropy change.
    pub ratio: Option<f64>,
}

/// Advective step of the initial field at `cfl`, ignoring any fixed step.
pub fn initial_step(cfg: &RunConfig, cfl: f64) -> Result<f64> {
    let scenario = cfg.scenario()?;
    let solver = cfg.solver(&scenario)?;
    let mut controls = cfg.controls(&scenario);
    controls.cfl = cfl;
    controls.fixed_dt = None;
    controls.t_final = f64::INFINITY;
    let u0 = solver.project(|x, y| (scenario.initial)(x, y));
    Ok(compute_dt(&solver, &u0, &controls, 0.0)?.0)
}

/// Fixed-step runs with `dt0, dt0/2, ...` and the total entropy change of
/// each.
pub fn cfl_study(cfg: &RunConfig, dt0: f64, levels: usize) -> Result<Vec<CflLevel>> {
    let scenario = cfg.scenario()?;
    let mut out: Vec<CflLevel> = Vec::new();
    for l in 0..levels {
        let mut level = cfg.clone();
        level.fixed_dt = Some(dt0 / 2f64.powi(l as i32));
        level.output_dir = None;
        let solver = level.solver(&scenario)?;
        let s0 = total_entropy(&solver, &solver.project(|x, y| (scenario.initial)(x, y)))?;
        let res = run_case(&level)?;
        if let Some(report) = res.failure {
            return Err(Error::BlowUp(report));
        }
        let change = (total_entropy(&solver, &res.field)? - s0).abs();
        let ratio = out.last().map(|p| p.entropy_change / change);
        out.push(CflLevel { dt: level.fixed_dt.unwrap_or(dt0), steps: res.records.len() - 1, entropy_change: change, ratio });
    }
    Ok(out)
}

pub fn cmd_cfl_study(cfg: &RunConfig, dt0: f64, levels: usize) -> i32 {
    match cfl_study(cfg, dt0, levels) {
        Ok(rows) => {
            let mut lines = vec!["dt,steps,entropy_change,ratio".to_string()];
            println!("{:>12} {:>7} {:>14} {:>8}", "dt", "steps", "|dS|", "ratio");
            for r in &rows {
                let ratio = r.ratio.map(|x| format!("{x:.3}")).unwrap_or_default();
                println!("{:>12.4e} {:>7} {:>14.6e} {:>8}", r.dt, r.steps, r.entropy_change, ratio);
                lines.push(format!("{:.16e},{},{:.16e},{}", r.dt, r.steps, r.entropy_change, ratio));
            }
            if let Some(dir) = &cfg.output_dir {
                let write = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("cfl_study.csv"), lines.join("\n") + "\n"));
                if let Err(e) = write {
                    eprintln!("error: {e}");
                    return 1;
                }
            }
            0
        }
        Err(Error::BlowUp(r)) => {
            eprintln!("{r}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn cmd_verify(seed: u64) -> i32 {
    match crate::verify::run_all(seed) {
        Ok(checks) => {
            println!("{:<42} {:>12} {:>10}  result", "check", "measured", "tolerance");
            for c in &checks {
                println!("{:<42} {:>12.3e} {:>10.1e}  {}", c.name, c.measured, c.tolerance, if c.passed { "pass" } else { "FAIL" });
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} checks, {} failed", checks.len(), failed);
            i32::from(failed > 0)
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Admissibility of a whole field, used by callers that want a yes/no.
pub fn is_admissible(u: &[State], gamma: f64) -> bool {
    u.iter().all(|x| primitive(x, gamma).is_ok())
}
