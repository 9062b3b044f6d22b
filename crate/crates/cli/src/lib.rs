//! Batch front-end: read a scenario, build and correct the seed map, integrate,
//! certify and write artifacts.
//!
//! Exit codes: 0 when every requested certificate passes, 1 on I/O failure,
//! 2 on schema errors, 3 when the solver fails (degenerate seed, no convergence),
//! 4 when a certificate fails. Artifacts are still written in the last case.

pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nullforge::curves::{
    directedness_report, embedding_gap, growth_profile, mesh_convergence, minimal_surface_mesh, perturb_to_embedding,
    to_sl2, CurveDiagnostics, PerturbSettings,
};
use nullforge::{build_family, correct_periods, integrate_curve, DirectedCurve, PlanarDomain, C64};
use serde::Serialize;
use thiserror::Error;

pub use scenario::Scenario;
use scenario::{EmbeddingSpec, GrowthSpec, MeshSpec, Resolved, Sl2Spec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CERTIFICATION: i32 = 4;

pub const TOOL: &str = "nullforge";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema(_) => EXIT_SCHEMA,
            RunError::Solver(_) => EXIT_SOLVER,
            RunError::Io { .. } => EXIT_IO,
        }
    }

    fn status(&self) -> &'static str {
        match self {
            RunError::Schema(_) => "schema_error",
            RunError::Solver(_) => "solver_failure",
            RunError::Io { .. } => "io_error",
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        RunError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

/// Pipeline stages selected by a subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Correct periods, integrate and check directedness.
    Build,
    /// Every certificate configured in the scenario.
    Certify,
    /// Mesh refinement study and OBJ export.
    Mesh,
    /// Image in `SL_2(C)`.
    Sl2,
    /// Growth table.
    Growth,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Build => "build",
            Command::Certify => "certify",
            Command::Mesh => "mesh",
            Command::Sl2 => "sl2",
            Command::Growth => "growth",
        }
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Replaces `solver.seed`.
    pub seed: Option<u64>,
    /// Replaces the embedding and SL2 grid sizes.
    pub grid: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("."), seed: None, grid: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// Pass threshold, when the metric has one.
    pub threshold: Option<f64>,
}

fn metric(name: &str, value: f64, threshold: Option<f64>) -> Metric {
    Metric { name: name.to_string(), value, threshold }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub metrics: Vec<Metric>,
    pub message: Option<String>,
}

impl Check {
    fn failed(name: &str, message: String) -> Self {
        Check { name: name.to_string(), passed: false, metrics: Vec::new(), message: Some(message) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySummary {
    pub slots_per_loop: usize,
    pub parameters: usize,
    pub rank: usize,
    pub required_rank: usize,
    pub reseeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionSummary {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub period_residual: f64,
    pub fit_residual: f64,
    pub membership_residual: f64,
    pub zeta_max_norm: f64,
}

/// Machine-readable record of one run. Contains no timings or paths outside the
/// output directory, so identical inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: Option<u64>,
    pub status: String,
    pub exit_code: i32,
    pub message: Option<String>,
    pub family: Option<FamilySummary>,
    pub correction: Option<CorrectionSummary>,
    pub curve: Option<CurveDiagnostics>,
    pub checks: Vec<Check>,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
}

impl Summary {
    fn new(command: &str, scenario: String, scenario_hash: String, seed: Option<u64>) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            scenario,
            scenario_hash,
            seed,
            status: "ok".into(),
            exit_code: EXIT_OK,
            message: None,
            family: None,
            correction: None,
            curve: None,
            checks: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: Summary,
    pub summary_path: PathBuf,
}

/// Run one scenario file. Never panics on bad input: every failure is mapped to
/// an exit code and recorded in the summary, which is written whenever the
/// output directory is writable.
pub fn run_scenario(path: &Path, command: Command, options: &RunOptions) -> RunOutcome {
    let raw = fs::read(path);
    let raw_hash = |bytes: &[u8]| -> String {
        use sha2::{Digest, Sha256};
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    };
    let parsed = match &raw {
        Ok(bytes) => std::str::from_utf8(bytes)
            .map_err(|e| RunError::Schema(e.to_string()))
            .and_then(Scenario::from_json),
        Err(e) => Err(RunError::Schema(format!("cannot read {}: {e}", path.display()))),
    };
    match parsed {
        Ok(mut scenario) => {
            if let Some(seed) = options.seed {
                scenario.solver.seed = seed;
            }
            if let Some(grid) = options.grid {
                if let Some(e) = scenario.certify.embedding.as_mut() {
                    e.grid = grid;
                }
                if command == Command::Sl2 && scenario.certify.sl2.is_none() {
                    scenario.certify.sl2 = Some(Default::default());
                }
                if let Some(s) = scenario.certify.sl2.as_mut() {
                    s.grid = grid;
                }
            }
            run_parsed(&scenario, command, options)
        }
        Err(err) => {
            let hash = raw.as_deref().map(raw_hash).unwrap_or_default();
            let mut summary = Summary::new(command.name(), String::new(), hash, options.seed);
            record_error(&mut summary, &err);
            finish(summary, &options.out_dir, "summary.json")
        }
    }
}

/// Run an already parsed scenario (overrides applied by the caller).
pub fn run_parsed(scenario: &Scenario, command: Command, options: &RunOptions) -> RunOutcome {
    let mut summary =
        Summary::new(command.name(), scenario.name.clone(), scenario.hash(), Some(scenario.solver.seed));
    if let Err(err) = execute(scenario, command, &options.out_dir, &mut summary) {
        record_error(&mut summary, &err);
    }
    finish(summary, &options.out_dir, &scenario.outputs.summary)
}

fn record_error(summary: &mut Summary, err: &RunError) {
    log::error!("{err}");
    summary.status = err.status().into();
    summary.exit_code = err.exit_code();
    summary.message = Some(err.to_string());
}

fn finish(mut summary: Summary, out_dir: &Path, name: &str) -> RunOutcome {
    let path = out_dir.join(name);
    summary.artifacts.push(name.to_string());
    let written = fs::create_dir_all(out_dir).and_then(|_| fs::write(&path, summary.to_json()));
    if let Err(e) = written {
        log::error!("cannot write {}: {e}", path.display());
        summary.exit_code = EXIT_IO;
        summary.status = "io_error".into();
    }
    RunOutcome { exit_code: summary.exit_code, summary, summary_path: path }
}

fn execute(scenario: &Scenario, command: Command, out_dir: &Path, summary: &mut Summary) -> Result<(), RunError> {
    let Resolved { variety, domain, seed_map, base } = scenario.resolve()?;
    let solver = scenario.solver.solver_settings();
    let family_settings = scenario.solver.family_settings();

    let clock = Instant::now();
    let family = build_family(&seed_map, &variety, &domain, &family_settings).map_err(|e| RunError::Solver(e.to_string()))?;
    summary.family = Some(FamilySummary {
        slots_per_loop: family.slots_per_loop(),
        parameters: family.parameter_len(),
        rank: family.jacobian_rank(),
        required_rank: family.required_rank(),
        reseeds: family.reseeds(),
    });
    let correction = correct_periods(&family, &solver).map_err(|e| RunError::Solver(e.to_string()))?;
    log::info!(
        "periods corrected in {} iterations ({:.3e}) after {:.2?}",
        correction.iterations,
        correction.period_residual,
        clock.elapsed()
    );
    summary.correction = Some(CorrectionSummary {
        iterations: correction.iterations,
        residual_history: correction.residual_history.clone(),
        period_residual: correction.period_residual,
        fit_residual: correction.fit_residual,
        membership_residual: correction.membership_residual,
        zeta_max_norm: correction.zeta.iter().map(|x| x.norm()).fold(0.0, f64::max),
    });
    let mut curve = integrate_curve(&correction.corrected, &domain, &variety, base.clone())
        .map_err(|e| RunError::Solver(e.to_string()))?;

    let report = directedness_report(&curve, 256);
    summary.checks.push(Check {
        name: "directedness".into(),
        passed: report.passed,
        metrics: vec![
            metric("max_scaled_residual", report.max_scaled_residual, Some(nullforge::curves::DIRECTEDNESS_TOL)),
            metric("min_norm", report.min_norm, None),
            metric("period_residual", curve.diagnostics().period_residual, Some(nullforge::curves::PERIOD_TOL)),
        ],
        message: None,
    });

    let certify = &scenario.certify;
    let mut mesh_obj = None;
    let wants = |c: Command| command == c || command == Command::Certify;
    if command == Command::Certify {
        if let Some(spec) = &certify.embedding {
            let (check, replacement) = embedding_check(&curve, &correction.corrected, scenario, spec);
            summary.checks.push(check);
            if let Some(c) = replacement {
                curve = c;
            }
        }
    }
    if wants(Command::Sl2) && (command == Command::Sl2 || certify.sl2.is_some()) {
        summary.checks.push(sl2_check(&curve, &certify.sl2.clone().unwrap_or_default()));
    }
    if wants(Command::Mesh) && (command == Command::Mesh || certify.mesh.is_some()) {
        let (check, obj) = mesh_check(&curve, &certify.mesh.clone().unwrap_or_default());
        summary.checks.push(check);
        mesh_obj = obj;
    }
    if wants(Command::Growth) && (command == Command::Growth || certify.growth.is_some()) {
        summary.checks.push(growth_check(&curve, &certify.growth.clone().unwrap_or_default()));
    }
    summary.curve = Some(*curve.diagnostics());

    fs::create_dir_all(out_dir).map_err(|e| RunError::io(out_dir, e))?;
    let outputs = &scenario.outputs;
    let curve_json = serde_json::to_string_pretty(&curve.to_json()).expect("curve serializes") + "\n";
    write(out_dir, &outputs.curve, &curve_json, summary)?;
    write(out_dir, &outputs.report, &report_csv(&summary.checks)?, summary)?;
    if let Some(obj) = mesh_obj {
        write(out_dir, &outputs.obj, &obj, summary)?;
    }

    if let Some(failed) = summary.checks.iter().find(|c| !c.passed) {
        summary.status = "certification_failed".into();
        summary.exit_code = EXIT_CERTIFICATION;
        summary.message = Some(format!("certificate '{}' failed", failed.name));
    }
    Ok(())
}

fn write(dir: &Path, name: &str, contents: &str, summary: &mut Summary) -> Result<(), RunError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| RunError::io(&path, e))?;
    summary.artifacts.push(name.to_string());
    Ok(())
}

/// One row per metric: `check,metric,value,threshold,passed`.
fn report_csv(checks: &[Check]) -> Result<String, RunError> {
    let to_err = |e: csv::Error| RunError::Io { path: "report".into(), message: e.to_string() };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["check", "metric", "value", "threshold", "passed"]).map_err(to_err)?;
    for c in checks {
        if c.metrics.is_empty() {
            w.write_record([c.name.as_str(), "", "", "", &c.passed.to_string()]).map_err(to_err)?;
        }
        for m in &c.metrics {
            let threshold = m.threshold.map(|t| t.to_string()).unwrap_or_default();
            w.write_record([c.name.as_str(), m.name.as_str(), &m.value.to_string(), &threshold, &c.passed.to_string()])
                .map_err(to_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| RunError::Io { path: "report".into(), message: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Embedding gap of the corrected curve; when it is below `min_gap` and a
/// perturbation is configured, the best perturbed curve replaces it.
fn embedding_check(
    curve: &DirectedCurve,
    corrected: &nullforge::LaurentMap,
    scenario: &Scenario,
    spec: &EmbeddingSpec,
) -> (Check, Option<DirectedCurve>) {
    let name = "embedding";
    let gap = match embedding_gap(curve, spec.grid, spec.delta) {
        Ok(g) => g,
        Err(e) => return (Check::failed(name, e.to_string()), None),
    };
    let mut metrics = vec![metric("gap", gap.gap, Some(spec.min_gap)), metric("grid", spec.grid as f64, None)];
    if gap.gap > spec.min_gap {
        return (Check { name: name.into(), passed: true, metrics, message: None }, None);
    }
    let Some(perturb) = &spec.perturb else {
        return (Check { name: name.into(), passed: false, metrics, message: Some("gap below threshold".into()) }, None);
    };
    let family = match build_family(corrected, curve.variety(), curve.domain(), &scenario.solver.family_settings()) {
        Ok(f) => f,
        Err(e) => return (Check::failed(name, format!("perturbation family: {e}")), None),
    };
    let settings = PerturbSettings {
        seed: scenario.solver.seed,
        attempts: perturb.attempts,
        c1_bound: perturb.c1_bound,
        grid: spec.grid,
        delta: spec.delta,
        solver: scenario.solver.solver_settings(),
    };
    match perturb_to_embedding(curve, &family, &settings) {
        Ok(out) => {
            let passed = out.gap.gap > spec.min_gap && out.c1_distance < perturb.c1_bound;
            metrics.push(metric("perturbed_gap", out.gap.gap, Some(spec.min_gap)));
            metrics.push(metric("c1_distance", out.c1_distance, Some(perturb.c1_bound)));
            metrics.push(metric("chosen_attempt", out.chosen as f64, None));
            for a in &out.attempts[1..] {
                metrics.push(metric(&format!("attempt_{}_gap", a.index), a.gap.unwrap_or(f64::NAN), None));
            }
            let message = (!passed).then(|| "no perturbation reached the gap threshold".to_string());
            (Check { name: name.into(), passed, metrics, message }, Some(out.curve))
        }
        Err(e) => (Check::failed(name, e.to_string()), None),
    }
}

fn sl2_check(curve: &DirectedCurve, spec: &Sl2Spec) -> Check {
    match to_sl2(curve, spec.grid) {
        Ok(s) => Check {
            name: "sl2".into(),
            passed: s.det_residual < spec.det_tol && s.null_residual < spec.null_tol,
            metrics: vec![
                metric("det_residual", s.det_residual, Some(spec.det_tol)),
                metric("null_residual", s.null_residual, Some(spec.null_tol)),
                metric("min_abs_f3", s.min_abs_f3, None),
            ],
            message: None,
        },
        Err(e) => Check::failed("sl2", e.to_string()),
    }
}

fn mesh_check(curve: &DirectedCurve, spec: &MeshSpec) -> (Check, Option<String>) {
    let settings = spec.settings();
    let study = match mesh_convergence(curve, &settings, spec.levels.max(2)) {
        Ok(s) => s,
        Err(e) => return (Check::failed("mesh", e.to_string()), None),
    };
    let mesh = match minimal_surface_mesh(curve, &settings) {
        Ok(m) => m,
        Err(e) => return (Check::failed("mesh", e.to_string()), None),
    };
    let mut metrics = vec![
        metric("max_conformality", mesh.max_conformality, None),
        metric("max_harmonicity", mesh.max_harmonicity, None),
        metric("relative_conformality", mesh.relative_conformality, None),
        metric("flagged", if mesh.flagged { 1.0 } else { 0.0 }, None),
    ];
    // The flag uses a fixed truncation constant and trips on well resolved but
    // strongly curved surfaces; the refinement orders decide the check, since
    // data off the cone leaves a residual that does not shrink with h.
    let mut passed = true;
    for (i, level) in study.iter().enumerate().skip(1) {
        for (label, order) in [("conformality", level.conformality_order), ("harmonicity", level.harmonicity_order)] {
            let order = order.unwrap_or(f64::NAN);
            passed &= order >= spec.min_order;
            metrics.push(metric(&format!("{label}_order_{i}"), order, Some(spec.min_order)));
        }
    }
    let message = mesh.flagged.then(|| "conformality residual exceeds 10 h^2 on the finest grid".to_string());
    (Check { name: "mesh".into(), passed, metrics, message }, Some(mesh.to_obj()))
}

/// Eight shells from the outermost hole boundary (or an eighth of the radius
/// for a disc) out to the outer circle.
pub fn default_shells(domain: &PlanarDomain) -> Vec<f64> {
    let outer = domain.outer();
    let reach = domain
        .holes()
        .iter()
        .map(|h| (h.center - outer.center).norm() + h.radius)
        .fold(outer.radius / 8.0, f64::max);
    (0..8).map(|k| reach + (outer.radius - reach) * k as f64 / 7.0).collect()
}

fn growth_check(curve: &DirectedCurve, spec: &GrowthSpec) -> Check {
    let shells = if spec.shells.is_empty() { default_shells(curve.domain()) } else { spec.shells.clone() };
    match growth_profile(curve, &shells) {
        Ok(rows) => Check {
            name: "growth".into(),
            passed: true,
            metrics: rows.iter().map(|r| metric(&format!("shell_{}", r.radius), r.value, None)).collect(),
            message: None,
        },
        Err(e) => Check::failed("growth", e.to_string()),
    }
}

/// Built-in scenario for a named generator, as used by `demo`.
pub fn demo_scenario(generator: &str) -> Scenario {
    let (inner, outer) = match generator {
        "catenoid" => (0.5, 2.0),
        "even-selfcross" => (0.75, 1.5),
        _ => (0.5, 1.5),
    };
    let mut text = format!(
        r#"{{"name": "demo {generator}", "variety": "null3",
            "domain": {{"outer": {{"c": [0, 0], "r": {outer}}}, "holes": [{{"c": [0, 0], "r": {inner}}}]}},
            "seed_map": {{"generator": "{generator}"}},
            "certify": {{"mesh": {{}}, "growth": {{}}"#
    );
    if generator == "even-selfcross" {
        text.push_str(r#", "embedding": {"perturb": {}}"#);
    }
    if generator == "catenoid" {
        text.push_str(r#", "sl2": {}}, "base": {"point": [1, 0], "value": [[0, 0], [0, 0], [5, 0]]}}"#);
    } else {
        text.push_str("}}");
    }
    Scenario::from_json(&text).expect("built-in scenario is valid")
}

/// Exit code each generator's demo is expected to produce: the straight line is
/// degenerate and must be rejected by the solver.
pub fn demo_expectation(generator: &str) -> i32 {
    if generator == "line" {
        EXIT_SOLVER
    } else {
        EXIT_OK
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoRun {
    pub generator: String,
    pub exit_code: i32,
    pub expected_exit_code: i32,
    pub status: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoSummary {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub scenario_hash: String,
    pub exit_code: i32,
    pub runs: Vec<DemoRun>,
}

/// Run every named generator through `certify` in `out_dir/<name>/`. Exit 0 iff
/// every run ends as expected.
pub fn run_demo(options: &RunOptions) -> (i32, DemoSummary) {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    let mut runs = Vec::new();
    for name in nullforge::generators::NAMES {
        let mut scenario = demo_scenario(name);
        if let Some(seed) = options.seed {
            scenario.solver.seed = seed;
        }
        if let Some(grid) = options.grid {
            if let Some(e) = scenario.certify.embedding.as_mut() {
                e.grid = grid;
            }
        }
        hasher.update(scenario.hash().as_bytes());
        let dir = options.out_dir.join(name);
        let sub = RunOptions { out_dir: dir.clone(), ..options.clone() };
        let outcome = run_parsed(&scenario, Command::Certify, &sub);
        if let Ok(text) = serde_json::to_string_pretty(&scenario) {
            let _ = fs::write(dir.join("scenario.json"), text + "\n");
        }
        runs.push(DemoRun {
            generator: name.to_string(),
            exit_code: outcome.exit_code,
            expected_exit_code: demo_expectation(name),
            status: outcome.summary.status.clone(),
            summary: format!("{name}/{}", scenario.outputs.summary),
        });
    }
    let worst = runs.iter().filter(|r| r.exit_code != r.expected_exit_code).map(|r| r.exit_code.max(1)).max();
    let summary = DemoSummary {
        tool: TOOL,
        version: VERSION,
        command: "demo",
        scenario_hash: hasher.finalize().iter().map(|b| format!("{b:02x}")).collect(),
        exit_code: worst.unwrap_or(EXIT_OK),
        runs,
    };
    let path = options.out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    let code = match fs::create_dir_all(&options.out_dir).and_then(|_| fs::write(&path, text)) {
        Ok(()) => summary.exit_code,
        Err(e) => {
            log::error!("cannot write {}: {e}", path.display());
            EXIT_IO
        }
    };
    (code, summary)
}

/// Format a complex number for human-readable output.
pub fn fmt_complex(z: C64) -> String {
    format!("{:.6}{:+.6}i", z.re, z.im)
}
