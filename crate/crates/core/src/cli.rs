//! Command-line runner: JSON configuration, mode dispatch and artifact
//! emission (CSV tables, JSON reports, boundary polylines).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::branch::{branch_csv, fit_circle, trace_branch, BranchProblem, BranchTrace, JacobianSource, NewtonOptions, TrustRegion};
use crate::digest::stable_hash;
use crate::error::Error;
use crate::fourier::{cos_index, mode_of, sin_index, uniform_angles, AngularField};
use crate::geometry::GeometrySpec;
use crate::operator::{assemble_gamma, assemble_q, nondegeneracy_report, LinearOperatorMatrix};
use crate::oracles::{ball_q_eigenvalue, gamma_mode, radial_two_phase};
use crate::shape::{add_fields, energy_identity, residual_abs, residual_g, solve_shape_derivatives, ParamVector};
use crate::solver::{criticality, solve_state, Conductivity, Resolution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;
pub const EXIT_VERIFY: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    Spectrum,
    Branch,
    BranchProjected,
    Verify,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub rho: f64,
    /// Fourier coefficients `[a0, a1, b1, a2, b2, …]` of the outer graph.
    pub xi: Vec<f64>,
    /// Fourier coefficients of the inclusion graph perturbation.
    pub phi: Vec<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            rho: 0.5,
            xi: Vec::new(),
            phi: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConductivityConfig {
    pub sigma_c: f64,
    pub s: f64,
}

impl Default for ConductivityConfig {
    fn default() -> Self {
        Self { sigma_c: 2.0, s: 0.0 }
    }
}

/// Branch parameter `λ`; the traced path is `t λ` for `t ∈ (0, 1]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParameterConfig {
    pub phi: Vec<f64>,
    pub f: Vec<f64>,
    pub s: f64,
    pub eta: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionConfig {
    pub modes: usize,
    pub annulus_nodes: Option<usize>,
    pub inner_nodes: Option<usize>,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        Self {
            modes: 32,
            annulus_nodes: None,
            inner_nodes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub newton: f64,
    pub max_iter: usize,
    pub refresh: usize,
    pub jacobian: JacobianSource,
    pub degeneracy: f64,
    pub verify: f64,
    pub trust: TrustRegion,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let n = NewtonOptions::default();
        Self {
            newton: n.tol,
            max_iter: n.max_iter,
            refresh: n.refresh,
            jacobian: n.jacobian,
            degeneracy: n.rel_tol,
            verify: 1e-9,
            trust: n.trust,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// `[min, max, count]`.
    pub rho: (f64, f64, usize),
    pub sigma_c: (f64, f64, usize),
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            rho: (0.3, 0.8, 6),
            sigma_c: (0.25, 4.0, 6),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub geometry: GeometryConfig,
    pub conductivity: ConductivityConfig,
    pub parameters: ParameterConfig,
    pub resolution: ResolutionConfig,
    pub tolerances: ToleranceConfig,
    pub steps: usize,
    pub sweep: SweepConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Verify,
            geometry: GeometryConfig::default(),
            conductivity: ConductivityConfig::default(),
            parameters: ParameterConfig::default(),
            resolution: ResolutionConfig::default(),
            tolerances: ToleranceConfig::default(),
            steps: 10,
            sweep: SweepConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            jobs: 1,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(Error),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Solver(_) | CliError::Io { .. } => EXIT_SOLVER,
            CliError::Degenerate(_) => EXIT_DEGENERATE,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DegenerateBase { .. } => CliError::Degenerate(e.to_string()),
            e => CliError::Solver(e),
        }
    }
}

fn field(coeffs: &[f64], what: &str) -> Result<AngularField, CliError> {
    if coeffs.is_empty() {
        return Ok(AngularField::zeros(0));
    }
    AngularField::new(coeffs.to_vec()).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

/// Validated inputs derived from a configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub geom: GeometrySpec,
    pub cond: Conductivity,
    pub res: Resolution,
    pub lambda: ParamVector,
    pub newton: NewtonOptions,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed configuration: {e}")))
    }

    /// Digest of everything that affects the numbers; the output location
    /// and thread count are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.jobs = 1;
        stable_hash(&c)
    }

    pub fn prepare(&self) -> Result<Prepared, CliError> {
        let cfg = |e: Error| CliError::Config(e.to_string());
        let geom = GeometrySpec::new(
            field(&self.geometry.xi, "geometry.xi")?,
            field(&self.geometry.phi, "geometry.phi")?,
            self.geometry.rho,
        )
        .map_err(cfg)?;
        let cond = Conductivity::new(self.conductivity.sigma_c, self.conductivity.s).map_err(cfg)?;
        let mut res = Resolution::with_modes(self.resolution.modes);
        if let Some(n) = self.resolution.annulus_nodes {
            res.annulus_nodes = n;
        }
        if let Some(n) = self.resolution.inner_nodes {
            res.inner_nodes = n;
        }
        res.validate().map_err(cfg)?;
        let lambda = ParamVector {
            phi: field(&self.parameters.phi, "parameters.phi")?,
            f: field(&self.parameters.f, "parameters.f")?,
            s: self.parameters.s,
            eta: self.parameters.eta,
        };
        let t = &self.tolerances;
        let newton = NewtonOptions {
            tol: t.newton,
            max_iter: t.max_iter,
            refresh: t.refresh,
            jacobian: t.jacobian,
            trust: t.trust,
            rel_tol: t.degeneracy,
        };
        newton.trust.check(&lambda).map_err(cfg)?;
        if !(t.newton > 0.0 && t.degeneracy > 0.0 && t.verify > 0.0) {
            return Err(CliError::Config("tolerances must be positive".into()));
        }
        if matches!(self.mode, Mode::Branch | Mode::BranchProjected) && self.steps == 0 {
            return Err(CliError::Config("steps must be at least 1".into()));
        }
        if self.mode == Mode::Verify && self.resolution.modes < 8 {
            return Err(CliError::Config("verify mode needs at least 8 modes".into()));
        }
        if self.mode == Mode::Sweep && (self.sweep.rho.2 == 0 || self.sweep.sigma_c.2 == 0) {
            return Err(CliError::Config("sweep axes need at least one point".into()));
        }
        // the path ends at λ, so the inclusion must stay admissible there
        lambda.realize(&geom, &cond, &AngularField::zeros(0)).map_err(cfg)?;
        Ok(Prepared {
            geom,
            cond,
            res,
            lambda,
            newton,
        })
    }
}

/// Files written by a run and whether its checks passed.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
    pub summary: serde_json::Value,
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(io)?;
    file.write_all(contents.as_bytes()).map_err(io)?;
    file.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

struct Emitter {
    dir: PathBuf,
    hash: String,
    files: Vec<PathBuf>,
}

impl Emitter {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, mut value: serde_json::Value) -> Result<serde_json::Value, CliError> {
        value["config_hash"] = json!(self.hash);
        let text = serde_json::to_string_pretty(&value).expect("json value") + "\n";
        self.write(name, &text)?;
        Ok(value)
    }

    fn csv(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        self.write(name, &format!("# config_hash={}\n{body}", self.hash))
    }
}

pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    let prepared = config.prepare()?;
    let mut out = Emitter {
        dir: config.output_dir.clone(),
        hash: config.hash(),
        files: Vec::new(),
    };
    let (summary, passed) = match config.mode {
        Mode::Solve => (run_solve(&prepared, &mut out)?, true),
        Mode::Spectrum => (run_spectrum(&prepared, &mut out)?, true),
        Mode::Branch | Mode::BranchProjected => (run_branch(config, &prepared, &mut out)?, true),
        Mode::Verify => run_verify(&prepared, config.tolerances.verify, config.seed, &mut out)?,
        Mode::Sweep => (run_sweep(config, &prepared, &mut out)?, true),
    };
    Ok(RunOutcome {
        files: out.files,
        passed,
        summary,
    })
}

fn run_solve(p: &Prepared, out: &mut Emitter) -> Result<serde_json::Value, CliError> {
    let sol = solve_state(&p.geom, &p.cond, &p.res)?;
    let crit = criticality(&sol);
    let g = residual_g(&sol, &p.lambda.f, crit.c);
    let g_abs = residual_abs(&sol, &p.lambda.f, crit.c)?;
    let (jump, flux) = sol.interface_mismatch();
    out.json(
        "solve.json",
        json!({
            "mode": "solve",
            "c": crit.c,
            "criticality_defect": crit.relative_defect,
            "residual_sup": g.sup_norm(),
            "abs_residual_sup": g_abs.sup_norm(),
            "flux_identity_defect": sol.flux_defect(),
            "pde_residual": sol.pde_residual(),
            "interface_jump": jump,
            "interface_flux_jump": flux,
            "area": p.geom.area(),
            "unknowns": p.res.unknowns(),
        }),
    )
}

fn spectrum_summary(op: &LinearOperatorMatrix, rel_tol: f64) -> Result<serde_json::Value, CliError> {
    let rep = nondegeneracy_report(op, rel_tol)?;
    Ok(json!({
        "kind": op.kind.label(),
        "geometry_id": op.geometry_id,
        "is_nondegenerate": rep.is_nondegenerate,
        "kernel_dimension": rep.kernel_basis.len(),
        "smallest_sv": rep.smallest_sv,
        "largest_sv": rep.largest_sv,
        "ratio": rep.ratio,
    }))
}

fn run_spectrum(p: &Prepared, out: &mut Emitter) -> Result<serde_json::Value, CliError> {
    let sol = solve_state(&p.geom, &p.cond, &p.res)?;
    let gamma = assemble_gamma(&sol)?;
    out.csv("gamma.csv", &gamma.to_csv())?;
    out.csv("gamma_spectrum.csv", &gamma.spectrum_csv())?;
    let mut summary = json!({
        "mode": "spectrum",
        "gamma": spectrum_summary(&gamma, p.newton.rel_tol)?,
    });
    match assemble_q(&gamma, &sol) {
        Ok(q) => {
            out.csv("q.csv", &q.to_csv())?;
            out.csv("q_spectrum.csv", &q.spectrum_csv())?;
            summary["q"] = spectrum_summary(&q, p.newton.rel_tol)?;
        }
        Err(Error::NotCritical { c, relative_defect }) => {
            summary["q"] = json!({ "skipped": "base is not critical", "c": c, "relative_defect": relative_defect });
        }
        Err(e) => return Err(e.into()),
    }
    out.json("spectrum.json", summary)
}

/// `(θ, x, y)` rows of the outer boundary at four times the collocation
/// density.
pub fn boundary_polyline(radius: &AngularField, angular_nodes: usize) -> String {
    let mut s = String::from("theta,x,y\n");
    for th in uniform_angles(4 * angular_nodes) {
        let r = radius.eval(th);
        s.push_str(&format!("{th:.17e},{:.17e},{:.17e}\n", r * th.cos(), r * th.sin()));
    }
    s
}

fn run_branch(config: &RunConfig, p: &Prepared, out: &mut Emitter) -> Result<serde_json::Value, CliError> {
    let problem = if config.mode == Mode::Branch {
        BranchProblem::new(&p.geom, &p.cond, &p.res, p.newton.rel_tol)?
    } else {
        BranchProblem::projected(&p.geom, &p.cond, &p.res).map_err(|e| match e {
            Error::InvalidArgument(m) => CliError::Config(m),
            e => e.into(),
        })?
    };
    let lambda = p.lambda.clone();
    let path = move |t: f64| lambda.scaled(t);
    let trace: BranchTrace = trace_branch(&problem, &path, config.steps, &p.newton)?;
    let csv = branch_csv(&trace, p.res.modes, &out.hash);
    out.write("branch.csv", &csv)?;
    let mut summary = json!({
        "mode": config.mode,
        "c": problem.c(),
        "samples": trace.samples.len(),
        "completed": trace.completed(),
    });
    if let Some(last) = trace.samples.last() {
        let total = problem.total_correction(&last.xi, &last.lambda);
        let radius = add_fields(&AngularField::constant(0, 1.0), &add_fields(p.geom.xi(), &total));
        out.csv("boundary.csv", &boundary_polyline(&radius, p.res.angular_nodes()))?;
        let fit = fit_circle(&add_fields(p.geom.xi(), &total));
        summary["final"] = json!({
            "t": last.t,
            "residual_norm": last.residual_norm,
            "xi_sup": last.xi.sup_norm(),
            "gamma_smallest_sv": last.gamma_smallest_sv,
            "circle_fit": fit,
        });
    }
    let summary = out.json("branch.json", summary)?;
    match &trace.failure {
        None => Ok(summary),
        Some(f) if f.degenerate => Err(CliError::Degenerate(format!("at t = {}: {}", f.t, f.message))),
        Some(f) => Err(CliError::Solver(Error::InvalidArgument(format!(
            "branch stopped at t = {}: {}",
            f.t, f.message
        )))),
    }
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: &'static str,
    max_abs_error: f64,
    tolerance: f64,
    passed: bool,
}

impl Check {
    fn new(name: &'static str, max_abs_error: f64, tolerance: f64) -> Self {
        Self {
            name,
            max_abs_error,
            tolerance,
            passed: max_abs_error < tolerance,
        }
    }
}

fn run_verify(p: &Prepared, tol: f64, seed: u64, out: &mut Emitter) -> Result<(serde_json::Value, bool), CliError> {
    let k = p.res.modes;
    let disk = GeometrySpec::concentric(0.5)?;
    let sol = solve_state(&disk, &Conductivity::one_phase(), &p.res)?;
    let q = assemble_q(&assemble_gamma(&sol)?, &sol)?;
    let mut table = Vec::new();
    let mut worst = 0.0_f64;
    for m in 0..=8.min(k) {
        let reference = ball_q_eigenvalue(m, 2);
        let idx = if m == 0 { vec![0] } else { vec![cos_index(m), sin_index(m)] };
        let err = idx.iter().map(|&i| (q.entry(i, i) - reference).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
        table.push(json!({ "k": m, "computed": q.entry(idx[0], idx[0]), "reference": reference, "abs_error": err }));
    }
    let mut checks = vec![Check::new("q_ball_eigenvalues", worst, tol)];
    checks.push(Check::new("q_ball_off_diagonal", q.off_diagonal_leakage(), tol));
    let rep = nondegeneracy_report(&q, p.newton.rel_tol)?;
    let kernel_excess = (rep.kernel_basis.len() as f64 - 2.0).abs()
        + rep
            .kernel_basis
            .iter()
            .map(|v| (1.0 - v.a(1).hypot(v.b(1))).abs())
            .fold(0.0, f64::max);
    checks.push(Check::new("q_ball_kernel", kernel_excess, tol));

    let two = GeometrySpec::concentric(0.5)?;
    let cond = Conductivity::new(2.0, 0.0)?;
    let sol2 = solve_state(&two, &cond, &p.res)?;
    let gamma = assemble_gamma(&sol2)?;
    let mut worst = 0.0_f64;
    for i in 0..gamma.dim() {
        worst = worst.max((gamma.entry(i, i) - gamma_mode(mode_of(i), 0.5, 2.0)?).abs());
    }
    checks.push(Check::new("gamma_two_phase_modes", worst, tol));
    let profile = radial_two_phase(0.5, 2.0, 2, 1.0)?;
    let nodes = sol2.system().nodes();
    let state_err = nodes
        .iter()
        .zip(sol2.values())
        .map(|(n, v)| (v - profile.eval(n.radius)).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new("radial_two_phase_state", state_err, 1e-10));

    // seeded random directions: the energy identity and linearity of u'
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut random_dir = || {
        let c = (0..2 * k + 1).map(|i| rng.gen_range(-1.0..1.0) / (1 + mode_of(i).pow(2)) as f64).collect();
        AngularField::new(c)
    };
    let (x, y) = (random_dir()?, random_dir()?);
    let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let combo = add_fields(&x.scaled(a), &y.scaled(b));
    let du = solve_shape_derivatives(&sol2, &[x, y, combo])?;
    let energy = du.iter().map(|d| energy_identity(&sol2, d).abs()).fold(0.0, f64::max);
    checks.push(Check::new("random_energy_identity", energy, tol));
    let expect = add_fields(&du[0].dn.scaled(a), &du[1].dn.scaled(b));
    checks.push(Check::new("random_shape_linearity", du[2].dn.max_abs_coeff_diff(&expect), tol));
    let passed = checks.iter().all(|c| c.passed);
    let summary = out.json(
        "verify.json",
        json!({ "mode": "verify", "seed": seed, "passed": passed, "checks": checks, "q_table": table }),
    )?;
    Ok((summary, passed))
}

fn axis((lo, hi, n): (f64, f64, usize)) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn sweep_cell(rho: f64, sigma: f64, res: &Resolution) -> Result<(f64, f64), Error> {
    let geom = GeometrySpec::concentric(rho)?;
    let sol = solve_state(&geom, &Conductivity::new(sigma, 0.0)?, res)?;
    let gamma = assemble_gamma(&sol)?;
    let s = &gamma.singular_values;
    Ok((*s.last().unwrap(), s.last().unwrap() / s[0]))
}

fn run_sweep(config: &RunConfig, p: &Prepared, out: &mut Emitter) -> Result<serde_json::Value, CliError> {
    let cells: Vec<(f64, f64)> = axis(config.sweep.rho)
        .into_iter()
        .flat_map(|r| axis(config.sweep.sigma_c).into_iter().map(move |s| (r, s)))
        .collect();
    let jobs = config.jobs.max(1).min(cells.len());
    let chunk = cells.len().div_ceil(jobs);
    let results: Vec<Result<(f64, f64), Error>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(|&(r, s)| sweep_cell(r, s, &p.res)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut body = String::from("rho,sigma_c,gamma_smallest_sv,ratio\n");
    let mut failures = 0;
    for (&(r, s), res) in cells.iter().zip(&results) {
        match res {
            Ok((sv, ratio)) => body.push_str(&format!("{r:.17e},{s:.17e},{sv:.17e},{ratio:.17e}\n")),
            Err(_) => {
                failures += 1;
                body.push_str(&format!("{r:.17e},{s:.17e},nan,nan\n"));
            }
        }
    }
    out.csv("sweep.csv", &body)?;
    out.json("sweep.json", json!({ "mode": "sweep", "cells": cells.len(), "failed_cells": failures }))
}

/// Help text listing exit codes.
const EXIT_HELP: &str = "Exit codes:\n  0  success\n  2  configuration error\n  3  solver error\n  4  degenerate base or branch\n  5  verification failure";

#[derive(Debug, Parser)]
#[command(name = "serrin", version, about = "Two-phase overdetermined torsion problem: states, spectra and solution branches", after_help = EXIT_HELP)]
pub struct Args {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fourier cutoff, as `K=<int>`.
    #[arg(long, value_parser = parse_resolution)]
    pub resolution: Option<usize>,
    /// Newton tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for sweep mode.
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn parse_resolution(s: &str) -> Result<usize, String> {
    let v = s.strip_prefix("K=").or_else(|| s.strip_prefix("k=")).unwrap_or(s);
    v.parse().map_err(|_| format!("expected K=<int>, got {s:?}"))
}

impl Args {
    pub fn into_config(self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                RunConfig::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(m) = self.mode {
            config.mode = m;
        }
        if let Some(o) = self.out {
            config.output_dir = o;
        }
        if let Some(k) = self.resolution {
            config.resolution.modes = k;
        }
        if let Some(t) = self.tol {
            config.tolerances.newton = t;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(j) = self.jobs {
            config.jobs = j;
        }
        Ok(config)
    }
}

/// Parses arguments, runs, reports on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = args.into_config().and_then(|c| run(&c));
    match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.passed {
                EXIT_OK
            } else {
                eprintln!("serrin: verification failed");
                EXIT_VERIFY
            }
        }
        Err(e) => {
            eprintln!("serrin: {e}");
            e.exit_code()
        }
    }
}
