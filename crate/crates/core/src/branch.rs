//! Newton continuation of solutions `ξ(λ)` of the overdetermined problem
//! near a critical base, with a projected variant for the one-phase disk,
//! and a circle fit for inspecting translated-disk branches.

use faer::prelude::*;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::digest::stable_hash;
use crate::error::{Error, Result};
use crate::fourier::{uniform_angles, AngularField};
use crate::geometry::GeometrySpec;
use crate::operator::{
    assemble_gamma, assemble_q, coeff_label, nondegeneracy_report, project_bar, q_bar, residual_jacobian, LinearOperatorMatrix,
    OperatorKind, DEFAULT_REL_TOL,
};
use crate::shape::{add_fields, residual_g, ParamVector};
use crate::solver::{compute_c, solve_state, Conductivity, PulledBackSolution, Resolution};

/// Step of the finite-difference Jacobian.
pub const FD_JACOBIAN_STEP: f64 = 1e-6;

/// Admissible parameter sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustRegion {
    pub phi: f64,
    pub f: f64,
    pub s: f64,
    pub eta: f64,
}

impl Default for TrustRegion {
    fn default() -> Self {
        Self {
            phi: 0.1,
            f: 0.1,
            s: 1.0,
            eta: 0.15,
        }
    }
}

impl TrustRegion {
    pub fn check(&self, lambda: &ParamVector) -> Result<()> {
        let violations = [
            ("phi", lambda.phi.sup_norm(), self.phi),
            ("f", lambda.f.sup_norm(), self.f),
            ("s", lambda.s.abs(), self.s),
            ("eta", lambda.eta_norm(), self.eta),
        ];
        for (name, value, bound) in violations {
            if !(value <= bound) {
                return Err(Error::OutsideTrustRegion(format!("|{name}| = {value:.3e} exceeds {bound}")));
            }
        }
        Ok(())
    }
}

/// How a refreshed Jacobian is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianSource {
    /// Shape-derivative formula at the current geometry: one factorization,
    /// accurate to the discretization error of the state.
    #[default]
    Analytic,
    /// Central differences of the discrete residual: `2(2K+1)` state
    /// solves, consistent with the discrete map to `O(h²)`.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    /// Sup-norm tolerance on the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Reassemble the Jacobian at the current iterate every `refresh`
    /// iterations; 0 keeps the base Jacobian throughout.
    pub refresh: usize,
    pub jacobian: JacobianSource,
    pub trust: TrustRegion,
    /// Relative singular-value threshold for degeneracy.
    pub rel_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 30,
            refresh: 3,
            jacobian: JacobianSource::Analytic,
            trust: TrustRegion::default(),
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

impl NewtonOptions {
    pub fn chord() -> Self {
        Self {
            refresh: 0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonIterate {
    pub iteration: usize,
    pub residual: f64,
    /// Sup norm of the step that produced this iterate (0 for the guess).
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterates: Vec<NewtonIterate>,
    pub converged: bool,
    pub final_xi: AngularField,
    pub jacobian_refreshes: usize,
}

impl NewtonReport {
    /// Number of Newton steps taken.
    pub fn steps(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn final_residual(&self) -> f64 {
        self.iterates.last().map_or(f64::INFINITY, |i| i.residual)
    }

    /// Successive residual ratios `r_{n+1} / r_n`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.iterates.windows(2).map(|w| w[1].residual / w[0].residual).collect()
    }

    /// Order estimate `log(r₃/r₂) / log(r₂/r₁)` over the last three iterates.
    pub fn convergence_order(&self) -> Option<f64> {
        let n = self.iterates.len();
        if n < 3 {
            return None;
        }
        let r: Vec<f64> = self.iterates[n - 3..].iter().map(|i| i.residual).collect();
        Some((r[2] / r[1]).ln() / (r[1] / r[0]).ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchMode {
    /// `h(ξ, λ) = 0` at a nondegenerate base.
    Full,
    /// `π_bar h(ξ + η, λ) = 0` with `ξ ⊥ span{cos θ, sin θ}` at the one-phase disk.
    Projected,
}

/// A base configuration prepared for continuation: its constant `c` and
/// the Jacobian used by the chord iteration.
#[derive(Debug, Clone)]
pub struct BranchProblem {
    base_geom: GeometrySpec,
    base_cond: Conductivity,
    res: Resolution,
    mode: BranchMode,
    c: f64,
    base_jacobian: LinearOperatorMatrix,
}

impl BranchProblem {
    /// Checks criticality and nondegeneracy of `Q` at the base.
    pub fn new(geom: &GeometrySpec, cond: &Conductivity, res: &Resolution, rel_tol: f64) -> Result<Self> {
        let sol = solve_state(geom, cond, res)?;
        let c = compute_c(&sol)?;
        let q = assemble_q(&assemble_gamma(&sol)?, &sol)?;
        let report = nondegeneracy_report(&q, rel_tol)?;
        if !report.is_nondegenerate {
            return Err(Error::DegenerateBase { ratio: report.ratio });
        }
        Ok(Self {
            base_geom: geom.clone(),
            base_cond: *cond,
            res: *res,
            mode: BranchMode::Full,
            c,
            base_jacobian: q,
        })
    }

    /// Projected problem at the one-phase disk `R ≡ 1`, `σ ≡ 1`.
    pub fn projected(geom: &GeometrySpec, cond: &Conductivity, res: &Resolution) -> Result<Self> {
        if !geom.xi().is_zero() || cond.inclusion() != 1.0 {
            return Err(Error::InvalidArgument(
                "the projected problem is only available at the one-phase unit disk".into(),
            ));
        }
        let sol = solve_state(geom, cond, res)?;
        let c = compute_c(&sol)?;
        let qb = q_bar(&assemble_q(&assemble_gamma(&sol)?, &sol)?)?;
        Ok(Self {
            base_geom: geom.clone(),
            base_cond: *cond,
            res: *res,
            mode: BranchMode::Projected,
            c,
            base_jacobian: qb,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn mode(&self) -> BranchMode {
        self.mode
    }

    pub fn resolution(&self) -> &Resolution {
        &self.res
    }

    pub fn base_geometry(&self) -> &GeometrySpec {
        &self.base_geom
    }

    pub fn base_conductivity(&self) -> &Conductivity {
        &self.base_cond
    }

    pub fn base_jacobian(&self) -> &LinearOperatorMatrix {
        &self.base_jacobian
    }

    /// Boundary correction actually applied to the outer graph: `ξ + η`.
    pub fn total_correction(&self, xi: &AngularField, lambda: &ParamVector) -> AngularField {
        match self.mode {
            BranchMode::Full => xi.clone(),
            BranchMode::Projected => add_fields(xi, &lambda.eta_field(self.res.modes)),
        }
    }

    /// Geometry, conductivity and state at `(ξ, λ)`.
    pub fn state(&self, xi: &AngularField, lambda: &ParamVector) -> Result<PulledBackSolution> {
        let total = self.total_correction(xi, lambda);
        let (geom, cond) = lambda.realize(&self.base_geom, &self.base_cond, &total)?;
        solve_state(&geom, &cond, &self.res)
    }

    /// Full residual `(∂ₙu)² - (c + f)²` at `(ξ, λ)`.
    pub fn full_residual(&self, xi: &AngularField, lambda: &ParamVector) -> Result<AngularField> {
        let sol = self.state(xi, lambda)?;
        Ok(residual_g(&sol, &lambda.f, self.c))
    }

    fn residual_of(&self, sol: &PulledBackSolution, lambda: &ParamVector) -> AngularField {
        let g = residual_g(sol, &lambda.f, self.c);
        match self.mode {
            BranchMode::Full => g,
            BranchMode::Projected => project_bar(&g),
        }
    }

    fn jacobian_at(&self, sol: &PulledBackSolution) -> Result<LinearOperatorMatrix> {
        let j = residual_jacobian(sol)?;
        match self.mode {
            BranchMode::Full => Ok(j),
            BranchMode::Projected => q_bar(&j),
        }
    }

    /// Jacobian of the (projected) residual in `ξ` by central differences
    /// of step `h` along each basis direction.
    pub fn fd_jacobian(&self, xi: &AngularField, lambda: &ParamVector, h: f64) -> Result<LinearOperatorMatrix> {
        let k = self.res.modes;
        let n = 2 * k + 1;
        let xi = xi.resized(k);
        let mut m = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            let e = AngularField::basis(k, j).scaled(h);
            let gp = residual_g(&self.state(&(&xi + &e), lambda)?, &lambda.f, self.c);
            let gm = residual_g(&self.state(&(&xi - &e), lambda)?, &lambda.f, self.c);
            let col = (&gp - &gm).scaled(0.5 / h);
            for i in 0..n {
                m[(i, j)] = col.coeffs()[i];
            }
        }
        let id = stable_hash(&(xi.coeffs(), lambda, &self.base_geom, &self.base_cond, &self.res));
        let j = LinearOperatorMatrix::new(m, OperatorKind::Jacobian, id, (0..n).collect(), k)?;
        match self.mode {
            BranchMode::Full => Ok(j),
            BranchMode::Projected => q_bar(&j),
        }
    }

    fn check_lambda(&self, lambda: &ParamVector, opts: &NewtonOptions) -> Result<()> {
        opts.trust.check(lambda)?;
        if self.mode == BranchMode::Full && lambda.eta != [0.0, 0.0] {
            return Err(Error::InvalidArgument(
                "eta is a parameter of the projected problem only".into(),
            ));
        }
        Ok(())
    }

    /// Newton iteration from `guess` (zero by default).
    pub fn solve(&self, lambda: &ParamVector, guess: Option<&AngularField>, opts: &NewtonOptions) -> Result<(AngularField, NewtonReport)> {
        self.check_lambda(lambda, opts)?;
        let k = self.res.modes;
        let mut xi = guess.map_or_else(|| AngularField::zeros(k), |g| g.resized(k));
        if self.mode == BranchMode::Projected {
            xi = project_bar(&xi);
        }
        let mut jac = self.base_jacobian.clone();
        let mut iterates = Vec::new();
        let mut refreshes = 0;
        let mut step_norm = 0.0;
        for it in 0..=opts.max_iter {
            let sol = self.state(&xi, lambda)?;
            let g = self.residual_of(&sol, lambda);
            let r = g.sup_norm();
            iterates.push(NewtonIterate {
                iteration: it,
                residual: r,
                step: step_norm,
            });
            if r <= opts.tol {
                return Ok((
                    xi.clone(),
                    NewtonReport {
                        iterates,
                        converged: true,
                        final_xi: xi,
                        jacobian_refreshes: refreshes,
                    },
                ));
            }
            let diverged = !r.is_finite() || r > 1e3 * iterates[0].residual.max(opts.tol);
            if it == opts.max_iter || diverged {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: r,
                });
            }
            if opts.refresh > 0 && it > 0 && it % opts.refresh == 0 {
                jac = match opts.jacobian {
                    JacobianSource::Analytic => self.jacobian_at(&sol)?,
                    JacobianSource::FiniteDifference => self.fd_jacobian(&xi, lambda, FD_JACOBIAN_STEP)?,
                };
                refreshes += 1;
            }
            let step = jac.solve(&g)?;
            step_norm = step.sup_norm();
            xi = &xi - &step;
        }
        unreachable!("the loop returns on its last iteration")
    }

    /// Smallest singular value of `Γ` at a solved state, with its ratio to
    /// the largest and the number of eigenvalues with negative real part.
    /// In projected mode `Γ` is restricted to the barycenter-orthogonal
    /// subspace.
    pub fn gamma_monitor(&self, sol: &PulledBackSolution) -> Result<GammaMonitor> {
        let gamma = assemble_gamma(sol)?;
        let gamma = match self.mode {
            BranchMode::Full => gamma,
            BranchMode::Projected => q_bar(&gamma)?,
        };
        let s = &gamma.singular_values;
        let smallest = s.last().copied().unwrap_or(0.0);
        let largest = s.first().copied().unwrap_or(0.0);
        Ok(GammaMonitor {
            smallest_sv: smallest,
            ratio: if largest > 0.0 { smallest / largest } else { 0.0 },
            negative_count: negative_count(&gamma.matrix)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaMonitor {
    pub smallest_sv: f64,
    pub ratio: f64,
    pub negative_count: usize,
}

// Rotation symmetry pairs the cos and sin eigenvalues, so the determinant
// sign misses a crossing; the inertia count does not.
fn negative_count(m: &faer::Mat<f64>) -> Result<usize> {
    let eig = m
        .eigenvalues()
        .map_err(|e| Error::SingularSystem(format!("eigenvalue solve failed: {e:?}")))?;
    Ok(eig.iter().filter(|z| z.re < 0.0).count())
}

/// Solves `h(ξ, λ) = 0` from `ξ = 0` at a nondegenerate critical base.
pub fn solve_branch(
    geom: &GeometrySpec,
    cond: &Conductivity,
    lambda: &ParamVector,
    res: &Resolution,
    opts: &NewtonOptions,
) -> Result<(AngularField, NewtonReport)> {
    BranchProblem::new(geom, cond, res, opts.rel_tol)?.solve(lambda, None, opts)
}

/// Solves the projected problem at the one-phase disk with prescribed `η`.
pub fn solve_branch_projected(
    geom: &GeometrySpec,
    cond: &Conductivity,
    lambda: &ParamVector,
    res: &Resolution,
    opts: &NewtonOptions,
) -> Result<(AngularField, NewtonReport)> {
    BranchProblem::projected(geom, cond, res)?.solve(lambda, None, opts)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSample {
    pub t: f64,
    pub lambda: ParamVector,
    pub xi: AngularField,
    pub residual_norm: f64,
    pub gamma_smallest_sv: f64,
    pub gamma_ratio: f64,
    pub c: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchFailure {
    pub t: f64,
    pub message: String,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchTrace {
    pub samples: Vec<BranchSample>,
    pub failure: Option<BranchFailure>,
}

impl BranchTrace {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Continuation along `path(t)`, `t = i/steps` for `i = 1..=steps`, each
/// step warm-started from the previous `ξ`. Stops at the first failing step
/// or when `Γ` degenerates: its singular-value ratio drops below
/// `opts.rel_tol`, or its count of negative eigenvalues changes between
/// samples (a kernel was crossed). Geometry violations are returned as errors.
pub fn trace_branch(
    problem: &BranchProblem,
    path: &dyn Fn(f64) -> ParamVector,
    steps: usize,
    opts: &NewtonOptions,
) -> Result<BranchTrace> {
    if steps == 0 {
        return Err(Error::InvalidArgument("a branch needs at least one step".into()));
    }
    let mut samples: Vec<BranchSample> = Vec::with_capacity(steps);
    let mut xi = AngularField::zeros(problem.res.modes);
    let mut last_count: Option<usize> = None;
    for i in 1..=steps {
        let t = i as f64 / steps as f64;
        let lambda = path(t);
        let failure = |message: String, degenerate: bool| BranchFailure { t, message, degenerate };
        let (next, report) = match problem.solve(&lambda, Some(&xi), opts) {
            Ok(v) => v,
            Err(e) if e.is_geometry() => return Err(e),
            Err(e) => {
                return Ok(BranchTrace {
                    samples,
                    failure: Some(failure(e.to_string(), matches!(e, Error::SingularSystem(_)))),
                })
            }
        };
        let sol = problem.state(&next, &lambda)?;
        let monitor = problem.gamma_monitor(&sol)?;
        samples.push(BranchSample {
            t,
            lambda: lambda.clone(),
            xi: next.clone(),
            residual_norm: report.final_residual(),
            gamma_smallest_sv: monitor.smallest_sv,
            gamma_ratio: monitor.ratio,
            c: problem.c,
            converged: report.converged,
            iterations: report.steps(),
        });
        let crossed = last_count.is_some_and(|n| n != monitor.negative_count);
        if monitor.ratio < opts.rel_tol || crossed {
            let e = Error::DegenerateBase { ratio: monitor.ratio };
            let note = if crossed { " (an eigenvalue changed sign)" } else { "" };
            return Ok(BranchTrace {
                samples,
                failure: Some(failure(format!("{e}{note}"), true)),
            });
        }
        last_count = Some(monitor.negative_count);
        xi = next;
    }
    Ok(BranchTrace { samples, failure: None })
}

/// Branch CSV: one row per sample.
pub fn branch_csv(trace: &BranchTrace, modes: usize, config_hash: &str) -> String {
    let mut out = format!("# config_hash={config_hash} K={modes}\n");
    let mut header = vec!["t", "s", "phi_sup", "f_sup", "eta_a1", "eta_b1"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    header.extend((0..2 * modes + 1).map(|i| format!("xi_{}", coeff_label(i))));
    header.extend(["residual_norm", "gamma_smallest_sv", "c", "converged"].map(String::from));
    out.push_str(&header.join(","));
    out.push('\n');
    for s in &trace.samples {
        let mut row = vec![
            format!("{}", s.t),
            format!("{:.17e}", s.lambda.s),
            format!("{:.17e}", s.lambda.phi.sup_norm()),
            format!("{:.17e}", s.lambda.f.sup_norm()),
            format!("{:.17e}", s.lambda.eta[0]),
            format!("{:.17e}", s.lambda.eta[1]),
        ];
        row.extend(s.xi.resized(modes).coeffs().iter().map(|v| format!("{v:.17e}")));
        row.push(format!("{:.17e}", s.residual_norm));
        row.push(format!("{:.17e}", s.gamma_smallest_sv));
        row.push(format!("{:.17e}", s.c));
        row.push(u8::from(s.converged).to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleFit {
    pub center: [f64; 2],
    pub radius: f64,
    /// Largest deviation of the sampled points from the fitted circle.
    pub residual: f64,
}

fn solve_small(a: Mat<f64>, b: Mat<f64>) -> Vec<f64> {
    let x = a.partial_piv_lu().solve(&b);
    (0..x.nrows()).map(|i| x[(i, 0)]).collect()
}

/// Least-squares circle through the polar graph `1 + xi_total`: an
/// algebraic fit refined by Gauss-Newton on the geometric distance.
pub fn fit_circle(xi_total: &AngularField) -> CircleFit {
    let m = (8 * (xi_total.order() + 1)).max(64);
    let pts: Vec<[f64; 2]> = uniform_angles(m)
        .into_iter()
        .map(|th| {
            let r = 1.0 + xi_total.eval(th);
            [r * th.cos(), r * th.sin()]
        })
        .collect();
    // x² + y² + D x + E y + F = 0
    let mut ata = Mat::<f64>::zeros(3, 3);
    let mut atb = Mat::<f64>::zeros(3, 1);
    for p in &pts {
        let row = [p[0], p[1], 1.0];
        let rhs = -(p[0] * p[0] + p[1] * p[1]);
        for i in 0..3 {
            atb[(i, 0)] += row[i] * rhs;
            for j in 0..3 {
                ata[(i, j)] += row[i] * row[j];
            }
        }
    }
    let d = solve_small(ata, atb);
    let mut center = [-d[0] / 2.0, -d[1] / 2.0];
    let mut radius = (center[0] * center[0] + center[1] * center[1] - d[2]).max(0.0).sqrt();
    for _ in 0..50 {
        let mut jtj = Mat::<f64>::zeros(3, 3);
        let mut jtr = Mat::<f64>::zeros(3, 1);
        for p in &pts {
            let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
            let dist = dx.hypot(dy);
            let res = dist - radius;
            let row = [-dx / dist, -dy / dist, -1.0];
            for i in 0..3 {
                jtr[(i, 0)] -= row[i] * res;
                for j in 0..3 {
                    jtj[(i, j)] += row[i] * row[j];
                }
            }
        }
        let step = solve_small(jtj, jtr);
        center[0] += step[0];
        center[1] += step[1];
        radius += step[2];
        if step.iter().all(|s| s.abs() < 1e-15) {
            break;
        }
    }
    let residual = pts
        .iter()
        .map(|p| ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).abs())
        .fold(0.0_f64, f64::max);
    CircleFit { center, radius, residual }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_phase() -> (GeometrySpec, Conductivity) {
        (GeometrySpec::concentric(0.5).unwrap(), Conductivity::new(2.0, 0.0).unwrap())
    }

    /// Graph `R(θ) - 1` of the unit circle centered at `(a, b)`.
    fn translated_circle(a: f64, b: f64, order: usize) -> AngularField {
        let m = 4 * order + 8;
        let vals: Vec<f64> = uniform_angles(m)
            .into_iter()
            .map(|th| {
                let p = a * th.cos() + b * th.sin();
                let q = a * th.sin() - b * th.cos();
                p + (1.0 - q * q).sqrt() - 1.0
            })
            .collect();
        AngularField::from_samples(&vals, order).unwrap()
    }

    #[test]
    fn zero_parameters_need_no_iteration() {
        let (g, c) = two_phase();
        let (xi, rep) = solve_branch(&g, &c, &ParamVector::zero(), &Resolution::with_modes(8), &NewtonOptions::default()).unwrap();
        assert!(xi.is_zero());
        assert_eq!(rep.steps(), 0);
        assert!(rep.converged);
    }

    #[test]
    fn degenerate_base_is_rejected() {
        let g = GeometrySpec::concentric(0.5).unwrap();
        let err = solve_branch(&g, &Conductivity::one_phase(), &ParamVector::zero(), &Resolution::with_modes(8), &NewtonOptions::default());
        assert!(matches!(err, Err(Error::DegenerateBase { .. })));
    }

    #[test]
    fn trust_region_and_eta_are_enforced() {
        let (g, c) = two_phase();
        let p = BranchProblem::new(&g, &c, &Resolution::with_modes(6), DEFAULT_REL_TOL).unwrap();
        let mut lambda = ParamVector::zero();
        lambda.s = 1.5;
        assert!(matches!(p.solve(&lambda, None, &NewtonOptions::default()), Err(Error::OutsideTrustRegion(_))));
        let mut lambda = ParamVector::zero();
        lambda.eta = [0.01, 0.0];
        assert!(matches!(p.solve(&lambda, None, &NewtonOptions::default()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn inclusion_perturbation_branch() {
        let (g, c) = two_phase();
        let res = Resolution::with_modes(12);
        let problem = BranchProblem::new(&g, &c, &res, DEFAULT_REL_TOL).unwrap();
        let lambda = ParamVector {
            phi: AngularField::cos_mode(2, 2, 0.05),
            ..ParamVector::zero()
        };
        let (xi, rep) = problem.solve(&lambda, None, &NewtonOptions::default()).unwrap();
        assert!(rep.final_residual() < 1e-10);
        assert!(xi.sup_norm() < 0.05);
        let a2 = xi.a(2).abs();
        for i in 0..xi.len() {
            if i != 3 {
                assert!(xi.coeffs()[i].abs() < a2, "coefficient {i}");
            }
        }
        // independent route: Newton with a finite-difference Jacobian at every step
        let fresh = NewtonOptions {
            refresh: 1,
            jacobian: JacobianSource::FiniteDifference,
            ..NewtonOptions::default()
        };
        let (xi2, rep2) = problem.solve(&lambda, None, &fresh).unwrap();
        assert!(xi.max_abs_coeff_diff(&xi2) < 1e-8);
        assert!(rep2.jacobian_refreshes >= 1);
    }

    #[test]
    fn projected_disk_is_fixed_when_inclusion_is_invisible() {
        let g = GeometrySpec::concentric(0.5).unwrap();
        let lambda = ParamVector {
            phi: AngularField::cos_mode(3, 3, 0.05),
            ..ParamVector::zero()
        };
        let (xi, rep) = solve_branch_projected(&g, &Conductivity::one_phase(), &lambda, &Resolution::with_modes(8), &NewtonOptions::default()).unwrap();
        assert!(xi.sup_norm() < 1e-10);
        assert!(rep.converged);
    }

    #[test]
    fn projected_translation_gives_a_translated_circle() {
        let g = GeometrySpec::concentric(0.5).unwrap();
        let lambda = ParamVector {
            eta: [0.1, 0.0],
            ..ParamVector::zero()
        };
        let problem = BranchProblem::projected(&g, &Conductivity::one_phase(), &Resolution::with_modes(12)).unwrap();
        let (xi, _) = problem.solve(&lambda, None, &NewtonOptions::default()).unwrap();
        assert_eq!((xi.a(1), xi.b(1)), (0.0, 0.0));
        let fit = fit_circle(&problem.total_correction(&xi, &lambda));
        assert!(fit.residual < 1e-8);
        assert!((fit.center[0] - 0.1).abs() < 1e-8 && fit.center[1].abs() < 1e-8);
        assert!((xi.a(0) + 0.0025).abs() < 1e-4 && (xi.a(2) - 0.0025).abs() < 1e-4);
        // the projected solution solves the full problem
        assert!(problem.full_residual(&xi, &lambda).unwrap().sup_norm() < 1e-8);
    }

    #[test]
    fn circle_fit_examples() {
        let fit = fit_circle(&AngularField::zeros(4));
        assert!(fit.center[0].abs() < 1e-15 && fit.center[1].abs() < 1e-15);
        assert!((fit.radius - 1.0).abs() < 1e-15 && fit.residual < 1e-15);
        let fit = fit_circle(&translated_circle(0.05, 0.0, 24));
        assert!((fit.center[0] - 0.05).abs() < 1e-12 && fit.center[1].abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        let fit = fit_circle(&AngularField::cos_mode(2, 2, 0.1));
        assert!((fit.residual - 0.1).abs() < 0.01, "{}", fit.residual);
    }

    #[test]
    fn conductivity_ramp_is_trivial() {
        let (g, c) = two_phase();
        let problem = BranchProblem::new(&g, &c, &Resolution::with_modes(6), DEFAULT_REL_TOL).unwrap();
        let path = |t: f64| ParamVector {
            s: t,
            ..ParamVector::zero()
        };
        let trace = trace_branch(&problem, &path, 4, &NewtonOptions::default()).unwrap();
        assert!(trace.completed());
        assert_eq!(trace.samples.len(), 4);
        assert!(trace.samples.iter().all(|s| s.xi.sup_norm() < 1e-9 && s.gamma_smallest_sv > 0.0));
        let csv = branch_csv(&trace, 6, "abc");
        assert_eq!(csv.lines().count(), 2 + 4);
        assert!(csv.lines().nth(1).unwrap().starts_with("t,s,phi_sup,f_sup,eta_a1,eta_b1,xi_a0,xi_a1,xi_b1"));
    }
}
