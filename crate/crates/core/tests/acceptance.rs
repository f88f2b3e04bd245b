//! End-to-end acceptance checks. One line per criterion is printed; run
//! with `--nocapture` to see them.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use serrin_core::branch::{fit_circle, trace_branch, BranchProblem, NewtonOptions};
use serrin_core::fourier::{mode_of, AngularField};
use serrin_core::geometry::GeometrySpec;
use serrin_core::operator::{assemble_gamma, assemble_q, nondegeneracy_report, DEFAULT_REL_TOL};
use serrin_core::oracles::{ball_q_eigenvalue, gamma_mode, radial_two_phase};
use serrin_core::shape::{
    energy_identity, fd_shape_derivative, hadamard_derivative, hadamard_derivative_normal, residual_g, solve_shape_derivative,
    ParamVector, Perturbation, FD_STEPS,
};
use serrin_core::solver::{compute_c, solve_state, Conductivity, Resolution};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn random_field(rng: &mut StdRng, order: usize, sup: f64) -> AngularField {
    let coeffs: Vec<f64> = (0..2 * order + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = AngularField::new(coeffs).unwrap();
    f.scaled(sup * rng.gen_range(0.2..1.0) / f.sup_norm())
}

fn two_phase_base() -> (GeometrySpec, Conductivity) {
    (GeometrySpec::concentric(0.5).unwrap(), Conductivity::new(2.0, 0.0).unwrap())
}

fn c1_ball_eigenvalues() -> Outcome {
    let sol = solve_state(&GeometrySpec::concentric(0.5).unwrap(), &Conductivity::one_phase(), &Resolution::with_modes(32)).unwrap();
    let q = assemble_q(&assemble_gamma(&sol).unwrap(), &sol).unwrap();
    let err = (0..q.dim())
        .map(|i| (q.entry(i, i) - ball_q_eigenvalue(mode_of(i), 2)).abs())
        .fold(0.0, f64::max);
    let leak = q.off_diagonal_leakage();
    outcome(err < 1e-9 && leak < 1e-9, format!("max diag err {err:.2e}, leakage {leak:.2e} (tol 1e-9)"))
}

fn c2_kernel() -> Outcome {
    let sol = solve_state(&GeometrySpec::concentric(0.5).unwrap(), &Conductivity::one_phase(), &Resolution::with_modes(32)).unwrap();
    let q = assemble_q(&assemble_gamma(&sol).unwrap(), &sol).unwrap();
    let rep = nondegeneracy_report(&q, DEFAULT_REL_TOL).unwrap();
    // each kernel vector lies in span{cos θ, sin θ}
    let span_err = rep
        .kernel_basis
        .iter()
        .map(|v| (1.0 - v.a(1).hypot(v.b(1))).abs())
        .fold(0.0, f64::max);
    let s = &rep.spectrum;
    let n = s.len();
    let ratio = s[n - 1] / s[0];
    let next = s[n - 3];
    let passed = rep.kernel_basis.len() == 2 && span_err < 1e-9 && ratio < 1e-8 && next >= 0.49 && !rep.is_nondegenerate;
    outcome(
        passed,
        format!("kernel dim {}, span err {span_err:.2e}, sv ratio {ratio:.2e} (< 1e-8), next sv {next:.4} (>= 0.49)", rep.kernel_basis.len()),
    )
}

fn c3_two_phase_gamma() -> Outcome {
    let (g, c) = two_phase_base();
    let sol = solve_state(&g, &c, &Resolution::with_modes(32)).unwrap();
    let gamma = assemble_gamma(&sol).unwrap();
    let anchors = [-0.5, 1.0 / 11.0, 51.0 / 94.0];
    let anchor_err = (0..5)
        .map(|i| (gamma.entry(i, i) - anchors[mode_of(i)]).abs())
        .fold(0.0, f64::max);
    let oracle_err = (0..gamma.dim())
        .map(|i| (gamma.entry(i, i) - gamma_mode(mode_of(i), 0.5, 2.0).unwrap()).abs())
        .fold(0.0, f64::max);
    outcome(
        anchor_err < 1e-9 && oracle_err < 1e-9,
        format!("anchor err {anchor_err:.2e}, oracle err k<=32 {oracle_err:.2e} (tol 1e-9)"),
    )
}

fn c4_state_accuracy() -> Outcome {
    let (g, c) = two_phase_base();
    let sol = solve_state(&g, &c, &Resolution::default()).unwrap();
    let profile = radial_two_phase(0.5, 2.0, 2, 1.0).unwrap();
    let nodes = sol.system().nodes();
    let state_err = nodes
        .iter()
        .zip(sol.values())
        .map(|(n, v)| (v - profile.eval(n.radius)).abs())
        .fold(0.0, f64::max);
    let mut rng = StdRng::seed_from_u64(4);
    let mut worst_flux = 0.0_f64;
    for _ in 0..10 {
        let xi = random_field(&mut rng, 4, 0.05);
        let phi = random_field(&mut rng, 4, 0.05);
        let geom = GeometrySpec::new(xi, phi, rng.gen_range(0.3..0.6)).unwrap();
        let cond = Conductivity::new(rng.gen_range(0.5..4.0), 0.0).unwrap();
        let sol = solve_state(&geom, &cond, &Resolution::default()).unwrap();
        worst_flux = worst_flux.max(sol.flux_defect());
    }
    outcome(
        state_err < 1e-10 && worst_flux < 1e-8,
        format!("radial max err {state_err:.2e} (1e-10), worst flux identity defect {worst_flux:.2e} (1e-8)"),
    )
}

fn c5_hadamard() -> Outcome {
    let res = Resolution::with_modes(16);
    let mut rng = StdRng::seed_from_u64(5);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let geom = GeometrySpec::new(random_field(&mut rng, 3, 0.1), random_field(&mut rng, 3, 0.05), rng.gen_range(0.3..0.6)).unwrap();
        let cond = Conductivity::new(rng.gen_range(0.5..4.0), 0.0).unwrap();
        let f = random_field(&mut rng, 3, 0.05);
        let c = rng.gen_range(0.3..0.7);
        let dir = random_field(&mut rng, 4, 1.0);
        let sol = solve_state(&geom, &cond, &res).unwrap();
        let exact = hadamard_derivative(&sol, &f, c, &dir);
        let fd = fd_shape_derivative(&geom, &cond, &f, c, &Perturbation::OuterGraph(dir), &FD_STEPS, &res).unwrap();
        worst = worst.max((exact - fd.value).abs() / (1.0 + exact.abs()));
    }
    // disk of radius 1.1: J(R) = πR⁴/8 - πR²/4
    let big_r = 1.1_f64;
    let disk = GeometrySpec::new(AngularField::constant(0, 0.1), AngularField::zeros(0), 0.5).unwrap();
    let one = Conductivity::one_phase();
    let sol = solve_state(&disk, &one, &res).unwrap();
    let zero = AngularField::zeros(0);
    let closed = PI * (big_r.powi(3) - big_r) / 2.0;
    let had = hadamard_derivative(&sol, &zero, 0.5, &AngularField::constant(0, 1.0));
    let fd = fd_shape_derivative(&disk, &one, &zero, 0.5, &Perturbation::OuterGraph(AngularField::constant(0, 1.0)), &FD_STEPS, &res).unwrap();
    let anchor = (had - closed).abs().max((fd.value - closed).abs());
    let geom = GeometrySpec::new(AngularField::cos_mode(3, 3, 0.05), AngularField::cos_mode(2, 2, 0.03), 0.4).unwrap();
    let sol = solve_state(&geom, &Conductivity::new(3.0, 0.0).unwrap(), &res).unwrap();
    let du = solve_shape_derivative(&sol, &AngularField::cos_mode(2, 2, 1.0)).unwrap();
    let energy = energy_identity(&sol, &du).abs();
    outcome(
        worst < 1e-6 && anchor < 1e-6 && energy < 1e-9,
        format!(
            "worst relative FD gap {worst:.2e} (1e-6), dJ/dR at 1.1 = {had:.6} vs {closed:.6} (gap {anchor:.2e}), energy identity {energy:.2e} (1e-9)"
        ),
    )
}

fn c6_q_is_dh() -> Outcome {
    let (g, c) = two_phase_base();
    let res = Resolution::with_modes(16);
    let sol = solve_state(&g, &c, &res).unwrap();
    let q = assemble_q(&assemble_gamma(&sol).unwrap(), &sol).unwrap();
    let cval = compute_c(&sol).unwrap();
    let zero = AngularField::zeros(0);
    let h = 1e-4;
    let central = |j: usize, h: f64| {
        let e = AngularField::basis(res.modes, j);
        let gp = residual_g(&solve_state(&g.with_xi(e.scaled(h)).unwrap(), &c, &res).unwrap(), &zero, cval);
        let gm = residual_g(&solve_state(&g.with_xi(e.scaled(-h)).unwrap(), &c, &res).unwrap(), &zero, cval);
        (&gp - &gm).scaled(0.5 / h)
    };
    // central differences at h carry an O(h² k³) truncation error in mode k;
    // one Richardson level with h/2 removes it
    let (mut raw, mut worst) = (0.0_f64, 0.0_f64);
    for j in 0..q.dim() {
        let (d1, d2) = (central(j, h), central(j, h / 2.0));
        let extrapolated = (&d2.scaled(4.0) - &d1).scaled(1.0 / 3.0);
        for i in 0..q.dim() {
            raw = raw.max((d1.coeffs()[i] - q.entry(i, j)).abs());
            worst = worst.max((extrapolated.coeffs()[i] - q.entry(i, j)).abs());
        }
    }
    outcome(
        worst < 1e-5,
        format!(
            "max |FD Jacobian - Q| {worst:.2e} (1e-5) over {} columns, Richardson on h = 1e-4, 5e-5; plain central at 1e-4: {raw:.2e}",
            q.dim()
        ),
    )
}

fn c7_theorem_two() -> Outcome {
    let (g, c) = two_phase_base();
    let res = Resolution::with_modes(16);
    let problem = BranchProblem::new(&g, &c, &res, DEFAULT_REL_TOL).unwrap();
    let opts = NewtonOptions::default();
    let lambdas = [
        ParamVector {
            phi: AngularField::cos_mode(2, 2, 0.05),
            ..ParamVector::zero()
        },
        ParamVector {
            f: AngularField::cos_mode(3, 3, 0.01),
            ..ParamVector::zero()
        },
        ParamVector {
            s: 0.5,
            ..ParamVector::zero()
        },
    ];
    let mut solve_ok = true;
    let mut details = Vec::new();
    let mut first = None;
    for lambda in &lambdas {
        match problem.solve(lambda, None, &opts) {
            Ok((xi, rep)) => {
                let ok = rep.final_residual() < 1e-10 && rep.steps() <= 12;
                solve_ok &= ok;
                details.push(format!("{} its / {:.1e}", rep.steps(), rep.final_residual()));
                first.get_or_insert(xi);
            }
            Err(e) => {
                solve_ok = false;
                details.push(format!("error {e}"));
            }
        }
    }
    let Some(xi_star) = first else {
        return outcome(false, format!("branch solves failed: {}", details.join(", ")));
    };
    let mut rng = StdRng::seed_from_u64(7);
    let mut restart_gap = 0.0_f64;
    for _ in 0..10 {
        let guess = &xi_star + &random_field(&mut rng, 6, 0.02).resized(res.modes);
        match problem.solve(&lambdas[0], Some(&guess), &opts) {
            Ok((xi, _)) => restart_gap = restart_gap.max(xi.max_abs_coeff_diff(&xi_star)),
            Err(_) => restart_gap = f64::INFINITY,
        }
    }
    let mut ratios = Vec::new();
    for t in [1.0, 0.5, 0.25, 0.125] {
        let (xi, _) = problem.solve(&lambdas[0].scaled(t), None, &opts).unwrap();
        ratios.push(xi.sup_norm() / t);
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &r| (a.min(r), b.max(r)));
    let spread = hi / lo - 1.0;
    outcome(
        solve_ok && restart_gap < 1e-8 && spread < 0.1,
        format!(
            "solves [{}], restart gap {restart_gap:.2e} (1e-8), |xi(t lambda)|/t spread {:.1}% (10%)",
            details.join(", "),
            100.0 * spread
        ),
    )
}

fn c8_theorem_three() -> Outcome {
    let g = GeometrySpec::concentric(0.5).unwrap();
    let problem = BranchProblem::projected(&g, &Conductivity::one_phase(), &Resolution::with_modes(16)).unwrap();
    let lambda = ParamVector {
        eta: [0.1, 0.0],
        ..ParamVector::zero()
    };
    let (xi, _) = match problem.solve(&lambda, None, &NewtonOptions::default()) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("projected solve failed: {e}")),
    };
    let fit = fit_circle(&problem.total_correction(&xi, &lambda));
    let center_err = (fit.center[0] - 0.1).hypot(fit.center[1]);
    let coeff_err = (xi.a(0) + 0.0025).abs().max((xi.a(2) - 0.0025).abs());
    outcome(
        fit.residual < 1e-8 && center_err < 1e-8 && coeff_err < 1e-4,
        format!(
            "fit residual {:.2e}, center err {center_err:.2e} (1e-8), (a0, a2) = ({:.6}, {:.6}) err {coeff_err:.1e} (1e-4)",
            fit.residual,
            xi.a(0),
            xi.a(2)
        ),
    )
}

fn c9_structure() -> Outcome {
    let res = Resolution::with_modes(16);
    let geom = GeometrySpec::new(AngularField::cos_mode(3, 3, 0.04), AngularField::sin_mode(2, 2, 0.03), 0.45).unwrap();
    let cond = Conductivity::new(2.5, 0.0).unwrap();
    let f = AngularField::cos_mode(1, 1, 0.02);
    let c = 0.5;
    let gauge = fd_shape_derivative(&geom, &cond, &f, c, &Perturbation::Reparametrization(AngularField::sin_mode(2, 2, 1.0)), &FD_STEPS, &res)
        .unwrap()
        .value
        .abs();
    let normal = AngularField::cos_mode(2, 2, 1.0);
    let a = Perturbation::BoundaryField {
        normal: normal.clone(),
        tangential: AngularField::zeros(0),
    };
    let b = Perturbation::BoundaryField {
        normal: normal.clone(),
        tangential: AngularField::sin_mode(3, 3, 0.7),
    };
    let fa = fd_shape_derivative(&geom, &cond, &f, c, &a, &FD_STEPS, &res).unwrap().value;
    let fb = fd_shape_derivative(&geom, &cond, &f, c, &b, &FD_STEPS, &res).unwrap().value;
    let sol = solve_state(&geom, &cond, &res).unwrap();
    let had = hadamard_derivative_normal(&sol, &f, c, &normal);
    let gap = (fa - fb).abs();
    outcome(
        gauge < 1e-9 && gap < 1e-6,
        format!("reparametrization FD {gauge:.2e} (1e-9), equal-normal FD gap {gap:.2e} (1e-6), Hadamard gap {:.2e}", (fa - had).abs()),
    )
}

fn c10_conductivity_ramp() -> Outcome {
    let (g, c) = two_phase_base();
    let problem = BranchProblem::new(&g, &c, &Resolution::with_modes(16), DEFAULT_REL_TOL).unwrap();
    let path = |t: f64| ParamVector {
        s: t,
        ..ParamVector::zero()
    };
    let trace = trace_branch(&problem, &path, 20, &NewtonOptions::default()).unwrap();
    let worst = trace.samples.iter().map(|s| s.xi.sup_norm()).fold(0.0, f64::max);
    let worst_res = trace.samples.iter().map(|s| s.residual_norm).fold(0.0, f64::max);
    outcome(
        trace.completed() && trace.samples.len() == 20 && worst < 1e-9,
        format!("{} samples, max |xi| {worst:.2e} (1e-9), max residual {worst_res:.2e}", trace.samples.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("1 ball eigenvalues", c1_ball_eigenvalues, Duration::from_secs(30)),
        ("2 kernel identification", c2_kernel, Duration::from_secs(30)),
        ("3 two-phase gamma oracle", c3_two_phase_gamma, Duration::from_secs(60)),
        ("4 state solver accuracy", c4_state_accuracy, Duration::from_secs(60)),
        ("5 hadamard formula", c5_hadamard, Duration::from_secs(120)),
        ("6 Q as residual jacobian", c6_q_is_dh, Duration::from_secs(120)),
        ("7 nondegenerate branches", c7_theorem_two, Duration::from_secs(300)),
        ("8 projected branch at the disk", c8_theorem_three, Duration::from_secs(120)),
        ("9 structure invariance", c9_structure, Duration::from_secs(60)),
        ("10 conductivity ramp", c10_conductivity_ramp, Duration::from_secs(180)),
    ];
    let mut failed = Vec::new();
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let ok = out.passed && elapsed <= budget;
        println!(
            "[{}] {name}: {} [{:.1}s of {}s]",
            if ok { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if !ok {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
