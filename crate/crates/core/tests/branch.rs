use serrin_core::branch::{trace_branch, BranchProblem, JacobianSource, NewtonOptions};
use serrin_core::fourier::AngularField;
use serrin_core::geometry::GeometrySpec;
use serrin_core::operator::{project_bar, DEFAULT_REL_TOL};
use serrin_core::oracles::gamma_mode;
use serrin_core::shape::ParamVector;
use serrin_core::solver::{Conductivity, Resolution};

fn two_phase(k: usize) -> BranchProblem {
    let g = GeometrySpec::concentric(0.5).unwrap();
    BranchProblem::new(&g, &Conductivity::new(2.0, 0.0).unwrap(), &Resolution::with_modes(k), DEFAULT_REL_TOL).unwrap()
}

fn phi_lambda(k: usize, amp: f64) -> ParamVector {
    ParamVector {
        phi: AngularField::cos_mode(k, k, amp),
        ..ParamVector::zero()
    }
}

#[test]
fn chord_iteration_contracts() {
    let problem = two_phase(12);
    let (_, rep) = problem.solve(&phi_lambda(2, 0.05), None, &NewtonOptions::chord()).unwrap();
    assert!(rep.converged && rep.jacobian_refreshes == 0);
    for r in rep.contraction_ratios() {
        assert!(r <= 0.5, "ratio {r}");
    }
}

fn refreshed_residuals(jacobian: JacobianSource) -> Vec<f64> {
    let problem = two_phase(12);
    let opts = NewtonOptions {
        refresh: 1,
        jacobian,
        tol: 1e-13,
        ..NewtonOptions::default()
    };
    let lambda = ParamVector {
        phi: AngularField::cos_mode(2, 2, 0.08),
        f: AngularField::sin_mode(3, 3, 0.02),
        ..ParamVector::zero()
    };
    let (_, rep) = problem.solve(&lambda, None, &opts).unwrap();
    rep.iterates.iter().map(|i| i.residual).collect()
}

fn order_above_floor(r: &[f64], floor: f64) -> f64 {
    let r: Vec<f64> = r.iter().copied().filter(|&v| v > floor).collect();
    let n = r.len();
    assert!(n >= 3, "{r:?}");
    (r[n - 1] / r[n - 2]).ln() / (r[n - 2] / r[n - 3]).ln()
}

#[test]
fn refresh_with_discrete_jacobian_is_quadratic() {
    let r = refreshed_residuals(JacobianSource::FiniteDifference);
    assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
    let order = order_above_floor(&r, 1e-11);
    assert!(order >= 1.8, "order {order}, residuals {r:?}");
}

#[test]
fn refresh_with_analytic_jacobian_contracts_strongly() {
    // the shape-derivative Jacobian differs from the discrete one by the
    // discretization error, so the rate is linear but small
    let r = refreshed_residuals(JacobianSource::Analytic);
    assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
    assert!(r.windows(2).skip(1).all(|w| w[1] / w[0] < 0.05), "{r:?}");
}

#[test]
fn inclusion_path_grows_monotonically() {
    let problem = two_phase(12);
    let path = |t: f64| phi_lambda(3, 0.08).scaled(t);
    let trace = trace_branch(&problem, &path, 5, &NewtonOptions::default()).unwrap();
    assert!(trace.completed());
    let norms: Vec<f64> = trace.samples.iter().map(|s| s.xi.sup_norm()).collect();
    assert!(norms.windows(2).all(|w| w[1] > w[0]), "{norms:?}");
    assert!(trace.samples.iter().all(|s| s.residual_norm < 1e-10));
    let (direct, _) = problem.solve(&phi_lambda(3, 0.08), None, &NewtonOptions::default()).unwrap();
    assert!(direct.max_abs_coeff_diff(&trace.samples.last().unwrap().xi) < 1e-8);
}

/// Root of `Γ₂(0.8, σ)` by bisection on the mode oracle.
fn degenerate_sigma() -> f64 {
    let (mut lo, mut hi) = (0.05, 0.5);
    assert!(gamma_mode(2, 0.8, lo).unwrap().signum() != gamma_mode(2, 0.8, hi).unwrap().signum());
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gamma_mode(2, 0.8, mid).unwrap().signum() == gamma_mode(2, 0.8, lo).unwrap().signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn ramp_through_a_degenerate_conductivity_aborts() {
    let sigma_star = degenerate_sigma();
    assert!((sigma_star - 0.10266).abs() < 1e-4, "{sigma_star}");
    let g = GeometrySpec::concentric(0.8).unwrap();
    let problem = BranchProblem::new(&g, &Conductivity::new(0.5, 0.0).unwrap(), &Resolution::with_modes(8), DEFAULT_REL_TOL).unwrap();
    let path = |t: f64| ParamVector {
        s: -0.45 * t,
        ..ParamVector::zero()
    };
    let trace = trace_branch(&problem, &path, 10, &NewtonOptions::default()).unwrap();
    let failure = trace.failure.as_ref().expect("the ramp crosses a kernel");
    assert!(failure.degenerate);
    // the abort happens at the first sample past the crossing
    assert!(0.5 + (-0.45 * failure.t) < sigma_star);
    let svs: Vec<f64> = trace.samples.iter().map(|s| s.gamma_smallest_sv).collect();
    // another mode is the smallest at the start of the ramp
    let before = &svs[1..svs.len() - 1];
    assert!(before.windows(2).all(|w| w[1] < w[0]), "{svs:?}");
}

#[test]
fn projected_data_perturbation_has_no_translation_part() {
    let g = GeometrySpec::concentric(0.5).unwrap();
    let lambda = ParamVector {
        f: AngularField::cos_mode(2, 2, 0.01),
        ..ParamVector::zero()
    };
    for k in [8, 16] {
        let problem = BranchProblem::projected(&g, &Conductivity::one_phase(), &Resolution::with_modes(k)).unwrap();
        let (xi, rep) = problem.solve(&lambda, None, &NewtonOptions::default()).unwrap();
        assert!(rep.final_residual() < 1e-10);
        let full = problem.full_residual(&xi, &lambda).unwrap();
        let translation = &full - &project_bar(&full);
        assert!(translation.sup_norm() < 1e-10, "K = {k}");
    }
}

#[test]
fn projected_mode_rejects_two_phase_bases() {
    let g = GeometrySpec::concentric(0.5).unwrap();
    assert!(BranchProblem::projected(&g, &Conductivity::new(2.0, 0.0).unwrap(), &Resolution::with_modes(6)).is_err());
}
