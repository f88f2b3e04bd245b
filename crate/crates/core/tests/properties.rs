use proptest::prelude::*;

use serrin_core::fourier::{cos_index, mode_of, sin_index, AngularField};
use serrin_core::geometry::GeometrySpec;
use serrin_core::operator::{assemble_gamma, project_bar};
use serrin_core::oracles::gamma_mode;
use serrin_core::shape::solve_shape_derivatives;
use serrin_core::solver::{criticality, solve_state, Conductivity, Resolution, CRITICALITY_LIMIT};

fn field(order: usize, amp: f64) -> impl Strategy<Value = AngularField> {
    prop::collection::vec(-amp..amp, 2 * order + 1).prop_map(|c| AngularField::new(c).unwrap())
}

proptest! {
    #[test]
    fn project_bar_is_a_linear_projection(x in field(6, 1.0), y in field(6, 1.0), a in -3.0..3.0f64) {
        let px = project_bar(&x);
        prop_assert_eq!(project_bar(&px), px.clone());
        prop_assert_eq!(px.a(1), 0.0);
        prop_assert_eq!(px.b(1), 0.0);
        let lhs = project_bar(&(&x + &(&y * a)));
        let rhs = &px + &(&project_bar(&y) * a);
        prop_assert!(lhs.max_abs_coeff_diff(&rhs) < 1e-14);
        // everything but the translation modes passes through unchanged
        for i in 0..x.len() {
            if mode_of(i) != 1 {
                prop_assert_eq!(px.coeffs()[i], x.coeffs()[i]);
            }
        }
    }

    #[test]
    fn fourier_products_commute_and_match_pointwise(x in field(5, 1.0), y in field(4, 1.0)) {
        let xy = x.product(&y);
        let yx = y.product(&x);
        prop_assert!(xy.max_abs_coeff_diff(&yx) < 1e-14);
        prop_assert_eq!(xy.order(), 9);
        for theta in [0.0, 0.7, 2.1, 4.4] {
            prop_assert!((xy.eval(theta) - x.eval(theta) * y.eval(theta)).abs() < 1e-12);
        }
        let one = AngularField::constant(5, 1.0);
        prop_assert!(x.product_truncated(&one).max_abs_coeff_diff(&x) < 1e-14);
    }

    #[test]
    fn sampling_round_trips(x in field(7, 2.0)) {
        let back = AngularField::from_samples(&x.sample(2 * 7 + 2), 7).unwrap();
        prop_assert!(back.max_abs_coeff_diff(&x) < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn shape_derivative_is_linear_in_the_direction(
        x in field(4, 1.0),
        y in field(4, 1.0),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let geom = GeometrySpec::new(AngularField::cos_mode(16, 3, 0.03), AngularField::sin_mode(16, 2, 0.02), 0.5).unwrap();
        let sol = solve_state(&geom, &Conductivity::new(2.5, 0.0).unwrap(), &Resolution::with_modes(16)).unwrap();
        let x = x.resized(16);
        let y = y.resized(16);
        let combo = &(&x * a) + &(&y * b);
        let d = solve_shape_derivatives(&sol, &[x, y, combo]).unwrap();
        let expect = &(&d[0].dn * a) + &(&d[1].dn * b);
        let scale = 1.0 + expect.sup_norm();
        prop_assert!(d[2].dn.max_abs_coeff_diff(&expect) < 1e-12 * scale);
    }

    #[test]
    fn concentric_gamma_is_diagonal_with_paired_modes(rho in 0.2..0.8f64, sigma in 0.25..4.0f64) {
        let geom = GeometrySpec::concentric(rho).unwrap();
        let sol = solve_state(&geom, &Conductivity::new(sigma, 0.0).unwrap(), &Resolution::with_modes(8)).unwrap();
        let gamma = assemble_gamma(&sol).unwrap();
        let scale = gamma.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(gamma.off_diagonal_leakage() < 1e-9 * scale);
        for k in 1..=8 {
            let (c, s) = (gamma.entry(cos_index(k), cos_index(k)), gamma.entry(sin_index(k), sin_index(k)));
            prop_assert!((c - s).abs() < 1e-9 * scale, "k = {}: {} vs {}", k, c, s);
            let oracle = gamma_mode(k, rho, sigma).unwrap();
            prop_assert!((c - oracle).abs() < 1e-7 * scale, "k = {}: {} vs oracle {}", k, c, oracle);
        }
    }

    #[test]
    fn concentric_bases_are_exactly_the_critical_ones(
        rho in 0.2..0.8f64,
        sigma in 0.25..4.0f64,
        k in 2usize..5,
        amp in 0.005..0.02f64,
    ) {
        let cond = Conductivity::new(sigma, 0.0).unwrap();
        let res = Resolution::with_modes(16);
        let round = criticality(&solve_state(&GeometrySpec::concentric(rho).unwrap(), &cond, &res).unwrap());
        prop_assert!(round.relative_defect < 1e-10);
        prop_assert!((round.c - 0.5).abs() < 1e-10);
        let bumped = GeometrySpec::new(AngularField::cos_mode(16, k, amp), AngularField::zeros(16), rho).unwrap();
        let off = criticality(&solve_state(&bumped, &cond, &res).unwrap());
        prop_assert!(off.relative_defect > 100.0 * CRITICALITY_LIMIT, "{:?}", off);
    }
}
