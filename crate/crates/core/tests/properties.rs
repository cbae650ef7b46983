use proptest::prelude::*;

use qpin_core::characterize::{
    abs_c, gamma_mixture_gap, gamma_mixture_gap_by_quadrature, gaussian_mixture_quantile_gap,
    gaussian_mixture_quantile_gap_by_quadrature, log_convexity, AdditiveKernel, Kernel,
    MultiplicativeKernel,
};
use qpin_core::deny::{DenyOperator, Grid, GridFunction};
use qpin_core::nef::{
    laplace, laplace_by_quadrature, location_identity_residual, location_pin_residual, mgf,
    mgf_by_quadrature, scale_identity_residual, scale_pin_residual, tilted_cdf, BaseMeasure,
};
use qpin_core::quadrature::{integrate, Interval};
use qpin_core::specfun::{
    m_star, p_star, reg_gamma_cdf, std_normal_cdf, std_normal_quantile, Alpha,
};
use qpin_core::table::{parse_table, write_table};

fn alpha() -> impl Strategy<Value = Alpha> {
    (0.01f64..0.99).prop_map(|a| Alpha::new(a).unwrap())
}

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig::with_cases(cases)
}

proptest! {
    #![proptest_config(cfg(256))]

    #[test]
    fn normal_quantile_round_trip(a in 1e-12f64..(1.0 - 1e-12)) {
        let q = std_normal_quantile(Alpha::new(a).unwrap());
        prop_assert!((std_normal_cdf(q).unwrap() - a).abs() <= 1e-13 * a.max(1.0 - a).max(1e-2));
    }

    #[test]
    fn gamma_cdf_is_a_cdf(p in 0.05f64..20.0, x in 0.0f64..50.0, dx in 0.0f64..5.0) {
        let a = reg_gamma_cdf(p, x).unwrap();
        let b = reg_gamma_cdf(p, x + dx).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a);
        prop_assert!(reg_gamma_cdf(p, 0.0).unwrap() == 0.0);
        prop_assert!((reg_gamma_cdf(p, p + 60.0 * (p + 1.0).sqrt() + 60.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_cdf_decreases_in_shape(p in 0.05f64..20.0, dp in 0.01f64..3.0, a in 0.05f64..20.0) {
        prop_assert!(reg_gamma_cdf(p + dp, a).unwrap() < reg_gamma_cdf(p, a).unwrap());
    }

    #[test]
    fn p_star_round_trip(al in alpha(), a in 0.05f64..20.0) {
        let p = p_star(al, a).unwrap().value;
        prop_assert!((reg_gamma_cdf(p, a).unwrap() - al.value()).abs() <= 1e-12);
    }

    #[test]
    fn abs_c_is_nonnegative_and_piecewise_linear(c in 1e-3f64..1e3, x in -100.0f64..100.0) {
        let v = abs_c(c, x);
        prop_assert!(v >= 0.0);
        prop_assert_eq!(v, if x < 0.0 { -c * x } else { x });
    }
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn gaussian_family_is_pinned(al in alpha(), b in -3.0f64..3.0, t in -5.0f64..5.0) {
        let base = BaseMeasure::gaussian(m_star(al, b)).unwrap();
        prop_assert!(location_pin_residual(&base, al, b, t).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn gamma_family_is_pinned(al in alpha(), a in 0.1f64..5.0, t in 0.1f64..10.0) {
        let base = BaseMeasure::gamma(p_star(al, a).unwrap().value).unwrap();
        prop_assert!(scale_pin_residual(&base, al, a, t).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn tilted_cdf_is_monotone_and_normalized(m in -2.0f64..2.0, t in -4.0f64..4.0, x in -8.0f64..8.0, dx in 0.0f64..2.0) {
        let base = BaseMeasure::gaussian(m).unwrap();
        let a = tilted_cdf(&base, t, x).unwrap();
        let b = tilted_cdf(&base, t, x + dx).unwrap();
        prop_assert!((0.0..=1.0).contains(&a) && b >= a);
        prop_assert!((tilted_cdf(&base, t, m + t + 40.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tilted_gamma_cdf_is_monotone_and_normalized(p in 0.1f64..10.0, t in 0.1f64..10.0, x in 0.0f64..20.0, dx in 0.0f64..2.0) {
        let base = BaseMeasure::gamma(p).unwrap();
        let a = tilted_cdf(&base, t, x).unwrap();
        let b = tilted_cdf(&base, t, x + dx).unwrap();
        prop_assert!((0.0..=1.0).contains(&a) && b >= a);
        prop_assert!((tilted_cdf(&base, t, (p + 200.0) / t).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transforms_match_quadrature(m in -2.0f64..2.0, p in 0.2f64..8.0, t in -3.0f64..3.0, u in 0.2f64..5.0) {
        let g = BaseMeasure::gaussian(m).unwrap();
        let closed = mgf(&g, t).unwrap();
        prop_assert!((closed - mgf_by_quadrature(&g, t).unwrap()).abs() <= 1e-8 * closed);
        let q = BaseMeasure::gamma(p).unwrap();
        let closed = laplace(&q, u).unwrap();
        prop_assert!((closed - laplace_by_quadrature(&q, u).unwrap()).abs() <= 1e-8 * closed);
    }

    #[test]
    fn characterized_bases_satisfy_identities(m in -1.0f64..1.0, p in 0.2f64..5.0, s in 0.1f64..2.0, t in 0.1f64..2.0) {
        let g = BaseMeasure::gaussian(m).unwrap();
        let scale = mgf(&g, t + s).unwrap().max(1.0);
        prop_assert!(location_identity_residual(&g, s, t).unwrap().abs() <= 1e-12 * scale);
        let q = BaseMeasure::gamma(p).unwrap();
        prop_assert!(scale_identity_residual(&q, s, t).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn mixture_gaps_match_quadrature(al in alpha(), w in 0.0f64..1.0, c1 in 0.0f64..5.0) {
        let a = gaussian_mixture_quantile_gap(al, w).unwrap();
        prop_assert!((a - gaussian_mixture_quantile_gap_by_quadrature(al, w).unwrap()).abs() <= 1e-12);
        let b = gamma_mixture_gap(al, c1).unwrap();
        prop_assert!((b - gamma_mixture_gap_by_quadrature(al, c1).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn kernels_are_probability_densities(al in 0.05f64..0.95) {
        let al = Alpha::new(al).unwrap();
        let h = AdditiveKernel::new(al);
        // Split at the kink: a fixed-node rule cannot see it near a panel edge.
        let side = |lo: f64, hi: f64| integrate(|x| h.density(x), Interval::new(lo, hi).unwrap(), 1e-13).unwrap().value;
        let mass = side(-h.m - 15.0, 0.0) + side(0.0, 15.0 - h.m);
        prop_assert!((mass - 1.0).abs() <= 1e-8);
        let k = MultiplicativeKernel::new(al).unwrap();
        prop_assert!((k.mellin_by_quadrature(0.0).unwrap() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn kernel_transforms_match_quadrature(al in 0.05f64..0.95, s in -3.0f64..3.0, frac in 0.0f64..1.0) {
        let al = Alpha::new(al).unwrap();
        let h = Kernel::Additive(AdditiveKernel::new(al));
        let x = h.second_root() + s;
        prop_assert!((h.transform(x).unwrap() - h.transform_by_quadrature(x).unwrap()).abs() <= 1e-7);
        let k = MultiplicativeKernel::new(al).unwrap();
        let lo = -k.p_star + 0.1;
        let u = lo + frac * (4.0 - lo);
        prop_assert!((k.mellin(u).unwrap() - k.mellin_by_quadrature(u).unwrap()).abs() <= 1e-7);
    }

    #[test]
    fn log_transform_is_convex(al in 0.05f64..0.95) {
        let al = Alpha::new(al).unwrap();
        let h = Kernel::Additive(AdditiveKernel::new(al));
        let r = h.second_root();
        prop_assert!(log_convexity(&h, r - 3.0, r + 3.0, 121).unwrap().passes(1e-9));
        let k = Kernel::Multiplicative(MultiplicativeKernel::new(al).unwrap());
        prop_assert!(log_convexity(&k, k.transform_lower_bound() + 0.1, 4.0, 121).unwrap().passes(1e-9));
    }

    #[test]
    fn table_text_round_trips(lo in -50.0f64..50.0, step in 1e-3f64..1.0, ys in prop::collection::vec(0.0f64..1e6, 3..64)) {
        let xs: Vec<f64> = (0..ys.len()).map(|i| lo + step * i as f64).collect();
        let mut buf = Vec::new();
        write_table(&mut buf, Some("x value"), &xs, &ys).unwrap();
        let t = parse_table(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(t.xs, xs);
        prop_assert_eq!(t.ys, ys);
    }
}

fn small_additive(al: f64) -> DenyOperator {
    let k = AdditiveKernel::new(Alpha::new(al).unwrap());
    DenyOperator::additive(k, Grid::new(-20.0, 20.0, 801).unwrap()).unwrap()
}

fn small_log(al: f64) -> DenyOperator {
    let k = MultiplicativeKernel::new(Alpha::new(al).unwrap()).unwrap();
    DenyOperator::multiplicative(k, Grid::new(-150.0, 200.0, 1401).unwrap()).unwrap()
}

/// Sum of Gaussian bumps with nonnegative heights.
fn bumps(heights: Vec<f64>, centres: Vec<f64>, width: f64) -> impl Fn(f64) -> f64 {
    move |x| {
        heights
            .iter()
            .zip(&centres)
            .map(|(h, c)| h * (-((x - c) / width).powi(2)).exp())
            .sum()
    }
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn operators_preserve_positivity(
        al in 0.1f64..0.9,
        heights in prop::collection::vec(0.0f64..10.0, 1..6),
        centres in prop::collection::vec(-1.0f64..1.0, 6),
        width in 0.02f64..3.0,
    ) {
        // Centres span the additive grid and the middle of the log grid.
        let add = small_additive(al);
        let f = bumps(heights.clone(), centres.iter().map(|c| 18.0 * c).collect(), width);
        let f = GridFunction::from_fn(add.grid(), f).unwrap();
        prop_assert!(add.apply(&f).unwrap().is_nonnegative());
        let mul = small_log(al);
        let g = bumps(heights, centres.iter().map(|c| 60.0 * c + 20.0).collect(), width);
        let g = GridFunction::from_fn(mul.grid(), g).unwrap();
        prop_assert!(mul.apply(&g).unwrap().is_nonnegative());
    }

    #[test]
    fn projection_recovers_span_members(al in 0.1f64..0.9, c0 in 0.0f64..5.0, c1 in 0.0f64..5.0) {
        prop_assume!((al - 0.5).abs() > 0.02);
        let op = small_additive(al);
        let m = op.kernel().second_root();
        let f = GridFunction::from_fn(op.grid(), |x| c0 + c1 * (-m * x).exp()).unwrap();
        let p = op.project(&f, None, false).unwrap();
        let scale = 1.0 + c0 + c1;
        prop_assert!((p.coefficients[0] - c0).abs() <= 1e-8 * scale, "{:?}", p);
        prop_assert!((p.coefficients[1] - c1).abs() <= 1e-8 * scale, "{:?}", p);
        prop_assert!(p.orthogonal_residual <= 1e-8 * scale);
    }
}
