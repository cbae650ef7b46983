//! Values checked against independent computations: adaptive quadrature of
//! defining integrals, bisection on a different routine, or closed forms
//! frozen from published tables.

use std::f64::consts::{E, PI};

use qpin_core::characterize::MultiplicativeKernel;
use qpin_core::deny::{DenyOperator, Grid, GridFunction};
use qpin_core::nef::{
    laplace, location_identity_residual, mgf, scale_identity_residual, tilted_cdf, BaseMeasure,
};
use qpin_core::quadrature::{integrate, integrate_with, Interval, QuadConfig};
use qpin_core::roots::bisect;
use qpin_core::specfun::{
    m_star, p_star, reg_gamma_cdf, std_normal_cdf, std_normal_pdf, std_normal_quantile, Alpha,
};

fn alpha(v: f64) -> Alpha {
    Alpha::new(v).unwrap()
}

#[test]
fn normal_cdf_at_one_matches_density_integral() {
    let quad = integrate(std_normal_pdf, Interval::up_to(1.0).unwrap(), 1e-14)
        .unwrap()
        .value;
    let phi = std_normal_cdf(1.0).unwrap();
    assert!((phi - quad).abs() < 1e-13, "{phi} {quad}");
    // Abramowitz & Stegun, table 26.1.
    assert!((phi - 0.841_344_746_068_542_9).abs() < 1e-15);
}

#[test]
fn normal_quantile_matches_bisection_on_cdf() {
    for a in [0.841_344_746, 0.3, 0.025, 1e-6] {
        let q = std_normal_quantile(alpha(a));
        let b = bisect(|x| std_normal_cdf(x).unwrap() - a, -10.0, 10.0, 1e-14, 200).unwrap();
        assert!((q - b.root).abs() < 1e-10, "alpha={a} {q} {}", b.root);
    }
    assert!((std_normal_quantile(alpha(0.841_344_746)) - 1.0).abs() < 1e-9);
    assert!((std_normal_quantile(alpha(0.3)) + 0.524_400_512_708_041).abs() < 1e-14);
}

#[test]
fn incomplete_gamma_matches_quadrature() {
    // Γ(2.5) = (3/4)√π, independent of any log-gamma routine.
    let gamma = 0.75 * PI.sqrt();
    let quad = integrate(
        |y: f64| y.powf(1.5) * (-y).exp(),
        Interval::new(0.0, 1.7).unwrap(),
        1e-14,
    )
    .unwrap()
    .value
        / gamma;
    let e = reg_gamma_cdf(2.5, 1.7).unwrap();
    assert!((e - quad).abs() < 1e-13, "{e} {quad}");
    assert!((reg_gamma_cdf(1.0, 1.0).unwrap() - (1.0 - 1.0 / E)).abs() < 1e-15);
}

#[test]
fn p_star_solves_pin_by_quadrature() {
    for (a_level, a) in [(0.5, 1.0), (0.1, 3.0), (0.9, 0.5)] {
        let p = p_star(alpha(a_level), a).unwrap().value;
        // Substitute y = s^{1/p} so the integrand is smooth at 0.
        let g = qpin_core::specfun::log_gamma(p + 1.0).unwrap().exp();
        let cdf = integrate_with(
            |s: f64| (-s.powf(1.0 / p)).exp(),
            Interval::new(0.0, a.powf(p)).unwrap(),
            &QuadConfig::with_tol(1e-15).rel_tol(1e-13),
        )
        .unwrap()
        .value
            / g;
        assert!((cdf - a_level).abs() < 1e-11, "alpha={a_level} a={a} {cdf}");
    }
}

#[test]
fn m_star_round_trip() {
    for (a, b) in [(0.3, 0.0), (0.9, -1.0), (0.5, 1.5)] {
        let m = m_star(alpha(a), b);
        assert!((std_normal_cdf(b - m).unwrap() - a).abs() < 1e-12);
    }
    assert_eq!(m_star(alpha(0.5), 1.5), 1.5);
}

fn normal_mixture_table() -> BaseMeasure {
    let d = |x: f64| 0.5 * std_normal_pdf(x - 1.0) + 0.5 * std_normal_pdf(x + 1.0);
    BaseMeasure::sample_line(d, -20.0, 20.0, 4001).unwrap()
}

#[test]
fn tabulated_mixture_tilts_like_the_exact_mixture() {
    let base = normal_mixture_table();
    for t in [-2.0f64, 0.0, 0.7, 3.0] {
        // e^{tx} reweights the components to N(±1 + t, 1) with weights ∝ e^{±t}.
        let (wp, wm) = (t.exp(), (-t).exp());
        let exact_m = (0.5 * t * t).exp() * 0.5 * (wp + wm);
        let m = mgf(&base, t).unwrap();
        assert!((m - exact_m).abs() <= 1e-8 * exact_m, "t={t} {m} {exact_m}");
        for x in [-1.3, 0.05, 2.2] {
            let exact = (wp * std_normal_cdf(x - 1.0 - t).unwrap()
                + wm * std_normal_cdf(x + 1.0 - t).unwrap())
                / (wp + wm);
            let got = tilted_cdf(&base, t, x).unwrap();
            assert!((got - exact).abs() < 1e-8, "t={t} x={x} {got} {exact}");
        }
    }
}

#[test]
fn tabulated_identity_residuals_detect_non_gaussian_bases() {
    let base = normal_mixture_table();
    // M(t)/M(0) = e^{t²/2}cosh t, so the residual at (1, 1) is e²·sinh²(1).
    let r = location_identity_residual(&base, 1.0, 1.0).unwrap();
    let want = E * E * 1f64.sinh().powi(2);
    assert!((r - want).abs() < 1e-6 * want, "{r} {want}");

    let gauss = BaseMeasure::sample_line(std_normal_pdf, -20.0, 20.0, 4001).unwrap();
    assert!(location_identity_residual(&gauss, 1.0, 1.0).unwrap().abs() < 1e-7);

    let expo = BaseMeasure::sample_halfline(|y| (-y).exp() + (-2.0 * y).exp(), 0.01, 6000).unwrap();
    let l = |t: f64| 1.0 / (1.0 + t) + 1.0 / (2.0 + t);
    let want = l(4.0) / l(2.0) - l(2.0) / l(1.0);
    let r = scale_identity_residual(&expo, 1.0, 2.0).unwrap();
    assert!((r - want).abs() < 1e-6, "{r} {want}");
    assert!(want.abs() > 0.07);
}

#[test]
fn tabulated_power_weight_matches_gamma_base() {
    let p = 0.5;
    let g = qpin_core::specfun::log_gamma(p).unwrap().exp();
    let tab = BaseMeasure::sample_halfline(|y| y.powf(p - 1.0) / g, 0.01, 6000).unwrap();
    let exact = BaseMeasure::gamma(p).unwrap();
    for t in [0.5, 1.0, 4.0] {
        let a = laplace(&tab, t).unwrap();
        let b = laplace(&exact, t).unwrap();
        assert!((a - b).abs() < 1e-7 * b, "t={t} {a} {b}");
        for x in [0.003, 0.4, 2.5] {
            let a = tilted_cdf(&tab, t, x).unwrap();
            let b = tilted_cdf(&exact, t, x).unwrap();
            assert!((a - b).abs() < 1e-7, "t={t} x={x} {a} {b}");
        }
    }
}

/// t·(Sg)(t) from the log-grid operator against adaptive quadrature of
/// t·∫K(t/y)g(y)dy/y in y, split at the kink y = t.
#[test]
fn log_grid_operator_matches_direct_integral() {
    let k = MultiplicativeKernel::new(alpha(0.3)).unwrap();
    let op = DenyOperator::multiplicative(k, Grid::standard_log()).unwrap();
    let g = |y: f64| (1.0 + 0.5 * y.ln().sin()) / y;
    let f = GridFunction::from_fn(op.grid(), |v| g(v.exp())).unwrap();
    let out = op.apply(&f).unwrap();
    let [a, b] = op.interior_range();
    let h = op.grid().step();
    for frac in [0.1, 0.5, 0.9] {
        let i = (((a + frac * (b - a)) - op.grid().lo) / h).round() as usize;
        let t = op.grid().point(i).exp();
        let integrand = |y: f64| {
            if y.is_infinite() {
                return 0.0;
            }
            k.density(t / y).unwrap() * g(y) / y
        };
        let cfg = QuadConfig::with_tol(1e-300).rel_tol(1e-12).scale(t);
        let left = integrate_with(integrand, Interval::new(0.0, t).unwrap(), &cfg)
            .unwrap()
            .value;
        let right = integrate_with(integrand, Interval::from(t).unwrap(), &cfg)
            .unwrap()
            .value;
        let direct = t * (left + right);
        let grid_value = t * out.values[i];
        assert!(
            (grid_value - direct).abs() < 1e-6,
            "t={t:e} grid={grid_value} direct={direct}"
        );
    }
}

// Reference values computed with mpmath at 40 significant digits.

const NORMAL_CDF: [(f64, f64); 10] = [
    (-37.5, 4.605_353_009_581_954_8e-308),
    (-20.0, 2.753_624_118_606_233_7e-89),
    (-8.0, 6.220_960_574_271_784_1e-16),
    (-3.404_801_624_008_342_3, 3.310_606_694_659_340_5e-4),
    (-1.0, 0.158_655_253_931_457_05),
    (-0.1, 0.460_172_162_722_971_02),
    (0.0, 0.5),
    (0.5, 0.691_462_461_274_013_1),
    (2.0, 0.977_249_868_051_820_79),
    (6.0, 0.999_999_999_013_412_35),
];

const GAMMA_CDF: [(f64, f64, f64); 10] = [
    (0.05, 0.01, 0.815_559_805_741_284_93),
    (0.5, 0.3, 0.561_421_973_919_000_14),
    (1.0, 1.0, 0.632_120_558_828_557_68),
    (2.5, 1.7, 0.361_430_076_896_204_91),
    (3.0, 10.0, 0.997_230_604_284_488_42),
    (10.0, 9.0, 0.412_591_755_668_058_59),
    (40.0, 35.0, 0.219_809_554_825_317_97),
    (0.2, 50.0, 1.0),
    (7.9, 2.0, 1.270_521_488_329_005_1e-3),
    (100.0, 120.0, 0.972_136_260_109_479_34),
];

const NORMAL_QUANTILE: [(f64, f64); 7] = [
    (1e-10, -6.361_340_902_404_056_2),
    (0.001, -3.090_232_306_167_813_5),
    (0.1, -1.281_551_565_544_600_4),
    (0.3, -0.524_400_512_708_040_82),
    (0.632_120_558_828_557_7, 0.337_474_963_764_202_42),
    (0.9, 1.281_551_565_544_600_6),
    (0.999, 3.090_232_306_167_813_3),
];

#[test]
fn normal_cdf_matches_reference_values() {
    for (x, want) in NORMAL_CDF {
        let got = std_normal_cdf(x).unwrap();
        // Rounding of x/√2 is amplified by about x² in the lower tail.
        let rel = 4.0 * f64::EPSILON * (1.0 + x * x);
        assert!((got - want).abs() <= rel * want, "x={x} {got:e} {want:e}");
    }
}

#[test]
fn gamma_cdf_matches_reference_values() {
    for (p, x, want) in GAMMA_CDF {
        let got = reg_gamma_cdf(p, x).unwrap();
        assert!(
            (got - want).abs() <= 1e-13 * want.max(1e-3),
            "p={p} x={x} {got:e} {want:e}"
        );
    }
}

#[test]
fn normal_quantile_matches_reference_values() {
    for (a, want) in NORMAL_QUANTILE {
        let got = std_normal_quantile(alpha(a));
        assert!(
            (got - want).abs() <= 1e-13 * want.abs().max(1.0),
            "alpha={a} {got} {want}"
        );
    }
}
