use perisys::bounds::{
    coercive_c1_c2, product_bound_check, theorem_verdicts, theta, BoundsOptions, TheoremId,
    ThetaInputs,
};
use perisys::eigen::first_eigenpair;
use perisys::grid::{energy_pairing, DiffusionLaw, Domain, Field, Grid, Trajectory};
use perisys::model::{
    classify_by_product, classify_diffusion, Coefficient, ProblemConfig, ProblemSpec,
};
use perisys::verify::{
    apriori_compliance, periodic_growth_oracle, picone_margin, GrowthOutcome, PICONE_TOLERANCE,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn energy_pairing_is_nonnegative(
        values in prop::collection::vec(0.0f64..5.0, 15),
        p in 1.05f64..1.95,
        m in 1.0f64..4.0,
        eps in 0.0f64..1.0,
    ) {
        let g = Grid::interval(1.0, 16).unwrap();
        let mut v = vec![0.0];
        v.extend(values);
        v.push(0.0);
        let u = Field::from_values(&g, v).unwrap();
        let div = DiffusionLaw::new(p, m, eps, 1e-8).divergence(&g, u.values());
        prop_assert!(energy_pairing(&g, &div, &u) >= -1e-12);
    }

    #[test]
    fn picone_predicate_is_scale_covariant(
        p in 1.1f64..1.95,
        u in 0.01f64..10.0,
        phi in 0.01f64..10.0,
        du in prop::collection::vec(-10.0f64..10.0, 3),
        dphi in prop::collection::vec(-10.0f64..10.0, 3),
        lambda in 0.01f64..100.0,
    ) {
        let base = picone_margin(p, u, phi, &du, &dphi) < -PICONE_TOLERANCE;
        let sdu: Vec<f64> = du.iter().map(|x| x * lambda).collect();
        let sdphi: Vec<f64> = dphi.iter().map(|x| x * lambda).collect();
        let scaled = picone_margin(p, lambda * u, lambda * phi, &sdu, &sdphi) < -PICONE_TOLERANCE;
        prop_assert_eq!(base, scaled);
        prop_assert!(!base);
    }

    #[test]
    fn coercive_bound_monotone(
        k1 in 0.5f64..3.0,
        k4 in 0.5f64..3.0,
        k2 in 0.0f64..0.5,
        k3 in 0.0f64..0.5,
        a in 0.0f64..5.0,
        b in 0.0f64..5.0,
        bump in 0.0f64..0.2,
    ) {
        let base = coercive_c1_c2(k1, k4, k2, k3, a, b, 1.0).unwrap().0;
        prop_assert!(coercive_c1_c2(k1, k4, k2, k3, a + bump, b, 1.0).unwrap().0 >= base);
        prop_assert!(coercive_c1_c2(k1, k4, k2, k3, a, b + bump, 1.0).unwrap().0 >= base);
        prop_assert!(coercive_c1_c2(k1, k4, k2 + bump, k3, a, b, 1.0).unwrap().0 >= base);
        prop_assert!(coercive_c1_c2(k1 + bump, k4, k2, k3, a, b, 1.0).unwrap().0 <= base);
    }

    #[test]
    fn theta_slope_is_bracketed(
        eps0 in 0.0f64..0.5,
        mu_p in 1.0f64..30.0,
        mu_q in 1.0f64..30.0,
        a_ep in 0.0f64..10.0,
        b_eq in 0.0f64..10.0,
        klow2 in 0.0f64..1.0,
        klow3 in 0.0f64..1.0,
    ) {
        let d = ThetaInputs { a_ep, b_eq, mu_p, mu_q, klow2, klow3, period: 1.0 };
        let diff = theta(1.0, 2.0, eps0, &d) - theta(1.0, 2.0, 0.0, &d);
        let slack = 1e-12 * (1.0 + a_ep + b_eq);
        prop_assert!(diff >= -eps0 * mu_p.max(mu_q) - slack);
        prop_assert!(diff <= -eps0 * mu_p.min(mu_q) + slack);
    }

    #[test]
    fn regime_classification_consistent(m in 1.0f64..6.0, p in 1.01f64..1.99) {
        prop_assert_eq!(classify_diffusion(m, p).unwrap(), classify_by_product(m * (p - 1.0)));
    }

    #[test]
    fn growth_oracle_never_false_violation(
        c in 0.5f64..3.0,
        amp in 0.0f64..0.4,
        s in 0.0f64..2.0,
        alpha in 0.5f64..2.0,
        gamma in 0.1f64..2.0,
        slack in 0.0f64..1.0,
    ) {
        let n = 400;
        let f: Vec<f64> = (0..n)
            .map(|i| c + amp * (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin())
            .collect();
        let need = f
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let d = amp * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos() * 2.0 * std::f64::consts::PI;
                d / x.powf(s) + gamma * x.powf(alpha)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let out = periodic_growth_oracle(&f, 1.0, s, alpha, need + slack, gamma);
        prop_assert!(!matches!(out, GrowthOutcome::Violated { .. }), "{:?}", out);
    }
}

#[test]
fn moser_lattice() {
    for i in 0..10 {
        let p = 1.1 + 0.8 * i as f64 / 9.0;
        for j in 1..=10 {
            let m = p + 3.0 * j as f64 / 10.0;
            assert!(product_bound_check(p, m, 30), "p = {p}, m = {m}");
        }
    }
}

fn cooperative(cells: usize) -> ProblemSpec {
    let c = ProblemConfig {
        p: 1.5,
        q: 1.5,
        m: 2.0,
        n: 2.0,
        alpha: 2.0,
        tau: [0.25, 0.5, 0.25, 0.5],
        period: 1.0,
        domain: Domain::Interval { length: 1.0 },
        a: Coefficient::Constant(5.0),
        b: Coefficient::Constant(5.0),
        k1: Coefficient::Constant(1.0),
        k2: Coefficient::Constant(0.1),
        k3: Coefficient::Constant(0.1),
        k4: Coefficient::Constant(1.0),
        epsilon: 0.1,
        envelope: None,
    };
    ProblemSpec::build(&c, Grid::interval(1.0, cells).unwrap(), 10).unwrap()
}

#[test]
fn compliance_is_monotone_under_shrinking() {
    let spec = cooperative(32);
    let ep = first_eigenpair(&spec.grid, 1.5, 1e-10).unwrap();
    let report = theorem_verdicts(&spec, &ep, &ep, &BoundsOptions::default());
    assert_eq!(report.selected, Some(TheoremId::Coercive));
    let f = Field::sine_bump(&spec.grid, 1.0);
    let mut tr = Trajectory::constant(spec.grid, spec.dt(), spec.steps, &f, &f).unwrap();
    tr.mark_periodic();
    for scale in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let big = apriori_compliance(&tr.scaled(scale), &report);
        for shrink in [0.0, 0.3, 0.9] {
            let small = apriori_compliance(&tr.scaled(scale * shrink), &report);
            if big.passed() {
                assert!(small.passed());
            }
        }
    }
    assert!(!apriori_compliance(&tr.scaled(10.0), &report).passed());
}

#[test]
fn constants_stable_under_refinement() {
    let mut c = cooperative(8).config.clone();
    c.k2 = Coefficient::Constant(0.0);
    c.k3 = Coefficient::Constant(0.0);
    c.k1 = Coefficient::Constant(0.0);
    c.k4 = Coefficient::Constant(0.0);
    c.a = Coefficient::Separable {
        amplitude: 2.0,
        space: perisys::model::SpaceProfile::Sine,
        time: perisys::model::TimeProfile::Cosine { depth: 0.5 },
    };
    let report = |cells: usize| {
        let spec = ProblemSpec::build(&c, Grid::interval(1.0, cells).unwrap(), 20).unwrap();
        let ep = first_eigenpair(&spec.grid, 1.5, 1e-12).unwrap();
        theorem_verdicts(
            &spec,
            &ep,
            &ep,
            &BoundsOptions {
                r_proxy: Some(1.0),
                ..Default::default()
            },
        )
    };
    let coarse = report(200);
    let fine = report(400);
    assert_eq!(
        coarse.selected,
        Some(TheoremId::NoncoerciveCompetitive),
        "{:#?}",
        coarse.verdicts
    );
    let pairs = [
        (coarse.c1.unwrap(), fine.c1.unwrap()),
        (coarse.theta.unwrap(), fine.theta.unwrap()),
        (coarse.a_ep, fine.a_ep),
        (coarse.m1.unwrap(), fine.m1.unwrap()),
        (coarse.lower.unwrap().lambda0, fine.lower.unwrap().lambda0),
    ];
    for (x, y) in pairs {
        assert!(((x - y) / y).abs() < 1e-2, "{x} vs {y}");
    }
}
