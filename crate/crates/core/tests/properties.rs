//! Property tests for the structural laws the expectation machinery must
//! satisfy: linearity of moments, monotonicity and constant preservation of
//! every expectation variant, sublinearity, convex combination inequalities,
//! domination, nested-level recombination against a path-enumeration oracle,
//! and degenerate ellipticity plus Lipschitz bounds of the generator.

use nlexp_core::generator::GeneratorEval;
use nlexp_core::lattice::nested_expect;
use nlexp_core::measure::{Atom, DiscreteMeasure, MeasureFamily, SymMat};
use nlexp_core::payoff::Payoff;
use nlexp_core::penalty::{AffinePiece, ConvexPenalty, PenaltySpec};
use nlexp_core::rational::Rat;
use nlexp_core::spec::{ExpectationSpec, PenaltyScaling};
use nlexp_core::{
    check_domination, generator_closed_form, lipschitz_bounds, nonlinear_expect, one_step_value,
    sublinear_expect,
};
use proptest::prelude::*;

fn rat_coord() -> impl Strategy<Value = Rat> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| Rat::new(n, d))
}

fn positive_rat() -> impl Strategy<Value = Rat> {
    (1i64..=6, 1i64..=4).prop_map(|(n, d)| Rat::new(n, d))
}

/// Centered scalar measure: atoms {-a, 0, +a} with weights {w, 1-2w, w}
/// (binary-exact weights) and arbitrary rational y-parts.
fn centered_measure() -> impl Strategy<Value = DiscreteMeasure> {
    (
        positive_rat(),
        rat_coord(),
        rat_coord(),
        rat_coord(),
        1u32..=3,
    )
        .prop_map(|(a, y_neg, y_mid, y_pos, wi)| {
            let w = wi as f64 * 0.125;
            DiscreteMeasure::from_scalar_atoms(&[
                (-a, y_neg, w),
                (Rat::new(0, 1), y_mid, 1.0 - 2.0 * w),
                (a, y_pos, w),
            ])
            .expect("symmetric atoms are a valid measure")
        })
}

fn centered_family() -> impl Strategy<Value = MeasureFamily> {
    proptest::collection::vec(centered_measure(), 1..=2)
        .prop_map(|ms| MeasureFamily::new(ms, "random").expect("nonempty same-dimension family"))
}

/// Penalty rho(lambda) = max(c . lambda, 0) with nonnegative coefficients and
/// a zero coefficient somewhere, so it is nonnegative with a zero.
fn penalty_for(k: usize) -> impl Strategy<Value = ConvexPenalty> {
    proptest::collection::vec(0u32..=4, k).prop_map(move |cs| {
        let mut coef: Vec<f64> = cs.iter().map(|&c| c as f64 * 0.25).collect();
        coef[0] = 0.0;
        ConvexPenalty::new(
            vec![
                AffinePiece { coef, offset: 0.0 },
                AffinePiece {
                    coef: vec![0.0; k],
                    offset: 0.0,
                },
            ],
            k,
        )
        .expect("nonnegative penalty with a zero")
    })
}

fn spec_strategy() -> impl Strategy<Value = ExpectationSpec> {
    centered_family()
        .prop_flat_map(|family| {
            let k = family.len();
            (Just(family), penalty_for(k), 0usize..3)
        })
        .prop_map(|(family, rho, variant)| {
            let penalty = match variant {
                0 => PenaltySpec::Zero,
                1 => PenaltySpec::Convex(rho),
                _ => PenaltySpec::InfSupFamily(vec![rho]),
            };
            ExpectationSpec::with_defaults(family, penalty).expect("valid spec")
        })
}

/// Cubic polynomial payoff in (x1, y1).
fn poly_payoff() -> impl Strategy<Value = Payoff> {
    proptest::collection::vec(-1.0f64..1.0, 7).prop_map(|c| {
        Payoff::new("poly", f64::INFINITY, f64::INFINITY, move |x, y| {
            let (u, v) = (x[0], y[0]);
            c[0] + c[1] * u + c[2] * v + c[3] * u * u + c[4] * u * v + c[5] * v * v
                + c[6] * u * u * u
        })
    })
}

proptest! {
    #[test]
    fn moment_is_linear_in_a_and_p(
        m in centered_measure(),
        a1 in -2.0f64..2.0,
        a2 in -2.0f64..2.0,
        p1 in -2.0f64..2.0,
        p2 in -2.0f64..2.0,
        s in -3.0f64..3.0,
        t in -3.0f64..3.0,
    ) {
        let combo = m
            .moment(&SymMat::scalar(s * a1 + t * a2), &[s * p1 + t * p2])
            .unwrap();
        let parts = s * m.moment(&SymMat::scalar(a1), &[p1]).unwrap()
            + t * m.moment(&SymMat::scalar(a2), &[p2]).unwrap();
        prop_assert!((combo - parts).abs() <= 1e-12);
    }

    #[test]
    fn truncated_tail_vanishes_beyond_support_and_decreases(
        m in centered_measure(),
        n1 in 0.0f64..50.0,
        n2 in 0.0f64..50.0,
    ) {
        let bound = nlexp_core::rational::to_f64(&m.max_x_norm2())
            .max(nlexp_core::rational::to_f64(&m.max_y_norm2()).sqrt());
        prop_assert_eq!(m.truncated_tail(bound), 0.0);
        prop_assert_eq!(m.truncated_tail(bound + 1.0), 0.0);
        let (lo, hi) = if n1 <= n2 { (n1, n2) } else { (n2, n1) };
        prop_assert!(m.truncated_tail(hi) <= m.truncated_tail(lo) + 1e-15);
    }

    #[test]
    fn scale_preserves_weights_exactly(m in centered_measure(), ax in positive_rat(), ay in positive_rat()) {
        let scaled = m.scale(ax, ay).unwrap();
        prop_assert_eq!(scaled.weights(), m.weights());
    }

    #[test]
    fn expectations_are_monotone(spec in spec_strategy(), base in poly_payoff(), gap in poly_payoff()) {
        // phi1 = base + gap^2 >= base pointwise
        let phi1 = {
            let b = base.clone();
            let g = gap.clone();
            Payoff::new("base+gap^2", f64::INFINITY, f64::INFINITY, move |x, y| {
                let gv = g.eval(x, y);
                b.eval(x, y) + gv * gv
            })
        };
        let hi = nonlinear_expect(&spec, &phi1).unwrap();
        let lo = nonlinear_expect(&spec, &base).unwrap();
        prop_assert!(hi >= lo - 1e-12, "hi {hi} < lo {lo}");
    }

    #[test]
    fn expectations_preserve_constants(spec in spec_strategy(), c in -5.0f64..5.0) {
        let v = nonlinear_expect(&spec, &Payoff::constant(c)).unwrap();
        prop_assert!((v - c).abs() <= 1e-12);
    }

    #[test]
    fn sublinear_is_positively_homogeneous_and_subadditive(
        family in centered_family(),
        phi in poly_payoff(),
        psi in poly_payoff(),
        lambda in 0.0f64..4.0,
    ) {
        let scaled = {
            let f = phi.clone();
            Payoff::new("l*phi", f64::INFINITY, f64::INFINITY, move |x, y| lambda * f.eval(x, y))
        };
        let sum = {
            let (f, g) = (phi.clone(), psi.clone());
            Payoff::new("phi+psi", f64::INFINITY, f64::INFINITY, move |x, y| f.eval(x, y) + g.eval(x, y))
        };
        let e_phi = sublinear_expect(&family, &phi).unwrap();
        let e_psi = sublinear_expect(&family, &psi).unwrap();
        let e_scaled = sublinear_expect(&family, &scaled).unwrap();
        let e_sum = sublinear_expect(&family, &sum).unwrap();
        prop_assert!((e_scaled - lambda * e_phi).abs() <= 1e-10);
        prop_assert!(e_sum <= e_phi + e_psi + 1e-10);
    }

    #[test]
    fn convex_combination_inequality(
        family in centered_family(),
        phi in poly_payoff(),
        psi in poly_payoff(),
    ) {
        let k = family.len();
        let rho = ConvexPenalty::new(
            vec![
                AffinePiece { coef: (0..k).map(|j| j as f64).collect(), offset: 0.0 },
                AffinePiece { coef: vec![0.0; k], offset: 0.0 },
            ],
            k,
        )
        .unwrap();
        let spec = ExpectationSpec::with_defaults(family, PenaltySpec::Convex(rho)).unwrap();
        for w in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let mix = {
                let (f, g) = (phi.clone(), psi.clone());
                Payoff::new("mix", f64::INFINITY, f64::INFINITY, move |x, y| {
                    w * f.eval(x, y) + (1.0 - w) * g.eval(x, y)
                })
            };
            let e_mix = nonlinear_expect(&spec, &mix).unwrap();
            let e_phi = nonlinear_expect(&spec, &phi).unwrap();
            let e_psi = nonlinear_expect(&spec, &psi).unwrap();
            prop_assert!(e_mix <= w * e_phi + (1.0 - w) * e_psi + 1e-10);
        }
    }

    #[test]
    fn domination_slack_is_nonnegative(spec in spec_strategy(), phi1 in poly_payoff(), phi2 in poly_payoff()) {
        let slack = check_domination(&spec, &phi1, &phi2).unwrap();
        prop_assert!(slack >= -1e-10, "slack {slack}");
    }

    #[test]
    fn scaled_second_moment_is_constant_in_n(spec in spec_strategy()) {
        let base: f64 = spec
            .family
            .extremes()
            .iter()
            .map(DiscreteMeasure::x_abs2_integral)
            .fold(f64::NEG_INFINITY, f64::max);
        for n in [1u32, 2, 3, 8, 77] {
            let xf2 = nlexp_core::rational::to_f64(&spec.x_scaling.factor_squared(n));
            let scaled: f64 = spec
                .family
                .extremes()
                .iter()
                .map(|m| n as f64 * xf2 * m.x_abs2_integral())
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((scaled - base).abs() <= 1e-12);
        }
    }

    #[test]
    fn generator_is_degenerate_elliptic_and_lipschitz(
        spec in spec_strategy(),
        a in -3.0f64..3.0,
        bump in 0.0f64..3.0,
        a2 in -3.0f64..3.0,
        p in -2.0f64..2.0,
        p2 in -2.0f64..2.0,
    ) {
        let (lip_a, lip_p) = lipschitz_bounds(&spec);
        let g = |aa: f64, pp: f64| {
            generator_closed_form(&spec, &SymMat::scalar(aa), &[pp]).unwrap()
        };
        prop_assert!(g(a + bump, p) >= g(a, p) - 1e-10);
        let diff = (g(a, p) - g(a2, p2)).abs();
        let allowed = lip_a * (a - a2).abs() + lip_p * (p - p2).abs() + 1e-10;
        prop_assert!(diff <= allowed, "diff {diff} > {allowed}");
        // G(0, 0) = 0 exactly (penalties vanish somewhere and moments are 0)
        prop_assert_eq!(g(0.0, 0.0), 0.0);
    }
}

/// Path-enumeration oracle: evaluates the nested expectation by recursing
/// over per-step outcomes without any recombination, using only the public
/// one-step program.  Exponential, so keep n small.
fn path_oracle(spec: &ExpectationSpec, n: u32, payoff: &Payoff) -> f64 {
    struct Ctx<'a> {
        spec: &'a ExpectationSpec,
        payoff: &'a Payoff,
        n: u32,
        xf: f64,
        yf: f64,
        scale: f64,
    }
    fn rec(ctx: &Ctx, depth: u32, x_acc: f64, y_acc: f64) -> f64 {
        if depth == ctx.n {
            return ctx.payoff.eval(&[x_acc], &[y_acc]);
        }
        let q: Vec<f64> = ctx
            .spec
            .family
            .extremes()
            .iter()
            .map(|m| {
                m.atoms()
                    .iter()
                    .zip(m.weights())
                    .map(|(atom, w)| {
                        let x = x_acc + nlexp_core::rational::to_f64(&atom.x[0]) * ctx.xf;
                        let y = y_acc + nlexp_core::rational::to_f64(&atom.y[0]) * ctx.yf;
                        w * rec(ctx, depth + 1, x, y)
                    })
                    .sum()
            })
            .collect();
        one_step_value(&ctx.spec.penalty, ctx.scale, &q)
    }
    let ctx = Ctx {
        spec,
        payoff,
        n,
        xf: spec.x_scaling.factor(n),
        yf: spec.y_scaling.factor(n),
        scale: spec.step_penalty_scale(n),
    };
    rec(&ctx, 0, 0.0, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn recombination_matches_path_enumeration(
        spec in spec_strategy(),
        payoff in poly_payoff(),
        n in 1u32..=4,
        over_n in any::<bool>(),
    ) {
        let spec = if over_n {
            spec.with_penalty_scaling(PenaltyScaling::OverN)
        } else {
            spec
        };
        let run = nested_expect(&spec, n, &payoff).unwrap();
        let oracle = path_oracle(&spec, n, &payoff);
        prop_assert!(
            (run.value - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()),
            "lattice {} vs paths {}",
            run.value,
            oracle
        );
    }

    #[test]
    fn nested_is_monotone_and_dominated(
        spec in spec_strategy(),
        base in poly_payoff(),
        gap in poly_payoff(),
        n in 1u32..=4,
    ) {
        let phi1 = {
            let b = base.clone();
            let g = gap.clone();
            Payoff::new("base+gap^2", f64::INFINITY, f64::INFINITY, move |x, y| {
                let gv = g.eval(x, y);
                b.eval(x, y) + gv * gv
            })
        };
        let hi = nested_expect(&spec, n, &phi1).unwrap().value;
        let lo = nested_expect(&spec, n, &base).unwrap().value;
        prop_assert!(hi >= lo - 1e-12);

        // n-step domination: E~[phi1] - E~[base] <= E^[phi1 - base]
        let hat = spec.sublinear_view();
        let diff = Payoff::difference(&phi1, &base);
        let hat_diff = nested_expect(&hat, n, &diff).unwrap().value;
        prop_assert!(hi - lo <= hat_diff + 1e-10);
    }

    #[test]
    fn nested_values_respect_the_payoff_bound(spec in spec_strategy(), n in 1u32..=4) {
        let payoff = Payoff::cosine(1);
        let run = nested_expect(&spec, n, &payoff).unwrap();
        prop_assert!(run.value.abs() <= payoff.bound + 1e-12);
    }

    #[test]
    fn limit_generator_scales_homogeneously(spec in spec_strategy(), a in -2.0f64..2.0, p in -2.0f64..2.0) {
        let gen = GeneratorEval::numeric_limit(&spec, vec![1, 2, 4, 8, 16, 32, 64, 128, 256]).unwrap();
        if let Ok(worst) = nlexp_core::homogeneity_check(
            &gen,
            &SymMat::scalar(a),
            &[p],
            &[0.0, 0.5, 1.0, 2.0, 2.5],
        ) {
            prop_assert!(worst <= 1e-9, "worst {worst}");
        }
    }
}

#[test]
fn mis_centered_family_fails_centering() {
    let m = DiscreteMeasure::new(
        vec![Atom {
            x: vec![Rat::new(1, 1)],
            y: vec![Rat::new(0, 1)],
        }],
        vec![1.0],
        1,
    )
    .unwrap();
    let fam = MeasureFamily::new(vec![m], "off").unwrap();
    assert!(!fam.centering_check().centered);
}
