//! The verification suite: seeded randomized checks of the structural
//! identities and inequalities a spec must satisfy, one report row per check.
//!
//! Failures are rows, not errors; the suite always completes.  Checks whose
//! hypotheses a spec violates are skipped with a reason (a mis-centered
//! family skips the mean-certainty and truncation-estimate checks and fails
//! the centering and quadratic-identity rows; scaled-penalty specs skip the
//! homogeneity check, whose limit hypothesis they genuinely do not satisfy).

use crate::config::VerifyDoc;
use crate::report::{EnvironmentStamp, ExperimentReport, ReportRow, RowStatus};
use crate::Result;
use nlexp_core::generator::GeneratorEval;
use nlexp_core::lattice::{
    independence_product_check, quadratic_identity_check, truncation_estimate_check,
    uniform_integrability_profile,
};
use nlexp_core::payoff::Payoff;
use nlexp_core::measure::CENTERING_TOL;
use nlexp_core::rational::to_f64;
use nlexp_core::spec::PenaltyScaling;
use nlexp_core::{
    check_domination, homogeneity_check, mean_certainty_shift_check, Error, ExpectationSpec,
    SymMat,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALL_CHECKS: [&str; 9] = [
    "centering",
    "domination",
    "mean-certainty-shift",
    "quadratic-identity",
    "sum-truncation-estimate",
    "independence-product",
    "uniform-integrability",
    "homogeneity",
    "penalty-collapse",
];

const DOMINATION_TOL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-10;
const PRODUCT_TOL: f64 = 1e-12;
const ESTIMATE_TOL: f64 = 1e-12;
const HOMOGENEITY_TOL: f64 = 1e-9;
const COLLAPSE_TOL: f64 = 1e-8;
const LIMIT_N_LIST: [u32; 11] = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024];

fn poly_payoff(rng: &mut ChaCha8Rng) -> Payoff {
    let c: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Payoff::new("poly", f64::INFINITY, f64::INFINITY, move |x, y| {
        let (u, v) = (x[0], y[0]);
        c[0] + c[1] * u + c[2] * v + c[3] * u * u + c[4] * u * v + c[5] * v * v + c[6] * u * u * u
    })
}

fn poly_payoff_y(rng: &mut ChaCha8Rng) -> Payoff {
    let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Payoff::new("poly-y", f64::INFINITY, f64::INFINITY, move |_, y| {
        c[0] + c[1] * y[0] + c[2] * y[0] * y[0]
    })
}

/// Runs the configured checks against a spec ("verify_suite").  Every check
/// contributes exactly one row carrying its worst residual.
pub fn verify_suite(
    spec: &ExpectationSpec,
    doc: &VerifyDoc,
    stamp: EnvironmentStamp,
) -> Result<ExperimentReport> {
    let seed = stamp.seed;
    let instances = doc.instances.unwrap_or(100).max(1);
    let names: Vec<String> = doc
        .checks
        .clone()
        .unwrap_or_else(|| ALL_CHECKS.iter().map(|s| s.to_string()).collect());

    let centering = spec.family.centering_check();
    let mut report = ExperimentReport::new(spec.label(), "verify", stamp);

    for (idx, name) in names.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(idx as u64));
        let row = match name.as_str() {
            "centering" => ReportRow::check("centering", centering.worst, CENTERING_TOL, centering.centered),
            "domination" => {
                let mut worst = f64::INFINITY;
                for _ in 0..instances {
                    let phi1 = poly_payoff(&mut rng);
                    let phi2 = poly_payoff(&mut rng);
                    worst = worst.min(check_domination(spec, &phi1, &phi2)?);
                }
                ReportRow::check("domination", worst, -DOMINATION_TOL, worst >= -DOMINATION_TOL)
            }
            "mean-certainty-shift" => {
                if !centering.centered {
                    skipped("mean-certainty-shift", "family not centered")
                } else {
                    let mut worst: f64 = 0.0;
                    for _ in 0..instances {
                        let alpha = rng.gen_range(-3.0..3.0);
                        let psi = poly_payoff_y(&mut rng);
                        worst = worst.max(mean_certainty_shift_check(spec, alpha, &psi)?.abs());
                    }
                    ReportRow::check("mean-certainty-shift", worst, IDENTITY_TOL, worst <= IDENTITY_TOL)
                }
            }
            "quadratic-identity" => {
                if !centering.centered {
                    ReportRow::check("quadratic-identity", centering.worst, IDENTITY_TOL, false)
                } else {
                    let mut worst: f64 = 0.0;
                    for _ in 0..instances {
                        let n = rng.gen_range(1..=8u32);
                        let k = rng.gen_range(1..=n);
                        let a = SymMat::scalar(rng.gen_range(-2.0..2.0));
                        let p = [rng.gen_range(-2.0..2.0)];
                        let id = quadratic_identity_check(spec, n, k, &a, &p)?;
                        worst = worst.max(id.worst_residual());
                    }
                    ReportRow::check("quadratic-identity", worst, IDENTITY_TOL, worst <= IDENTITY_TOL)
                }
            }
            "sum-truncation-estimate" => {
                if !centering.centered {
                    skipped("sum-truncation-estimate", "family not centered")
                } else {
                    let mut worst = f64::INFINITY;
                    for _ in 0..instances {
                        let n = rng.gen_range(1..=6u32);
                        let k = rng.gen_range(1..=n);
                        let cut = [0.5, 1.0, 2.0, 4.0][rng.gen_range(0..4usize)];
                        worst = worst.min(truncation_estimate_check(spec, n, k, cut)?);
                    }
                    ReportRow::check("sum-truncation-estimate", worst, -ESTIMATE_TOL, worst >= -ESTIMATE_TOL)
                }
            }
            "independence-product" => {
                let mut worst: f64 = 0.0;
                for _ in 0..instances {
                    let xi = poly_payoff(&mut rng);
                    let eta = poly_payoff(&mut rng);
                    worst = worst.max(independence_product_check(spec, &xi, &eta)?.residual());
                }
                ReportRow::check("independence-product", worst, PRODUCT_TOL, worst <= PRODUCT_TOL)
            }
            "uniform-integrability" => uniform_integrability_row(spec)?,
            "homogeneity" => {
                if !spec.penalty.is_zero() && spec.penalty_scaling == PenaltyScaling::OverN {
                    skipped(
                        "homogeneity",
                        "scaled-penalty generators are genuinely non-homogeneous",
                    )
                } else {
                    homogeneity_row(spec, &mut rng, instances.min(20))?
                }
            }
            "penalty-collapse" => collapse_row(spec, &mut rng, instances.min(20))?,
            other => skipped(other.to_string(), "unknown check"),
        };
        report.rows.push(row);
    }
    Ok(report)
}

fn skipped(name: impl Into<String>, reason: &str) -> ReportRow {
    ReportRow::info(name).with_status(RowStatus::Skipped(reason.into()))
}

fn uniform_integrability_row(spec: &ExpectationSpec) -> Result<ReportRow> {
    let bound = to_f64(&spec.family.max_x_norm2())
        .max(to_f64(&spec.family.max_y_norm2()).sqrt());
    let mut cuts = vec![0.25, 0.5, 1.0, 2.0, 4.0, bound, bound + 1.0];
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let n_list = [1u32, 2, 4, 8, 16, 64];
    let rows = uniform_integrability_profile(spec, &n_list, &cuts)?;

    // worst violation of: nonincreasing in N, zero beyond the bound,
    // constant across n.
    let mut violation: f64 = 0.0;
    for n in n_list {
        let per_n: Vec<_> = rows.iter().filter(|r| r.n == n).collect();
        for pair in per_n.windows(2) {
            violation = violation.max(pair[1].value - pair[0].value);
        }
        for row in &per_n {
            if row.cut >= bound {
                violation = violation.max(row.value.abs());
            }
        }
    }
    for cut in &cuts {
        let base = rows
            .iter()
            .find(|r| r.n == 1 && r.cut == *cut)
            .expect("profile covers the grid")
            .value;
        for row in rows.iter().filter(|r| r.cut == *cut) {
            violation = violation.max((row.value - base).abs());
        }
    }
    Ok(ReportRow::check(
        "uniform-integrability",
        violation,
        0.0,
        violation == 0.0,
    ))
}

fn homogeneity_row(
    spec: &ExpectationSpec,
    rng: &mut ChaCha8Rng,
    instances: u32,
) -> Result<ReportRow> {
    let gen = GeneratorEval::numeric_limit(spec, LIMIT_N_LIST.to_vec())?;
    let scales = [0.0, 0.5, 1.0, 2.0, 2.5];
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let a = SymMat::scalar(rng.gen_range(-2.0..2.0));
        let p = [rng.gen_range(-2.0..2.0)];
        match homogeneity_check(&gen, &a, &p, &scales) {
            Ok(r) => worst = worst.max(r),
            Err(Error::NonConvergent { .. }) => {
                return Ok(ReportRow::check("homogeneity", f64::NAN, HOMOGENEITY_TOL, false));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(ReportRow::check("homogeneity", worst, HOMOGENEITY_TOL, worst <= HOMOGENEITY_TOL))
}

fn collapse_row(
    spec: &ExpectationSpec,
    rng: &mut ChaCha8Rng,
    instances: u32,
) -> Result<ReportRow> {
    let limit = GeneratorEval::numeric_limit(spec, LIMIT_N_LIST.to_vec())?;
    let collapsed = GeneratorEval::collapsed(spec)?;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let a = SymMat::scalar(rng.gen_range(-2.5..2.5));
        let p = [rng.gen_range(-2.5..2.5)];
        match limit.evaluate(&a, &p) {
            Ok(lv) => {
                let cv = collapsed.evaluate(&a, &p)?;
                worst = worst.max((lv - cv).abs());
            }
            Err(Error::NonConvergent { .. }) => {
                return Ok(ReportRow::check("penalty-collapse", f64::NAN, COLLAPSE_TOL, false));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(ReportRow::check("penalty-collapse", worst, COLLAPSE_TOL, worst <= COLLAPSE_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    fn stamp(seed: u64) -> EnvironmentStamp {
        EnvironmentStamp::new(seed, "test")
    }

    fn run_all(name: &str, seed: u64) -> ExperimentReport {
        let cfg = bundled::config(name).unwrap();
        let spec = cfg.build_spec().unwrap();
        let doc = VerifyDoc {
            checks: None,
            instances: Some(40),
        };
        verify_suite(&spec, &doc, stamp(seed)).unwrap()
    }

    #[test]
    fn bundled_specs_pass_the_suite() {
        for name in bundled::NAMES {
            let report = run_all(name, 7);
            assert!(
                report.all_pass(),
                "suite failed for {name}:\n{}",
                report.to_csv()
            );
            assert_eq!(report.rows.len(), ALL_CHECKS.len());
        }
    }

    #[test]
    fn over_n_specs_skip_homogeneity() {
        let report = run_all("convex-clt", 7);
        let row = report
            .rows
            .iter()
            .find(|r| r.experiment == "homogeneity")
            .unwrap();
        assert!(matches!(row.status, RowStatus::Skipped(_)));
    }

    #[test]
    fn suite_is_deterministic_per_seed() {
        let a = run_all("convex-clt", 11);
        let b = run_all("convex-clt", 11);
        assert_eq!(a.to_csv(), b.to_csv());
        let c = run_all("convex-clt", 12);
        // different seed shifts the randomized residuals of at least one row
        assert_eq!(c.rows.len(), a.rows.len());
    }

    #[test]
    fn mis_centered_family_fails_and_skips_as_specified() {
        let text = r#"
[model]
label = "off-center"
d = 1
[[model.extreme]]
atoms = [{ x = ["1"], w = "1" }]
[model.penalty]
variant = "zero"
"#;
        let cfg = crate::config::ConfigDoc::from_toml(text).unwrap();
        let spec = cfg.build_spec().unwrap();
        let doc = VerifyDoc {
            checks: None,
            instances: Some(10),
        };
        let report = verify_suite(&spec, &doc, stamp(7)).unwrap();
        let status = |name: &str| {
            report
                .rows
                .iter()
                .find(|r| r.experiment == name)
                .unwrap()
                .status
                .clone()
        };
        assert_eq!(status("centering"), RowStatus::Fail);
        assert_eq!(status("quadratic-identity"), RowStatus::Fail);
        assert!(matches!(status("mean-certainty-shift"), RowStatus::Skipped(_)));
        assert!(matches!(
            status("sum-truncation-estimate"),
            RowStatus::Skipped(_)
        ));
        assert_eq!(status("domination"), RowStatus::Pass);
        assert!(!report.all_pass());
    }
}
