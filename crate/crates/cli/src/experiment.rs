//! Experiment pipelines: nested-vs-PDE convergence studies, single PDE
//! solves, tightness statistics, and generator tables.

use crate::config::{ConvergeDoc, GeneratorTableDoc, PdeOnlyDoc, TightnessDoc};
use crate::report::{
    EnvironmentStamp, ExperimentReport, NestedMeta, ReportRow, RowStatus,
};
use crate::{CliError, Result};
use nlexp_core::generator::GeneratorEval;
use nlexp_core::lattice::nested_expect;
use nlexp_core::payoff::Payoff;
use nlexp_core::pde::{evaluate_origin, pde_solve, richardson_refine};
use nlexp_core::penalty::PenaltySpec;
use nlexp_core::spec::PenaltyScaling;
use nlexp_core::{Error, ExpectationSpec, SymMat};
use std::path::Path;

/// Ties within this tolerance do not break endpoint dominance.
const DOMINANCE_TIE_TOL: f64 = 1e-9;

/// Picks the PDE-side generator.  Over-n penalties keep their closed form;
/// fixed penalties collapse onto their zero set (the n-limit generator).
fn generator_for(spec: &ExpectationSpec, choice: Option<&str>) -> Result<GeneratorEval> {
    let gen = match choice {
        Some("closed-form") => GeneratorEval::closed_form(spec)?,
        Some("limit") => GeneratorEval::collapsed(spec)?,
        Some(other) => {
            return Err(CliError::Config(format!(
                "unknown generator choice {other:?} (expected closed-form or limit)"
            )))
        }
        None => match (&spec.penalty, spec.penalty_scaling) {
            (PenaltySpec::Zero, _) => GeneratorEval::closed_form(spec)?,
            (_, PenaltyScaling::OverN) => GeneratorEval::closed_form(spec)?,
            (_, PenaltyScaling::Fixed) => GeneratorEval::collapsed(spec)?,
        },
    };
    Ok(gen)
}

/// Solves the PDE side (with extrapolation when levels > 1) and reports per
/// level; returns the reference value for nested gaps.
fn pde_reference(
    report: &mut ExperimentReport,
    gen: &GeneratorEval,
    payoff: &Payoff,
    doc: &ConvergeDoc,
) -> Result<f64> {
    let grid = doc.pde.build()?;
    let levels = doc.pde.levels();
    if levels <= 1 {
        let field = pde_solve(gen, payoff, &grid)?;
        let value = evaluate_origin(&field);
        report
            .rows
            .push(ReportRow::info("pde").with_value(value));
        Ok(value)
    } else {
        let refine = richardson_refine(gen, payoff, &grid, levels)?;
        for (h, v) in &refine.origin_values {
            report.rows.push(
                ReportRow::info(format!("pde-level(h={h})")).with_value(*v),
            );
        }
        report.rows.push(
            ReportRow::info("pde-extrapolated")
                .with_value(refine.extrapolated)
                .with_residual(refine.observed_order),
        );
        report.refinement = Some(refine.origin_values.clone());
        Ok(refine.extrapolated)
    }
}

fn convergence_pipeline(
    spec: &ExpectationSpec,
    doc: &ConvergeDoc,
    kind: &str,
    stamp: EnvironmentStamp,
) -> Result<ExperimentReport> {
    doc.validate()?;
    let payoff = doc.payoff.build()?;
    let gen = generator_for(spec, doc.generator.as_deref())?;
    let mut report = ExperimentReport::new(spec.label(), kind, stamp);

    let reference = pde_reference(&mut report, &gen, &payoff, doc)?;

    let mut gaps = Vec::with_capacity(doc.n_list.len());
    for &n in &doc.n_list {
        match nested_expect(spec, n, &payoff) {
            Ok(run) => {
                let gap = (run.value - reference).abs();
                gaps.push(gap);
                report.rows.push(
                    ReportRow::info("nested")
                        .with_n(n as u64)
                        .with_value(run.value)
                        .with_reference(reference)
                        .with_gap(gap),
                );
                report.nested_meta.push(NestedMeta {
                    n,
                    node_count: run.node_count,
                    wall_time: run.wall_time,
                });
            }
            Err(Error::LatticeOverflow { level, nodes, cap }) => {
                // flush what we have and mark the run failed
                report.rows.push(
                    ReportRow::info(format!(
                        "nested-overflow(level={level},nodes={nodes},cap={cap})"
                    ))
                    .with_n(n as u64)
                    .with_status(RowStatus::Fail),
                );
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }

    if let (Some(last), Some(min)) = (
        gaps.last().copied(),
        gaps.iter().copied().min_by(f64::total_cmp),
    ) {
        let ok = last <= min + DOMINANCE_TIE_TOL;
        report
            .rows
            .push(ReportRow::check("endpoint-dominance", last - min, DOMINANCE_TIE_TOL, ok));
    }
    Ok(report)
}

/// Convergence study: nested values for each n against the PDE origin value
/// ("run_convergence").
pub fn run_convergence(
    spec: &ExpectationSpec,
    doc: &ConvergeDoc,
    stamp: EnvironmentStamp,
) -> Result<ExperimentReport> {
    convergence_pipeline(spec, doc, "converge", stamp)
}

/// The normalized-batch variant: identical pipeline with the per-step penalty
/// divided by n, generator in closed form ("run_corollary1").
pub fn run_corollary1(
    spec: &ExpectationSpec,
    doc: &ConvergeDoc,
    stamp: EnvironmentStamp,
) -> Result<ExperimentReport> {
    if spec.penalty.is_zero() {
        return Err(CliError::Config(
            "corollary1 needs a convex or inf-sup penalty (use converge for the sublinear case)"
                .into(),
        ));
    }
    let scaled = spec.with_penalty_scaling(PenaltyScaling::OverN);
    let mut doc = doc.clone();
    doc.generator = Some("closed-form".into());
    convergence_pipeline(&scaled, &doc, "corollary1", stamp)
}

/// Single PDE solve: origin value row, the influence certificate, and (when
/// `out` is given) a field snapshot CSV with columns x, y, u.
pub fn run_pde(
    spec: &ExpectationSpec,
    doc: &PdeOnlyDoc,
    stamp: EnvironmentStamp,
    out: Option<&Path>,
) -> Result<ExperimentReport> {
    let payoff = doc.payoff.build()?;
    let gen = generator_for(spec, doc.generator.as_deref())?;
    let grid = doc.pde.build()?;
    let levels = doc.pde.levels();
    let mut report = ExperimentReport::new(spec.label(), "pde", stamp);
    if levels <= 1 {
        let field = pde_solve(&gen, &payoff, &grid)?;
        report
            .rows
            .push(ReportRow::info("pde").with_value(evaluate_origin(&field)));
        report.rows.push(
            ReportRow::info(format!(
                "influence-margin(x={}/{},y={}/{})",
                field.certificate.x_actual,
                field.certificate.x_required,
                field.certificate.y_actual,
                field.certificate.y_required
            ))
            .with_status(RowStatus::Pass),
        );
        if let Some(dir) = out {
            std::fs::create_dir_all(dir)?;
            std::fs::write(
                dir.join(format!("{}-pde-field.csv", spec.label())),
                field.csv_snapshot(),
            )?;
        }
    } else {
        let refine = richardson_refine(&gen, &payoff, &grid, levels)?;
        for (h, v) in &refine.origin_values {
            report
                .rows
                .push(ReportRow::info(format!("pde-level(h={h})")).with_value(*v));
        }
        report.rows.push(
            ReportRow::info("pde-extrapolated")
                .with_value(refine.extrapolated)
                .with_residual(refine.observed_order),
        );
        report.refinement = Some(refine.origin_values.clone());
    }
    Ok(report)
}

/// Tightness statistic: beta = max over (n, i) of the nested worst-case
/// clipped norm, checked against the tail bound `F[hat_N] <= beta / (N - 1)`
/// for every configured n ("tightness_beta").
pub fn run_tightness(
    spec: &ExpectationSpec,
    doc: &TightnessDoc,
    stamp: EnvironmentStamp,
) -> Result<ExperimentReport> {
    if doc.cutoff <= 1.0 {
        return Err(
            Error::InvalidParameter("tightness cutoff must exceed 1".into()).into(),
        );
    }
    if doc.n_list.is_empty() || doc.i_list.is_empty() {
        return Err(CliError::Config("tightness needs n_list and i_list".into()));
    }
    let hat_view = spec.sublinear_view();
    let mut report = ExperimentReport::new(spec.label(), "tightness", stamp);

    let mut beta = f64::NEG_INFINITY;
    for &n in &doc.n_list {
        for &cap in &doc.i_list {
            if cap < 1.0 {
                return Err(Error::InvalidParameter(
                    "i_list entries must be >= 1".into(),
                )
                .into());
            }
            let run = nested_expect(&hat_view, n, &Payoff::clipped_norm(cap))?;
            beta = beta.max(run.value);
            report.nested_meta.push(NestedMeta {
                n,
                node_count: run.node_count,
                wall_time: run.wall_time,
            });
        }
    }
    report
        .rows
        .push(ReportRow::info("beta").with_value(beta));

    let bound = beta / (doc.cutoff - 1.0);
    for &n in &doc.n_list {
        let tail = nested_expect(&hat_view, n, &Payoff::tail_hat(doc.cutoff))?.value;
        let ok = tail <= bound + 1e-12;
        report.rows.push(
            ReportRow::info("tail-bound")
                .with_n(n as u64)
                .with_value(tail)
                .with_reference(bound)
                .with_residual(tail - bound)
                .with_status(if ok { RowStatus::Pass } else { RowStatus::Fail }),
        );
    }
    Ok(report)
}

/// Evaluates the generator over a configured (A, p) grid; rows land in the
/// standard report and, when `out` is given, a dedicated `a,p,value` CSV.
pub fn run_generator_table(
    spec: &ExpectationSpec,
    doc: &GeneratorTableDoc,
    stamp: EnvironmentStamp,
    out: Option<&Path>,
) -> Result<ExperimentReport> {
    if doc.a_list.is_empty() {
        return Err(CliError::Config("generator_table needs a_list".into()));
    }
    let gen = generator_for(spec, doc.regime.as_deref())?;
    let p_list = doc.p_list.clone().unwrap_or_else(|| vec![0.0]);
    let mut report = ExperimentReport::new(spec.label(), "generator-table", stamp);
    let mut table = String::from("a,p,value\n");
    for &a in &doc.a_list {
        for &p in &p_list {
            let v = gen.evaluate(&SymMat::scalar(a), &[p])?;
            table.push_str(&format!("{a},{p},{v}\n"));
            report.rows.push(
                ReportRow::info(format!("generator(a={a},p={p})")).with_value(v),
            );
        }
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}-generator-values.csv", spec.label())), table)?;
    }
    Ok(report)
}
