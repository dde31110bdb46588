//! Itô formula residuals under refinement and localization.

use gstoch_core::formula::{
    build_path, builtin_case, localize, path_both_sides, path_both_sides_stopped,
    residual_convergence, ConvergenceConfig, PanelControl, AFFINE_CASES,
};
use gstoch_core::sublinear::{simulate_paths, Partition, PolicyRule, SimGrid};
use gstoch_core::Result;

use super::Ctx;
use crate::anchor::Anchor;
use crate::report::Relation;

pub fn ito_formula(ctx: &mut Ctx<'_>, cases: &[String], mesh_steps: &[usize]) -> Result<()> {
    let config = ConvergenceConfig {
        horizon: ctx.horizon(),
        mesh_steps: mesh_steps.to_vec(),
        paths: ctx.cfg.paths,
        seed: ctx.seed,
        controls: PanelControl::ALL.to_vec(),
    };
    let tol = ctx.tol().clone();
    for name in cases {
        let case = builtin_case::<f64>(name)?;
        let table = residual_convergence(&case, &ctx.u, &config)?;
        let affine = AFFINE_CASES.contains(&name.as_str());
        for s in &table.series {
            let prefix = format!("ito_formula.{name}.{}", s.control.name());
            if affine {
                let worst = s.rows.iter().map(|r| r.max_abs).fold(0.0, f64::max);
                ctx.row(
                    format!("{prefix}.max_residual"),
                    Anchor::ItoFormula,
                    Relation::AtMost,
                    worst,
                    0.0,
                    tol.affine,
                );
            } else {
                let order = s.order.unwrap_or(f64::NAN);
                ctx.row(
                    format!("{prefix}.order"),
                    Anchor::ItoFormula,
                    Relation::AtLeast,
                    order,
                    tol.min_order,
                    0.0,
                );
                ctx.flag(format!("{prefix}.monotone"), Anchor::ItoFormula, s.monotone);
            }
            ctx.plot(
                format!("ito_formula_{name}_{}", s.control.name()),
                s.rows.iter().map(|r| (r.mesh, r.l2)).collect(),
            );
        }
    }
    Ok(())
}

pub fn localization(ctx: &mut Ctx<'_>, name: &str, levels: &[f64], steps: usize) -> Result<()> {
    let case = builtin_case::<f64>(name)?;
    let grid = Partition::uniform(ctx.horizon(), steps)?;
    let rule = PolicyRule::named("random_switching", &ctx.u, ctx.seed)?;
    let bundle = simulate_paths(&ctx.u, &rule, &SimGrid::new(&grid), ctx.cfg.paths, ctx.seed)?;
    let mut consistency = 0.0f64;
    let mut untouched = 0.0f64;
    let mut coverage = Vec::new();
    let mut previous: Option<Vec<Option<usize>>> = None;
    let mut nested = true;
    for &k in levels {
        let loc = localize(&case.coeffs, &case.x0, &bundle, k)?;
        for (i, stop) in loc.stop_indices.iter().enumerate() {
            let v = bundle.view(i);
            let full = build_path(&case.x0, &case.coeffs, &v)?;
            let cut = build_path(&case.x0, &loc.truncated, &v)?;
            let a = path_both_sides(&case.phi, &cut, &v, 0, steps)?;
            let b = path_both_sides_stopped(&case.phi, &full, &v, 0, steps, *stop)?;
            consistency = consistency
                .max((a.lhs - b.lhs).abs())
                .max((a.rhs - b.rhs).abs());
            if stop.is_none() {
                let d = full
                    .x(steps)
                    .iter()
                    .zip(cut.x(steps))
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0, f64::max);
                untouched = untouched.max(d);
            }
        }
        if let Some(p) = &previous {
            nested &= p
                .iter()
                .zip(&loc.stop_indices)
                .all(|(a, b)| b.unwrap_or(usize::MAX) >= a.unwrap_or(usize::MAX));
        }
        previous = Some(loc.stop_indices);
        coverage.push((k, loc.coverage));
    }
    let tol = ctx.tol().localization;
    let prefix = format!("localization.{name}");
    ctx.row(
        format!("{prefix}.truncated_vs_stopped"),
        Anchor::Localization,
        Relation::AtMost,
        consistency,
        0.0,
        tol,
    );
    ctx.row(
        format!("{prefix}.unstopped_paths"),
        Anchor::Localization,
        Relation::AtMost,
        untouched,
        0.0,
        tol,
    );
    ctx.flag(
        format!("{prefix}.nondecreasing_in_level"),
        Anchor::Localization,
        nested,
    );
    ctx.flag(
        format!("{prefix}.coverage_nondecreasing"),
        Anchor::Localization,
        coverage.windows(2).all(|w| w[1].1 >= w[0].1),
    );
    let last = coverage.last().expect("validated levels").1;
    ctx.row(
        format!("{prefix}.coverage_limit"),
        Anchor::Localization,
        Relation::AbsDiff,
        last,
        1.0,
        0.0,
    );
    ctx.plot(format!("localization_coverage_{name}"), coverage);
    Ok(())
}
