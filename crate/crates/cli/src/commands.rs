use std::fmt::Write as _;
use std::path::Path;

use hyperclust::em::{fit, predict, FitConfig, InitMethod};
use hyperclust::gpcm::CovarianceStructure;
use hyperclust::missing::{inject_missingness, MaskedDataset};
use hyperclust::selection::{adjusted_rand_index, search, ModelGrid};
use hyperclust::simulation::{builtin_design, generate, run_study, SimDesign};
use nalgebra::DMatrix;

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::io::{load_csv, read_labels, write_atomic, write_labels, write_matrix, write_table};
use crate::model_file::{from_text, to_text, SavedModel, Scaling};

fn fit_config(em: &EmArgs) -> CliResult<FitConfig> {
    let init = match em.init.to_ascii_lowercase().as_str() {
        "kmeans" => InitMethod::KMeans,
        "random" => InitMethod::Random,
        other => return Err(CliError::Usage(format!("unknown init '{other}'; expected kmeans or random"))),
    };
    let cfg = FitConfig { max_iter: em.max_iter, epsilon: em.epsilon, n_starts: em.starts, init, seed: em.seed, ..Default::default() };
    cfg.validate()?;
    Ok(cfg)
}

fn scaling_of(ds: &MaskedDataset) -> CliResult<Scaling> {
    let moments = ds.observed_moments()?;
    if let Some(j) = moments.iter().position(|&(_, sd)| !(sd > 0.0)) {
        return Err(CliError::Data(format!("column '{}' is constant and cannot be standardized", ds.column_names()[j])));
    }
    Ok(Scaling { center: moments.iter().map(|m| m.0).collect(), scale: moments.iter().map(|m| m.1).collect() })
}

fn apply_scaling(ds: &MaskedDataset, s: &Scaling) -> CliResult<MaskedDataset> {
    let x = DMatrix::from_fn(ds.n(), ds.p(), |i, j| (ds.data()[(i, j)] - s.center[j]) / s.scale[j]);
    Ok(MaskedDataset::new(x, ds.mask().clone(), ds.column_names().to_vec())?)
}

/// Imputed values back in original units; observed cells are copied from
/// the input untouched.
fn restore(original: &MaskedDataset, imputed: &DMatrix<f64>, s: Option<&Scaling>) -> DMatrix<f64> {
    DMatrix::from_fn(imputed.nrows(), imputed.ncols(), |i, j| match (original.value(i, j), s) {
        (Some(v), _) => v,
        (None, Some(s)) => imputed[(i, j)] * s.scale[j] + s.center[j],
        (None, None) => imputed[(i, j)],
    })
}

/// The input table, and the table the model sees (standardized with `scale`).
fn load_input(input: &InputArgs, scale: bool) -> CliResult<(MaskedDataset, MaskedDataset, Option<Scaling>)> {
    let ds = load_csv(&input.input, &input.na)?;
    if !scale {
        return Ok((ds.clone(), ds, None));
    }
    let s = scaling_of(&ds)?;
    let scaled = apply_scaling(&ds, &s)?;
    Ok((ds, scaled, Some(s)))
}

fn check_labels(labels: &[usize], n: usize, path: &Path) -> CliResult<()> {
    if labels.len() != n {
        return Err(CliError::Data(format!("{} has {} labels for {n} rows", path.display(), labels.len())));
    }
    Ok(())
}

pub fn cmd_fit(a: &FitArgs) -> CliResult<String> {
    let cfg = fit_config(&a.em)?;
    let (raw, ds, scaling) = load_input(&a.input, a.em.scale)?;
    let truth = match &a.truth {
        Some(p) => {
            let l = read_labels(p)?;
            check_labels(&l, ds.n(), p)?;
            Some(l)
        }
        None => None,
    };
    let rep = fit(&ds, a.groups, a.family, a.structure, &cfg)?;

    let saved = SavedModel { model: rep.model.clone(), columns: ds.column_names().to_vec(), scaling: scaling.clone() };
    let mut r = String::new();
    let _ = writeln!(r, "family: {}", a.family);
    let _ = writeln!(r, "structure: {}", a.structure);
    let _ = writeln!(r, "groups: {}", a.groups);
    let _ = writeln!(r, "rows: {}", ds.n());
    let _ = writeln!(r, "columns: {}", ds.p());
    let _ = writeln!(r, "missing_cells: {}", ds.missing_count());
    let _ = writeln!(r, "scaled: {}", scaling.is_some());
    let _ = writeln!(r, "loglik: {}", rep.loglik);
    let _ = writeln!(r, "bic: {}", rep.bic);
    let _ = writeln!(r, "icl: {}", rep.icl);
    let _ = writeln!(r, "free_parameters: {}", rep.free_parameters);
    let _ = writeln!(r, "converged: {}", rep.converged);
    let _ = writeln!(r, "iterations: {}", rep.iterations);
    let _ = writeln!(r, "best_start: {}", rep.best_start + 1);
    if let Some(t) = &truth {
        let _ = writeln!(r, "ari: {}", adjusted_rand_index(t, &rep.map_labels)?);
    }
    for n in &rep.notes {
        let _ = writeln!(r, "note: {n}");
    }
    let _ = writeln!(r, "loglik_trace:");
    for l in &rep.loglik_trace {
        let _ = writeln!(r, "{l}");
    }

    let dir = &a.out_dir;
    write_atomic(&dir.join("model.txt"), to_text(&saved)?.as_bytes())?;
    write_labels(&dir.join("labels.csv"), &rep.map_labels)?;
    write_matrix(&dir.join("imputed.csv"), ds.column_names(), &restore(&raw, &rep.imputed, scaling.as_ref()))?;
    write_atomic(&dir.join("report.txt"), r.as_bytes())?;
    let head: String = r.lines().take_while(|l| !l.starts_with("loglik_trace")).map(|l| format!("{l}\n")).collect();
    Ok(head)
}

pub fn cmd_search(a: &SearchArgs) -> CliResult<String> {
    let cfg = fit_config(&a.em)?;
    let (_, ds, _) = load_input(&a.input, a.em.scale)?;
    let structures = if a.structures.is_empty() { CovarianceStructure::ALL.to_vec() } else { a.structures.clone() };
    let grid = ModelGrid::new(a.groups.clone(), structures, a.families.clone())?;
    let rep = search(&ds, &grid, &cfg)?;
    let mut rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.family.to_string(),
                r.structure.to_string(),
                r.g.to_string(),
                r.loglik.to_string(),
                r.rho.to_string(),
                r.bic.to_string(),
                r.icl.to_string(),
                r.converged.to_string(),
                "ok".into(),
            ]
        })
        .collect();
    for (f, s, g, e) in &rep.failures {
        rows.push(vec![f.to_string(), s.to_string(), g.to_string(), "NA".into(), "NA".into(), "NA".into(), "NA".into(), "false".into(), format!("failed: {e}")]);
    }
    write_table(&a.output, &["family", "structure", "G", "loglik", "rho", "bic", "icl", "converged", "status"], &rows)?;
    let describe = |i: Option<usize>| match i {
        Some(i) => {
            let r = &rep.rows[i];
            format!("{} {} G={}", r.family, r.structure, r.g)
        }
        None => "none".into(),
    };
    let pool = if rep.selection_converged { "converged fits" } else { "all fits (none converged)" };
    Ok(format!("best_bic: {}\nbest_icl: {}\nselected_among: {pool}\n", describe(rep.best_by_bic), describe(rep.best_by_icl)))
}

pub fn cmd_impute(a: &ImputeArgs) -> CliResult<String> {
    let text = std::fs::read_to_string(&a.model).map_err(|e| CliError::Io(format!("{}: {e}", a.model.display())))?;
    let saved = from_text(&text)?;
    let ds = load_csv(&a.input.input, &a.input.na)?;
    if ds.p() != saved.columns.len() {
        return Err(CliError::Data(format!("data has {} columns, model expects {}", ds.p(), saved.columns.len())));
    }
    let scaled = match &saved.scaling {
        Some(s) => apply_scaling(&ds, s)?,
        None => ds.clone(),
    };
    let pred = predict(&saved.model, &scaled)?;
    write_matrix(&a.output, ds.column_names(), &restore(&ds, &pred.imputed, saved.scaling.as_ref()))?;
    if let Some(p) = &a.labels {
        write_labels(p, &pred.labels)?;
    }
    Ok(format!("loglik: {}\nimputed_cells: {}\n", pred.loglik, ds.missing_count()))
}

fn design(id: usize, per_component: Option<usize>) -> CliResult<SimDesign> {
    let mut d = builtin_design(id)?;
    if let Some(m) = per_component {
        if m == 0 {
            return Err(CliError::Usage("--per-component must be at least 1".into()));
        }
        d.n_per_component = m;
    }
    Ok(d)
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<String> {
    let d = design(a.design, a.per_component)?;
    let (x, labels) = generate(&d, a.seed)?;
    let names: Vec<String> = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
    let out = if a.rate > 0.0 { inject_missingness(&x, a.mechanism, a.rate, a.seed.wrapping_add(1))?.data().clone() } else { x };
    write_matrix(&a.data, &names, &out)?;
    write_labels(&a.labels, &labels)?;
    let missing = out.iter().filter(|v| v.is_nan()).count();
    Ok(format!("design: {}\nrows: {}\nmissing_cells: {missing}\n", a.design, out.nrows()))
}

fn num(v: f64) -> String {
    if v.is_nan() { "NA".into() } else { v.to_string() }
}

pub fn cmd_study(a: &StudyArgs) -> CliResult<String> {
    let cfg = fit_config(&a.em)?;
    let d = design(a.design, a.per_component)?;
    let structures = if a.structures.is_empty() { vec![d.structure] } else { a.structures.clone() };
    let mut summary = Vec::new();
    let mut params = Vec::new();
    for &family in &a.families {
        let grid = ModelGrid::new(a.groups.clone(), structures.clone(), vec![family])?;
        let table = run_study(&d, &a.mechanisms, &a.rates, a.replications, &grid, &cfg)?;
        for c in &table.cells {
            let key = [format!("Sim{}", d.id), family.to_string(), c.mechanism.name().to_string(), c.rate.to_string()];
            let mut row = key.to_vec();
            row.extend([
                c.replications.to_string(),
                c.failures.len().to_string(),
                num(c.mean_ari),
                num(c.sd_ari),
                num(c.mean_bic),
                c.correct_g.to_string(),
                c.converged_selections.to_string(),
            ]);
            summary.push(row);
            for p in &c.params {
                let mut row = key.to_vec();
                row.extend([p.name.clone(), num(p.truth), num(p.mean), num(p.sd), num(p.bias), p.count.to_string()]);
                params.push(row);
            }
        }
    }
    write_table(
        &a.out_dir.join("summary.csv"),
        &["design", "family", "mechanism", "rate", "replications", "failed", "mean_ari", "sd_ari", "mean_bic", "correct_g", "converged_selections"],
        &summary,
    )?;
    write_table(
        &a.out_dir.join("parameters.csv"),
        &["design", "family", "mechanism", "rate", "parameter", "truth", "mean", "sd", "bias", "count"],
        &params,
    )?;
    Ok(summary.iter().map(|r| format!("{}\n", r.join(","))).collect())
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<String> {
    let t = read_labels(&a.truth)?;
    let p = read_labels(&a.predicted)?;
    check_labels(&p, t.len(), &a.predicted)?;
    let out = format!("ari: {}\n", adjusted_rand_index(&t, &p)?);
    if let Some(path) = &a.output {
        write_atomic(path, out.as_bytes())?;
    }
    Ok(out)
}
