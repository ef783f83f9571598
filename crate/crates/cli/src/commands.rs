use crate::artifact::{csv_comment, json, read_model, ModelFile, Output};
use crate::config::RunConfig;
use crate::error::CliError;
use graphomotor::boost::{cross_validate, random_search, train, CvOptions, Dataset, EvalReport, SearchOptions};
use graphomotor::explain::{explain_matrix, importance_from_table, ImportanceReport};
use graphomotor::features::{catalog, extract_all, FeatureMatrix};
use graphomotor::signal::{has_errors, validate, Diagnostic};
use graphomotor::stats::{exploratory_analysis, regress_out_confound, ConfoundModel, ExploratoryReport, StatsError, Target};
use graphomotor::synth::generate_cohort;
use graphomotor::Session;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

// ---------------------------------------------------------------- extract

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum FileStatus {
    Ok,
    ParseError,
    Invalid,
}

#[derive(Serialize)]
struct FileReport {
    path: PathBuf,
    subject_id: Option<String>,
    status: FileStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    diagnostics: Vec<Diagnostic>,
}

#[derive(Serialize)]
struct ValidationReport<'a> {
    files: &'a [FileReport],
}

#[derive(Serialize)]
struct Catalog<'a> {
    features: &'a [graphomotor::features::FeatureSpec],
}

/// SVC files named directly or found (non-recursively) in directories,
/// each directory listed in name order.
fn svc_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Usage("no input files given".into()));
    }
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(|e| CliError::io(input, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("svc")))
                .collect();
            found.sort();
            files.extend(found);
        } else if input.exists() {
            files.push(input.clone());
        } else {
            return Err(CliError::Io(format!("{}: no such file or directory", input.display())));
        }
    }
    if files.is_empty() {
        return Err(CliError::Usage("no .svc files among the inputs".into()));
    }
    Ok(files)
}

fn load_checked(path: &Path) -> (Option<Session>, FileReport) {
    let mut report =
        FileReport { path: path.to_path_buf(), subject_id: None, status: FileStatus::Ok, error: None, diagnostics: Vec::new() };
    let session = match Session::load(path) {
        Ok(s) => s,
        Err(e) => {
            report.status = FileStatus::ParseError;
            report.error = Some(e.to_string());
            return (None, report);
        }
    };
    report.subject_id = Some(session.subject_id().to_string());
    report.diagnostics = validate(&session);
    if has_errors(&report.diagnostics) {
        report.status = FileStatus::Invalid;
        return (None, report);
    }
    (Some(session), report)
}

pub fn extract(cfg: &RunConfig, keep_going: bool) -> Result<(), CliError> {
    let files = svc_files(&cfg.inputs)?;
    let loaded: Vec<(Option<Session>, FileReport)> = files.par_iter().map(|p| load_checked(p)).collect();
    let (sessions, reports): (Vec<_>, Vec<_>) = loaded.into_iter().unzip();
    let mut sessions: Vec<Session> = sessions.into_iter().flatten().collect();

    let out = Output::create(&cfg.output)?;
    out.write("validation.json", json(cfg, &ValidationReport { files: &reports }))?;
    for r in &reports {
        for d in &r.diagnostics {
            log::warn!("{}: {:?} {}", r.path.display(), d.code, d.message);
        }
        if let Some(e) = &r.error {
            log::error!("{}: {e}", r.path.display());
        }
    }
    let parse_failures = reports.iter().filter(|r| matches!(r.status, FileStatus::ParseError)).count();
    let invalid = reports.iter().filter(|r| matches!(r.status, FileStatus::Invalid)).count();
    let skipped = parse_failures + invalid;
    if skipped > 0 && !keep_going {
        let msg = format!("{parse_failures} file(s) failed to parse, {invalid} failed validation; see validation.json");
        return Err(if parse_failures > 0 { CliError::Parse(msg) } else { CliError::Validation(msg) });
    }
    if sessions.is_empty() {
        return Err(CliError::Validation("no usable sessions".into()));
    }

    sessions.sort_by(|a, b| a.subject_id().cmp(b.subject_id()));
    if let Some(w) = sessions.windows(2).find(|w| w[0].subject_id() == w[1].subject_id()) {
        return Err(CliError::Validation(format!("duplicate subject id {}", w[0].subject_id())));
    }
    let matrix = extract_all(&sessions, &cfg.features).map_err(|e| CliError::Validation(e.to_string()))?;
    out.write("features.csv", matrix.to_csv_string(Some(&csv_comment(cfg))))?;
    out.write("catalog.json", json(cfg, &Catalog { features: catalog() }))?;
    println!("extracted {} features from {} sessions", matrix.n_cols(), matrix.n_rows());
    if skipped > 0 {
        return Err(CliError::Partial(format!("{skipped} of {} file(s) skipped; see validation.json", files.len())));
    }
    Ok(())
}

// ---------------------------------------------------------------- shared

fn matrix_path(cfg: &RunConfig) -> Result<&Path, CliError> {
    match cfg.inputs.as_slice() {
        [one] => Ok(one),
        [] => Err(CliError::Usage("no feature matrix given".into())),
        _ => Err(CliError::Usage("expected exactly one feature matrix".into())),
    }
}

/// Loads the matrix and applies the class-year filter.
fn load_matrix(cfg: &RunConfig) -> Result<FeatureMatrix, CliError> {
    let path = matrix_path(cfg)?;
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let parsed = if path.extension().is_some_and(|x| x == "json") {
        let raw = std::io::read_to_string(file).map_err(|e| CliError::io(path, e))?;
        FeatureMatrix::from_json(&raw)
    } else {
        FeatureMatrix::read_csv(file)
    };
    let matrix = parsed.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let matrix = match cfg.class_year {
        Some(year) => matrix.filter_rows(|m| m.class_year == Some(year)),
        None => matrix,
    };
    if matrix.n_rows() == 0 {
        return Err(CliError::Validation("no rows left after filtering".into()));
    }
    Ok(matrix)
}

fn adjust(matrix: FeatureMatrix, confound: Option<graphomotor::stats::Confound>) -> Result<FeatureMatrix, CliError> {
    let Some(confound) = confound else { return Ok(matrix) };
    let (adjusted, warnings) = regress_out_confound(&matrix, confound)?;
    for w in warnings {
        log::warn!("{}: {}", w.feature, w.message);
    }
    Ok(adjusted)
}

fn cv_options(cfg: &RunConfig) -> CvOptions {
    CvOptions {
        k: cfg.model.folds,
        repeats: cfg.model.repeats,
        seed: cfg.model.seed,
        confound_within_folds: cfg.model.confound_within_folds,
    }
}

fn print_eval(report: &EvalReport) {
    for (name, ms) in report.summary_rows() {
        println!("{:<6} {:>10.4} +/- {:.4}", name, ms.mean, ms.std);
    }
}

// ---------------------------------------------------------------- analyze

pub fn analyze(cfg: &RunConfig, explicit_targets: bool) -> Result<(), CliError> {
    let matrix = adjust(load_matrix(cfg)?, cfg.stats.confound)?;
    let out = Output::create(&cfg.output)?;
    let comment = csv_comment(cfg);
    let mut summary = csv::Writer::from_writer(Vec::new());
    let mut reports = Vec::new();
    for &target in &cfg.stats.targets {
        let report = match exploratory_analysis(&matrix, target, cfg.stats.alpha) {
            Ok(r) => r,
            Err(StatsError::MissingTarget(t)) if !explicit_targets => {
                log::warn!("skipping {t}: no row has a value");
                continue;
            }
            Err(e) => return Err(CliError::Validation(e.to_string())),
        };
        out.write(&format!("analysis_{}.csv", target.name()), report.to_csv_string(Some(&comment), None))?;
        out.write(&format!("analysis_{}.json", target.name()), json(cfg, &report))?;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(CliError::Validation("no target has values in the matrix".into()));
    }
    summary
        .write_record(["target", "rank", "feature", "p", "p_fdr", "rho", "p_rho", "p_fdr_rho", "significant"])
        .map_err(|e| CliError::Io(e.to_string()))?;
    for report in &reports {
        println!("{} (n = {}): {} significant after FDR", report.target, report.n_rows, report.significant().len());
        for (i, r) in report.top(cfg.stats.top_k).iter().enumerate() {
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
            let mw = r.mann_whitney.as_ref();
            let significant = r.primary_p_fdr().is_some_and(|q| q < report.alpha);
            summary
                .write_record([
                    report.target.name().to_string(),
                    (i + 1).to_string(),
                    r.feature.clone(),
                    fmt(mw.and_then(|m| m.p)),
                    fmt(mw.and_then(|m| m.p_fdr)),
                    r.spearman.rho.map(|x| format!("{x:.4}")).unwrap_or_default(),
                    fmt(r.spearman.p),
                    fmt(r.spearman.p_fdr),
                    significant.to_string(),
                ])
                .map_err(|e| CliError::Io(e.to_string()))?;
            println!("  {:>2}. {:<45} p = {:<9} rho = {}", i + 1, r.feature, sci(r.primary_p()), r.spearman.rho.map_or("-".into(), |x| format!("{x:+.2}")));
        }
    }
    let body = summary.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    out.write("analysis_top.csv", [format!("# {comment}\n").into_bytes(), body].concat())?;
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Serialize)]
struct EvalBody<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    best_index: Option<usize>,
    report: &'a EvalReport,
}

#[derive(Serialize)]
struct SearchBody<'a> {
    target: Target,
    best_index: usize,
    trials: &'a [graphomotor::boost::Trial],
}

pub fn train_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let matrix = adjust(load_matrix(cfg)?, cfg.model.confound)?;
    let target = cfg.model.target;
    let opts = SearchOptions {
        n_iter: cfg.model.n_iter,
        seed: cfg.model.seed,
        cv: cv_options(cfg),
        grid: cfg.model.grid.clone(),
        base: cfg.model.base.clone(),
    };
    log::info!("searching {} configurations for {target}", opts.n_iter);
    let result = random_search(&matrix, target, &opts)?;

    // the final model sees every row; within-fold adjustment becomes whole-matrix
    let final_matrix = match cfg.model.confound_within_folds {
        Some(c) => {
            let rows: Vec<usize> = (0..matrix.n_rows()).collect();
            ConfoundModel::fit(&matrix, c, &rows)?.apply(&matrix)?
        }
        None => matrix,
    };
    let model = train(&Dataset::from_matrix(&final_matrix, target)?, &result.best)?;

    let out = Output::create(&cfg.output)?;
    let name = target.name();
    out.write(&format!("model_{name}.json"), json(cfg, &ModelFile { target, model }))?;
    out.write(&format!("eval_{name}.json"), json(cfg, &EvalBody { best_index: Some(result.best_index), report: &result.report }))?;
    out.write_with(&format!("eval_{name}.csv"), |w| result.report.write_csv(w, Some(&csv_comment(cfg))))?;
    out.write(
        &format!("search_{name}.json"),
        json(cfg, &SearchBody { target, best_index: result.best_index, trials: &result.trials }),
    )?;
    println!("{target}: best of {} configurations is #{}", result.trials.len(), result.best_index);
    print_eval(&result.report);
    Ok(())
}

// ---------------------------------------------------------------- evaluate

pub fn evaluate(cfg: &RunConfig, model_path: &Path) -> Result<(), CliError> {
    let ModelFile { target, model } = read_model(model_path, cfg.model.target)?;
    let matrix = adjust(load_matrix(cfg)?, cfg.model.confound)?;
    let report = cross_validate(&matrix, target, &model.config, &cv_options(cfg))?;
    let predictions = model.predict_matrix(&matrix)?;

    let out = Output::create(&cfg.output)?;
    let name = target.name();
    out.write(&format!("evaluation_{name}.json"), json(cfg, &EvalBody { best_index: None, report: &report }))?;
    out.write_with(&format!("evaluation_{name}.csv"), |w| report.write_csv(w, Some(&csv_comment(cfg))))?;
    out.write_with(&format!("predictions_{name}.csv"), |w| {
        std::io::Write::write_all(w, format!("# {}\n", csv_comment(cfg)).as_bytes())?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["subject_id", "observed", "predicted"])?;
        for (meta, p) in matrix.meta().iter().zip(&predictions) {
            let observed = target.value(meta).map(|v| v.to_string()).unwrap_or_default();
            c.write_record([meta.subject_id.as_str(), observed.as_str(), p.to_string().as_str()])?;
        }
        c.flush()
    })?;
    println!("{target}: cross-validated configuration of {}", model_path.display());
    print_eval(&report);
    Ok(())
}

// ---------------------------------------------------------------- explain

#[derive(Serialize)]
struct ImportanceBody<'a> {
    target: Target,
    top_k: usize,
    importance: &'a ImportanceReport,
}

pub fn explain(cfg: &RunConfig, model_path: &Path) -> Result<(), CliError> {
    let ModelFile { target, model } = read_model(model_path, cfg.model.target)?;
    let matrix = adjust(load_matrix(cfg)?, cfg.model.confound)?;
    let table = explain_matrix(&model, &matrix)?;
    let importance = importance_from_table(&table);
    let k = cfg.model.shap_top_k;
    let top: Vec<String> = importance.top(k).iter().map(|f| f.feature.clone()).collect();

    let out = Output::create(&cfg.output)?;
    let name = target.name();
    let comment = csv_comment(cfg);
    out.write_with(&format!("shap_{name}.csv"), |w| table.write_csv(w, Some(&comment)))?;
    out.write_with(&format!("shap_top_{name}.csv"), |w| table.write_long_csv(w, Some(&comment), &top))?;
    out.write(&format!("importance_{name}.json"), json(cfg, &ImportanceBody { target, top_k: k, importance: &importance }))?;
    println!("{target}: mean |SHAP| on the {} scale", importance.scale);
    for f in importance.top(k) {
        let corr = f.value_correlation.map(|c| format!("{c:+.2}")).unwrap_or_else(|| "n/a".into());
        println!("  {:>2}. {:<45} {:.4}  value corr {corr}", f.rank, f.feature, f.mean_abs_shap);
    }
    Ok(())
}

// ---------------------------------------------------------------- synth

#[derive(Serialize)]
struct SynthBody<'a> {
    truth: &'a [graphomotor::synth::SubjectTruth],
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let cohort = generate_cohort(&cfg.synth).map_err(|e| CliError::Usage(e.to_string()))?;
    let out = Output::create(&cfg.output)?;
    for s in &cohort.sessions {
        s.save(&cfg.output).map_err(|e| CliError::io(&cfg.output, e))?;
    }
    out.write_with("truth.csv", |w| cohort.write_truth(w, Some(&csv_comment(cfg))))?;
    out.write("synth.json", json(cfg, &SynthBody { truth: &cohort.truth }))?;
    println!(
        "wrote {} intact and {} dysgraphic sessions to {}",
        cfg.synth.n_intact,
        cfg.synth.n_dd,
        cfg.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- report

fn artifacts(dir: &Path, prefix: &str) -> Result<Vec<(PathBuf, serde_json::Value)>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            name.starts_with(prefix) && name.ends_with(".json")
        })
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let raw = std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
            let v = serde_json::from_str(&raw).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?;
            Ok((p, v))
        })
        .collect()
}

fn parse_body<T: serde::de::DeserializeOwned>(path: &Path, v: serde_json::Value) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn sci(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2e}")).unwrap_or_else(|| "-".into())
}

/// Markdown summary of the analysis, evaluation and importance artifacts in `dir`.
pub fn report(cfg: &RunConfig, dir: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let mut md = String::new();
    let _ = writeln!(md, "<!-- {} -->", csv_comment(cfg));
    let _ = writeln!(md, "# Run report: {}\n", dir.display());
    let k = cfg.stats.top_k;

    for (path, v) in artifacts(dir, "analysis_")? {
        let r: ExploratoryReport = parse_body(&path, v)?;
        let _ = writeln!(md, "## Exploratory analysis: {} (n = {}, top {k})\n", r.target, r.n_rows);
        let _ = writeln!(md, "| feature | p | p_fdr | rho | p(rho) | p_fdr(rho) |\n|---|---|---|---|---|---|");
        for f in r.top(k) {
            let mw = f.mann_whitney.as_ref();
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} |",
                f.feature,
                sci(mw.and_then(|m| m.p)),
                sci(mw.and_then(|m| m.p_fdr)),
                f.spearman.rho.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into()),
                sci(f.spearman.p),
                sci(f.spearman.p_fdr)
            );
        }
        let _ = writeln!(md);
    }

    for prefix in ["eval_", "evaluation_"] {
        for (path, mut v) in artifacts(dir, prefix)? {
            let r: EvalReport = parse_body(&path, v["report"].take())?;
            let _ = writeln!(md, "## Performance: {} ({}, {} rows)\n", r.target, path.display(), r.n_rows);
            let _ = writeln!(md, "| metric | mean | std |\n|---|---|---|");
            for (name, ms) in r.summary_rows() {
                // classification rates as percentages, like the regression EER
                let scale = if matches!(name, "bacc" | "sen" | "spe") { 100.0 } else { 1.0 };
                let _ = writeln!(md, "| {name} | {:.2} | {:.2} |", ms.mean * scale, ms.std * scale);
            }
            let _ = writeln!(md);
        }
    }

    for (path, mut v) in artifacts(dir, "importance_")? {
        let target = v["target"].as_str().unwrap_or("?").to_string();
        let r: ImportanceReport = parse_body(&path, v["importance"].take())?;
        let _ = writeln!(md, "## SHAP importance: {target} ({} scale)\n", r.scale);
        let _ = writeln!(md, "| rank | feature | mean abs SHAP | value corr |\n|---|---|---|---|");
        for f in r.top(cfg.model.shap_top_k) {
            let corr = f.value_correlation.map(|c| format!("{c:+.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(md, "| {} | {} | {:.4} | {corr} |", f.rank, f.feature, f.mean_abs_shap);
        }
        let _ = writeln!(md);
    }

    match output {
        Some(path) => std::fs::write(path, md).map_err(|e| CliError::io(path, e)),
        None => {
            print!("{md}");
            Ok(())
        }
    }
}
