use std::collections::BTreeSet;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use mtp_core::evaluator::{
    evaluate_run, read_submission, render_report, PredictionRecord, RunEvaluation,
};
use mtp_core::reasoner::RunArtifact;

use crate::error::CliError;
use crate::io::{load_dataset, read_json, say, write_atomic, write_json};
use crate::pipeline::ARTIFACT_DIR;
use crate::{Context, EvaluateArgs, ReportArgs};

/// Artifacts in file-name order.
pub fn read_artifacts(run_dir: &Path) -> Result<Vec<RunArtifact>, CliError> {
    let dir = run_dir.join(ARTIFACT_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(CliError::io(&dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && !p
                    .file_name()
                    .is_some_and(|n| n.to_string_lossy().starts_with('.'))
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| read_json(p)).collect()
}

fn predictions(
    ctx: &Context,
    args: &EvaluateArgs,
) -> Result<(Vec<PredictionRecord>, PathBuf), CliError> {
    if let Some(sub) = &args.submission {
        let file = fs::File::open(sub).map_err(CliError::io(sub))?;
        let (records, warnings) = read_submission(BufReader::new(file))
            .map_err(|e| CliError::Failed(format!("{}: {e}", sub.display())))?;
        for w in warnings {
            log::warn!("{}: {w}", sub.display());
        }
        let out_dir = ctx.output_dir(args.out_dir.as_ref(), "--out-dir")?;
        return Ok((records, out_dir));
    }
    let run_dir = ctx.output_dir(args.run_dir.as_ref(), "--run-dir or --submission")?;
    let artifacts = read_artifacts(&run_dir)?;
    let out_dir = args.out_dir.clone().unwrap_or_else(|| run_dir.clone());
    Ok((
        artifacts.iter().map(RunArtifact::to_prediction).collect(),
        out_dir,
    ))
}

pub fn evaluate<W: Write>(ctx: &Context, args: &EvaluateArgs, out: &mut W) -> Result<(), CliError> {
    let dataset_path = ctx.dataset_path(&args.input)?;
    let dataset = load_dataset(&dataset_path, ctx.strict)?;
    let (preds, out_dir) = predictions(ctx, args)?;
    let delta_t = args.delta_t.unwrap_or(ctx.config.evaluation.delta_t);
    let matching = args
        .matching
        .map(Into::into)
        .unwrap_or(ctx.config.evaluation.matching);
    let eval = evaluate_run(&preds, &dataset, delta_t, matching)
        .map_err(|e| CliError::Failed(e.to_string()))?;

    let name = args.name.clone().unwrap_or_else(|| {
        args.run_dir
            .as_ref()
            .and_then(|d| d.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    });
    let report = render_report(&[(name, eval.metrics)]);
    write_json(&out_dir.join("metrics.json"), &eval)?;
    write_atomic(&out_dir.join("report.csv"), report.csv.as_bytes())?;
    write_atomic(&out_dir.join("report.txt"), report.text.as_bytes())?;
    let c = &eval.metrics.detection.counts;
    say(out, report.text.trim_end())?;
    say(
        out,
        format!(
            "\nδ_t = {delta_t} s; detection matched {}/{} ground truths and {}/{} predictions",
            c.matched_gt, c.total_gt, c.matched_pred, c.total_pred
        ),
    )
}

pub fn report<W: Write>(ctx: &Context, args: &ReportArgs, out: &mut W) -> Result<(), CliError> {
    let mut runs = Vec::with_capacity(args.runs.len());
    let mut names = BTreeSet::new();
    for spec in &args.runs {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected NAME=metrics.json, got {spec:?}")))?;
        if !names.insert(name.to_string()) {
            return Err(CliError::Config(format!("run name {name:?} given twice")));
        }
        let eval: RunEvaluation = read_json(Path::new(path))?;
        runs.push((name.to_string(), eval.metrics));
    }
    let report = render_report(&runs);
    if let Some(dir) = args
        .out_dir
        .clone()
        .or_else(|| ctx.config.output_dir.clone())
    {
        write_atomic(&dir.join("report.csv"), report.csv.as_bytes())?;
        write_atomic(&dir.join("report.txt"), report.text.as_bytes())?;
    }
    say(out, report.text.trim_end())
}
