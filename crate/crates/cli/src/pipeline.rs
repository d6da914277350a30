use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use mtp_core::describer::{describe_conversation, DescribeOptions, VisualDescription};
use mtp_core::gateway::Gateway;
use mtp_core::mtp_data::{DatasetRecord, EpisodeRef};
use mtp_core::preprocess::{
    attach_frames, attribute_speakers, clip_manifest, conversation_from_utterances, frame_jobs,
    ingest_asr_alignment, run_jobs, slug, ClipJob, FrameJob, SceneBoundary, ScriptLine,
};
use mtp_core::reasoner::{run_pipeline, PromptBundle, ReasonerOptions, RunArtifact};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::GatewayFactory;
use crate::error::CliError;
use crate::io::{
    artifact_file_name, load_dataset, read_json, save_dataset, say, write_json, write_jsonl,
};
use crate::{AsrArgs, ClipsArgs, Context, DescribeArgs, DetectArgs, FramesArgs};

pub const ARTIFACT_DIR: &str = "artifacts";

pub fn asr<W: Write>(ctx: &Context, args: &AsrArgs, out: &mut W) -> Result<(), CliError> {
    let doc: serde_json::Value = read_json(&args.alignment)?;
    let utterances = ingest_asr_alignment(&doc)?;
    let n = utterances.len();
    let source = EpisodeRef {
        season: args.season,
        episode: args.episode,
    };
    let mut conversation = conversation_from_utterances(&args.id, &args.scene, source, utterances);

    if let Some(script_path) = &args.script {
        let script: Vec<ScriptLine> = read_json(script_path)?;
        let factory = GatewayFactory::new(&ctx.config)?;
        let embed = factory.build("embedding", ctx.config.backends.embedding.as_ref())?;
        let chat = factory.build("chat", ctx.config.backends.chat.as_ref())?;
        let (utts, report) = attribute_speakers(
            &conversation.utterances,
            &script,
            &embed,
            &chat,
            ctx.config.preprocess.sim_threshold,
        )?;
        conversation.utterances = utts;
        let unresolved = report.unresolved().count();
        if let Some(dest) = &args.report {
            write_json(dest, &report)?;
        }
        say(
            out,
            format!(
                "attributed {} of {n} utterance(s); {unresolved} left UNKNOWN",
                n - unresolved
            ),
        )?;
    }
    save_dataset(
        &args.out,
        &[DatasetRecord {
            conversation,
            annotations: vec![],
            consensus: None,
        }],
    )?;
    say(
        out,
        format!("wrote {} with {n} utterance(s)", args.out.display()),
    )
}

#[derive(Serialize)]
struct Job<'a, T> {
    #[serde(flatten)]
    job: &'a T,
    args: Vec<String>,
}

pub fn clips<W: Write>(_ctx: &Context, args: &ClipsArgs, out: &mut W) -> Result<(), CliError> {
    let boundaries: Vec<SceneBoundary> = read_json(&args.boundaries)?;
    let jobs = clip_manifest(&args.media, &boundaries, &args.out_dir)?;
    let manifest: Vec<Job<ClipJob>> = jobs
        .iter()
        .map(|job| Job {
            job,
            args: job.ffmpeg_args(),
        })
        .collect();
    write_json(&args.manifest, &manifest)?;
    if args.run {
        let commands: Vec<(PathBuf, Vec<String>)> = jobs
            .iter()
            .map(|j| (j.output.clone(), j.ffmpeg_args()))
            .collect();
        run_jobs(&args.ffmpeg, &commands)?;
    }
    say(
        out,
        format!(
            "{} clip job(s){}",
            jobs.len(),
            if args.run { " run" } else { "" }
        ),
    )
}

fn clip_path(dir: &Path, record: &DatasetRecord) -> PathBuf {
    let c = &record.conversation;
    dir.join(format!(
        "s{:02}e{:02}_{}.mp4",
        c.source.season,
        c.source.episode,
        slug(&c.scene_tag)
    ))
}

pub fn frames<W: Write>(ctx: &Context, args: &FramesArgs, out: &mut W) -> Result<(), CliError> {
    let path = ctx.dataset_path(&args.input)?;
    let mut records = load_dataset(&path, ctx.strict)?;
    let mut policy = ctx.config.preprocess.frame_policy;
    if let Some(mode) = args.mode {
        policy.mode = mode.into();
    }
    if let Some(seed) = args.seed {
        policy.seed = seed;
    }
    let mut all_jobs: Vec<FrameJob> = Vec::new();
    for record in &mut records {
        let clip = clip_path(&args.clips_dir, record);
        let jobs = frame_jobs(&record.conversation, &clip, policy, &args.out_dir);
        attach_frames(&mut record.conversation, &jobs);
        all_jobs.extend(jobs);
    }
    if let Some(manifest) = &args.manifest {
        let rows: Vec<Job<FrameJob>> = all_jobs
            .iter()
            .map(|job| Job {
                job,
                args: job.ffmpeg_args(),
            })
            .collect();
        write_json(manifest, &rows)?;
    }
    if args.run {
        let commands: Vec<(PathBuf, Vec<String>)> = all_jobs
            .iter()
            .map(|j| (j.output.clone(), j.ffmpeg_args()))
            .collect();
        run_jobs(&args.ffmpeg, &commands)?;
    }
    save_dataset(&args.out, &records)?;
    say(
        out,
        format!(
            "{} frame job(s) over {} conversation(s)",
            all_jobs.len(),
            records.len()
        ),
    )
}

#[derive(Serialize)]
struct DescriptionRow<'a> {
    conversation_id: &'a str,
    #[serde(flatten)]
    description: &'a VisualDescription,
}

#[derive(Debug, Serialize)]
struct Failure {
    conversation_id: String,
    exit_code: u8,
    error: String,
}

fn summarize_failures<W: Write>(out: &mut W, failures: &[Failure]) -> Result<(), CliError> {
    for f in failures {
        say(out, format!("  failed {}: {}", f.conversation_id, f.error))?;
    }
    Ok(())
}

fn first_failure(strict: bool, failures: &[Failure]) -> Result<(), CliError> {
    match failures.first() {
        Some(f) if strict => Err(match f.exit_code {
            3 => CliError::Transport(format!("{}: {}", f.conversation_id, f.error)),
            2 => CliError::Config(format!("{}: {}", f.conversation_id, f.error)),
            _ => CliError::Failed(format!("{} conversation(s) failed", failures.len())),
        }),
        _ => Ok(()),
    }
}

pub fn describe<W: Write>(ctx: &Context, args: &DescribeArgs, out: &mut W) -> Result<(), CliError> {
    let path = ctx.dataset_path(&args.input)?;
    let records = load_dataset(&path, ctx.strict)?;
    let options = DescribeOptions {
        word_limit: args.word_limit.unwrap_or(ctx.config.describe.word_limit),
        failure_ceiling: args
            .failure_ceiling
            .unwrap_or(ctx.config.describe.failure_ceiling),
    };
    let factory = GatewayFactory::new(&ctx.config)?;
    let vlm = factory.build("vision", ctx.config.backends.vision.as_ref())?;
    let llm = factory.build("chat", ctx.config.backends.chat.as_ref())?;

    let results: Vec<_> = ctx.pool()?.install(|| {
        records
            .par_iter()
            .map(|r| describe_conversation(&r.conversation, &vlm, &llm, options))
            .collect()
    });

    let mut described = Vec::with_capacity(records.len());
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut n_warnings = 0;
    for (record, result) in records.iter().zip(results) {
        let mut record = record.clone();
        match result {
            Ok(d) => {
                for w in &d.warnings {
                    log::warn!("{}: {w}", record.id());
                }
                n_warnings += d.warnings.len();
                rows.push((record.id().to_string(), d.descriptions));
                record.conversation = d.conversation;
            }
            Err(e) => {
                let e = CliError::from(e);
                failures.push(Failure {
                    conversation_id: record.id().to_string(),
                    exit_code: e.exit_code(),
                    error: e.to_string(),
                });
            }
        }
        described.push(record);
    }
    save_dataset(&args.out, &described)?;
    if let Some(report) = &args.report {
        let flat: Vec<DescriptionRow> = rows
            .iter()
            .flat_map(|(id, ds)| {
                ds.iter().map(move |d| DescriptionRow {
                    conversation_id: id,
                    description: d,
                })
            })
            .collect();
        write_jsonl(report, &flat)?;
    }
    say(
        out,
        format!(
            "described {} of {} conversation(s); {n_warnings} utterance warning(s)",
            records.len() - failures.len(),
            records.len()
        ),
    )?;
    summarize_failures(out, &failures)?;
    first_failure(ctx.strict, &failures)
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    reasoner_model: &'a str,
    concluder_model: &'a str,
    options: &'a ReasonerOptions,
    conversations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    created_at: Option<u64>,
}

fn detect_one(
    record: &DatasetRecord,
    dest: &Path,
    reasoner: &Gateway,
    concluder: &Gateway,
    options: &ReasonerOptions,
    bundle: &PromptBundle,
) -> Result<(), CliError> {
    let artifact: RunArtifact =
        run_pipeline(&record.conversation, reasoner, concluder, options, bundle)?;
    for w in &artifact.warnings {
        log::warn!("{}: {w}", record.id());
    }
    write_json(dest, &artifact)
}

pub fn detect<W: Write>(ctx: &Context, args: &DetectArgs, out: &mut W) -> Result<(), CliError> {
    let path = ctx.dataset_path(&args.input)?;
    let records = load_dataset(&path, ctx.strict)?;
    let run_dir = ctx.output_dir(args.run_dir.as_ref(), "--run-dir")?;
    let artifact_dir = run_dir.join(ARTIFACT_DIR);

    let mut names: BTreeMap<String, &str> = BTreeMap::new();
    for r in &records {
        if let Some(other) = names.insert(artifact_file_name(r.id()), r.id()) {
            return Err(CliError::Config(format!(
                "conversations {other:?} and {:?} map to the same artifact file",
                r.id()
            )));
        }
    }

    let mut options = ctx.config.reasoner.clone();
    if args.no_tracking {
        options.tracking = false;
    }
    if args.few_shot {
        options.few_shot = true;
    }
    let bundle = ctx.config.bundle()?;
    let factory = GatewayFactory::new(&ctx.config)?;
    let reasoner = factory.build("chat", ctx.config.backends.chat.as_ref())?;
    let concluder = match &ctx.config.backends.concluder {
        Some(c) => factory.build("concluder", Some(c))?,
        None => reasoner.clone(),
    };

    let todo: Vec<(&DatasetRecord, PathBuf)> = records
        .iter()
        .map(|r| (r, artifact_dir.join(artifact_file_name(r.id()))))
        .filter(|(_, dest)| !dest.exists())
        .collect();
    let skipped = records.len() - todo.len();

    let results: Vec<Result<(), CliError>> = ctx.pool()?.install(|| {
        todo.par_iter()
            .map(|(r, dest)| detect_one(r, dest, &reasoner, &concluder, &options, &bundle))
            .collect()
    });
    let failures: Vec<Failure> = todo
        .iter()
        .zip(results)
        .filter_map(|((r, _), res)| {
            res.err().map(|e| Failure {
                conversation_id: r.id().to_string(),
                exit_code: e.exit_code(),
                error: e.to_string(),
            })
        })
        .collect();

    let created_at = (!ctx.reproducible).then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    write_json(
        &run_dir.join("run.json"),
        &RunManifest {
            reasoner_model: reasoner.model_id(),
            concluder_model: concluder.model_id(),
            options: &options,
            conversations: records.len(),
            created_at,
        },
    )?;
    let failures_path = run_dir.join("failures.json");
    if failures.is_empty() {
        if failures_path.exists() {
            std::fs::remove_file(&failures_path).map_err(CliError::io(&failures_path))?;
        }
    } else {
        write_json(&failures_path, &failures)?;
    }

    say(
        out,
        format!(
            "{} conversation(s): {} written, {skipped} already present, {} failed",
            records.len(),
            todo.len() - failures.len(),
            failures.len()
        ),
    )?;
    summarize_failures(out, &failures)?;
    first_failure(ctx.strict, &failures)
}
