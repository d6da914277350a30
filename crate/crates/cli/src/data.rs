use std::fmt::Write as _;
use std::io::Write;

use mtp_core::mtp_data::{
    consensus_merge, dataset_stats, emotion_histogram, validate_record, Consensus, DatasetStats,
    EmotionHistogram,
};
use serde::Serialize;

use crate::error::CliError;
use crate::io::{load_dataset, save_dataset, say, write_json, write_jsonl};
use crate::{ConsensusArgs, Context, DatasetArg, StatsArgs};

pub fn validate<W: Write>(ctx: &Context, args: &DatasetArg, out: &mut W) -> Result<(), CliError> {
    let path = ctx.dataset_path(args)?;
    let records = load_dataset(&path, ctx.strict)?;
    if records.is_empty() {
        return Err(CliError::Failed(format!(
            "{}: empty dataset",
            path.display()
        )));
    }
    let mut count = 0;
    for record in &records {
        for v in validate_record(record).violations {
            say(out, format!("{}: {v}", record.id()))?;
            count += 1;
        }
    }
    if count > 0 {
        return Err(CliError::Failed(format!(
            "{count} violation(s) in {} record(s)",
            records.len()
        )));
    }
    say(
        out,
        format!(
            "{}: {} record(s), no violations",
            path.display(),
            records.len()
        ),
    )
}

#[derive(Debug, Serialize)]
struct StatsDocument {
    stats: DatasetStats,
    emotions: EmotionHistogram,
}

fn render_stats(s: &DatasetStats, h: &EmotionHistogram, top: usize) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "conversations           {}", s.n_conversations);
    let _ = writeln!(t, "with turning points     {}", s.n_tp_conversations);
    let _ = writeln!(t, "utterances              {}", s.n_utterances);
    let _ = writeln!(t, "words                   {}", s.n_words);
    let _ = writeln!(t, "total duration (h)      {:.2}", s.total_duration_h);
    let _ = writeln!(t, "avg transcript (words)  {:.2}", s.avg_transcript_words);
    let _ = writeln!(t, "max transcript (words)  {}", s.max_transcript_words);
    let _ = writeln!(t, "avg conversation (s)    {:.2}", s.avg_conversation_s);
    let _ = writeln!(t, "max conversation (s)    {:.2}", s.max_conversation_s);
    for (title, map) in [("pre", &h.pre), ("post", &h.post)] {
        let entries: Vec<String> = EmotionHistogram::top(map, top)
            .into_iter()
            .map(|(label, n)| format!("{}:{n}", label.name()))
            .collect();
        let _ = writeln!(t, "{title}-turning-point feelings  {}", entries.join(" "));
    }
    t
}

pub fn stats<W: Write>(ctx: &Context, args: &StatsArgs, out: &mut W) -> Result<(), CliError> {
    let path = ctx.dataset_path(&args.input)?;
    let records = load_dataset(&path, ctx.strict)?;
    let doc = StatsDocument {
        stats: dataset_stats(&records),
        emotions: emotion_histogram(&records),
    };
    write!(out, "{}", render_stats(&doc.stats, &doc.emotions, args.top)).map_err(|source| {
        CliError::Io {
            path: "<stdout>".into(),
            source,
        }
    })?;
    if let Some(dest) = &args.out {
        write_json(dest, &doc)?;
    }
    Ok(())
}

pub fn consensus<W: Write>(
    ctx: &Context,
    args: &ConsensusArgs,
    out: &mut W,
) -> Result<(), CliError> {
    let path = ctx.dataset_path(&args.input)?;
    let mut records = load_dataset(&path, ctx.strict)?;
    let judge = args
        .judge
        .clone()
        .unwrap_or_else(|| ctx.config.consensus.judge_id.clone());
    let delta = args.delta_merge.unwrap_or(ctx.config.consensus.delta_merge);

    let mut results = Vec::with_capacity(records.len());
    for record in &records {
        let result = consensus_merge(&record.annotations, &judge, delta)
            .map_err(|e| CliError::Failed(format!("{}: {e}", record.id())))?;
        results.push(result);
    }

    let mut kept = Vec::new();
    let mut deleted = Vec::new();
    for (mut record, result) in records.drain(..).zip(&results) {
        if result.deleted {
            deleted.push(record.id().to_string());
            continue;
        }
        record.consensus = Some(Consensus {
            turning_points: result.turning_points.clone(),
        });
        kept.push(record);
    }
    save_dataset(&args.out, &kept)?;
    if let Some(log) = &args.log {
        write_jsonl(log, &results)?;
    }
    let n_tps: usize = kept.iter().map(|r| r.consensus_points().len()).sum();
    say(
        out,
        format!(
            "{} conversation(s) kept with {n_tps} turning point(s); {} deleted{}",
            kept.len(),
            deleted.len(),
            if deleted.is_empty() {
                String::new()
            } else {
                format!(": {}", deleted.join(", "))
            }
        ),
    )
}
