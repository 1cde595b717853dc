//! One function per subcommand. Each reads only what it needs from the
//! resolved [`RunConfig`] and writes its artifacts through [`Output`].

use std::collections::BTreeSet;
use std::path::Path;

use scentprompt::analysis::{neighbor_report, pca_2d, projection_csv};
use scentprompt::benchmark::{
    evaluate_task_with, layer_sweep, per_descriptor_scores_with, DescriptorScores, RatingTable,
    ScoreReport, TaskScore, TaskSpec,
};
use scentprompt::corpus::{
    build_lexicon, cooccurrence, frequency_report, load_corpus, merge_variants, prune,
    CorpusDocument, CorpusFormat, Lexicon,
};
use scentprompt::embedding::{embed_descriptors_with, EmbedderConfig, Prompt};
use scentprompt::mining::{
    checkpoint_load, mine, report_csv, resume, Beam, SearchParams, TaskPairScorer,
};
use scentprompt::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{require_path, RunConfig};
use crate::manifest::Output;

/// Everything a command needs: the resolved configuration and the embedder
/// it describes.
pub struct Run {
    pub config: RunConfig,
    pub embedder: EmbedderConfig,
}

impl Run {
    fn prompt(&self) -> Result<Prompt> {
        Prompt::parse(&self.config.prompt)
    }

    fn corpus(&self) -> Result<Vec<CorpusDocument>> {
        if self.config.corpus.is_empty() {
            return Err(Error::Argument("no corpus files configured".into()));
        }
        let mut docs = Vec::new();
        for path in &self.config.corpus {
            docs.extend(load_corpus(path, CorpusFormat::from_path(path))?);
        }
        Ok(docs)
    }

    fn lexicon(&self) -> Result<Lexicon> {
        Lexicon::load(require_path("lexicon", self.config.lexicon.as_ref())?)
    }

    fn source(&self) -> Result<RatingTable> {
        RatingTable::load(require_path(
            "ratings.source",
            self.config.ratings.source.as_ref(),
        )?)
    }

    /// The single-word and full-descriptor tasks, each only if configured.
    fn tasks(&self) -> Result<(Option<TaskSpec>, Option<TaskSpec>)> {
        let r = &self.config.ratings;
        if r.target_single.is_none() && r.target_full.is_none() {
            return Err(Error::Argument(
                "neither ratings.target_single nor ratings.target_full is configured".into(),
            ));
        }
        let source = self.source()?;
        let (single_variant, full_variant) = r.sizes.variants();
        let load =
            |field: &str, path: Option<&std::path::PathBuf>, variant| -> Result<Option<TaskSpec>> {
                match path {
                    None => Ok(None),
                    Some(p) => {
                        let target = RatingTable::load(require_path(field, Some(p))?)?;
                        TaskSpec::new(source.clone(), target, variant).map(Some)
                    }
                }
            };
        Ok((
            load(
                "ratings.target_single",
                r.target_single.as_ref(),
                single_variant,
            )?,
            load("ratings.target_full", r.target_full.as_ref(), full_variant)?,
        ))
    }

    fn both_tasks(&self) -> Result<(TaskSpec, TaskSpec)> {
        match self.tasks()? {
            (Some(s), Some(f)) => Ok((s, f)),
            _ => Err(Error::Argument(
                "both ratings.target_single and ratings.target_full are required".into(),
            )),
        }
    }
}

#[derive(Serialize)]
struct CorpusSummary {
    documents: usize,
    raw_descriptors: usize,
    raw_occurrences: u64,
    merged_descriptors: usize,
    kept_descriptors: usize,
    discarded_fraction: f64,
}

pub fn corpus_build(run: &Run, out: &mut Output) -> Result<()> {
    let docs = run.corpus()?;
    let raw = build_lexicon(&docs);
    let embedder = run.embedder.build()?;
    let merged = merge_variants(&raw, embedder.as_ref(), run.config.merge)?;
    let (kept, discarded_fraction) = prune(&merged, run.config.min_freq)?;
    log::info!(
        "{} documents: {} raw, {} merged, {} kept descriptors",
        docs.len(),
        raw.len(),
        merged.len(),
        kept.len()
    );
    out.write("lexicon_merged.json", &merged.to_json())?;
    out.write("lexicon.json", &kept.to_json())?;
    out.write_json(
        "corpus_summary.json",
        &CorpusSummary {
            documents: docs.len(),
            raw_descriptors: raw.len(),
            raw_occurrences: raw.total_frequency(),
            merged_descriptors: merged.len(),
            kept_descriptors: kept.len(),
            discarded_fraction,
        },
    )?;
    Ok(())
}

pub fn corpus_stats(run: &Run, out: &mut Output) -> Result<()> {
    let lex = run.lexicon()?;
    out.write("pareto.csv", &frequency_report(&lex).to_csv())?;
    Ok(())
}

/// The `n` most frequent descriptors, ties broken alphabetically.
fn most_frequent(lex: &Lexicon, n: usize) -> Vec<String> {
    let mut all: Vec<(&str, u64)> = lex.iter().map(|(d, e)| (d, e.freq)).collect();
    all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    all.into_iter()
        .take(n)
        .map(|(d, _)| d.to_string())
        .collect()
}

pub fn cooccur(run: &Run, out: &mut Output) -> Result<()> {
    let docs = run.corpus()?;
    let c = &run.config.cooccur;
    let fallback = || -> Result<Vec<String>> { Ok(most_frequent(&run.lexicon()?, c.top)) };
    let sources = if c.sources.is_empty() {
        fallback()?
    } else {
        c.sources.clone()
    };
    let targets = if c.targets.is_empty() {
        fallback()?
    } else {
        c.targets.clone()
    };
    out.write(
        "cooccurrence.csv",
        &cooccurrence(&docs, &sources, &targets)?.to_csv(),
    )?;
    Ok(())
}

pub fn embed(run: &Run, out: &mut Output) -> Result<()> {
    let descriptors = if run.config.descriptors.is_empty() {
        run.lexicon()?.iter().map(|(d, _)| d.to_string()).collect()
    } else {
        run.config.descriptors.clone()
    };
    let embedder = run.embedder.build()?;
    let m = embed_descriptors_with(embedder.as_ref(), &run.prompt()?, &descriptors)?;
    out.write("embeddings.vec", &m.to_vec_format())?;
    Ok(())
}

fn write_score(
    run: &Run,
    out: &mut Output,
    name: &str,
    task: &TaskSpec,
    score: &TaskScore,
    prompt: &Prompt,
) -> Result<()> {
    let report = ScoreReport::new(
        score,
        run.config.metric,
        task.variant(),
        prompt,
        &run.embedder,
    );
    out.write_json(&format!("score_{name}.json"), &report)?;
    Ok(())
}

pub fn evaluate(run: &Run, out: &mut Output) -> Result<()> {
    let prompt = run.prompt()?;
    let embedder = run.embedder.build()?;
    let (single, full) = run.tasks()?;
    for (name, task) in [("single", single), ("full", full)] {
        let Some(task) = task else { continue };
        let score = evaluate_task_with(embedder.as_ref(), &prompt, &task, run.config.metric)?;
        log::info!(
            "{name}: {:.6} ({} skipped)",
            score.score,
            score.skipped_count
        );
        println!("{name}\t{}", score.score);
        write_score(run, out, name, &task, &score, &prompt)?;
        if task.molecules().len() >= 2 {
            let per = per_descriptor_scores_with(embedder.as_ref(), &prompt, &task)?;
            out.write_json(&format!("per_descriptor_{name}.json"), &per)?;
        } else {
            log::warn!("{name}: one molecule only; per-descriptor scores skipped");
        }
    }
    Ok(())
}

fn cell(score: Option<&TaskScore>) -> String {
    score.map(|s| s.score.to_string()).unwrap_or_default()
}

pub fn sweep_layers(run: &Run, out: &mut Output) -> Result<()> {
    if run.config.layers.is_empty() {
        return Err(Error::Argument("no layers configured for the sweep".into()));
    }
    let prompt = run.prompt()?;
    let layers = &run.config.layers;
    let (single, full) = run.tasks()?;
    let sweep = |task: &Option<TaskSpec>| -> Result<Vec<Option<TaskScore>>> {
        match task {
            None => Ok(vec![None; layers.len()]),
            Some(t) => Ok(layer_sweep(&run.embedder, &prompt, t, layers)?
                .into_iter()
                .map(|(_, s)| Some(s))
                .collect()),
        }
    };
    let (s, f) = (sweep(&single)?, sweep(&full)?);
    let mut csv = String::from("layer,score_single,score_full,score_avg\n");
    for ((layer, s), f) in layers.iter().zip(&s).zip(&f) {
        let avg = match (s, f) {
            (Some(s), Some(f)) => ((s.score + f.score) / 2.0).to_string(),
            _ => String::new(),
        };
        csv.push_str(&format!(
            "{layer},{},{},{avg}\n",
            cell(s.as_ref()),
            cell(f.as_ref())
        ));
    }
    out.write("layer_curve.csv", &csv)?;
    Ok(())
}

#[derive(Serialize)]
struct BeamSummary {
    prompt: String,
    tokens: Vec<String>,
    blank_index: usize,
    score_single: f64,
    score_full: f64,
    score_avg: f64,
}

impl From<&Beam> for BeamSummary {
    fn from(b: &Beam) -> Self {
        Self {
            prompt: b.prompt.to_string(),
            tokens: b.prompt.tokens().to_vec(),
            blank_index: b.prompt.blank_index(),
            score_single: b.score_single,
            score_full: b.score_full,
            score_avg: b.score_avg,
        }
    }
}

#[derive(Serialize)]
struct MiningSummary {
    best: BeamSummary,
    baseline: Option<BeamSummary>,
    generations: u32,
    evaluated_count: u64,
    failed_count: u64,
    final_beams: Vec<BeamSummary>,
}

pub fn mine_prompts(run: &Run, out: &mut Output) -> Result<()> {
    let lex = run.lexicon()?;
    let (single, full) = run.both_tasks()?;
    let embedder = run.embedder.build()?;
    let scorer = TaskPairScorer::new(embedder.as_ref(), &single, &full, run.config.metric);
    let m = &run.config.mining;
    let ckpt = out.path("checkpoint.json");
    let result = match &m.resume {
        Some(path) => {
            let mut state = checkpoint_load(path)?;
            if state.master_seed != m.master_seed || state.k != m.k {
                log::warn!(
                    "resuming with the checkpoint's seed {} and k {}",
                    state.master_seed,
                    state.k
                );
            }
            state.max_generations = m.max_generations;
            resume(state, &lex, &scorer, Some(&ckpt))?
        }
        None => {
            let params = SearchParams::new(m.k, m.max_generations, m.master_seed)?;
            mine(&lex, &scorer, params, Some(&ckpt))?
        }
    };
    if ckpt.exists() {
        out.record(ckpt);
    }
    println!("{}\t{}", result.best.prompt, result.best.score_avg);
    out.write("mining_report.csv", &report_csv(&result.history))?;
    out.write_json(
        "mining_result.json",
        &MiningSummary {
            best: (&result.best).into(),
            baseline: result.baseline.as_ref().map(Into::into),
            generations: result.final_state.generation,
            evaluated_count: result.evaluated_count,
            failed_count: result.failed_count,
            final_beams: result.final_state.beams.iter().map(Into::into).collect(),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct AnalysisReport<'a> {
    anchor: &'a str,
    positives: &'a [String],
    negatives: &'a [String],
    space: scentprompt::analysis::DistanceSpace,
    prompt: String,
    report: scentprompt::analysis::NeighborReport,
    explained_variance: [f64; 2],
    embedder: &'a EmbedderConfig,
}

pub fn analyze(run: &Run, out: &mut Output) -> Result<()> {
    let a = &run.config.analysis;
    let mut labels: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for l in std::iter::once(&a.anchor)
        .chain(&a.positives)
        .chain(&a.negatives)
        .chain(&a.others)
    {
        if seen.insert(l.clone()) {
            labels.push(l.clone());
        }
    }
    let prompt = run.prompt()?;
    let embedder = run.embedder.build()?;
    let m = embed_descriptors_with(embedder.as_ref(), &prompt, &labels)?;
    let report = neighbor_report(&m, &a.anchor, &a.positives, &a.negatives, a.space)?;
    let projection = pca_2d(m.matrix())?;
    out.write(
        "projection.csv",
        &projection_csv(&labels, &projection, &a.anchor, &a.positives, &a.negatives),
    )?;
    out.write_json(
        "neighbor_report.json",
        &AnalysisReport {
            anchor: &a.anchor,
            positives: &a.positives,
            negatives: &a.negatives,
            space: a.space,
            prompt: prompt.to_string(),
            report,
            explained_variance: projection.explained_variance,
            embedder: &run.embedder,
        },
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub descriptor: String,
    pub baseline: f64,
    pub improved: f64,
    pub delta: f64,
    pub occurrences: Option<u64>,
}

fn load_scores(field: &str, path: Option<&std::path::PathBuf>) -> Result<DescriptorScores> {
    let path: &Path = require_path(field, path)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Join two score maps on descriptor; rows sorted by delta, largest gain first.
pub fn improvement_rows(
    baseline: &DescriptorScores,
    improved: &DescriptorScores,
    lex: Option<&Lexicon>,
) -> Vec<ImprovementRow> {
    let mut rows: Vec<ImprovementRow> = baseline
        .iter()
        .filter_map(|(d, b)| {
            let (b, i) = ((*b)?, (*improved.get(d)?)?);
            Some(ImprovementRow {
                descriptor: d.clone(),
                baseline: b,
                improved: i,
                delta: i - b,
                occurrences: lex.and_then(|l| l.freq_of_variant(d)),
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        b.delta
            .total_cmp(&a.delta)
            .then_with(|| a.descriptor.cmp(&b.descriptor))
    });
    rows
}

pub fn report_improvement(run: &Run, out: &mut Output) -> Result<()> {
    let imp = &run.config.improvement;
    let baseline = load_scores("improvement.baseline", imp.baseline.as_ref())?;
    let improved = load_scores("improvement.improved", imp.improved.as_ref())?;
    let lex = match &run.config.lexicon {
        Some(_) => Some(run.lexicon()?),
        None => None,
    };
    let rows = improvement_rows(&baseline, &improved, lex.as_ref());
    let dropped = baseline.len().max(improved.len()) - rows.len();
    if dropped > 0 {
        log::warn!("{dropped} descriptors lack a defined score on one side and were left out");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["descriptor", "baseline", "improved", "delta", "occurrences"])
        .map_err(|e| Error::Schema(e.to_string()))?;
    for r in &rows {
        w.write_record([
            r.descriptor.clone(),
            r.baseline.to_string(),
            r.improved.to_string(),
            r.delta.to_string(),
            r.occurrences.map(|o| o.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| Error::Schema(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
    out.write(
        "improvement.csv",
        &String::from_utf8(bytes).expect("utf-8 csv"),
    )?;
    Ok(())
}
