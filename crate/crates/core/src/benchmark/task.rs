use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ratings::RatingTable;
use super::regression::{fit_predict_molecule, pearson};
use crate::embedding::{
    embed_descriptors_with, BackendKind, Embedder, EmbedderConfig, EmbeddingMatrix, Prompt,
};
use crate::error::{Error, Result};

pub const SOURCE_DESCRIPTORS: usize = 19;
pub const SINGLE_WORD_TARGETS: usize = 131;
pub const FULL_DESCRIPTOR_TARGETS: usize = 146;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskVariant {
    SingleWord,
    FullDescriptor,
    /// Any table sizes of at least two descriptors; for fixtures.
    Custom,
}

/// How per-cell predictions are turned into one number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMetric {
    /// Mean over molecules of the Pearson r between predicted and actual ratings.
    #[default]
    PerMolecule,
    /// One Pearson r over every scored (molecule, descriptor) cell.
    Pooled,
}

/// Source ratings used to predict target ratings for the same molecules.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    source: RatingTable,
    target: RatingTable,
    variant: TaskVariant,
}

impl TaskSpec {
    /// Validates sizes for the variant and aligns target rows to the source's
    /// molecule order.
    pub fn new(source: RatingTable, target: RatingTable, variant: TaskVariant) -> Result<Self> {
        let (ns, nt) = (source.descriptors().len(), target.descriptors().len());
        let expected = match variant {
            TaskVariant::SingleWord => Some(SINGLE_WORD_TARGETS),
            TaskVariant::FullDescriptor => Some(FULL_DESCRIPTOR_TARGETS),
            TaskVariant::Custom => None,
        };
        if let Some(nt_expected) = expected {
            if ns != SOURCE_DESCRIPTORS || nt != nt_expected {
                return Err(Error::Schema(format!(
                    "{variant:?} task needs {SOURCE_DESCRIPTORS} source and {nt_expected} target \
                     descriptors, got {ns} and {nt}"
                )));
            }
        } else if ns < 2 || nt < 2 {
            return Err(Error::Schema(format!(
                "task needs at least 2 source and 2 target descriptors, got {ns} and {nt}"
            )));
        }
        let mut a: Vec<&String> = source.molecules().iter().collect();
        let mut b: Vec<&String> = target.molecules().iter().collect();
        a.sort();
        b.sort();
        if a != b {
            return Err(Error::Schema(
                "source and target ratings cover different molecules".into(),
            ));
        }
        if a.is_empty() {
            return Err(Error::Schema("task has no molecules".into()));
        }
        let target = target.reorder_molecules(source.molecules())?;
        Ok(Self {
            source,
            target,
            variant,
        })
    }

    pub fn source(&self) -> &RatingTable {
        &self.source
    }

    pub fn target(&self) -> &RatingTable {
        &self.target
    }

    pub fn variant(&self) -> TaskVariant {
        self.variant
    }

    pub fn molecules(&self) -> &[String] {
        self.source.molecules()
    }
}

/// JSON task manifest: `{"source": path, "target": path, "variant": ...}`.
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskManifest {
    pub source: PathBuf,
    pub target: PathBuf,
    pub variant: TaskVariant,
}

impl TaskManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: TaskManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.source = base.join(&m.source);
        m.target = base.join(&m.target);
        Ok(m)
    }

    pub fn into_task(self) -> Result<TaskSpec> {
        TaskSpec::new(
            RatingTable::load(&self.source)?,
            RatingTable::load(&self.target)?,
            self.variant,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeScore {
    pub molecule: String,
    /// `None` when the molecule was skipped.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub score: f64,
    pub per_molecule: Vec<MoleculeScore>,
    pub skipped_count: usize,
}

/// Target descriptor → correlation across molecules (`None` if undefined).
pub type DescriptorScores = BTreeMap<String, Option<f64>>;

/// Predicted target ratings for one molecule, `None` if it could not be fit.
type Predictions = Vec<Option<Vec<f64>>>;

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Fit and predict every molecule; order follows the task's molecule list.
pub fn predict_task(
    task: &TaskSpec,
    source_emb: &EmbeddingMatrix,
    target_emb: &EmbeddingMatrix,
) -> Result<Predictions> {
    if source_emb.dim() != target_emb.dim() {
        return Err(Error::Integrity(format!(
            "source dimension {} differs from target dimension {}",
            source_emb.dim(),
            target_emb.dim()
        )));
    }
    if source_emb.len() != task.source.descriptors().len()
        || target_emb.len() != task.target.descriptors().len()
    {
        return Err(Error::Integrity(
            "embedding rows do not match task descriptors".into(),
        ));
    }
    (0..task.molecules().len())
        .into_par_iter()
        .map(|m| {
            let (rows, ratings): (Vec<usize>, Vec<f64>) = task
                .source
                .row(m)
                .iter()
                .enumerate()
                .filter_map(|(i, v)| v.map(|v| (i, v)))
                .unzip();
            if rows.len() < 2 {
                return Ok(None);
            }
            let src = select_rows(source_emb.matrix(), &rows);
            fit_predict_molecule(&src, &ratings, target_emb.matrix()).map(Some)
        })
        .collect()
}

/// Score precomputed predictions against the task's target ratings.
pub fn score_predictions(
    task: &TaskSpec,
    predictions: &Predictions,
    metric: ScoreMetric,
) -> Result<TaskScore> {
    let mut per_molecule = Vec::with_capacity(predictions.len());
    let mut pooled_pred = Vec::new();
    let mut pooled_actual = Vec::new();
    for (m, pred) in predictions.iter().enumerate() {
        let molecule = task.molecules()[m].clone();
        let r = match pred {
            None => None,
            Some(pred) => {
                let (p, a): (Vec<f64>, Vec<f64>) = pred
                    .iter()
                    .zip(task.target.row(m))
                    .filter_map(|(p, a)| a.map(|a| (*p, a)))
                    .unzip();
                if p.len() < 2 {
                    None
                } else {
                    let r = pearson(&p, &a)?;
                    if r.is_some() {
                        pooled_pred.extend_from_slice(&p);
                        pooled_actual.extend_from_slice(&a);
                    }
                    r
                }
            }
        };
        per_molecule.push(MoleculeScore { molecule, r });
    }
    let scored: Vec<f64> = per_molecule.iter().filter_map(|m| m.r).collect();
    let skipped_count = per_molecule.len() - scored.len();
    if scored.is_empty() {
        return Err(Error::Evaluation(format!(
            "all {} molecules were skipped",
            per_molecule.len()
        )));
    }
    let score = match metric {
        ScoreMetric::PerMolecule => scored.iter().sum::<f64>() / scored.len() as f64,
        ScoreMetric::Pooled => pearson(&pooled_pred, &pooled_actual)?.ok_or_else(|| {
            Error::Evaluation("pooled correlation undefined (zero variance)".into())
        })?,
    };
    Ok(TaskScore {
        score,
        per_molecule,
        skipped_count,
    })
}

/// Embed the task's source and target descriptors under one prompt.
pub fn embed_task(
    embedder: &dyn Embedder,
    prompt: &Prompt,
    task: &TaskSpec,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    Ok((
        embed_descriptors_with(embedder, prompt, task.source.descriptors())?,
        embed_descriptors_with(embedder, prompt, task.target.descriptors())?,
    ))
}

pub fn evaluate_task(cfg: &EmbedderConfig, prompt: &Prompt, task: &TaskSpec) -> Result<TaskScore> {
    evaluate_task_with(cfg.build()?.as_ref(), prompt, task, ScoreMetric::default())
}

pub fn evaluate_task_with(
    embedder: &dyn Embedder,
    prompt: &Prompt,
    task: &TaskSpec,
    metric: ScoreMetric,
) -> Result<TaskScore> {
    let (src, tgt) = embed_task(embedder, prompt, task)?;
    evaluate_embedded(task, &src, &tgt, metric)
}

pub fn evaluate_embedded(
    task: &TaskSpec,
    source_emb: &EmbeddingMatrix,
    target_emb: &EmbeddingMatrix,
    metric: ScoreMetric,
) -> Result<TaskScore> {
    let predictions = predict_task(task, source_emb, target_emb)?;
    score_predictions(task, &predictions, metric)
}

pub fn per_descriptor_scores(
    cfg: &EmbedderConfig,
    prompt: &Prompt,
    task: &TaskSpec,
) -> Result<DescriptorScores> {
    per_descriptor_scores_with(cfg.build()?.as_ref(), prompt, task)
}

/// Correlation across molecules of predicted vs actual, per target descriptor.
pub fn per_descriptor_scores_with(
    embedder: &dyn Embedder,
    prompt: &Prompt,
    task: &TaskSpec,
) -> Result<DescriptorScores> {
    if task.molecules().len() < 2 {
        return Err(Error::Argument(
            "per-descriptor scores need at least 2 molecules".into(),
        ));
    }
    let (src, tgt) = embed_task(embedder, prompt, task)?;
    let predictions = predict_task(task, &src, &tgt)?;
    if predictions.iter().all(Option::is_none) {
        return Err(Error::Evaluation("no molecule could be fit".into()));
    }
    task.target
        .descriptors()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let (p, a): (Vec<f64>, Vec<f64>) = predictions
                .iter()
                .enumerate()
                .filter_map(|(m, pred)| {
                    let pred = pred.as_ref()?;
                    task.target.get(m, j).map(|a| (pred[j], a))
                })
                .unzip();
            let r = if p.len() < 2 { None } else { pearson(&p, &a)? };
            Ok((name.clone(), r))
        })
        .collect()
}

/// Evaluate the task once per layer of a remote backend, in the given order.
pub fn layer_sweep(
    cfg: &EmbedderConfig,
    prompt: &Prompt,
    task: &TaskSpec,
    layers: &[u32],
) -> Result<Vec<(u32, TaskScore)>> {
    if cfg.backend != BackendKind::Remote {
        return Err(Error::Argument(format!(
            "layer sweep needs the remote backend, got {:?}",
            cfg.backend
        )));
    }
    layers
        .iter()
        .map(|&layer| {
            let cfg = EmbedderConfig {
                layer,
                ..cfg.clone()
            };
            evaluate_task(&cfg, prompt, task).map(|s| (layer, s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbedInput;
    use std::collections::HashMap;

    struct Table(HashMap<String, Vec<f64>>);

    impl Embedder for Table {
        fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>> {
            Ok(inputs.iter().map(|i| self.0[&i.text].clone()).collect())
        }
    }

    fn table(rows: &[(&str, &[f64])]) -> Table {
        Table(
            rows.iter()
                .map(|(k, v)| (k.to_string(), v.to_vec()))
                .collect(),
        )
    }

    fn ratings(csv: &str) -> RatingTable {
        RatingTable::parse_csv(csv).unwrap()
    }

    #[test]
    fn hand_computed_two_to_three() {
        // Source a=[0], b=[1] rated 10, 30 -> line 10 + 20x.
        // Targets c=[2], d=[-1], e=[0.5] predict 50, -10, 20; actual 60, 0, 20.
        let emb = table(&[
            ("a", &[0.0]),
            ("b", &[1.0]),
            ("c", &[2.0]),
            ("d", &[-1.0]),
            ("e", &[0.5]),
        ]);
        let task = TaskSpec::new(
            ratings("molecule,a,b\nm1,10,30\n"),
            ratings("molecule,c,d,e\nm1,60,0,20\n"),
            TaskVariant::Custom,
        )
        .unwrap();
        let score =
            evaluate_task_with(&emb, &Prompt::empty(), &task, ScoreMetric::PerMolecule).unwrap();
        // pearson([50,-10,20],[60,0,20]) by hand
        let (p, a) = ([50.0, -10.0, 20.0], [60.0, 0.0, 20.0]);
        let (mp, ma) = (20.0, 80.0 / 3.0);
        let sxy: f64 = p.iter().zip(a).map(|(x, y)| (x - mp) * (y - ma)).sum();
        let sxx: f64 = p.iter().map(|x| (x - mp).powi(2)).sum();
        let syy: f64 = a.iter().map(|y| (y - ma).powi(2)).sum();
        let want = sxy / (sxx * syy).sqrt();
        assert!(
            (score.score - want).abs() < 1e-9,
            "{} vs {want}",
            score.score
        );
        assert_eq!(score.skipped_count, 0);
    }

    #[test]
    fn zero_variance_molecule_skipped() {
        let emb = table(&[("a", &[0.0]), ("b", &[1.0]), ("c", &[2.0]), ("d", &[3.0])]);
        let task = TaskSpec::new(
            ratings("molecule,a,b\nm1,10,20\nm2,5,5\n"),
            ratings("molecule,c,d\nm1,30,40\nm2,1,2\n"),
            TaskVariant::Custom,
        )
        .unwrap();
        let s =
            evaluate_task_with(&emb, &Prompt::empty(), &task, ScoreMetric::PerMolecule).unwrap();
        assert_eq!(s.skipped_count, 1);
        assert_eq!(s.per_molecule[1].r, None);
        assert!((s.score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_skipped_is_an_error() {
        let emb = table(&[("a", &[0.0]), ("b", &[1.0]), ("c", &[2.0]), ("d", &[3.0])]);
        let task = TaskSpec::new(
            ratings("molecule,a,b\nm1,5,5\n"),
            ratings("molecule,c,d\nm1,1,2\n"),
            TaskVariant::Custom,
        )
        .unwrap();
        assert!(matches!(
            evaluate_task_with(&emb, &Prompt::empty(), &task, ScoreMetric::PerMolecule),
            Err(Error::Evaluation(_))
        ));
    }

    #[test]
    fn variant_sizes_enforced() {
        let src = ratings("molecule,a,b\nm1,1,2\n");
        let tgt = ratings("molecule,c,d\nm1,1,2\n");
        assert!(TaskSpec::new(src.clone(), tgt.clone(), TaskVariant::SingleWord).is_err());
        assert!(TaskSpec::new(src.clone(), tgt.clone(), TaskVariant::FullDescriptor).is_err());
        let other = ratings("molecule,c,d\nm9,1,2\n");
        assert!(TaskSpec::new(src, other, TaskVariant::Custom).is_err());
    }

    #[test]
    fn target_rows_aligned_to_source_order() {
        let task = TaskSpec::new(
            ratings("molecule,a,b\nm1,1,2\nm2,3,4\n"),
            ratings("molecule,c,d\nm2,7,8\nm1,5,6\n"),
            TaskVariant::Custom,
        )
        .unwrap();
        assert_eq!(task.target().row(0), [Some(5.0), Some(6.0)]);
    }

    #[test]
    fn layer_sweep_requires_remote() {
        let task = TaskSpec::new(
            ratings("molecule,a,b\nm1,1,2\n"),
            ratings("molecule,c,d\nm1,1,2\n"),
            TaskVariant::Custom,
        )
        .unwrap();
        let cfg = EmbedderConfig::random(0, 4);
        assert!(matches!(
            layer_sweep(&cfg, &Prompt::empty(), &task, &[1]),
            Err(Error::Argument(_))
        ));
    }
}
