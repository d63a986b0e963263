//! Evaluation protocol: per-user chronological splits, macro-averaged
//! metrics, single experiments, ablation grids and result tables.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::boosting::{
    train_gbm, train_nb, GbmConfig, GbmModel, LabeledMatrix, NbModel, Prediction,
    DEFAULT_VAR_SMOOTHING,
};
use crate::error::{Result, WorkrError};
use crate::features::{fit_normalizer, FeatureTable, FeatureVector, GroupMask, Layout, Normalizer};
use crate::model::Occupation;
use crate::vae::{latent_matrix, train_vae, VaeConfig, VaeParams};

const NUM_CLASSES: usize = Occupation::COUNT;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub min_rows_per_user: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train: 0.7,
            val: 0.1,
            test: 0.2,
            min_rows_per_user: 10,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(WorkrError::InvalidConfig(format!(
                "split ratios must be positive and sum to 1, got {r:?}"
            )));
        }
        Ok(())
    }
}

/// Per-user row counts of a split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserBoundary {
    pub user: String,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<FeatureVector>,
    pub val: Vec<FeatureVector>,
    pub test: Vec<FeatureVector>,
    pub boundaries: Vec<UserBoundary>,
}

/// `floor(r * n)`, robust to ratios like 0.7 that are not exact in binary.
fn floor_share(r: f64, n: usize) -> usize {
    (r * n as f64 + 1e-9).floor() as usize
}

/// Splits each user's rows in time order into train/val/test by the floor
/// rule (remainder to test), then pools users in user-id order.
pub fn chrono_split(rows: &[FeatureVector], cfg: &SplitConfig) -> Result<Split> {
    cfg.validate()?;
    let mut by_user: BTreeMap<&str, Vec<&FeatureVector>> = BTreeMap::new();
    for r in rows {
        if r.label.is_none() {
            return Err(WorkrError::InvalidConfig(format!(
                "unlabeled row for user {} at {} passed to chrono_split",
                r.user, r.slot.start
            )));
        }
        by_user.entry(r.user.as_str()).or_default().push(r);
    }
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        boundaries: Vec::new(),
    };
    for (user, mut user_rows) in by_user {
        let n = user_rows.len();
        if n < cfg.min_rows_per_user {
            return Err(WorkrError::UserTooSmall {
                user: user.to_string(),
                rows: n,
                min: cfg.min_rows_per_user,
            });
        }
        user_rows.sort_by_key(|r| r.slot.start);
        let n_train = floor_share(cfg.train, n);
        let n_val = floor_share(cfg.val, n);
        split
            .train
            .extend(user_rows[..n_train].iter().map(|r| (*r).clone()));
        split.val.extend(
            user_rows[n_train..n_train + n_val]
                .iter()
                .map(|r| (*r).clone()),
        );
        split
            .test
            .extend(user_rows[n_train + n_val..].iter().map(|r| (*r).clone()));
        split.boundaries.push(UserBoundary {
            user: user.to_string(),
            train: n_train,
            val: n_val,
            test: n - n_train - n_val,
        });
    }
    Ok(split)
}

/// Macro-averaged scores with the confusion matrix `confusion[true][pred]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

/// Per-class precision, recall and F1 averaged over the classes present in
/// `labels`. A class never predicted has precision 0.
pub fn compute_metrics(preds: &[Occupation], labels: &[Occupation]) -> Result<Metrics> {
    if preds.is_empty() {
        return Err(WorkrError::EmptyEvaluation);
    }
    if preds.len() != labels.len() {
        return Err(WorkrError::DimensionMismatch {
            expected: labels.len(),
            got: preds.len(),
        });
    }
    let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (p, y) in preds.iter().zip(labels) {
        confusion[y.index()][p.index()] += 1;
    }
    let mut present = 0usize;
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for (k, row) in confusion.iter().enumerate() {
        let support: u64 = row.iter().sum();
        if support == 0 {
            continue;
        }
        present += 1;
        let tp = row[k] as f64;
        let predicted: u64 = confusion.iter().map(|r| r[k]).sum();
        let precision = if predicted == 0 {
            0.0
        } else {
            tp / predicted as f64
        };
        let recall = tp / support as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        p_sum += precision;
        r_sum += recall;
        f_sum += f1;
    }
    let correct: u64 = (0..NUM_CLASSES).map(|k| confusion[k][k]).sum();
    let m = present as f64;
    Ok(Metrics {
        f1: f_sum / m,
        precision: p_sum / m,
        recall: r_sum / m,
        accuracy: correct as f64 / preds.len() as f64,
        confusion,
    })
}

/// The four headline scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

impl Scores {
    fn of(m: &Metrics) -> Scores {
        Scores {
            f1: m.f1,
            precision: m.precision,
            recall: m.recall,
            accuracy: m.accuracy,
        }
    }

    fn to_array(self) -> [f64; 4] {
        [self.f1, self.precision, self.recall, self.accuracy]
    }

    fn from_array(a: [f64; 4]) -> Scores {
        Scores {
            f1: a[0],
            precision: a[1],
            recall: a[2],
            accuracy: a[3],
        }
    }
}

/// Mean and population standard deviation over repeats.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Scores,
    pub std: Scores,
    pub repeats: usize,
}

pub fn summarize(runs: &[Metrics]) -> Result<MetricSummary> {
    if runs.is_empty() {
        return Err(WorkrError::EmptyEvaluation);
    }
    let n = runs.len() as f64;
    let arrays: Vec<[f64; 4]> = runs.iter().map(|m| Scores::of(m).to_array()).collect();
    let mut mean = [0.0; 4];
    let mut std = [0.0; 4];
    for j in 0..4 {
        mean[j] = arrays.iter().map(|a| a[j]).sum::<f64>() / n;
        std[j] = (arrays.iter().map(|a| (a[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
    }
    Ok(MetricSummary {
        mean: Scores::from_array(mean),
        std: Scores::from_array(std),
        repeats: runs.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gbm,
    Nb,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gbm => "gbm",
            ModelKind::Nb => "nb",
        }
    }
}

impl FromStr for ModelKind {
    type Err = WorkrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gbm" => Ok(ModelKind::Gbm),
            "nb" => Ok(ModelKind::Nb),
            _ => Err(WorkrError::InvalidConfig(format!(
                "unknown model `{s}` (expected gbm or nb)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub split: SplitConfig,
    pub gbm: GbmConfig,
    /// `input_dim` and `seed` are set per run.
    pub vae: VaeConfig,
    pub nb_var_smoothing: f64,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            split: SplitConfig::default(),
            gbm: GbmConfig::default(),
            vae: VaeConfig::default(),
            nb_var_smoothing: DEFAULT_VAR_SMOOTHING,
            seeds: (1..=5).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub runs: Vec<Metrics>,
    pub summary: MetricSummary,
}

/// Rows of one partition after normalization, over the full layout.
struct Part {
    rows: Vec<Vec<f64>>,
    labels: Vec<Occupation>,
}

/// Trained VAE and its train/val/test latent means.
type CachedLatents = (VaeParams, [Array2<f64>; 3]);

/// Split and normalizer computed once per dataset, shared by every
/// experiment; VAE latents are cached per `(mask, seed)`.
pub struct ExperimentRunner {
    cfg: ExperimentConfig,
    layout: Layout,
    normalizer: Normalizer,
    split: Split,
    parts: [Part; 3],
    latents: HashMap<(GroupMask, u64), CachedLatents>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FittedModel {
    Gbm(GbmModel),
    Nb(NbModel),
}

impl FittedModel {
    pub fn predict_matrix(&self, m: &LabeledMatrix) -> Result<Vec<Prediction>> {
        match self {
            FittedModel::Gbm(g) => g.predict_matrix(m),
            FittedModel::Nb(n) => n.predict_matrix(m),
        }
    }

    pub fn save<W: std::io::Write>(&self, writer: W) -> Result<()> {
        match self {
            FittedModel::Gbm(g) => g.save(writer),
            FittedModel::Nb(n) => n.save(writer),
        }
    }
}

/// Everything produced by one pipeline run.
#[derive(Clone, Debug)]
pub struct FittedRun {
    pub model: FittedModel,
    pub vae: Option<VaeParams>,
    pub test: LabeledMatrix,
    pub metrics: Metrics,
}

impl ExperimentRunner {
    pub fn new(table: &FeatureTable, cfg: ExperimentConfig) -> Result<ExperimentRunner> {
        if cfg.seeds.is_empty() {
            return Err(WorkrError::InvalidConfig(
                "at least one seed is required".into(),
            ));
        }
        cfg.gbm.validate()?;
        let split = chrono_split(&table.labeled(), &cfg.split)?;
        if split.train.is_empty() || split.test.is_empty() {
            return Err(WorkrError::EmptyTrainingSet);
        }
        let normalizer = fit_normalizer(&table.layout, &split.train)?;
        let part = |rows: &[FeatureVector]| -> Result<Part> {
            Ok(Part {
                rows: rows
                    .iter()
                    .map(|r| normalizer.apply_values(&r.values))
                    .collect::<Result<_>>()?,
                labels: rows
                    .iter()
                    .map(|r| r.label.expect("split rows are labeled"))
                    .collect(),
            })
        };
        let parts = [part(&split.train)?, part(&split.val)?, part(&split.test)?];
        Ok(ExperimentRunner {
            layout: table.layout.clone(),
            cfg,
            normalizer,
            split,
            parts,
            latents: HashMap::new(),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    fn latents_for(
        &mut self,
        mask: GroupMask,
        seed: u64,
    ) -> Result<&(VaeParams, [Array2<f64>; 3])> {
        if !self.latents.contains_key(&(mask, seed)) {
            let idx = self.layout.mask_indices(mask);
            if idx.is_empty() {
                return Err(WorkrError::InvalidMask(format!(
                    "latent mask {mask} selects no columns"
                )));
            }
            let to_matrix = |p: &Part| {
                Array2::from_shape_fn((p.rows.len(), idx.len()), |(i, j)| p.rows[i][idx[j]])
            };
            let vae_cfg = VaeConfig {
                input_dim: idx.len(),
                seed,
                ..self.cfg.vae.clone()
            };
            let trained = train_vae(&to_matrix(&self.parts[0]), &vae_cfg)?;
            let z = [
                latent_matrix(&trained.params, &to_matrix(&self.parts[0]))?,
                latent_matrix(&trained.params, &to_matrix(&self.parts[1]))?,
                latent_matrix(&trained.params, &to_matrix(&self.parts[2]))?,
            ];
            self.latents.insert((mask, seed), (trained.params, z));
        }
        Ok(&self.latents[&(mask, seed)])
    }

    /// Builds train/val/test matrices: normalized columns of `features`
    /// followed by the latent means of a VAE trained on the `latent` columns.
    pub fn matrices(
        &mut self,
        features: Option<GroupMask>,
        latent: Option<GroupMask>,
        seed: u64,
    ) -> Result<[LabeledMatrix; 3]> {
        let feature_idx = match features {
            Some(m) => self.layout.mask_indices(m),
            None => Vec::new(),
        };
        let mut layout = self.layout.select(&feature_idx);
        let latents = match latent {
            Some(m) => {
                let z = self.latents_for(m, seed)?.1.clone();
                layout = layout.with_latent(&m.letters().to_ascii_lowercase(), z[0].ncols());
                Some(z)
            }
            None => None,
        };
        if layout.is_empty() {
            return Err(WorkrError::InvalidMask(
                "experiment selects no columns".into(),
            ));
        }
        let build = |p: &Part, z: Option<&Array2<f64>>| LabeledMatrix {
            layout: layout.clone(),
            rows: p
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let mut v: Vec<f64> = feature_idx.iter().map(|&j| r[j]).collect();
                    if let Some(z) = z {
                        v.extend(z.row(i).iter());
                    }
                    v
                })
                .collect(),
            labels: p.labels.clone(),
        };
        let z = latents.as_ref();
        Ok([
            build(&self.parts[0], z.map(|z| &z[0])),
            build(&self.parts[1], z.map(|z| &z[1])),
            build(&self.parts[2], z.map(|z| &z[2])),
        ])
    }

    /// One pipeline run: assemble, fit the model (GBM early-stops on the
    /// validation split), score on test.
    pub fn fit(
        &mut self,
        features: Option<GroupMask>,
        latent: Option<GroupMask>,
        model: ModelKind,
        seed: u64,
    ) -> Result<FittedRun> {
        let [train, val, test] = self.matrices(features, latent, seed)?;
        let model = match model {
            ModelKind::Gbm => {
                let cfg = GbmConfig {
                    seed,
                    ..self.cfg.gbm.clone()
                };
                FittedModel::Gbm(train_gbm(&train, &val, &cfg)?.model)
            }
            ModelKind::Nb => FittedModel::Nb(train_nb(&train, self.cfg.nb_var_smoothing)?),
        };
        let preds: Vec<Occupation> = model
            .predict_matrix(&test)?
            .iter()
            .map(|p| p.label)
            .collect();
        let metrics = compute_metrics(&preds, &test.labels)?;
        let vae = latent.map(|m| self.latents[&(m, seed)].0.clone());
        Ok(FittedRun {
            model,
            vae,
            test,
            metrics,
        })
    }

    pub fn run_once(
        &mut self,
        features: Option<GroupMask>,
        latent: Option<GroupMask>,
        model: ModelKind,
        seed: u64,
    ) -> Result<Metrics> {
        Ok(self.fit(features, latent, model, seed)?.metrics)
    }

    /// Repeats [`Self::run_once`] over the configured seeds.
    pub fn run(
        &mut self,
        features: Option<GroupMask>,
        latent: Option<GroupMask>,
        model: ModelKind,
    ) -> Result<ExperimentResult> {
        if features.is_none() && latent.is_none() {
            return Err(WorkrError::InvalidMask(
                "at least one of the feature and latent masks is required".into(),
            ));
        }
        let seeds = self.cfg.seeds.clone();
        let runs = seeds
            .into_iter()
            .map(|s| self.run_once(features, latent, model, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentResult {
            summary: summarize(&runs)?,
            runs,
        })
    }
}

/// Split, normalize, optionally add VAE latents, train and score, once per
/// configured seed.
pub fn run_experiment(
    table: &FeatureTable,
    features: Option<GroupMask>,
    latent: Option<GroupMask>,
    model: ModelKind,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult> {
    ExperimentRunner::new(table, cfg.clone())?.run(features, latent, model)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationMode {
    Preprocessed,
    Latent,
}

impl FromStr for AblationMode {
    type Err = WorkrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "preprocessed" => Ok(AblationMode::Preprocessed),
            "latent" => Ok(AblationMode::Latent),
            _ => Err(WorkrError::InvalidConfig(format!(
                "unknown ablation mode `{s}` (expected preprocessed or latent)"
            ))),
        }
    }
}

const SUBSET_ORDER: [&str; 15] = [
    "P", "A", "S", "T", "PA", "PS", "PT", "AS", "AT", "ST", "PAS", "PAT", "PST", "AST", "PAST",
];

fn mask(letters: &str) -> GroupMask {
    letters.parse().expect("static mask")
}

/// The `(features, latent)` pairs of a grid, in table order.
pub fn grid_rows(mode: AblationMode) -> Vec<(Option<GroupMask>, Option<GroupMask>)> {
    match mode {
        AblationMode::Preprocessed => SUBSET_ORDER.iter().map(|s| (Some(mask(s)), None)).collect(),
        AblationMode::Latent => {
            let pas = Some(mask("PAS"));
            let past = Some(mask("PAST"));
            let mut rows: Vec<_> = SUBSET_ORDER[..14]
                .iter()
                .map(|s| (pas, Some(mask(s))))
                .collect();
            rows.push((pas, None));
            rows.push((None, past));
            rows.push((pas, past));
            rows
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub features: Option<GroupMask>,
    pub latent: Option<GroupMask>,
    pub model: ModelKind,
    pub summary: MetricSummary,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    /// Omitted unless requested, so that tables stay byte-reproducible.
    pub timestamp: Option<String>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub metadata: TableMetadata,
}

/// Metadata every table carries about conventions that are choices rather
/// than measurements.
pub fn standard_notes() -> Vec<String> {
    vec![
        "precision/recall/f1 are macro averages over the classes present in the test labels".into(),
        "mean and population std over one run per seed".into(),
        "latent columns are appended without re-normalization".into(),
    ]
}

impl ResultTable {
    pub fn new(cfg: &ExperimentConfig) -> ResultTable {
        ResultTable {
            rows: Vec::new(),
            metadata: TableMetadata {
                config: serde_json::to_value(cfg).expect("config serializes"),
                seeds: cfg.seeds.clone(),
                timestamp: None,
                notes: standard_notes(),
            },
        }
    }
}

/// Evaluates every row of the `mode` grid with one shared split and
/// normalizer.
pub fn ablation_grid(
    table: &FeatureTable,
    mode: AblationMode,
    model: ModelKind,
    cfg: &ExperimentConfig,
) -> Result<ResultTable> {
    let mut runner = ExperimentRunner::new(table, cfg.clone())?;
    let mut out = ResultTable::new(cfg);
    for (features, latent) in grid_rows(mode) {
        let result = runner.run(features, latent, model)?;
        out.rows.push(ResultRow {
            features,
            latent,
            model,
            summary: result.summary,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl FromStr for TableFormat {
    type Err = WorkrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            _ => Err(WorkrError::InvalidConfig(format!(
                "unknown format `{s}` (expected markdown or csv)"
            ))),
        }
    }
}

const METRIC_NAMES: [&str; 4] = ["f1", "precision", "recall", "accuracy"];

fn mask_letters(m: Option<GroupMask>) -> String {
    m.map_or_else(|| "none".to_string(), |m| m.letters())
}

fn mask_label(m: Option<GroupMask>) -> String {
    m.map_or_else(|| "-".to_string(), |m| m.table_label())
}

/// `0.9193 ± 0.003`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.4} ± {std:.3}")
}

fn metadata_lines(meta: &TableMetadata) -> Vec<String> {
    let mut lines = vec![
        format!(
            "seeds: {}",
            meta.seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(",")
        ),
        format!("config: {}", meta.config),
    ];
    if let Some(ts) = &meta.timestamp {
        lines.push(format!("timestamp: {ts}"));
    }
    lines.extend(meta.notes.iter().cloned());
    lines
}

/// Renders a table; means at 4 decimals, standard deviations at 3. The
/// metadata follows as comment lines.
pub fn emit_table(t: &ResultTable, format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            out.push_str(
                "| Features | Latent F. | Model | F1 score | Precision | Recall | Accuracy |\n",
            );
            out.push_str("|---|---|---|---|---|---|---|\n");
            for r in &t.rows {
                let mean = r.summary.mean.to_array();
                let std = r.summary.std.to_array();
                let cells: Vec<String> = (0..4).map(|j| format_mean_std(mean[j], std[j])).collect();
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    mask_label(r.features),
                    mask_label(r.latent),
                    r.model.as_str(),
                    cells.join(" | ")
                );
            }
            if !t.rows.is_empty() {
                out.push('\n');
                for line in metadata_lines(&t.metadata) {
                    let _ = writeln!(out, "<!-- {} -->", line.replace("--", "- -"));
                }
            }
        }
        TableFormat::Csv => {
            out.push_str("features,latent,model");
            for m in METRIC_NAMES {
                let _ = write!(out, ",{m}_mean,{m}_std");
            }
            out.push('\n');
            for r in &t.rows {
                let mean = r.summary.mean.to_array();
                let std = r.summary.std.to_array();
                let _ = write!(
                    out,
                    "{},{},{}",
                    mask_letters(r.features),
                    mask_letters(r.latent),
                    r.model.as_str()
                );
                for j in 0..4 {
                    let _ = write!(out, ",{:.4},{:.3}", mean[j], std[j]);
                }
                out.push('\n');
            }
            if !t.rows.is_empty() {
                for line in metadata_lines(&t.metadata) {
                    let _ = writeln!(out, "# {}", line.replace('\n', " "));
                }
            }
        }
    }
    out
}

/// One data row of a CSV table, as printed.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedRow {
    pub features: Option<GroupMask>,
    pub latent: Option<GroupMask>,
    pub model: ModelKind,
    pub mean: Scores,
    pub std: Scores,
}

fn parse_mask_cell(s: &str) -> Result<Option<GroupMask>> {
    if s == "none" {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

/// Reads back the rows of a CSV table, skipping `#` comment lines.
pub fn parse_table_csv(text: &str) -> Result<Vec<ParsedRow>> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |reason: String| WorkrError::MalformedLine {
            line: i + 2,
            reason,
        };
        if rec.len() != 11 {
            return Err(bad(format!("expected 11 fields, got {}", rec.len())));
        }
        let num = |j: usize| {
            rec[j]
                .parse::<f64>()
                .map_err(|e| bad(format!("field {j}: {e}")))
        };
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for j in 0..4 {
            mean[j] = num(3 + 2 * j)?;
            std[j] = num(4 + 2 * j)?;
        }
        rows.push(ParsedRow {
            features: parse_mask_cell(&rec[0])?,
            latent: parse_mask_cell(&rec[1])?,
            model: rec[2].parse()?,
            mean: Scores::from_array(mean),
            std: Scores::from_array(std),
        });
    }
    Ok(rows)
}
