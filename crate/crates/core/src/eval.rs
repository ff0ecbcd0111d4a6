//! Confusion matrices, macro F1 and per-subject leave-one-session-out
//! evaluation.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gesture::GestureClass;
use crate::nn::grid::grid_search_window;
use crate::nn::{train, Model, ModelConfig, NnError, TrainConfig};
use crate::preprocess::{sliding_windows, PreprocessError, WindowBatch};
use crate::stream::LabeledStream;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("need at least 2 sessions, got {found}")]
    InsufficientSessions { found: usize },
    #[error("window-size search needs at least one candidate")]
    NoCandidates,
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Square count matrix, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { counts: vec![vec![0; classes]; classes] }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        assert!(counts.iter().all(|r| r.len() == counts.len()), "confusion matrix must be square");
        Self { counts }
    }

    /// Counts indexed by class code.
    pub fn from_indices(classes: usize, truth: &[usize], pred: &[usize]) -> Result<Self, EvalError> {
        if truth.len() != pred.len() {
            return Err(EvalError::LengthMismatch { truth: truth.len(), pred: pred.len() });
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(pred) {
            cm.counts[t][p] += 1;
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    /// Element-wise sum.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes(), other.classes(), "merging matrices of different size");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// Reorders classes: entry `(i, j)` of the result is `(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.classes();
        let mut out = Self::new(n);
        for i in 0..n {
            for j in 0..n {
                out.counts[i][j] = self.counts[perm[i]][perm[j]];
            }
        }
        out
    }

    /// Unordered class pair `(i, j)`, `i < j`, with the largest combined
    /// confusion `cm[i][j] + cm[j][i]`. Ties go to the first pair in row
    /// order. `None` if there are no off-diagonal counts.
    pub fn top_confused_pair(&self) -> Option<(usize, usize, u64)> {
        let n = self.classes();
        let mut best: Option<(usize, usize, u64)> = None;
        for i in 0..n {
            for j in i + 1..n {
                let mass = self.counts[i][j] + self.counts[j][i];
                if mass > 0 && best.is_none_or(|(_, _, m)| mass > m) {
                    best = Some((i, j, mass));
                }
            }
        }
        best
    }

    /// CSV grid with a header row of predicted class names and one row per
    /// true class.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut out = String::from("true\\pred");
        for name in names {
            let _ = write!(out, ",{name}");
        }
        out.push('\n');
        for (name, row) in names.iter().zip(&self.counts) {
            out.push_str(name);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion_matrix(truth: &[GestureClass], pred: &[GestureClass]) -> Result<ConfusionMatrix, EvalError> {
    let t: Vec<usize> = truth.iter().map(|g| g.index()).collect();
    let p: Vec<usize> = pred.iter().map(|g| g.index()).collect();
    ConfusionMatrix::from_indices(GestureClass::COUNT, &t, &p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall and F1 per class; every 0/0 is taken as 0.
pub fn per_class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.classes())
        .map(|c| {
            let tp = cm.get(c, c) as f64;
            let precision = ratio(tp, cm.col_sum(c) as f64);
            let recall = ratio(tp, cm.row_sum(c) as f64);
            let f1 = ratio(2.0 * precision * recall, precision + recall);
            ClassMetrics { precision, recall, f1, support: cm.row_sum(c) }
        })
        .collect()
}

/// Unweighted mean of the per-class F1 scores over all classes of the matrix.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let metrics = per_class_metrics(cm);
    Ok(metrics.iter().map(|m| m.f1).sum::<f64>() / metrics.len() as f64)
}

pub trait WindowClassifier {
    fn predict(&self, windows: &WindowBatch) -> Result<Vec<GestureClass>, EvalError>;
}

/// Produces a classifier from a training set of normalized windows.
pub trait Learner: Sync {
    type Classifier: WindowClassifier;
    fn fit(&self, train: &WindowBatch) -> Result<Self::Classifier, EvalError>;
}

/// Predicts the ground-truth label of every window.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleLearner;

pub struct OracleClassifier;

impl WindowClassifier for OracleClassifier {
    fn predict(&self, windows: &WindowBatch) -> Result<Vec<GestureClass>, EvalError> {
        Ok(windows.labels.clone())
    }
}

impl Learner for OracleLearner {
    type Classifier = OracleClassifier;
    fn fit(&self, _train: &WindowBatch) -> Result<OracleClassifier, EvalError> {
        Ok(OracleClassifier)
    }
}

/// Always predicts the same class.
#[derive(Debug, Clone, Copy)]
pub struct ConstantLearner(pub GestureClass);

impl WindowClassifier for ConstantLearner {
    fn predict(&self, windows: &WindowBatch) -> Result<Vec<GestureClass>, EvalError> {
        Ok(vec![self.0; windows.len()])
    }
}

impl Learner for ConstantLearner {
    type Classifier = ConstantLearner;
    fn fit(&self, _train: &WindowBatch) -> Result<ConstantLearner, EvalError> {
        Ok(*self)
    }
}

/// The convolutional classifier trained from a fixed seed. The window size of
/// the model follows the training windows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CnnLearner {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

pub struct CnnClassifier {
    pub model: Model,
    pub epoch_losses: Vec<f64>,
}

impl WindowClassifier for CnnClassifier {
    fn predict(&self, windows: &WindowBatch) -> Result<Vec<GestureClass>, EvalError> {
        Ok(self.model.predict(windows)?)
    }
}

impl Learner for CnnLearner {
    type Classifier = CnnClassifier;
    fn fit(&self, windows: &WindowBatch) -> Result<CnnClassifier, EvalError> {
        let config = self.model.with_window(windows.window_size);
        let report = train(&config, windows, &self.train)?;
        Ok(CnnClassifier { model: report.model, epoch_losses: report.epoch_losses })
    }
}

/// Normalized windows of several streams, concatenated in order.
pub fn prepare_windows<'a>(
    streams: impl IntoIterator<Item = &'a LabeledStream>,
    window: usize,
    step: usize,
) -> Result<WindowBatch, EvalError> {
    let mut out = WindowBatch::empty(window, step);
    for s in streams {
        out.append(&sliding_windows(s, window, step)?.normalized())?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionStream {
    pub session_id: u32,
    pub stream: LabeledStream,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum WindowSelection {
    Fixed(usize),
    /// Grid search per fold over these sizes, validated on the last training
    /// session of the fold.
    Search(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LosoConfig {
    pub window: WindowSelection,
    pub train_step: usize,
    pub test_step: usize,
    pub parallel_folds: bool,
}

impl Default for LosoConfig {
    fn default() -> Self {
        Self { window: WindowSelection::Fixed(80), train_step: 1, test_step: 30, parallel_folds: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub held_out_session: u32,
    pub window_size: usize,
    /// `(window size, validation macro F1)` when the size was searched.
    pub window_scores: Vec<(usize, f64)>,
    pub train_windows: usize,
    pub test_windows: usize,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub subject_id: Option<u32>,
    pub folds: Vec<FoldResult>,
    /// Arithmetic mean of the fold scores.
    pub mean_macro_f1: f64,
    pub joint_confusion: ConfusionMatrix,
    /// Macro F1 of the pooled fold predictions.
    pub joint_macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub selected_windows: Vec<usize>,
}

fn evaluate_fold<L: Learner>(
    sessions: &[SessionStream],
    held_out: usize,
    cfg: &LosoConfig,
    learner: &L,
) -> Result<FoldResult, EvalError> {
    let train_sessions: Vec<&LabeledStream> =
        sessions.iter().enumerate().filter(|(i, _)| *i != held_out).map(|(_, s)| &s.stream).collect();
    let (window_size, window_scores) = match &cfg.window {
        WindowSelection::Fixed(w) => (*w, Vec::new()),
        WindowSelection::Search(candidates) => {
            let grid = grid_search_window(learner, &train_sessions, candidates, cfg.train_step, cfg.test_step)?;
            (grid.best, grid.scores)
        }
    };
    let train = prepare_windows(train_sessions.iter().copied(), window_size, cfg.train_step)?;
    let test = prepare_windows([&sessions[held_out].stream], window_size, cfg.test_step)?;
    let classifier = learner.fit(&train)?;
    let pred = classifier.predict(&test)?;
    let confusion = confusion_matrix(&test.labels, &pred)?;
    Ok(FoldResult {
        held_out_session: sessions[held_out].session_id,
        window_size,
        window_scores,
        train_windows: train.len(),
        test_windows: test.len(),
        macro_f1: macro_f1(&confusion)?,
        confusion,
    })
}

/// Holds out each session once, trains on the rest and scores the held-out
/// session. Sessions are processed in `session_id` order, so the result does
/// not depend on the order they are passed in.
pub fn leave_one_session_out<L: Learner>(
    sessions: &[SessionStream],
    cfg: &LosoConfig,
    learner: &L,
) -> Result<EvalReport, EvalError> {
    if sessions.len() < 2 {
        return Err(EvalError::InsufficientSessions { found: sessions.len() });
    }
    let mut sorted = sessions.to_vec();
    sorted.sort_by_key(|s| s.session_id);
    let folds: Vec<FoldResult> = if cfg.parallel_folds {
        (0..sorted.len())
            .into_par_iter()
            .map(|i| evaluate_fold(&sorted, i, cfg, learner))
            .collect::<Result<_, _>>()?
    } else {
        (0..sorted.len()).map(|i| evaluate_fold(&sorted, i, cfg, learner)).collect::<Result<_, _>>()?
    };
    Ok(assemble_report(None, folds))
}

fn assemble_report(subject_id: Option<u32>, folds: Vec<FoldResult>) -> EvalReport {
    let mut joint = ConfusionMatrix::new(GestureClass::COUNT);
    for f in &folds {
        joint.merge(&f.confusion);
    }
    let mean = folds.iter().map(|f| f.macro_f1).sum::<f64>() / folds.len() as f64;
    EvalReport {
        subject_id,
        mean_macro_f1: mean,
        joint_macro_f1: macro_f1(&joint).unwrap_or(0.0),
        per_class: per_class_metrics(&joint),
        selected_windows: folds.iter().map(|f| f.window_size).collect(),
        joint_confusion: joint,
        folds,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub subject_id: Option<u32>,
    pub mean_macro_f1: f64,
}

/// Cross-subject summary: subjects weighted equally, plus the pooled matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub subjects: Vec<SubjectScore>,
    /// Mean over subjects of each subject's mean fold score.
    pub mean_macro_f1: f64,
    pub joint_confusion: ConfusionMatrix,
    pub joint_macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub top_confused_pair: Option<(GestureClass, GestureClass, u64)>,
}

pub fn summarize(reports: &[EvalReport]) -> Summary {
    let mut joint = ConfusionMatrix::new(GestureClass::COUNT);
    for r in reports {
        joint.merge(&r.joint_confusion);
    }
    let subjects: Vec<SubjectScore> =
        reports.iter().map(|r| SubjectScore { subject_id: r.subject_id, mean_macro_f1: r.mean_macro_f1 }).collect();
    let mean = if subjects.is_empty() {
        0.0
    } else {
        subjects.iter().map(|s| s.mean_macro_f1).sum::<f64>() / subjects.len() as f64
    };
    let class = |i: usize| GestureClass::from_code(i as u8).expect("7-class matrix");
    Summary {
        subjects,
        mean_macro_f1: mean,
        joint_macro_f1: macro_f1(&joint).unwrap_or(0.0),
        per_class: per_class_metrics(&joint),
        top_confused_pair: joint.top_confused_pair().map(|(i, j, m)| (class(i), class(j), m)),
        joint_confusion: joint,
    }
}

pub fn class_names() -> Vec<&'static str> {
    GestureClass::ALL.iter().map(|g| g.name()).collect()
}

impl EvalReport {
    pub fn with_subject(mut self, subject_id: u32) -> Self {
        self.subject_id = Some(subject_id);
        self
    }

    pub fn confusion_csv(&self) -> String {
        self.joint_confusion.to_csv(&class_names())
    }

    /// Human-readable report.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(id) = self.subject_id {
            let _ = writeln!(out, "subject {id}");
        }
        for f in &self.folds {
            let _ = writeln!(
                out,
                "fold held_out={} window={} train_windows={} test_windows={} macro_f1={:.5}",
                f.held_out_session, f.window_size, f.train_windows, f.test_windows, f.macro_f1
            );
        }
        let _ = writeln!(out, "mean_macro_f1={:.5}", self.mean_macro_f1);
        let _ = writeln!(out, "joint_macro_f1={:.5}", self.joint_macro_f1);
        write_class_table(&mut out, &self.per_class);
        out
    }
}

impl Summary {
    pub fn confusion_csv(&self) -> String {
        self.joint_confusion.to_csv(&class_names())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.subjects {
            match s.subject_id {
                Some(id) => writeln!(out, "subject {id} mean_macro_f1={:.5}", s.mean_macro_f1),
                None => writeln!(out, "subject - mean_macro_f1={:.5}", s.mean_macro_f1),
            }
            .expect("writing to a String");
        }
        let _ = writeln!(out, "mean_macro_f1={:.5}", self.mean_macro_f1);
        let _ = writeln!(out, "joint_macro_f1={:.5}", self.joint_macro_f1);
        if let Some((a, b, m)) = self.top_confused_pair {
            let _ = writeln!(out, "top_confused_pair={a}/{b} count={m}");
        }
        write_class_table(&mut out, &self.per_class);
        out
    }
}

fn write_class_table(out: &mut String, metrics: &[ClassMetrics]) {
    let _ = writeln!(out, "class,precision,recall,f1,support");
    for (g, m) in GestureClass::ALL.iter().zip(metrics) {
        let _ = writeln!(out, "{},{:.5},{:.5},{:.5},{}", g.name(), m.precision, m.recall, m.f1, m.support);
    }
}
