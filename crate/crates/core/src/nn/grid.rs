use crate::eval::{confusion_matrix, macro_f1, prepare_windows, EvalError, Learner, WindowClassifier};
use crate::stream::LabeledStream;

pub const DEFAULT_WINDOW_CANDIDATES: [usize; 8] = [50, 60, 70, 80, 90, 100, 110, 120];

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: usize,
    /// `(window size, validation macro F1)` in ascending window order.
    pub scores: Vec<(usize, f64)>,
}

/// Highest score wins; equal scores go to the smaller window.
pub fn select_best(scores: &[(usize, f64)]) -> Option<usize> {
    let mut sorted = scores.to_vec();
    sorted.sort_by_key(|&(w, _)| w);
    sorted.into_iter().fold(None, |best: Option<(usize, f64)>, (w, s)| match best {
        Some((_, bs)) if s <= bs => best,
        _ => Some((w, s)),
    })
    .map(|(w, _)| w)
}

/// Scores each candidate window by training on every session but the last
/// and computing macro F1 on the last one.
pub fn grid_search_window<L: Learner>(
    learner: &L,
    sessions: &[&LabeledStream],
    candidates: &[usize],
    train_step: usize,
    val_step: usize,
) -> Result<GridResult, EvalError> {
    if sessions.len() < 2 {
        return Err(EvalError::InsufficientSessions { found: sessions.len() });
    }
    if candidates.is_empty() {
        return Err(EvalError::NoCandidates);
    }
    let mut ordered = candidates.to_vec();
    ordered.sort_unstable();
    ordered.dedup();
    let (val, train) = sessions.split_last().expect("at least two sessions");
    let mut scores = Vec::with_capacity(ordered.len());
    for w in ordered {
        let train_windows = prepare_windows(train.iter().copied(), w, train_step)?;
        let val_windows = prepare_windows([*val], w, val_step)?;
        let pred = learner.fit(&train_windows)?.predict(&val_windows)?;
        scores.push((w, macro_f1(&confusion_matrix(&val_windows.labels, &pred)?)?));
    }
    let best = select_best(&scores).expect("non-empty scores");
    Ok(GridResult { best, scores })
}
