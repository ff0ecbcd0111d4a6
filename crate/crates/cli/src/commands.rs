//! `simulate`, `train` and `evaluate`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use handface_core::eval::{
    leave_one_session_out, prepare_windows, summarize, CnnLearner, EvalReport, Learner, OracleLearner, SessionStream,
    Summary,
};
use handface_core::nn::{save_checkpoint, train, Checkpoint, TrainReport};
use handface_core::session::{read_session, write_session, Provenance, SessionRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io { path: path.to_path_buf(), msg: e.to_string() }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

pub fn session_file_name(subject: u32, session: u32) -> String {
    format!("subject{subject:02}_session{session:02}.jsonl")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub subject: u32,
    pub session: u32,
    pub frames: usize,
    pub sha256: String,
    pub profile_seed: u64,
    pub script_seed: u64,
    pub signal_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub run_config: RunConfig,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `subjects × sessions` session files and a manifest into `out`.
pub fn simulate(config: &RunConfig, out: &Path) -> Result<Manifest, CliError> {
    let cfg = config.clone().resolved();
    create_dir(out)?;
    let pairs: Vec<(u32, u32)> =
        (1..=cfg.corpus.subjects).flat_map(|s| (1..=cfg.corpus.sessions).map(move |k| (s, k))).collect();
    let profiles = (1..=cfg.corpus.subjects).map(|s| cfg.corpus.subject(s)).collect::<Result<Vec<_>, _>>()?;
    let run_config = cfg.to_json();
    let files = pairs
        .par_iter()
        .map(|&(subject, session)| {
            let profile = &profiles[subject as usize - 1];
            let stream = cfg.corpus.session(profile, session)?;
            let (script_seed, signal_seed) = cfg.corpus.session_seeds(subject, session);
            let mut record = SessionRecord::from_stream(&stream, subject, session, Provenance::Simulated);
            record.metadata = serde_json::json!({
                "run_config": run_config,
                "seed": cfg.seed,
                "profile_seed": cfg.corpus.profile_seed(subject),
                "script_seed": script_seed,
                "signal_seed": signal_seed,
                "profile": profile,
            });
            let mut bytes = Vec::new();
            write_session(&record, &mut bytes).expect("writing to memory");
            let file = session_file_name(subject, session);
            write_file(&out.join(&file), &bytes)?;
            Ok(ManifestEntry {
                file,
                subject,
                session,
                frames: record.frames.len(),
                sha256: sha256_hex(&bytes),
                profile_seed: cfg.corpus.profile_seed(subject),
                script_seed,
                signal_seed,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = Manifest { seed: cfg.seed, run_config: cfg, files };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub file: String,
    pub sha256: String,
}

pub struct LoadedSession {
    pub record: SessionRecord,
    pub input: InputFile,
}

pub fn load_inputs(paths: &[PathBuf]) -> Result<Vec<LoadedSession>, CliError> {
    if paths.is_empty() {
        return Err(CliError::NoSessions);
    }
    paths
        .iter()
        .map(|path| {
            let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
            let record = read_session(bytes.as_slice(), path)?;
            let file = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
            Ok(LoadedSession { record, input: InputFile { file, sha256: sha256_hex(&bytes) } })
        })
        .collect()
}

/// Expands directories into their `*.jsonl` files (sorted); files pass through.
pub fn expand_session_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| io_err(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub run_config: RunConfig,
    pub inputs: Vec<InputFile>,
    pub window_size: usize,
    pub train_windows: usize,
    pub epochs: usize,
    pub seed: u64,
    pub class_weights: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

/// Windows, normalizes and trains on all given sessions; writes the
/// checkpoint and a training report into `out`.
pub fn train_command(config: &RunConfig, paths: &[PathBuf], out: &Path) -> Result<TrainReport, CliError> {
    let cfg = config.clone().resolved();
    let loaded = load_inputs(paths)?;
    let streams: Vec<_> = loaded.iter().map(|l| l.record.to_stream()).collect();
    let windows = prepare_windows(&streams, cfg.model.window_size, cfg.train_step)?;
    let report = train(&cfg.model, &windows, &cfg.train)?;
    let inputs: Vec<InputFile> = loaded.into_iter().map(|l| l.input).collect();

    create_dir(out)?;
    let metadata = serde_json::json!({ "run_config": cfg.to_json(), "inputs": inputs });
    save_checkpoint(&Checkpoint::new(report.model.clone(), cfg.train.seed, metadata), &out.join(CHECKPOINT_FILE))?;
    let summary = TrainSummary {
        window_size: cfg.model.window_size,
        train_windows: windows.len(),
        epochs: report.epochs,
        seed: report.seed,
        class_weights: report.class_weights.clone(),
        epoch_losses: report.epoch_losses.clone(),
        run_config: cfg,
        inputs,
    };
    write_json(&out.join(TRAIN_REPORT_FILE), &summary)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectReportFile {
    pub run_config: RunConfig,
    pub inputs: Vec<InputFile>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub run_config: RunConfig,
    pub inputs: Vec<InputFile>,
    pub summary: Summary,
}

pub const SUMMARY_FILE: &str = "summary.json";

pub fn subject_report_stem(subject: u32) -> String {
    format!("subject{subject:02}_report")
}

fn run_subjects<L: Learner>(
    subjects: &BTreeMap<u32, Vec<SessionStream>>,
    cfg: &RunConfig,
    learner: &L,
) -> Result<Vec<EvalReport>, CliError> {
    subjects
        .par_iter()
        .map(|(&id, sessions)| Ok(leave_one_session_out(sessions, &cfg.evaluation, learner)?.with_subject(id)))
        .collect()
}

/// Leave-one-session-out per subject, then the cross-subject summary.
pub fn evaluate_command(config: &RunConfig, paths: &[PathBuf], out: &Path) -> Result<Summary, CliError> {
    let cfg = config.clone().resolved();
    let loaded = load_inputs(paths)?;
    let mut subjects: BTreeMap<u32, Vec<SessionStream>> = BTreeMap::new();
    for l in &loaded {
        subjects
            .entry(l.record.subject_id)
            .or_default()
            .push(SessionStream { session_id: l.record.session_id, stream: l.record.to_stream() });
    }
    let reports = if cfg.oracle {
        run_subjects(&subjects, &cfg, &OracleLearner)?
    } else {
        run_subjects(&subjects, &cfg, &CnnLearner { model: cfg.model.clone(), train: cfg.train.clone() })?
    };
    let summary = summarize(&reports);

    create_dir(out)?;
    for report in &reports {
        let id = report.subject_id.expect("subject reports carry their id");
        let inputs: Vec<InputFile> =
            loaded.iter().filter(|l| l.record.subject_id == id).map(|l| l.input.clone()).collect();
        let stem = subject_report_stem(id);
        write_json(
            &out.join(format!("{stem}.json")),
            &SubjectReportFile { run_config: cfg.clone(), inputs, report: report.clone() },
        )?;
        write_file(&out.join(format!("{stem}.txt")), report.to_text().as_bytes())?;
        write_file(&out.join(format!("subject{id:02}_confusion.csv")), report.confusion_csv().as_bytes())?;
    }
    let inputs: Vec<InputFile> = loaded.iter().map(|l| l.input.clone()).collect();
    write_json(&out.join(SUMMARY_FILE), &SummaryFile { run_config: cfg, inputs, summary: summary.clone() })?;
    write_file(&out.join("summary.txt"), summary.to_text().as_bytes())?;
    write_file(&out.join("summary_confusion.csv"), summary.confusion_csv().as_bytes())?;
    Ok(summary)
}
