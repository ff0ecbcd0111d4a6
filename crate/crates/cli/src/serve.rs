//! WebSocket endpoint streaming a live-simulated or replayed session.
//!
//! Every connected client receives one `sample` message per frame. One client
//! at a time may drive a recording with `start_session`, `label_start`,
//! `label_end` and `stop_session`; the role goes to the first client that
//! sends a control message and is released when it disconnects. Stopping a
//! session writes it as a session file with `live-console` provenance.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use handface_core::gesture::GestureClass;
use handface_core::protocol::SampleFrame;
use handface_core::session::{load_session, save_session, Provenance, SessionRecord, SCHEMA_VERSION};
use handface_core::stream::LabelInterval;
use serde::{Deserialize, Serialize};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, watch};
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;

use crate::config::{RunConfig, SourceConfig, StartTrigger};
use crate::error::CliError;

/// Messages a client may send.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    StartSession { subject: u32 },
    LabelStart { class: GestureClass },
    LabelEnd,
    StopSession,
}

/// Messages the server sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Sample { t: u32, mag: f32, phase: f32 },
    Ack(Ack),
    Error { msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "for", rename_all = "snake_case")]
pub enum Ack {
    StartSession { subject: u32, session: u32, t: u32 },
    LabelStart { class: GestureClass, t: u32 },
    LabelEnd { class: GestureClass, start_ms: u32, end_ms: u32 },
    StopSession { path: String, frames: usize, labels: usize },
    EndOfStream { frames: usize },
}

impl ServerMessage {
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

/// Frames to stream plus where they came from.
#[derive(Debug, Clone)]
pub struct Source {
    pub frames: Vec<SampleFrame>,
    pub sample_rate: f64,
    pub description: serde_json::Value,
}

impl Source {
    pub fn from_config(cfg: &RunConfig) -> Result<Self, CliError> {
        let cfg = cfg.clone().resolved();
        match &cfg.serve.source {
            SourceConfig::Live { subject, session } => {
                let profile = cfg.corpus.subject(*subject)?;
                let stream = cfg.corpus.session(&profile, *session)?;
                let record = SessionRecord::from_stream(&stream, *subject, *session, Provenance::Simulated);
                Ok(Self {
                    frames: record.frames,
                    sample_rate: record.sample_rate,
                    description: serde_json::json!({"kind": "live", "subject": subject, "session": session, "seed": cfg.seed}),
                })
            }
            SourceConfig::Replay { path } => Self::replay(path),
        }
    }

    pub fn replay(path: &Path) -> Result<Self, CliError> {
        let record = load_session(path)?;
        Ok(Self {
            frames: record.frames,
            sample_rate: record.sample_rate,
            description: serde_json::json!({"kind": "replay", "file": path.file_name().map(|n| n.to_string_lossy().into_owned())}),
        })
    }

    fn period_ms(&self) -> f64 {
        1000.0 / self.sample_rate
    }
}

struct Recording {
    subject: u32,
    session: u32,
    frames: Vec<SampleFrame>,
    labels: Vec<LabelInterval>,
    open: Option<(GestureClass, u32)>,
}

struct State {
    controller: Option<u64>,
    recording: Option<Recording>,
    /// Stream time of the next frame to be sent; label marks land here.
    next_t: u32,
    sessions_started: u32,
    saved: Vec<PathBuf>,
}

struct Shared {
    state: Mutex<State>,
    samples: broadcast::Sender<String>,
    start: watch::Sender<bool>,
    out_dir: PathBuf,
    sample_rate: f64,
    metadata: serde_json::Value,
}

impl Shared {
    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    stop: watch::Sender<bool>,
    accept: JoinHandle<()>,
    playback: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.addr)
    }

    /// Session files written so far.
    pub fn recordings(&self) -> Vec<PathBuf> {
        self.shared.lock().saved.clone()
    }

    /// Resolves once every frame has been sent.
    pub async fn playback_finished(&mut self) {
        let _ = (&mut self.playback).await;
    }

    pub async fn shutdown(self) {
        let _ = self.stop.send(true);
        self.playback.abort();
        let _ = self.accept.await;
    }
}

const SAMPLE_BUFFER: usize = 1 << 14;

/// Binds and starts streaming. Port 0 picks a free port.
pub async fn start_server(cfg: &RunConfig, source: Source, out_dir: &Path) -> Result<ServerHandle, CliError> {
    let serve = &cfg.serve;
    if !(serve.speed.is_finite() && serve.speed > 0.0) {
        return Err(CliError::Config(format!("serve.speed must be positive, got {}", serve.speed)));
    }
    if !(source.sample_rate.is_finite() && source.sample_rate > 0.0) {
        return Err(CliError::Config(format!("source sample rate must be positive, got {}", source.sample_rate)));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io { path: out_dir.to_path_buf(), msg: e.to_string() })?;
    let listener = TcpListener::bind((serve.host.as_str(), serve.port)).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            CliError::PortInUse(serve.port)
        } else {
            CliError::Io { path: PathBuf::from(format!("{}:{}", serve.host, serve.port)), msg: e.to_string() }
        }
    })?;
    let addr = listener.local_addr().map_err(|e| CliError::Io { path: PathBuf::from("listener"), msg: e.to_string() })?;

    let (samples, _) = broadcast::channel(SAMPLE_BUFFER);
    let (start, start_rx) = watch::channel(false);
    let shared = Arc::new(Shared {
        state: Mutex::new(State {
            controller: None,
            recording: None,
            next_t: source.frames.first().map_or(0, |f| f.timestamp_ms),
            sessions_started: 0,
            saved: Vec::new(),
        }),
        samples,
        start,
        out_dir: out_dir.to_path_buf(),
        sample_rate: source.sample_rate,
        metadata: serde_json::json!({"run_config": cfg.to_json(), "source": source.description}),
    });
    let playback = tokio::spawn(playback(Arc::clone(&shared), source, serve.speed, start_rx));
    let (stop, stop_rx) = watch::channel(false);
    let accept = tokio::spawn(accept_loop(listener, Arc::clone(&shared), serve.start, stop_rx));
    Ok(ServerHandle { addr, shared, stop, accept, playback })
}

/// Runs until interrupted (Ctrl-C).
pub fn serve_blocking(cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Io { path: PathBuf::from("runtime"), msg: e.to_string() })?;
    runtime.block_on(async {
        let source = Source::from_config(cfg)?;
        let handle = start_server(cfg, source, out_dir).await?;
        eprintln!("{}", serde_json::json!({"listening": handle.url()}));
        let _ = tokio::signal::ctrl_c().await;
        handle.shutdown().await;
        Ok(())
    })
}

async fn playback(shared: Arc<Shared>, source: Source, speed: f64, mut start: watch::Receiver<bool>) {
    if start.wait_for(|s| *s).await.is_err() {
        return;
    }
    let period = Duration::from_secs_f64(source.period_ms() / 1000.0 / speed);
    let t0 = tokio::time::Instant::now();
    let step_ms = source.period_ms().round() as u32;
    for (k, frame) in source.frames.iter().enumerate() {
        tokio::time::sleep_until(t0 + period.mul_f64(k as f64)).await;
        {
            let mut st = shared.lock();
            if let Some(rec) = st.recording.as_mut() {
                rec.frames.push(*frame);
            }
            st.next_t = source.frames.get(k + 1).map_or(frame.timestamp_ms + step_ms, |f| f.timestamp_ms);
        }
        let msg = ServerMessage::Sample { t: frame.timestamp_ms, mag: frame.magnitude, phase: frame.phase };
        let _ = shared.samples.send(msg.to_text());
    }
    let _ = shared.samples.send(ServerMessage::Ack(Ack::EndOfStream { frames: source.frames.len() }).to_text());
}

async fn accept_loop(listener: TcpListener, shared: Arc<Shared>, trigger: StartTrigger, mut stop: watch::Receiver<bool>) {
    static NEXT_CLIENT: AtomicU64 = AtomicU64::new(1);
    let mut clients = Vec::new();
    loop {
        tokio::select! {
            _ = stop.wait_for(|s| *s) => break,
            accepted = listener.accept() => {
                let Ok((tcp, _)) = accepted else { continue };
                let id = NEXT_CLIENT.fetch_add(1, Ordering::Relaxed);
                clients.push(tokio::spawn(client(tcp, id, Arc::clone(&shared), trigger)));
            }
        }
    }
    for c in clients {
        c.abort();
    }
}

async fn client(tcp: TcpStream, id: u64, shared: Arc<Shared>, trigger: StartTrigger) {
    let Ok(ws) = tokio_tungstenite::accept_async(tcp).await else { return };
    let (mut sink, mut incoming) = ws.split();
    let mut samples = shared.samples.subscribe();
    if trigger == StartTrigger::FirstClient {
        shared.start.send_replace(true);
    }
    let (reply_tx, mut replies) = mpsc::unbounded_channel::<String>();

    let writer = tokio::spawn(async move {
        loop {
            let text = tokio::select! {
                biased;
                r = replies.recv() => match r {
                    Some(t) => t,
                    None => break,
                },
                s = samples.recv() => match s {
                    Ok(t) => t,
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        ServerMessage::Error { msg: format!("subscriber lagged, {n} messages dropped") }.to_text()
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(Message::Text(text)).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    while let Some(msg) = incoming.next().await {
        let reply = match msg {
            Ok(Message::Text(text)) => handle_text(&shared, id, &text),
            Ok(Message::Binary(_)) => ServerMessage::Error { msg: "binary messages are not supported".into() },
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        if reply_tx.send(reply.to_text()).is_err() {
            break;
        }
    }
    {
        let mut st = shared.lock();
        if st.controller == Some(id) {
            st.controller = None;
        }
    }
    drop(reply_tx);
    let _ = writer.await;
}

fn error(msg: impl Into<String>) -> ServerMessage {
    ServerMessage::Error { msg: msg.into() }
}

fn handle_text(shared: &Shared, id: u64, text: &str) -> ServerMessage {
    let msg: ClientMessage = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(e) => return error(format!("malformed message: {e}")),
    };
    let mut st = shared.lock();
    match st.controller {
        Some(holder) if holder != id => return error("session control is held by another client"),
        _ => st.controller = Some(id),
    }
    let now = st.next_t;
    match msg {
        ClientMessage::StartSession { subject } => {
            if st.recording.is_some() {
                return error("a session is already running");
            }
            st.sessions_started += 1;
            let session = st.sessions_started;
            st.recording = Some(Recording { subject, session, frames: Vec::new(), labels: Vec::new(), open: None });
            drop(st);
            shared.start.send_replace(true);
            ServerMessage::Ack(Ack::StartSession { subject, session, t: now })
        }
        ClientMessage::LabelStart { class } => {
            let Some(rec) = st.recording.as_mut() else { return error("no session is running") };
            if let Some((open, _)) = rec.open {
                return error(format!("label {open} is still open"));
            }
            rec.open = Some((class, now));
            ServerMessage::Ack(Ack::LabelStart { class, t: now })
        }
        ClientMessage::LabelEnd => {
            let Some(rec) = st.recording.as_mut() else { return error("no session is running") };
            let Some((class, start_ms)) = rec.open.take() else { return error("no label is open") };
            rec.labels.push(LabelInterval { class, start_ms, end_ms: now });
            ServerMessage::Ack(Ack::LabelEnd { class, start_ms, end_ms: now })
        }
        ClientMessage::StopSession => {
            let Some(mut rec) = st.recording.take() else { return error("no session is running") };
            if let Some((class, start_ms)) = rec.open.take() {
                rec.labels.push(LabelInterval { class, start_ms, end_ms: now });
            }
            let record = SessionRecord {
                schema_version: SCHEMA_VERSION,
                subject_id: rec.subject,
                session_id: rec.session,
                sample_rate: shared.sample_rate,
                frames: rec.frames,
                labels: rec.labels,
                provenance: Provenance::LiveConsole,
                metadata: shared.metadata.clone(),
            };
            let path = shared.out_dir.join(format!("live_subject{:02}_session{:02}.jsonl", rec.subject, rec.session));
            if let Err(e) = save_session(&record, &path) {
                return error(e.to_string());
            }
            st.saved.push(path.clone());
            ServerMessage::Ack(Ack::StopSession {
                path: path.display().to_string(),
                frames: record.frames.len(),
                labels: record.labels.len(),
            })
        }
    }
}
