//! The four runnable workers of the live system and their orchestrator.
//!
//! Frames flow input → model → controller → view, each hop pulled by the
//! downstream side with the ready/done handshake. Shutdown propagates in
//! both directions: a finished responder replies "done", a finished
//! requester sends "done", and a vanished peer counts as "done", so any
//! single worker leaving first drains the whole chain.

mod source;
mod workers;

pub use source::{input_run, input_run_on, input_run_stream, FrameSource, InputSummary};
pub use workers::{
    controller_run, controller_run_on, model_run, model_run_on, view_run, ControllerSummary,
    Extraction, ImageTransform, LandmarkExtractor, ModelSummary, ViewSummary,
};

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use thiserror::Error;

use crate::data::DataError;
use crate::features::FeatureKind;
use crate::nn::{ModelIoError, NnError};
use crate::wire::{Listener, Payload, WireError};

/// Classes carried by emotion frames, in wire order.
pub const EMOTION_CLASS_NAMES: [&str; 2] = ["happiness", "neutral"];

/// First port of the default three-endpoint block.
pub const DEFAULT_PORT_BASE: u16 = 7701;

/// Errors raised by pipeline workers and the orchestrator.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read source {path}: {source}")]
    SourceRead { path: PathBuf, source: DataError },
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
    #[error("image frame arrived with no landmark extractor configured")]
    NoExtractorConfigured,
    #[error("unsupported model for the live pipeline: {0}")]
    UnsupportedModel(String),
    #[error("{}", describe_failures(.0))]
    Workers(Vec<WorkerFailure>),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One failed worker inside an orchestrated run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerFailure {
    pub worker: &'static str,
    pub message: String,
}

fn describe_failures(failures: &[WorkerFailure]) -> String {
    let parts: Vec<String> = failures
        .iter()
        .map(|f| format!("{}: {}", f.worker, f.message))
        .collect();
    format!("workers failed: {}", parts.join("; "))
}

/// A classified frame: id, per-class probabilities, and the argmax label.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionResult {
    pub frame_id: u32,
    pub probabilities: Vec<f32>,
    pub label: String,
}

impl EmotionResult {
    /// Reads an emotion payload; `None` for any other payload kind.
    pub fn from_payload(payload: &Payload) -> Option<Self> {
        let Payload::Emotion {
            frame_id,
            prob_happiness,
            prob_neutral,
            label_index,
        } = payload
        else {
            return None;
        };
        Some(Self {
            frame_id: *frame_id,
            probabilities: vec![*prob_happiness, *prob_neutral],
            label: EMOTION_CLASS_NAMES[*label_index as usize].to_string(),
        })
    }

    /// The view's line format: tab-separated id, label, and probabilities
    /// to four decimal places.
    pub fn view_line(&self) -> String {
        let mut line = format!("{}\t{}", self.frame_id, self.label);
        for p in &self.probabilities {
            let _ = write!(line, "\t{p:.4}");
        }
        line
    }
}

/// Parses one view output line; `None` if it is not in the view format.
pub fn parse_view_line(line: &str) -> Option<EmotionResult> {
    let mut parts = line.split('\t');
    let frame_id: u32 = parts.next()?.parse().ok()?;
    let label = parts.next()?.to_string();
    if !EMOTION_CLASS_NAMES.contains(&label.as_str()) {
        return None;
    }
    let mut probabilities = Vec::new();
    for part in parts {
        probabilities.push(part.parse::<f32>().ok()?);
    }
    if probabilities.len() != EMOTION_CLASS_NAMES.len() {
        return None;
    }
    Some(EmotionResult {
        frame_id,
        probabilities,
        label,
    })
}

/// TCP endpoints of the three serving workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoints {
    pub input: String,
    pub model: String,
    pub controller: String,
}

impl Endpoints {
    /// Three consecutive loopback ports starting at `port_base`.
    pub fn from_base(port_base: u16) -> Self {
        assert!(port_base <= u16::MAX - 2, "port base too high");
        Self {
            input: format!("127.0.0.1:{port_base}"),
            model: format!("127.0.0.1:{}", port_base + 1),
            controller: format!("127.0.0.1:{}", port_base + 2),
        }
    }

    /// OS-assigned loopback ports; collision-free for concurrent runs.
    pub fn ephemeral() -> Self {
        Self {
            input: "127.0.0.1:0".to_string(),
            model: "127.0.0.1:0".to_string(),
            controller: "127.0.0.1:0".to_string(),
        }
    }
}

impl Default for Endpoints {
    fn default() -> Self {
        Self::from_base(DEFAULT_PORT_BASE)
    }
}

/// Everything an orchestrated run needs.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub source: FrameSource,
    pub model_path: PathBuf,
    pub feature_kind: FeatureKind,
    pub endpoints: Endpoints,
}

/// Counts gathered from all four workers after a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub frames_served: usize,
    pub frames_forwarded: usize,
    pub frames_classified: usize,
    pub noface_skips: usize,
    pub hook_skips: usize,
    pub view_lines: u64,
    /// Controller ingress-to-egress time per classified frame.
    pub latencies_ms: Vec<f64>,
}

/// Runs all four workers to completion and aggregates their summaries.
///
/// The workers run as isolated threads communicating only over the wire
/// protocol; view lines stream to `view_out` as frames arrive. Endpoints
/// are bound up front, so port 0 requests OS-assigned ports. The run
/// succeeds only if every worker finishes cleanly.
pub fn orchestrate(
    config: &PipelineConfig,
    view_out: Box<dyn Write + Send>,
) -> Result<PipelineReport, PipelineError> {
    let input_listener = Listener::bind(&config.endpoints.input)?;
    let model_listener = Listener::bind(&config.endpoints.model)?;
    let controller_listener = Listener::bind(&config.endpoints.controller)?;
    let input_endpoint = input_listener.local_endpoint();
    let model_endpoint = model_listener.local_endpoint();
    let controller_endpoint = controller_listener.local_endpoint();

    let source = config.source.clone();
    let input = thread::spawn(move || input_run_on(input_listener, &source));
    let model = thread::spawn(move || model_run_on(model_listener, &input_endpoint, None));
    let model_path = config.model_path.clone();
    let feature_kind = config.feature_kind;
    let controller = thread::spawn(move || {
        controller_run_on(
            controller_listener,
            &model_endpoint,
            &model_path,
            feature_kind,
            None,
        )
    });
    let view = thread::spawn(move || {
        let mut out = view_out;
        view_run(&controller_endpoint, &mut out)
    });

    let mut failures = Vec::new();
    let input_summary = join_worker("input", input, &mut failures);
    let model_summary = join_worker("model", model, &mut failures);
    let controller_summary = join_worker("controller", controller, &mut failures);
    let view_summary = join_worker("view", view, &mut failures);
    if !failures.is_empty() {
        return Err(PipelineError::Workers(failures));
    }
    let (input_summary, model_summary, controller_summary, view_summary) = (
        input_summary.expect("no failures"),
        model_summary.expect("no failures"),
        controller_summary.expect("no failures"),
        view_summary.expect("no failures"),
    );
    Ok(PipelineReport {
        frames_served: input_summary.frames_served,
        frames_forwarded: model_summary.frames_forwarded,
        frames_classified: controller_summary.frames_classified,
        noface_skips: controller_summary.noface_skips,
        hook_skips: model_summary.hook_skips,
        view_lines: view_summary.lines,
        latencies_ms: controller_summary.latencies_ms,
    })
}

fn join_worker<T>(
    worker: &'static str,
    handle: JoinHandle<Result<T, PipelineError>>,
    failures: &mut Vec<WorkerFailure>,
) -> Option<T> {
    match handle.join() {
        Ok(Ok(summary)) => Some(summary),
        Ok(Err(e)) => {
            failures.push(WorkerFailure {
                worker,
                message: e.to_string(),
            });
            None
        }
        Err(_) => {
            failures.push(WorkerFailure {
                worker,
                message: "worker panicked".to_string(),
            });
            None
        }
    }
}

/// [`orchestrate`] with the view buffered; returns the report and the
/// complete view output.
pub fn orchestrate_captured(
    config: &PipelineConfig,
) -> Result<(PipelineReport, String), PipelineError> {
    let buffer = Arc::new(Mutex::new(Vec::new()));
    let report = orchestrate(config, Box::new(SharedWriter(buffer.clone())))?;
    let bytes = buffer.lock().expect("view buffer lock").clone();
    Ok((report, String::from_utf8_lossy(&bytes).into_owned()))
}

struct SharedWriter(Arc<Mutex<Vec<u8>>>);

impl Write for SharedWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().expect("view buffer lock").extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}
