//! The model, controller, and view workers.
//!
//! Each middle worker is a requester upstream and a responder downstream;
//! frames are pulled through lazily, one per downstream "ready". A
//! vanished peer on either side is treated as "done" so teardown always
//! cascades.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::features::{absolute_features, modified_features, FeatureKind};
use crate::landmarks::LandmarkSet;
use crate::nn::{load_model_file, AnyModel, MlpModel, Network};
use crate::wire::{
    serve_responder_on, Listener, Payload, RequestLink, ServeEnd, WireError, ACCEPT_DEADLINE,
    CONNECT_ATTEMPTS, CONNECT_INTERVAL,
};

use super::{EmotionResult, PipelineError, EMOTION_CLASS_NAMES};

/// Hook applied to image payload bytes in the model worker. A failed
/// transform drops the frame and counts it, instead of crashing the run.
pub type ImageTransform = Box<dyn FnMut(&[u8]) -> Result<Vec<u8>, String> + Send>;

/// Outcome of landmark extraction on an image. `NoFace` is a value, not
/// an error; the controller skips and counts such frames.
#[derive(Debug, Clone, PartialEq)]
pub enum Extraction {
    Landmarks(LandmarkSet<f32>),
    NoFace,
}

/// Turns raw image bytes into landmarks.
pub trait LandmarkExtractor: Send {
    fn extract(&mut self, image: &[u8]) -> Extraction;
}

/// What the model worker did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSummary {
    pub frames_forwarded: usize,
    pub hook_skips: usize,
    pub end: ServeEnd,
}

struct ForwardStream<'a> {
    up: &'a mut RequestLink,
    transform: &'a mut Option<ImageTransform>,
    hook_skips: usize,
    error: Option<WireError>,
}

impl Iterator for ForwardStream<'_> {
    type Item = Payload;

    fn next(&mut self) -> Option<Payload> {
        loop {
            match self.up.fetch() {
                Ok(None) => return None,
                Ok(Some(Payload::Image { frame_id, bytes })) => {
                    let Some(transform) = self.transform.as_mut() else {
                        return Some(Payload::Image { frame_id, bytes });
                    };
                    match transform(&bytes) {
                        Ok(out) => return Some(Payload::Image { frame_id, bytes: out }),
                        Err(_) => self.hook_skips += 1,
                    }
                }
                Ok(Some(payload)) => return Some(payload),
                Err(WireError::PeerDisconnected) => return None,
                Err(e) => {
                    self.error = Some(e);
                    return None;
                }
            }
        }
    }
}

/// Pulls frames from `upstream` and re-serves them on the pre-bound
/// listener, applying the image transform where configured. Landmarks
/// and emotion frames pass through unchanged.
pub fn model_run_on(
    listener: Listener,
    upstream: &str,
    mut transform: Option<ImageTransform>,
) -> Result<ModelSummary, PipelineError> {
    let mut up = RequestLink::connect_with_retry(upstream, CONNECT_ATTEMPTS, CONNECT_INTERVAL)?;
    let mut down = listener.accept_with_deadline(ACCEPT_DEADLINE)?;
    let mut stream = ForwardStream {
        up: &mut up,
        transform: &mut transform,
        hook_skips: 0,
        error: None,
    };
    let summary = serve_responder_on(&mut down, &mut stream)?;
    let hook_skips = stream.hook_skips;
    if let Some(e) = stream.error.take() {
        return Err(e.into());
    }
    let _ = up.finish();
    Ok(ModelSummary {
        frames_forwarded: summary.data_frames,
        hook_skips,
        end: summary.end,
    })
}

/// [`model_run_on`], binding `downstream` itself.
pub fn model_run(
    upstream: &str,
    downstream: &str,
    transform: Option<ImageTransform>,
) -> Result<ModelSummary, PipelineError> {
    let listener = Listener::bind(downstream)?;
    model_run_on(listener, upstream, transform)
}

/// What the controller worker did.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSummary {
    pub frames_classified: usize,
    pub noface_skips: usize,
    /// Ingress-to-egress time per classified frame, in milliseconds.
    pub latencies_ms: Vec<f64>,
}

fn feature_values(kind: FeatureKind, points: &LandmarkSet<f32>) -> Vec<f32> {
    match kind {
        FeatureKind::Absolute => absolute_features(points).values,
        FeatureKind::Modified => modified_features(points).values,
    }
}

struct ClassifyStream<'a> {
    up: &'a mut RequestLink,
    model: &'a MlpModel<f32>,
    feature_kind: FeatureKind,
    extractor: &'a mut Option<Box<dyn LandmarkExtractor>>,
    noface_skips: usize,
    latencies_ms: Vec<f64>,
    error: Option<PipelineError>,
}

impl Iterator for ClassifyStream<'_> {
    type Item = Payload;

    fn next(&mut self) -> Option<Payload> {
        loop {
            let payload = match self.up.fetch() {
                Ok(None) => return None,
                Ok(Some(p)) => p,
                Err(WireError::PeerDisconnected) => return None,
                Err(e) => {
                    self.error = Some(e.into());
                    return None;
                }
            };
            let ingress = Instant::now();
            let (frame_id, points) = match payload {
                Payload::Landmarks { frame_id, points } => (frame_id, points),
                Payload::Image { frame_id, bytes } => {
                    let Some(extractor) = self.extractor.as_mut() else {
                        self.error = Some(PipelineError::NoExtractorConfigured);
                        return None;
                    };
                    match extractor.extract(&bytes) {
                        Extraction::Landmarks(points) => (frame_id, points),
                        Extraction::NoFace => {
                            self.noface_skips += 1;
                            continue;
                        }
                    }
                }
                other => {
                    self.error = Some(
                        WireError::ProtocolViolation(format!(
                            "controller expects landmarks or image frames, got {}",
                            other.kind_name()
                        ))
                        .into(),
                    );
                    return None;
                }
            };
            let features = feature_values(self.feature_kind, &points);
            let probs = match self.model.forward_infer(&features) {
                Ok(p) => p,
                Err(e) => {
                    self.error = Some(e.into());
                    return None;
                }
            };
            let reply = Payload::emotion(frame_id, probs[0], probs[1]);
            self.latencies_ms
                .push(ingress.elapsed().as_secs_f64() * 1e3);
            return Some(reply);
        }
    }
}

fn load_controller_model(path: &Path) -> Result<MlpModel<f32>, PipelineError> {
    let model = load_model_file::<f32>(path)?;
    let AnyModel::Mlp(mlp) = model else {
        return Err(PipelineError::UnsupportedModel(
            "the live pipeline classifies landmark feature vectors, which needs a dense model"
                .to_string(),
        ));
    };
    if mlp
        .class_labels()
        .iter()
        .map(String::as_str)
        .ne(EMOTION_CLASS_NAMES)
    {
        return Err(PipelineError::UnsupportedModel(format!(
            "model classifies {:?}, the wire format carries {:?}",
            mlp.class_labels(),
            EMOTION_CLASS_NAMES
        )));
    }
    Ok(mlp)
}

/// Classifies each upstream frame and serves emotion frames downstream
/// from the pre-bound listener, preserving frame ids. Image frames need
/// an extractor; NoFace frames are skipped and counted.
pub fn controller_run_on(
    listener: Listener,
    upstream: &str,
    model_path: &Path,
    feature_kind: FeatureKind,
    mut extractor: Option<Box<dyn LandmarkExtractor>>,
) -> Result<ControllerSummary, PipelineError> {
    let model = load_controller_model(model_path)?;
    let mut up = RequestLink::connect_with_retry(upstream, CONNECT_ATTEMPTS, CONNECT_INTERVAL)?;
    let mut down = listener.accept_with_deadline(ACCEPT_DEADLINE)?;
    let mut stream = ClassifyStream {
        up: &mut up,
        model: &model,
        feature_kind,
        extractor: &mut extractor,
        noface_skips: 0,
        latencies_ms: Vec::new(),
        error: None,
    };
    let summary = serve_responder_on(&mut down, &mut stream)?;
    let noface_skips = stream.noface_skips;
    let latencies_ms = std::mem::take(&mut stream.latencies_ms);
    if let Some(e) = stream.error.take() {
        return Err(e);
    }
    let _ = up.finish();
    Ok(ControllerSummary {
        frames_classified: summary.data_frames,
        noface_skips,
        latencies_ms,
    })
}

/// [`controller_run_on`], loading the model before binding `downstream`.
pub fn controller_run(
    upstream: &str,
    downstream: &str,
    model_path: &Path,
    feature_kind: FeatureKind,
    extractor: Option<Box<dyn LandmarkExtractor>>,
) -> Result<ControllerSummary, PipelineError> {
    load_controller_model(model_path)?;
    let listener = Listener::bind(downstream)?;
    controller_run_on(listener, upstream, model_path, feature_kind, extractor)
}

/// What the view worker did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViewSummary {
    pub lines: u64,
}

/// Writes one line per emotion frame to `out` until upstream finishes.
pub fn view_run<W: Write>(upstream: &str, out: &mut W) -> Result<ViewSummary, PipelineError> {
    let mut up = RequestLink::connect_with_retry(upstream, CONNECT_ATTEMPTS, CONNECT_INTERVAL)?;
    let mut lines = 0u64;
    loop {
        match up.fetch() {
            Ok(None) => break,
            Ok(Some(payload)) => {
                let Some(result) = EmotionResult::from_payload(&payload) else {
                    let _ = up.finish();
                    return Err(WireError::ProtocolViolation(format!(
                        "view expects emotion frames, got {}",
                        payload.kind_name()
                    ))
                    .into());
                };
                writeln!(out, "{}", result.view_line())?;
                lines += 1;
            }
            Err(WireError::PeerDisconnected) => break,
            Err(e) => return Err(e.into()),
        }
    }
    out.flush()?;
    Ok(ViewSummary { lines })
}
