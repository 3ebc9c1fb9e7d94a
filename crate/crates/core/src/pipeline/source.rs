//! Frame sources and the input worker.

use std::path::PathBuf;
use std::thread;
use std::time::Duration;
use std::vec;

use crate::data::{read_landmark_rows, synth_generate, SynthConfig};
use crate::wire::{serve_responder_on, Listener, Payload, ServeEnd, ACCEPT_DEADLINE};

use super::PipelineError;

/// Where the input worker gets its frames. Live capture plugs in through
/// [`input_run_stream`] with a caller-built payload iterator.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameSource {
    /// Replays a landmark CSV in row order, optionally throttled to a
    /// frame rate (frames per second; `None` is unthrottled).
    LandmarkReplay { path: PathBuf, rate: Option<f64> },
    /// Seeded jittered faces alternating happiness and neutral.
    SyntheticStream { seed: u64, count: u32 },
    /// Raw bytes of every file in a directory, in name order. Downstream
    /// classification needs a landmark extractor.
    ImageDirectory { path: PathBuf },
}

impl FrameSource {
    /// Materializes the frames and the inter-frame gap, before any
    /// network activity.
    pub fn load(&self) -> Result<(Vec<Payload>, Option<Duration>), PipelineError> {
        match self {
            FrameSource::LandmarkReplay { path, rate } => {
                let gap = match rate {
                    None => None,
                    Some(r) if r.is_finite() && *r > 0.0 => {
                        Some(Duration::from_secs_f64(1.0 / r))
                    }
                    Some(r) => {
                        return Err(PipelineError::InvalidConfig(format!(
                            "replay rate must be a positive frame rate, got {r}"
                        )))
                    }
                };
                let rows =
                    read_landmark_rows::<f32>(path).map_err(|e| PipelineError::SourceRead {
                        path: path.clone(),
                        source: e,
                    })?;
                let frames = rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, row)| Payload::Landmarks {
                        frame_id: i as u32,
                        points: row.landmarks,
                    })
                    .collect();
                Ok((frames, gap))
            }
            FrameSource::SyntheticStream { seed, count } => {
                let per_class = count.div_ceil(2) as usize;
                let ds = synth_generate::<f32>(&SynthConfig {
                    per_class,
                    seed: *seed,
                    jitter_sigma: 2.0,
                });
                let (happiness, neutral) = ds.records().split_at(per_class);
                let frames = (0..*count as usize)
                    .map(|i| {
                        let record = if i % 2 == 0 {
                            &happiness[i / 2]
                        } else {
                            &neutral[i / 2]
                        };
                        Payload::Landmarks {
                            frame_id: i as u32,
                            points: record.landmarks.clone(),
                        }
                    })
                    .collect();
                Ok((frames, None))
            }
            FrameSource::ImageDirectory { path } => {
                fn wrap<T>(
                    r: std::io::Result<T>,
                    path: &std::path::Path,
                ) -> Result<T, PipelineError> {
                    r.map_err(|e| PipelineError::SourceRead {
                        path: path.to_path_buf(),
                        source: e.into(),
                    })
                }
                let mut files: Vec<PathBuf> = Vec::new();
                for entry in wrap(std::fs::read_dir(path), path)? {
                    let entry_path = wrap(entry, path)?.path();
                    if entry_path.is_file() {
                        files.push(entry_path);
                    }
                }
                files.sort();
                let mut frames = Vec::with_capacity(files.len());
                for (i, file) in files.iter().enumerate() {
                    frames.push(Payload::Image {
                        frame_id: i as u32,
                        bytes: wrap(std::fs::read(file), path)?,
                    });
                }
                Ok((frames, None))
            }
        }
    }
}

/// What the input worker did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputSummary {
    pub frames_served: usize,
    pub end: ServeEnd,
}

struct Throttled {
    frames: vec::IntoIter<Payload>,
    gap: Option<Duration>,
    started: bool,
}

impl Iterator for Throttled {
    type Item = Payload;

    fn next(&mut self) -> Option<Payload> {
        let frame = self.frames.next()?;
        if self.started {
            if let Some(gap) = self.gap {
                thread::sleep(gap);
            }
        }
        self.started = true;
        Some(frame)
    }
}

/// Serves the source's frames from `endpoint` until exhaustion or
/// downstream shutdown. The source is read before the endpoint is bound.
pub fn input_run(source: &FrameSource, endpoint: &str) -> Result<InputSummary, PipelineError> {
    let (frames, gap) = source.load()?;
    let listener = Listener::bind(endpoint)?;
    serve_frames(listener, frames, gap)
}

/// [`input_run`] on a pre-bound listener.
pub fn input_run_on(listener: Listener, source: &FrameSource) -> Result<InputSummary, PipelineError> {
    let (frames, gap) = source.load()?;
    serve_frames(listener, frames, gap)
}

/// Serves caller-supplied payloads; the plugin hook for live capture.
pub fn input_run_stream<I>(listener: Listener, frames: I) -> Result<InputSummary, PipelineError>
where
    I: IntoIterator<Item = Payload>,
{
    let mut link = listener.accept_with_deadline(ACCEPT_DEADLINE)?;
    let summary = serve_responder_on(&mut link, frames)?;
    Ok(InputSummary {
        frames_served: summary.data_frames,
        end: summary.end,
    })
}

fn serve_frames(
    listener: Listener,
    frames: Vec<Payload>,
    gap: Option<Duration>,
) -> Result<InputSummary, PipelineError> {
    input_run_stream(
        listener,
        Throttled {
            frames: frames.into_iter(),
            gap,
            started: false,
        },
    )
}
