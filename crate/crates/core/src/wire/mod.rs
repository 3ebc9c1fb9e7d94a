//! Binary framing and the request-reply handshake between pipeline workers.
//!
//! Every message is one frame: a 4-byte big-endian payload length, a tag
//! byte, and a type-specific body. Body integers and floats are
//! little-endian; coordinates and probabilities travel as f32. Control
//! frames carry only the tokens "ready" (request one datum) and "done"
//! (no more data in my direction; shut the link down).
//!
//! [`link`] holds the socket layer: responders own a bound listener,
//! requesters connect with bounded retry, and each link alternates
//! strictly between one request and one reply.

pub mod link;

use std::io::{Read, Write};

use thiserror::Error;

use crate::landmarks::{LandmarkSet, LANDMARK_COUNT};

pub use link::{
    run_requester, serve_responder, serve_responder_on, Listener, ReplyLink, Request, RequestEnd,
    RequestLink, RequestSummary, ServeEnd, ServeSummary, SinkFlow, ACCEPT_DEADLINE,
    CONNECT_ATTEMPTS, CONNECT_INTERVAL,
};

pub const TAG_CONTROL: u8 = 0x01;
pub const TAG_IMAGE: u8 = 0x02;
pub const TAG_LANDMARKS: u8 = 0x03;
pub const TAG_EMOTION: u8 = 0x04;

/// Landmarks body size: frame id plus 68 little-endian (x, y) f32 pairs.
pub const LANDMARKS_BODY_LEN: usize = 4 + LANDMARK_COUNT * 2 * 4;

/// Emotion body size: frame id, two probabilities, label index.
pub const EMOTION_BODY_LEN: usize = 4 + 4 + 4 + 1;

/// Upper bound on a declared payload length; guards reads from a
/// corrupt or misbehaving peer before the body buffer is allocated.
pub const MAX_FRAME_LEN: u32 = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("unknown frame tag 0x{0:02x}")]
    UnknownTag(u8),
    #[error("frame declares {declared} payload bytes but {actual} are present")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("malformed frame body: {0}")]
    MalformedBody(String),
    #[error("frame declares {0} payload bytes, above the {MAX_FRAME_LEN} cap")]
    FrameTooLarge(u32),
    #[error("failed to bind {endpoint}: {source}")]
    BindFailure {
        endpoint: String,
        source: std::io::Error,
    },
    #[error("failed to connect to {endpoint} after {attempts} attempts: {source}")]
    ConnectFailure {
        endpoint: String,
        attempts: u32,
        source: std::io::Error,
    },
    #[error("no peer connected within {0:?}")]
    AcceptTimeout(std::time::Duration),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("peer disconnected")]
    PeerDisconnected,
    #[error("socket error: {0}")]
    Io(#[from] std::io::Error),
}

/// The two link-control tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlToken {
    Ready,
    Done,
}

impl ControlToken {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControlToken::Ready => "ready",
            ControlToken::Done => "done",
        }
    }
}

/// One decoded frame body.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Control(ControlToken),
    Image {
        frame_id: u32,
        bytes: Vec<u8>,
    },
    Landmarks {
        frame_id: u32,
        points: LandmarkSet<f32>,
    },
    Emotion {
        frame_id: u32,
        prob_happiness: f32,
        prob_neutral: f32,
        label_index: u8,
    },
}

impl Payload {
    /// Builds an Emotion payload with the label set to the argmax class;
    /// a tie goes to class 0.
    pub fn emotion(frame_id: u32, prob_happiness: f32, prob_neutral: f32) -> Payload {
        let label_index = u8::from(prob_neutral > prob_happiness);
        Payload::Emotion {
            frame_id,
            prob_happiness,
            prob_neutral,
            label_index,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Payload::Control(_) => "control",
            Payload::Image { .. } => "image",
            Payload::Landmarks { .. } => "landmarks",
            Payload::Emotion { .. } => "emotion",
        }
    }

    /// Frame id carried by data payloads; control frames have none.
    pub fn frame_id(&self) -> Option<u32> {
        match self {
            Payload::Control(_) => None,
            Payload::Image { frame_id, .. }
            | Payload::Landmarks { frame_id, .. }
            | Payload::Emotion { frame_id, .. } => Some(*frame_id),
        }
    }
}

/// Serializes one payload as a complete frame, length prefix included.
pub fn encode_frame(payload: &Payload) -> Vec<u8> {
    let mut body = Vec::new();
    match payload {
        Payload::Control(token) => {
            body.push(TAG_CONTROL);
            body.extend_from_slice(token.as_str().as_bytes());
        }
        Payload::Image { frame_id, bytes } => {
            body.push(TAG_IMAGE);
            body.extend_from_slice(&frame_id.to_le_bytes());
            body.extend_from_slice(bytes);
        }
        Payload::Landmarks { frame_id, points } => {
            body.push(TAG_LANDMARKS);
            body.extend_from_slice(&frame_id.to_le_bytes());
            for p in points.points() {
                body.extend_from_slice(&p.x.to_le_bytes());
                body.extend_from_slice(&p.y.to_le_bytes());
            }
        }
        Payload::Emotion {
            frame_id,
            prob_happiness,
            prob_neutral,
            label_index,
        } => {
            body.push(TAG_EMOTION);
            body.extend_from_slice(&frame_id.to_le_bytes());
            body.extend_from_slice(&prob_happiness.to_le_bytes());
            body.extend_from_slice(&prob_neutral.to_le_bytes());
            body.push(*label_index);
        }
    }
    let mut frame = Vec::with_capacity(4 + body.len());
    frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
    frame.extend_from_slice(&body);
    frame
}

/// Parses one complete frame, length prefix included.
pub fn decode_frame(bytes: &[u8]) -> Result<Payload, WireError> {
    if bytes.len() < 4 {
        return Err(WireError::MalformedBody(
            "frame shorter than its length prefix".into(),
        ));
    }
    let declared = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    let actual = bytes.len() - 4;
    if declared != actual {
        return Err(WireError::LengthMismatch { declared, actual });
    }
    decode_body(&bytes[4..])
}

/// Parses a frame body (tag byte plus payload, no length prefix).
pub fn decode_body(body: &[u8]) -> Result<Payload, WireError> {
    let Some((&tag, rest)) = body.split_first() else {
        return Err(WireError::MalformedBody("empty payload".into()));
    };
    match tag {
        TAG_CONTROL => {
            let token = std::str::from_utf8(rest)
                .map_err(|_| WireError::MalformedBody("control token is not UTF-8".into()))?;
            match token {
                "ready" => Ok(Payload::Control(ControlToken::Ready)),
                "done" => Ok(Payload::Control(ControlToken::Done)),
                other => Err(WireError::MalformedBody(format!(
                    "unknown control token {other:?}"
                ))),
            }
        }
        TAG_IMAGE => {
            if rest.len() < 4 {
                return Err(WireError::MalformedBody(
                    "image body shorter than its frame id".into(),
                ));
            }
            Ok(Payload::Image {
                frame_id: u32::from_le_bytes([rest[0], rest[1], rest[2], rest[3]]),
                bytes: rest[4..].to_vec(),
            })
        }
        TAG_LANDMARKS => {
            if rest.len() != LANDMARKS_BODY_LEN {
                return Err(WireError::MalformedBody(format!(
                    "landmarks body has {} bytes, expected {LANDMARKS_BODY_LEN}",
                    rest.len()
                )));
            }
            let frame_id = u32::from_le_bytes([rest[0], rest[1], rest[2], rest[3]]);
            let coords: Vec<f32> = rest[4..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let points = LandmarkSet::from_flat(&coords)
                .map_err(|e| WireError::MalformedBody(e.to_string()))?;
            Ok(Payload::Landmarks { frame_id, points })
        }
        TAG_EMOTION => {
            if rest.len() != EMOTION_BODY_LEN {
                return Err(WireError::MalformedBody(format!(
                    "emotion body has {} bytes, expected {EMOTION_BODY_LEN}",
                    rest.len()
                )));
            }
            let label_index = rest[12];
            if label_index > 1 {
                return Err(WireError::MalformedBody(format!(
                    "emotion label index {label_index} out of range"
                )));
            }
            Ok(Payload::Emotion {
                frame_id: u32::from_le_bytes([rest[0], rest[1], rest[2], rest[3]]),
                prob_happiness: f32::from_le_bytes([rest[4], rest[5], rest[6], rest[7]]),
                prob_neutral: f32::from_le_bytes([rest[8], rest[9], rest[10], rest[11]]),
                label_index,
            })
        }
        other => Err(WireError::UnknownTag(other)),
    }
}

/// Reads one frame from a stream. A clean close before or inside a frame
/// reports `PeerDisconnected`.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Payload, WireError> {
    let mut prefix = [0u8; 4];
    reader.read_exact(&mut prefix).map_err(map_stream_err)?;
    let declared = u32::from_be_bytes(prefix);
    if declared > MAX_FRAME_LEN {
        return Err(WireError::FrameTooLarge(declared));
    }
    if declared == 0 {
        return Err(WireError::MalformedBody("empty payload".into()));
    }
    let mut body = vec![0u8; declared as usize];
    reader.read_exact(&mut body).map_err(map_stream_err)?;
    decode_body(&body)
}

/// Writes one frame to a stream and flushes it.
pub fn write_frame<W: Write>(writer: &mut W, payload: &Payload) -> Result<(), WireError> {
    writer
        .write_all(&encode_frame(payload))
        .map_err(map_stream_err)?;
    writer.flush().map_err(map_stream_err)
}

fn map_stream_err(e: std::io::Error) -> WireError {
    use std::io::ErrorKind;
    match e.kind() {
        ErrorKind::UnexpectedEof
        | ErrorKind::ConnectionReset
        | ErrorKind::ConnectionAborted
        | ErrorKind::BrokenPipe => WireError::PeerDisconnected,
        _ => WireError::Io(e),
    }
}
