//! Socket ownership and the "ready"/"done" handshake loops.
//!
//! A link is one TCP connection with strict request-reply alternation:
//! the downstream side (requester) sends Control("ready") for each datum
//! and the upstream side (responder) answers with exactly one frame.
//! Either side may substitute "done" for its next message to shut the
//! link down; an abrupt disconnect is treated as that peer's "done" so a
//! killed worker cannot wedge its neighbors.

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use super::{read_frame, write_frame, ControlToken, Payload, WireError};

/// How long a responder waits for its requester before giving up.
pub const ACCEPT_DEADLINE: Duration = Duration::from_secs(10);

/// Default connect retry schedule; covers workers starting in any order.
pub const CONNECT_ATTEMPTS: u32 = 10;
pub const CONNECT_INTERVAL: Duration = Duration::from_millis(200);

/// A bound listener awaiting its single requester.
pub struct Listener {
    inner: TcpListener,
}

impl Listener {
    pub fn bind(endpoint: &str) -> Result<Self, WireError> {
        let inner = TcpListener::bind(endpoint).map_err(|source| WireError::BindFailure {
            endpoint: endpoint.to_string(),
            source,
        })?;
        Ok(Listener { inner })
    }

    /// The bound address, with any OS-assigned port filled in.
    pub fn local_endpoint(&self) -> String {
        self.inner
            .local_addr()
            .map(|a| a.to_string())
            .unwrap_or_default()
    }

    /// Accepts the requester, polling until the deadline passes.
    pub fn accept_with_deadline(&self, deadline: Duration) -> Result<ReplyLink, WireError> {
        self.inner.set_nonblocking(true)?;
        let start = Instant::now();
        loop {
            match self.inner.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false)?;
                    stream.set_nodelay(true)?;
                    return Ok(ReplyLink { stream });
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => {
                    if start.elapsed() >= deadline {
                        return Err(WireError::AcceptTimeout(deadline));
                    }
                    thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(WireError::Io(e)),
            }
        }
    }
}

/// What the requester asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Request {
    Ready,
    Done,
}

/// Responder side of one link.
#[derive(Debug)]
pub struct ReplyLink {
    stream: TcpStream,
}

impl ReplyLink {
    /// Blocks for the next control frame. A data frame here breaks the
    /// alternation contract; a disconnect surfaces as `PeerDisconnected`.
    pub fn next_request(&mut self) -> Result<Request, WireError> {
        match read_frame(&mut self.stream)? {
            Payload::Control(ControlToken::Ready) => Ok(Request::Ready),
            Payload::Control(ControlToken::Done) => Ok(Request::Done),
            other => Err(WireError::ProtocolViolation(format!(
                "expected a control request, received a {} frame",
                other.kind_name()
            ))),
        }
    }

    pub fn reply(&mut self, payload: &Payload) -> Result<(), WireError> {
        write_frame(&mut self.stream, payload)
    }

    pub fn reply_done(&mut self) -> Result<(), WireError> {
        write_frame(&mut self.stream, &Payload::Control(ControlToken::Done))
    }
}

/// Requester side of one link.
#[derive(Debug)]
pub struct RequestLink {
    stream: TcpStream,
    finished: bool,
}

impl RequestLink {
    pub fn connect(endpoint: &str) -> Result<Self, WireError> {
        Self::connect_with_retry(endpoint, CONNECT_ATTEMPTS, CONNECT_INTERVAL)
    }

    /// Retries a refused connection `attempts` times, `interval` apart.
    pub fn connect_with_retry(
        endpoint: &str,
        attempts: u32,
        interval: Duration,
    ) -> Result<Self, WireError> {
        assert!(attempts > 0, "at least one connect attempt is required");
        let mut last_err = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(interval);
            }
            match TcpStream::connect(endpoint) {
                Ok(stream) => {
                    stream.set_nodelay(true).map_err(WireError::Io)?;
                    return Ok(RequestLink {
                        stream,
                        finished: false,
                    });
                }
                Err(e) => last_err = Some(e),
            }
        }
        Err(WireError::ConnectFailure {
            endpoint: endpoint.to_string(),
            attempts,
            source: last_err.expect("at least one attempt was made"),
        })
    }

    /// Requests one datum. `None` means the responder sent "done" (or a
    /// previous call already closed the link); the link is finished then.
    pub fn fetch(&mut self) -> Result<Option<Payload>, WireError> {
        if self.finished {
            return Ok(None);
        }
        write_frame(&mut self.stream, &Payload::Control(ControlToken::Ready))?;
        match read_frame(&mut self.stream)? {
            Payload::Control(ControlToken::Done) => {
                self.finished = true;
                Ok(None)
            }
            Payload::Control(ControlToken::Ready) => Err(WireError::ProtocolViolation(
                "responder answered a request with \"ready\"".into(),
            )),
            data => Ok(Some(data)),
        }
    }

    /// Substitutes "done" for the next "ready". Idempotent; a peer that
    /// already went away counts as informed.
    pub fn finish(&mut self) -> Result<(), WireError> {
        if self.finished {
            return Ok(());
        }
        self.finished = true;
        match write_frame(&mut self.stream, &Payload::Control(ControlToken::Done)) {
            Ok(()) | Err(WireError::PeerDisconnected) => Ok(()),
            Err(e) => Err(e),
        }
    }
}

/// How a responder session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServeEnd {
    /// Provider ran out; "done" was sent.
    Exhausted,
    /// Requester sent "done".
    PeerDone,
    /// Requester vanished without "done".
    PeerGone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServeSummary {
    pub data_frames: usize,
    pub end: ServeEnd,
}

/// Serves each "ready" with the provider's next payload over an accepted
/// link; replies "done" on exhaustion.
pub fn serve_responder_on<I>(
    link: &mut ReplyLink,
    provider: I,
) -> Result<ServeSummary, WireError>
where
    I: IntoIterator<Item = Payload>,
{
    let mut provider = provider.into_iter();
    let mut data_frames = 0;
    loop {
        match link.next_request() {
            Ok(Request::Ready) => match provider.next() {
                Some(payload) => match link.reply(&payload) {
                    Ok(()) => data_frames += 1,
                    Err(WireError::PeerDisconnected) => {
                        return Ok(ServeSummary {
                            data_frames,
                            end: ServeEnd::PeerGone,
                        })
                    }
                    Err(e) => return Err(e),
                },
                None => {
                    match link.reply_done() {
                        Ok(()) | Err(WireError::PeerDisconnected) => {}
                        Err(e) => return Err(e),
                    }
                    return Ok(ServeSummary {
                        data_frames,
                        end: ServeEnd::Exhausted,
                    });
                }
            },
            Ok(Request::Done) => {
                return Ok(ServeSummary {
                    data_frames,
                    end: ServeEnd::PeerDone,
                })
            }
            Err(WireError::PeerDisconnected) => {
                return Ok(ServeSummary {
                    data_frames,
                    end: ServeEnd::PeerGone,
                })
            }
            Err(e) => return Err(e),
        }
    }
}

/// Binds `endpoint`, waits for one requester, and serves it.
pub fn serve_responder<I>(endpoint: &str, provider: I) -> Result<ServeSummary, WireError>
where
    I: IntoIterator<Item = Payload>,
{
    let listener = Listener::bind(endpoint)?;
    let mut link = listener.accept_with_deadline(ACCEPT_DEADLINE)?;
    serve_responder_on(&mut link, provider)
}

/// Sink verdict after each delivered payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinkFlow {
    Continue,
    Stop,
}

/// How a requester session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestEnd {
    /// Responder sent "done".
    UpstreamDone,
    /// Sink stopped; "done" was sent upstream.
    SinkStopped,
    /// Responder vanished without "done".
    PeerGone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestSummary {
    pub delivered: usize,
    pub end: RequestEnd,
}

/// Requests payloads from `endpoint` and feeds them to the sink until
/// the responder finishes, the sink stops, or the peer vanishes.
pub fn run_requester<F>(endpoint: &str, mut sink: F) -> Result<RequestSummary, WireError>
where
    F: FnMut(Payload) -> SinkFlow,
{
    let mut link = RequestLink::connect(endpoint)?;
    let mut delivered = 0;
    loop {
        match link.fetch() {
            Ok(None) => {
                return Ok(RequestSummary {
                    delivered,
                    end: RequestEnd::UpstreamDone,
                })
            }
            Ok(Some(payload)) => {
                delivered += 1;
                if sink(payload) == SinkFlow::Stop {
                    link.finish()?;
                    return Ok(RequestSummary {
                        delivered,
                        end: RequestEnd::SinkStopped,
                    });
                }
            }
            Err(WireError::PeerDisconnected) => {
                return Ok(RequestSummary {
                    delivered,
                    end: RequestEnd::PeerGone,
                })
            }
            Err(e) => return Err(e),
        }
    }
}
