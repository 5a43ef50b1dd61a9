//! Stream-protocol client. Used by the CLI, the tests and the acceptance
//! suite; it also serves as a reference for other client implementations.

use std::collections::VecDeque;
use std::io;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::net::tcp::OwnedWriteHalf;
use tokio::net::{TcpStream, ToSocketAddrs};
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use crate::frame::{encode_frame, read_frame};
use crate::latency::{account_latency, LatencyError, LatencyRecord};
use crate::protocol::{kinds, Request, ServerFrame, DEFAULT_MAX_FRAME_BYTES};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("connection closed")]
    Closed,
    #[error("no reply within {0:?}")]
    Timeout(Duration),
    #[error(transparent)]
    Latency(#[from] LatencyError),
}

/// A server frame with the client-clock time it was decoded.
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub frame: ServerFrame,
    pub client_recv_ts_ms: f64,
}

/// One request and its reply.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub reply: ServerFrame,
    pub client_send_ts_ms: f64,
    pub client_recv_ts_ms: f64,
    pub latency: LatencyRecord,
}

pub struct EdgeClient {
    writer: OwnedWriteHalf,
    inbox: mpsc::UnboundedReceiver<Received>,
    /// Frames read while waiting for a specific reply.
    stash: VecDeque<Received>,
    reader: JoinHandle<()>,
    epoch: Instant,
    next_msg_id: u64,
    max_frame_bytes: usize,
    pub timeout: Duration,
    pub session_id: Option<String>,
}

impl EdgeClient {
    pub async fn connect(addr: impl ToSocketAddrs) -> Result<Self, ClientError> {
        Self::connect_with(addr, DEFAULT_MAX_FRAME_BYTES).await
    }

    pub async fn connect_with(
        addr: impl ToSocketAddrs,
        max_frame_bytes: usize,
    ) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr).await?;
        stream.set_nodelay(true)?;
        let (mut rd, writer) = stream.into_split();
        let epoch = Instant::now();
        let (tx, inbox) = mpsc::unbounded_channel();
        let reader = tokio::spawn(async move {
            while let Ok(Some(body)) = read_frame(&mut rd, max_frame_bytes).await {
                let client_recv_ts_ms = epoch.elapsed().as_secs_f64() * 1e3;
                match serde_json::from_slice::<ServerFrame>(&body) {
                    Ok(frame) => {
                        if tx
                            .send(Received {
                                frame,
                                client_recv_ts_ms,
                            })
                            .is_err()
                        {
                            break;
                        }
                    }
                    Err(e) => tracing::warn!("undecodable server frame: {e}"),
                }
            }
        });
        Ok(EdgeClient {
            writer,
            inbox,
            stash: VecDeque::new(),
            reader,
            epoch,
            next_msg_id: 1,
            max_frame_bytes,
            timeout: DEFAULT_TIMEOUT,
            session_id: None,
        })
    }

    /// Milliseconds on this client's monotonic clock.
    pub fn now_ms(&self) -> f64 {
        self.epoch.elapsed().as_secs_f64() * 1e3
    }

    /// Id the next [`request`](Self::request) will use.
    pub fn next_msg_id(&self) -> u64 {
        self.next_msg_id
    }

    /// Send a request and wait for the frame answering it. Frames that
    /// arrive meanwhile are kept for [`next_frame`](Self::next_frame).
    pub async fn request(
        &mut self,
        kind: &str,
        payload: impl Serialize,
    ) -> Result<Exchange, ClientError> {
        let msg_id = self.next_msg_id;
        self.next_msg_id += 1;
        let client_send_ts_ms = self.now_ms();
        let req = Request {
            msg_id,
            session_id: None,
            kind: kind.to_owned(),
            payload: serde_json::to_value(payload).map_err(io::Error::other)?,
            client_send_ts_ms,
        };
        self.send_body(&serde_json::to_vec(&req).map_err(io::Error::other)?)
            .await?;
        let received = self.wait_for(msg_id).await?;
        let latency = account_latency(
            msg_id,
            client_send_ts_ms,
            received.client_recv_ts_ms,
            received.frame.server_recv_ts_ms,
            received.frame.server_send_ts_ms,
        )?;
        Ok(Exchange {
            reply: received.frame,
            client_send_ts_ms,
            client_recv_ts_ms: received.client_recv_ts_ms,
            latency,
        })
    }

    /// Announce capabilities; remembers the session id.
    pub async fn hello(&mut self, capabilities: &[&str]) -> Result<Exchange, ClientError> {
        let ex = self
            .request(
                kinds::HELLO,
                json!({"capabilities": capabilities, "client": "twinops"}),
            )
            .await?;
        if let Some(id) = ex.reply.payload.get("session_id").and_then(Value::as_str) {
            self.session_id = Some(id.to_owned());
        }
        Ok(ex)
    }

    async fn wait_for(&mut self, msg_id: u64) -> Result<Received, ClientError> {
        let deadline = tokio::time::Instant::now() + self.timeout;
        loop {
            let r = match tokio::time::timeout_at(deadline, self.inbox.recv()).await {
                Ok(Some(r)) => r,
                Ok(None) => return Err(ClientError::Closed),
                Err(_) => return Err(ClientError::Timeout(self.timeout)),
            };
            if r.frame.msg_id == Some(msg_id) {
                return Ok(r);
            }
            self.stash.push_back(r);
        }
    }

    /// Frame an arbitrary body and send it, bypassing request bookkeeping.
    pub async fn send_body(&mut self, body: &[u8]) -> Result<(), ClientError> {
        let framed = encode_frame(body, self.max_frame_bytes).map_err(io::Error::other)?;
        self.writer.write_all(&framed).await?;
        Ok(())
    }

    /// Write bytes to the stream unchanged, header included.
    pub async fn send_raw(&mut self, bytes: &[u8]) -> Result<(), ClientError> {
        self.writer.write_all(bytes).await?;
        Ok(())
    }

    /// Next frame not yet consumed by a request, waiting up to `wait`.
    /// `Ok(None)` means nothing arrived in time.
    pub async fn next_frame(&mut self, wait: Duration) -> Result<Option<Received>, ClientError> {
        if let Some(r) = self.stash.pop_front() {
            return Ok(Some(r));
        }
        match tokio::time::timeout(wait, self.inbox.recv()).await {
            Ok(Some(r)) => Ok(Some(r)),
            Ok(None) => Err(ClientError::Closed),
            Err(_) => Ok(None),
        }
    }

    /// Frames that arrived ahead of earlier replies and were not yet taken,
    /// in arrival order.
    pub fn take_stash(&mut self) -> Vec<Received> {
        self.stash.drain(..).collect()
    }

    /// Every frame that arrives until the connection has been quiet for `quiet`.
    pub async fn drain(&mut self, quiet: Duration) -> Result<Vec<Received>, ClientError> {
        let mut out = Vec::new();
        while let Some(r) = self.next_frame(quiet).await? {
            out.push(r);
        }
        Ok(out)
    }

    pub async fn close(mut self) -> Result<(), ClientError> {
        self.writer.shutdown().await?;
        let _ = tokio::time::timeout(Duration::from_secs(1), &mut self.reader).await;
        Ok(())
    }
}

impl Drop for EdgeClient {
    fn drop(&mut self) {
        self.reader.abort();
    }
}
