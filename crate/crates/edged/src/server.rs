//! Network front ends for [`Service`]: length-prefixed frames over TCP, and
//! the same JSON bodies as WebSocket messages at `/ws` for browsers.

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use thiserror::Error;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;

use crate::frame::{encode_frame, Decoded, FrameDecoder};
use crate::protocol::{kinds, ErrorBody, ErrorCode, ServerFrame, DEFAULT_MAX_FRAME_BYTES};
use crate::service::Service;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeConfig {
    pub listen: String,
    /// Address for the browser endpoint; `None` disables it.
    pub ws_listen: Option<String>,
    pub max_frame_bytes: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            listen: "127.0.0.1:7600".into(),
            ws_listen: Some("127.0.0.1:7601".into()),
            max_frame_bytes: DEFAULT_MAX_FRAME_BYTES,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: io::Error },
}

/// Running server. Dropping the handle does not stop it; call
/// [`ServerHandle::shutdown`].
#[derive(Debug)]
pub struct ServerHandle {
    pub tcp_addr: SocketAddr,
    pub ws_addr: Option<SocketAddr>,
    shutdown: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    /// Stop accepting, close every connection and wait for the tasks.
    pub async fn shutdown(self) {
        let _ = self.shutdown.send(true);
        for t in self.tasks {
            let _ = t.await;
        }
    }

    /// Run until the server stops on its own (it does not, short of a panic).
    pub async fn wait(self) {
        for t in self.tasks {
            let _ = t.await;
        }
    }
}

async fn bind(addr: &str) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::BindFailure {
            addr: addr.to_owned(),
            source,
        })
}

pub async fn serve(service: Arc<Service>, config: ServeConfig) -> Result<ServerHandle, ServeError> {
    let (shutdown, stop) = watch::channel(false);
    let tcp = bind(&config.listen).await?;
    let tcp_addr = tcp.local_addr().map_err(|source| ServeError::BindFailure {
        addr: config.listen.clone(),
        source,
    })?;
    let ws = match &config.ws_listen {
        Some(addr) => Some(bind(addr).await?),
        None => None,
    };
    let ws_addr = ws.as_ref().and_then(|l| l.local_addr().ok());

    let mut tasks = vec![tokio::spawn(accept_tcp(
        tcp,
        service.clone(),
        config.max_frame_bytes,
        stop.clone(),
    ))];
    if let Some(listener) = ws {
        let state = WsState {
            service,
            max_frame_bytes: config.max_frame_bytes,
            stop: stop.clone(),
        };
        let app = Router::new()
            .route("/ws", get(ws_upgrade))
            .route("/healthz", get(|| async { "ok" }))
            .with_state(state);
        let mut stop = stop;
        tasks.push(tokio::spawn(async move {
            let graceful = async move {
                let _ = stop.wait_for(|s| *s).await;
            };
            if let Err(e) = axum::serve(listener, app)
                .with_graceful_shutdown(graceful)
                .await
            {
                tracing::error!("browser endpoint stopped: {e}");
            }
        }));
    }
    tracing::info!(%tcp_addr, ?ws_addr, "edge service listening");
    Ok(ServerHandle {
        tcp_addr,
        ws_addr,
        shutdown,
        tasks,
    })
}

async fn accept_tcp(
    listener: TcpListener,
    service: Arc<Service>,
    max: usize,
    mut stop: watch::Receiver<bool>,
) {
    let mut conns = Vec::new();
    loop {
        let conn_stop = stop.clone();
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    tracing::debug!(%peer, "connection");
                    conns.push(tokio::spawn(tcp_connection(stream, service.clone(), max, conn_stop)));
                    conns.retain(|c: &JoinHandle<()>| !c.is_finished());
                }
                Err(e) => tracing::warn!("accept failed: {e}"),
            },
            _ = stop.wait_for(|s| *s) => break,
        }
    }
    for c in conns {
        let _ = c.await;
    }
}

/// Encoded reply; a frame too large to send becomes a `FrameTooLarge` error
/// so the request still gets its one answer.
fn encode_reply(frame: &ServerFrame, max: usize) -> Vec<u8> {
    let body = serde_json::to_vec(frame).expect("server frames serialize");
    encode_frame(&body, max).unwrap_or_else(|e| {
        let replacement = ServerFrame {
            msg_id: frame.msg_id,
            kind: kinds::ERROR.into(),
            payload: serde_json::to_value(ErrorBody {
                code: ErrorCode::FrameTooLarge,
                message: format!("reply {e}"),
            })
            .expect("error body serializes"),
            ..frame.clone()
        };
        let body = serde_json::to_vec(&replacement).expect("server frames serialize");
        encode_frame(&body, max).expect("error frames are small")
    })
}

async fn tcp_connection(
    stream: TcpStream,
    service: Arc<Service>,
    max: usize,
    mut stop: watch::Receiver<bool>,
) {
    let _ = stream.set_nodelay(true);
    let (mut rd, mut wr) = stream.into_split();
    let (tx, mut rx) = mpsc::unbounded_channel::<ServerFrame>();
    let mut session = service.open_session(tx);
    let writer = tokio::spawn(async move {
        while let Some(frame) = rx.recv().await {
            if wr.write_all(&encode_reply(&frame, max)).await.is_err() {
                break;
            }
        }
        let _ = wr.shutdown().await;
    });
    let mut decoder = FrameDecoder::new(max);
    let mut buf = vec![0u8; 64 * 1024];
    loop {
        tokio::select! {
            read = rd.read(&mut buf) => match read {
                Ok(0) => break,
                Ok(n) => {
                    decoder.push(&buf[..n]);
                    while let Some(d) = decoder.next_frame() {
                        match d {
                            Decoded::Frame(body) => service.handle_frame(&mut session, &body),
                            Decoded::Oversized(len) => service.reject_oversized(&session, len, max),
                        }
                    }
                }
                Err(e) => {
                    tracing::debug!(session = session.id(), "read failed: {e}");
                    break;
                }
            },
            _ = stop.wait_for(|s| *s) => break,
        }
    }
    service.close_session(&mut session);
    drop(session);
    let _ = writer.await;
}

#[derive(Clone)]
struct WsState {
    service: Arc<Service>,
    max_frame_bytes: usize,
    stop: watch::Receiver<bool>,
}

/// Query parameters of `/ws`. `room` joins a collaboration room on connect;
/// `capabilities` is a comma-separated list.
#[derive(Debug, Default, Deserialize)]
pub struct WsParams {
    pub room: Option<String>,
    pub capabilities: Option<String>,
}

impl WsParams {
    pub fn capability_list(&self) -> Vec<String> {
        self.capabilities
            .as_deref()
            .unwrap_or("")
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_owned)
            .collect()
    }
}

async fn ws_upgrade(
    State(state): State<WsState>,
    Query(params): Query<WsParams>,
    ws: WebSocketUpgrade,
) -> impl IntoResponse {
    // Messages somewhat over the frame limit still arrive and get an error
    // reply; far larger ones are refused by the WebSocket layer itself.
    ws.max_message_size(state.max_frame_bytes.saturating_mul(4))
        .on_upgrade(move |socket| ws_connection(socket, state, params))
}

async fn ws_connection(socket: WebSocket, state: WsState, params: WsParams) {
    let WsState {
        service,
        max_frame_bytes: max,
        mut stop,
    } = state;
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<ServerFrame>();
    let mut session = service.open_session(tx);
    let writer = tokio::spawn(async move {
        while let Some(frame) = rx.recv().await {
            let text = serde_json::to_string(&frame).expect("server frames serialize");
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    match params.room.as_deref() {
        Some(room) if !room.is_empty() => {
            service.join(&mut session, room, &params.capability_list())
        }
        _ => session.add_capabilities(params.capability_list()),
    }
    loop {
        tokio::select! {
            msg = stream.next() => match msg {
                Some(Ok(Message::Text(text))) => handle_ws_body(&service, &mut session, text.as_bytes(), max),
                Some(Ok(Message::Binary(bytes))) => handle_ws_body(&service, &mut session, &bytes, max),
                Some(Ok(Message::Close(_))) | None => break,
                Some(Ok(_)) => {}
                Some(Err(e)) => {
                    tracing::debug!(session = session.id(), "websocket error: {e}");
                    break;
                }
            },
            _ = stop.wait_for(|s| *s) => break,
        }
    }
    service.close_session(&mut session);
    drop(session);
    let _ = writer.await;
}

fn handle_ws_body(
    service: &Service,
    session: &mut crate::service::Session,
    body: &[u8],
    max: usize,
) {
    if body.len() > max {
        service.reject_oversized(session, body.len(), max);
    } else {
        service.handle_frame(session, body);
    }
}
