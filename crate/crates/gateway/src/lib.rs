//! Live WebSocket gateway over a running director session.
//!
//! `GET /health` answers with the protocol version. `/ws` streams snapshot
//! frames at a fixed rate and accepts command frames; see [`protocol`].

pub mod engine;
pub mod protocol;

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::{Json, Router};
use director_core::llm::Backend;
use director_core::reactor::Inbox;
use futures_util::{SinkExt, StreamExt};
use serde_json::json;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};

pub use engine::EngineConfig;
use engine::{commands_topic, Msg, Publisher};
use protocol::{parse_client_frame, ServerFrame, ServerMessage, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("engine: {0}")]
    Engine(String),
    #[error(transparent)]
    Harness(#[from] director_core::harness::HarnessError),
    #[error(transparent)]
    Reactor(#[from] director_core::reactor::ReactorError),
}

#[derive(Clone)]
struct AppState {
    inbox: Inbox<Msg>,
    publisher: Arc<Publisher>,
}

pub fn router(inbox: Inbox<Msg>, publisher: Arc<Publisher>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/ws", get(ws))
        .with_state(AppState { inbox, publisher })
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "protocol": PROTOCOL_VERSION }))
}

async fn ws(upgrade: WebSocketUpgrade, State(app): State<AppState>) -> Response {
    upgrade.on_upgrade(move |socket| client(socket, app))
}

async fn client(socket: WebSocket, app: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (reply_tx, mut replies) = mpsc::unbounded_channel::<String>();
    let (latest, mut frames) = app.publisher.subscribe();
    if let Some(frame) = latest {
        if sink.send(Message::Text(frame.as_ref().into())).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            frame = frames.recv() => match frame {
                Ok(frame) => {
                    if sink.send(Message::Text(frame.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => tracing::warn!(skipped = n, "slow client dropped snapshots"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
            Some(reply) = replies.recv() => {
                if sink.send(Message::Text(reply.into())).await.is_err() {
                    break;
                }
            }
            incoming = stream.next() => match incoming {
                Some(Ok(Message::Text(text))) => on_text(&app, text.as_str(), &reply_tx),
                Some(Ok(Message::Binary(_))) => reject(&reply_tx, None, "binary frames are not supported".into()),
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

fn reject(reply: &mpsc::UnboundedSender<String>, id: Option<u64>, reason: String) {
    tracing::info!(%reason, "command rejected");
    let _ = reply.send(ServerFrame::new(ServerMessage::Reject { id, reason }).to_json());
}

fn on_text(app: &AppState, text: &str, reply: &mpsc::UnboundedSender<String>) {
    match parse_client_frame(text) {
        Ok(frame) => {
            let msg = Msg::Command { command: frame.command, id: frame.id, reply: reply.clone() };
            if !app.inbox.send(&commands_topic(), msg) {
                reject(reply, frame.id, "engine stopped".into());
            }
        }
        Err((id, reason)) => reject(reply, id, reason),
    }
}

/// A running gateway. Dropping it without [`Gateway::shutdown`] leaves the
/// engine thread running until the process exits.
pub struct Gateway {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    engine: Option<std::thread::JoinHandle<()>>,
    shutdown: Option<oneshot::Sender<()>>,
    server: tokio::task::JoinHandle<()>,
}

impl Gateway {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.server).await;
        self.stop.store(true, Ordering::Relaxed);
        if let Some(engine) = self.engine.take() {
            let _ = tokio::task::spawn_blocking(move || engine.join()).await;
        }
    }
}

/// Bind `addr`, start the engine and serve until [`Gateway::shutdown`].
pub async fn serve(addr: &str, config: EngineConfig, backend: Arc<dyn Backend>) -> Result<Gateway, GatewayError> {
    let listener = TcpListener::bind(addr).await.map_err(|source| GatewayError::Bind { addr: addr.to_string(), source })?;
    let local = listener.local_addr().map_err(|source| GatewayError::Bind { addr: addr.to_string(), source })?;
    let stop = Arc::new(AtomicBool::new(false));
    let engine = engine::spawn(config, backend, stop.clone())?;
    let app = router(engine.inbox, engine.publisher);
    let (tx, rx) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        let result = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
        if let Err(e) = result {
            tracing::error!(error = %e, "gateway server failed");
        }
    });
    tracing::info!(%local, "gateway listening");
    Ok(Gateway { addr: local, stop, engine: Some(engine.thread), shutdown: Some(tx), server })
}
