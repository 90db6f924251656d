//! Websocket front end for the nudging pipeline.
//!
//! Clients connect to `/ws` and exchange JSON envelopes. Each session runs on
//! its own worker thread, so envelopes of one session are processed strictly
//! in arrival order while sessions proceed independently. A connection that
//! sends `subscribe` receives the session's backlog followed by live events;
//! a connection that sends any other envelope for a session receives that
//! session's live events from then on.

mod hub;
mod ws;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::routing::get;
use axum::Router;
use nudge_core::providers::{Deadlines, ProviderLatencyProfile};
use nudge_core::scenario::MockScripts;
use nudge_core::session::SessionConfig;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

pub use hub::Hub;

/// Pipeline and provider settings applied to every session the server starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub session: SessionConfig,
    pub latency: ProviderLatencyProfile,
    pub deadlines: Deadlines,
    pub mocks: MockScripts,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            session: SessionConfig::default(),
            latency: ProviderLatencyProfile::default(),
            deadlines: Deadlines::default(),
            mocks: MockScripts {
                strict: false,
                ..MockScripts::default()
            },
        }
    }
}

pub fn router(hub: Arc<Hub>) -> Router {
    Router::new().route("/ws", get(ws::upgrade)).with_state(hub)
}

/// Serves `/ws` on an already bound listener until the task is dropped.
pub async fn serve(listener: TcpListener, config: ServerConfig) -> std::io::Result<()> {
    let hub = Arc::new(Hub::new(config));
    axum::serve(listener, router(hub)).await
}

/// Binds `addr` and serves in the background; returns the bound address.
pub async fn spawn(addr: SocketAddr, config: ServerConfig) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = serve(listener, config).await {
            tracing::error!("gateway stopped: {e}");
        }
    });
    Ok((local, handle))
}
