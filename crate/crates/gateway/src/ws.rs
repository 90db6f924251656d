use std::collections::HashSet;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use futures::{SinkExt, StreamExt};
use nudge_core::gateway::payload::ErrorEvent;
use nudge_core::gateway::{decode, encode, Envelope, MessageType};
use tokio::sync::{broadcast, mpsc};

use crate::hub::{Hub, Subscription};

pub(crate) async fn upgrade(ws: WebSocketUpgrade, State(hub): State<Arc<Hub>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, hub))
}

fn local_error(session_id: &str, code: &str, message: String, cause: Option<&Envelope>) -> Envelope {
    Envelope::with_payload(
        MessageType::Error,
        session_id,
        0,
        0,
        &ErrorEvent {
            code: code.to_string(),
            message,
            ref_seq: cause.map(|e| e.seq),
            ref_type: cause.map(|e| e.kind.as_str().to_string()),
        },
    )
}

async fn connection(socket: WebSocket, hub: Arc<Hub>) {
    let (mut sink, mut stream) = socket.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<Envelope>();
    let writer = tokio::spawn(async move {
        while let Some(env) = out_rx.recv().await {
            if sink.send(Message::Text(encode(&env).into())).await.is_err() {
                break;
            }
        }
    });
    let mut subscribed: HashSet<String> = HashSet::new();
    let mut forwarders = Vec::new();

    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        let env = match decode(&text) {
            Ok(env) => env,
            Err(e) => {
                let _ = out_tx.send(local_error("", e.code(), e.to_string(), None));
                continue;
            }
        };
        let wants_backlog = env.kind == MessageType::Subscribe;
        let already = subscribed.contains(&env.session_id);
        let session_id = env.session_id.clone();
        let cause = env.clone();
        match hub.submit(env, wants_backlog).await {
            Some(sub) => {
                // a repeated subscribe replays the backlog; live events already flow
                if already && !wants_backlog {
                    continue;
                }
                subscribed.insert(session_id);
                forwarders.push(tokio::spawn(forward(sub, out_tx.clone(), already)));
            }
            None => {
                let _ = out_tx.send(local_error(
                    &session_id,
                    "UnknownSession",
                    format!("no session {session_id:?}"),
                    Some(&cause),
                ));
            }
        }
    }
    for f in forwarders {
        f.abort();
    }
    drop(out_tx);
    let _ = writer.await;
}

async fn forward(sub: Subscription, out: mpsc::UnboundedSender<Envelope>, backlog_only: bool) {
    for env in sub.backlog {
        if out.send(env).is_err() {
            return;
        }
    }
    if backlog_only {
        return;
    }
    let mut live = sub.live;
    loop {
        match live.recv().await {
            Ok(env) => {
                if out.send(env).is_err() {
                    return;
                }
            }
            Err(broadcast::error::RecvError::Lagged(n)) => {
                let _ = out.send(local_error("", "Lagged", format!("{n} events were dropped for this subscriber"), None));
            }
            Err(broadcast::error::RecvError::Closed) => return,
        }
    }
}
