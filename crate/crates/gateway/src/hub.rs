use std::collections::HashMap;
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::Duration;

use nudge_core::clock::WallClock;
use nudge_core::gateway::{Envelope, Gateway, MessageType};
use nudge_core::providers::Tracer;
use nudge_core::session::Session;
use nudge_core::user_model::UserProfile;
use tokio::sync::{broadcast, oneshot};

use crate::ServerConfig;

const EVENT_BUFFER: usize = 4096;

pub(crate) struct Subscription {
    pub backlog: Vec<Envelope>,
    pub live: broadcast::Receiver<Envelope>,
}

enum Command {
    Inbound(Envelope),
    Subscribe {
        backlog: bool,
        reply: oneshot::Sender<Subscription>,
    },
}

struct SessionWorker {
    commands: mpsc::Sender<Command>,
}

/// Registry of per-session workers.
pub struct Hub {
    config: ServerConfig,
    workers: Mutex<HashMap<String, SessionWorker>>,
}

impl Hub {
    pub fn new(config: ServerConfig) -> Self {
        Self {
            config,
            workers: Mutex::new(HashMap::new()),
        }
    }

    pub fn session_count(&self) -> usize {
        self.workers.lock().expect("hub lock").len()
    }

    fn spawn_worker(&self, session_id: &str) -> SessionWorker {
        let (tx, rx) = mpsc::channel();
        let config = self.config.clone();
        let id = session_id.to_string();
        thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || run_worker(id, config, rx))
            .expect("spawn session worker");
        SessionWorker { commands: tx }
    }

    /// Queues an envelope for its session and subscribes the caller to live events.
    /// Returns `None` when the session does not exist and `envelope` cannot create it.
    pub(crate) async fn submit(&self, envelope: Envelope, backlog: bool) -> Option<Subscription> {
        let (reply_tx, reply_rx) = oneshot::channel();
        {
            let mut workers = self.workers.lock().expect("hub lock");
            if !workers.contains_key(&envelope.session_id) {
                if envelope.kind != MessageType::SessionStart {
                    return None;
                }
                let worker = self.spawn_worker(&envelope.session_id);
                workers.insert(envelope.session_id.clone(), worker);
            }
            let worker = &workers[&envelope.session_id];
            // subscribe first so the caller sees the reply to its own envelope
            worker
                .commands
                .send(Command::Subscribe {
                    backlog,
                    reply: reply_tx,
                })
                .ok()?;
            if envelope.kind != MessageType::Subscribe {
                worker.commands.send(Command::Inbound(envelope)).ok()?;
            }
        }
        reply_rx.await.ok()
    }
}

fn run_worker(session_id: String, config: ServerConfig, commands: mpsc::Receiver<Command>) {
    let (events, _) = broadcast::channel(EVENT_BUFFER);
    let factory_config = config.clone();
    let mut gateway = Gateway::new(move |id: &str, profile: UserProfile| {
        let clock = WallClock::new();
        let providers = factory_config
            .mocks
            .build_with_clock(Arc::new(clock), Tracer::new(id), factory_config.latency)
            .with_deadlines(factory_config.deadlines);
        Session::new(id, profile, factory_config.session, providers)
    });
    let tick = Duration::from_millis(config.session.tick_ms.max(1));
    loop {
        let out = match commands.recv_timeout(tick) {
            Ok(Command::Inbound(env)) => gateway.handle(env),
            Ok(Command::Subscribe { backlog, reply }) => {
                let backlog = if backlog {
                    gateway.session(&session_id).map(|s| s.log().to_vec()).unwrap_or_default()
                } else {
                    Vec::new()
                };
                let _ = reply.send(Subscription {
                    backlog,
                    live: events.subscribe(),
                });
                continue;
            }
            Err(mpsc::RecvTimeoutError::Timeout) => gateway.tick(&session_id),
            Err(mpsc::RecvTimeoutError::Disconnected) => return,
        };
        for env in out {
            // no receivers is fine; the session log keeps everything
            let _ = events.send(env);
        }
    }
}
