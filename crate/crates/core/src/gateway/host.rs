use std::collections::BTreeMap;

use super::payload::{ErrorEvent, SessionStart};
use super::{decode, Envelope, MessageType};
use crate::session::{Session, SessionError};
use crate::user_model::UserProfile;

/// Builds the pipeline for a newly started session.
pub trait SessionFactory: Send {
    fn create(&mut self, session_id: &str, profile: UserProfile) -> Result<Session, SessionError>;
}

impl<F> SessionFactory for F
where
    F: FnMut(&str, UserProfile) -> Result<Session, SessionError> + Send,
{
    fn create(&mut self, session_id: &str, profile: UserProfile) -> Result<Session, SessionError> {
        self(session_id, profile)
    }
}

/// A session plus the inbound sequencing state the gateway keeps for it.
pub struct SessionEndpoint {
    session: Session,
    last_inbound_seq: u64,
}

impl SessionEndpoint {
    pub fn new(session: Session, start_seq: u64) -> Self {
        Self {
            session,
            last_inbound_seq: start_seq,
        }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn session_mut(&mut self) -> &mut Session {
        &mut self.session
    }

    /// Delivers one inbound envelope, or answers it with exactly one error.
    pub fn handle(&mut self, envelope: &Envelope) -> Vec<Envelope> {
        if self.session.is_stopped() {
            self.session
                .emit_error("SessionClosed", format!("session {} is stopped", self.session.id()), Some(envelope));
            return self.session.tick_output();
        }
        if envelope.seq <= self.last_inbound_seq {
            self.session.emit_error(
                "ProtocolViolation",
                format!("seq {} not after {}", envelope.seq, self.last_inbound_seq),
                Some(envelope),
            );
            return self.session.tick_output();
        }
        self.last_inbound_seq = envelope.seq;
        self.session.handle_inbound(envelope)
    }

    pub fn tick(&mut self) -> Vec<Envelope> {
        self.session.tick()
    }
}

/// Session registry and entry point for every client frame.
pub struct Gateway {
    factory: Box<dyn SessionFactory>,
    sessions: BTreeMap<String, SessionEndpoint>,
    orphan_seq: u64,
}

impl Gateway {
    pub fn new(factory: impl SessionFactory + 'static) -> Self {
        Self {
            factory: Box::new(factory),
            sessions: BTreeMap::new(),
            orphan_seq: 0,
        }
    }

    pub fn session(&self, session_id: &str) -> Option<&Session> {
        self.sessions.get(session_id).map(SessionEndpoint::session)
    }

    pub fn session_ids(&self) -> impl Iterator<Item = &str> {
        self.sessions.keys().map(String::as_str)
    }

    /// Decodes a text frame and handles it. Undecodable frames yield one error.
    pub fn handle_text(&mut self, text: &str) -> Vec<Envelope> {
        match decode(text) {
            Ok(env) => self.handle(env),
            Err(e) => {
                let session_id = serde_json::from_str::<serde_json::Value>(text)
                    .ok()
                    .and_then(|v| v.get("session_id").and_then(|s| s.as_str()).map(str::to_string))
                    .unwrap_or_default();
                vec![self.orphan_error(&session_id, e.code(), e.to_string(), None)]
            }
        }
    }

    pub fn handle(&mut self, envelope: Envelope) -> Vec<Envelope> {
        match envelope.kind {
            MessageType::SessionStart => self.start(envelope),
            MessageType::Subscribe => match self.sessions.get(&envelope.session_id) {
                Some(ep) => ep.session().log().to_vec(),
                None => vec![self.unknown_session(&envelope)],
            },
            _ => match self.sessions.get_mut(&envelope.session_id) {
                Some(ep) => ep.handle(&envelope),
                None => vec![self.unknown_session(&envelope)],
            },
        }
    }

    pub fn tick(&mut self, session_id: &str) -> Vec<Envelope> {
        self.sessions.get_mut(session_id).map(SessionEndpoint::tick).unwrap_or_default()
    }

    pub fn tick_all(&mut self) -> Vec<Envelope> {
        self.sessions.values_mut().flat_map(SessionEndpoint::tick).collect()
    }

    fn start(&mut self, envelope: Envelope) -> Vec<Envelope> {
        if self.sessions.contains_key(&envelope.session_id) {
            let ep = self.sessions.get_mut(&envelope.session_id).expect("checked");
            ep.session_mut().emit_error(
                "ProtocolViolation",
                format!("session {} already started", envelope.session_id),
                Some(&envelope),
            );
            return ep.session_mut().tick_output();
        }
        let start = match envelope.payload_as::<SessionStart>() {
            Ok(s) => s,
            Err(e) => return vec![self.orphan_error(&envelope.session_id, e.code(), e.to_string(), Some(&envelope))],
        };
        match self.factory.create(&envelope.session_id, start.profile) {
            Ok(session) => {
                let mut ep = SessionEndpoint::new(session, envelope.seq);
                let out = ep.session_mut().start();
                self.sessions.insert(envelope.session_id.clone(), ep);
                out
            }
            Err(e) => vec![self.orphan_error(&envelope.session_id, "InvalidProfile", e.to_string(), Some(&envelope))],
        }
    }

    fn unknown_session(&mut self, envelope: &Envelope) -> Envelope {
        let id = envelope.session_id.clone();
        self.orphan_error(&id, "UnknownSession", format!("no session {id:?}"), Some(envelope))
    }

    fn orphan_error(&mut self, session_id: &str, code: &str, message: String, cause: Option<&Envelope>) -> Envelope {
        let seq = self.orphan_seq;
        self.orphan_seq += 1;
        Envelope::with_payload(
            MessageType::Error,
            session_id,
            seq,
            0,
            &ErrorEvent {
                code: code.to_string(),
                message,
                ref_seq: cause.map(|e| e.seq),
                ref_type: cause.map(|e| e.kind.as_str().to_string()),
            },
        )
    }
}
