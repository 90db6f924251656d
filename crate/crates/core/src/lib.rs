pub mod clock;
pub mod context_classifier;
pub mod debouncer;
pub mod frame_pipeline;
pub mod frame_source;
pub mod gateway;
pub mod perception;
pub mod proactive_agent;
pub mod providers;
pub mod scenario;
pub mod session;
pub mod user_model;
