//! Interaction server: a fixed 90 Hz tick loop that owns the simulation,
//! takes trap commands over UDP or WebSocket through a latest-wins mailbox,
//! broadcasts particle updates, and records or replays per-frame CSV logs.

mod bridge;
mod gain;
mod mailbox;
mod pacing;
mod protocol;
mod recorder;
mod server;
mod session;
pub mod wire;

pub use bridge::{Bridge, BridgeStats};
pub use gain::{apply_cd_gain, GainConfig, GainOutput};
pub use mailbox::{ingest_command, Inbound, Mailbox, MailboxStats, TickInput};
pub use pacing::{sleep_until, JitterLog, JitterStats};
pub use protocol::{ClientMessage, ProtocolError, ServerMessage, StreamMode};
pub use recorder::{
    read_session, replay_session, FrameRecord, RecordError, ReplayReport, SessionReader,
    SessionWriter, UpdateReconstructor,
};
pub use server::{
    run_offline, Attachments, ModelConfig, ModelSource, RunOptions, RunReport, Script, ScriptEntry,
    Server, ServerConfig, ServerError, ServerMode,
};
pub use session::{
    frame_us, tick_seconds, FrameObserver, SessionCounters, SessionError, Simulation,
    SimulationConfig, TickContext, TickOutput, TICK_HZ, TICK_SECONDS,
};
pub use wire::{MessageType, ParticleUpdate, TrapCommand, UpdateFlags, WireError};
