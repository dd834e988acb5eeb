//! Networked tick loop: UDP ingress, optional WebSocket bridge, recorder.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, UdpSocket};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::bridge::{Bridge, BridgeStats};
use super::gain::GainConfig;
use super::mailbox::{Inbound, Mailbox, MailboxStats};
use super::pacing::{sleep_until, JitterLog, JitterStats};
use super::protocol::{ClientMessage, ServerMessage, StreamMode};
use super::recorder::{
    replay_session, FrameRecord, RecordError, ReplayReport, SessionReader, SessionWriter,
};
use super::session::{SessionCounters, SessionError, Simulation, SimulationConfig, TICK_HZ};
use super::wire::{ParticleUpdate, TRAP_COMMAND_LEN};
use crate::config::{load_json, ArrayConfig, ConfigError};
use crate::experiments::{write_condition, ConditionFile, ExperimentError, PointingHarness};
use crate::games::{GameConfig, GameKind, GameRuntime, SessionSummary};
use crate::geometry::{LevitationVolume, Vec3};
use crate::particle_dynamics::{FieldTrap, ForceSource, IntegratorConfig, TrapModel};

const INGRESS_POLL: Duration = Duration::from_millis(20);

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("acoustic model: {0}")]
    Acoustic(#[from] crate::acoustic_field::AcousticError),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> ServerError {
    let context = context.into();
    move |source| ServerError::Io { context, source }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    #[default]
    Linear,
    /// Forces from the acoustic field model around its trap.
    FullField,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub source: ModelSource,
    /// kg
    pub mass: f64,
    /// 1/s
    pub drag: f64,
    /// N/m
    pub stiffness: Vec3,
    pub gravity: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let p = TrapModel::prototype();
        Self {
            source: ModelSource::Linear,
            mass: p.mass,
            drag: p.drag,
            stiffness: p.stiffness,
            gravity: p.gravity,
        }
    }
}

impl ModelConfig {
    pub fn build(
        &self,
        array: &ArrayConfig,
        volume: &LevitationVolume,
    ) -> Result<TrapModel, ServerError> {
        let source = match self.source {
            ModelSource::Linear => ForceSource::Linear,
            ModelSource::FullField => {
                let trap = array.build()?;
                ForceSource::FullField(Arc::new(FieldTrap {
                    center: trap.characterization.center,
                    field: trap.field,
                }))
            }
        };
        Ok(TrapModel {
            mass: self.mass,
            drag: self.drag,
            stiffness: self.stiffness,
            source,
            gravity: self.gravity,
            escape_volume: Some(*volume),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServerMode {
    /// Trap follows the gained input.
    #[default]
    Steer,
    /// Steering with a live pointing trial.
    Pointing,
    BeadBounce,
    LeviShooter,
}

impl ServerMode {
    pub fn name(self) -> &'static str {
        match self {
            ServerMode::Steer => "steer",
            ServerMode::Pointing => "pointing",
            ServerMode::BeadBounce => "bead_bounce",
            ServerMode::LeviShooter => "levi_shooter",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    pub udp_port: u16,
    pub ws_port: u16,
    /// Extra destinations for particle updates besides the last sender.
    pub udp_peers: Vec<SocketAddr>,
    pub model: ModelConfig,
    pub integrator: IntegratorConfig,
    pub gain: GainConfig,
    pub volume: LevitationVolume,
    /// Initial particle position; defaults to the volume centre.
    pub start: Option<Vec3>,
    pub mode: ServerMode,
    pub games: GameConfig,
    /// Task for pointing mode.
    pub pointing: Option<ConditionFile>,
    /// Acoustic model for the full-field force source.
    pub array: ArrayConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            udp_port: 7201,
            ws_port: 7202,
            udp_peers: Vec::new(),
            model: ModelConfig::default(),
            integrator: IntegratorConfig::default(),
            gain: GainConfig::default(),
            volume: LevitationVolume::prototype(),
            start: None,
            mode: ServerMode::Steer,
            games: GameConfig::default(),
            pointing: None,
            array: ArrayConfig::default(),
        }
    }
}

/// Handles to observer state that outlives the simulation.
#[derive(Default)]
pub struct Attachments {
    pub game: Option<Arc<Mutex<SessionSummary>>>,
}

impl ServerConfig {
    pub fn load(path: &Path) -> Result<Self, ServerError> {
        Ok(load_json(path)?)
    }

    /// Listening port 0 picks a free port.
    pub fn ephemeral() -> Self {
        Self {
            udp_port: 0,
            ws_port: 0,
            ..Self::default()
        }
    }

    pub fn simulation_config(&self) -> Result<SimulationConfig, ServerError> {
        Ok(SimulationConfig {
            model: self.model.build(&self.array, &self.volume)?,
            integrator: self.integrator,
            gain: self.gain,
            volume: self.volume,
            start: self.start.unwrap_or_else(|| self.default_start()),
        })
    }

    /// Where the particle is released when no start is configured: under
    /// the game bead, otherwise the volume centre.
    fn default_start(&self) -> Vec3 {
        match self.mode {
            ServerMode::BeadBounce => self.games.bead_bounce.initial_bead(&self.volume).position,
            ServerMode::LeviShooter => self.games.levi_shooter.initial_bead(&self.volume).position,
            _ => self.volume.center(),
        }
    }

    /// The simulation with the observers the mode needs.
    pub fn build_simulation(&self) -> Result<(Simulation, Attachments), ServerError> {
        let mut sim = Simulation::new(self.simulation_config()?)?;
        let mut att = Attachments::default();
        match self.mode {
            ServerMode::Steer => {}
            ServerMode::Pointing => {
                let cond = self.pointing.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("pointing mode needs a \"pointing\" task".into())
                })?;
                cond.task.validate(&self.volume)?;
                sim.add_observer(Box::new(PointingHarness::new(cond.task)));
            }
            ServerMode::BeadBounce | ServerMode::LeviShooter => {
                let kind = if self.mode == ServerMode::BeadBounce {
                    GameKind::BeadBounce
                } else {
                    GameKind::LeviShooter
                };
                let game = GameRuntime::new(kind, self.games, self.volume);
                att.game = Some(game.summary_handle());
                sim.add_observer(Box::new(game));
            }
        }
        Ok((sim, att))
    }

    fn hello(&self, mode: StreamMode) -> String {
        let game = match self.mode {
            ServerMode::Steer => None,
            m => Some(m.name().to_string()),
        };
        ServerMessage::Hello {
            mode,
            tick_hz: TICK_HZ,
            volume: self.volume,
            game,
        }
        .to_json()
    }
}

/// Inputs injected at fixed ticks, before the mailbox is read.
#[derive(Clone, Debug, Default)]
pub struct Script {
    entries: BTreeMap<u64, Vec<ScriptEntry>>,
}

#[derive(Clone, Debug)]
pub enum ScriptEntry {
    Inbound(Inbound),
    /// UDP wire bytes.
    Datagram(Vec<u8>),
    /// WebSocket JSON text.
    Json(String),
}

impl Script {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tick: u64, entry: ScriptEntry) {
        self.entries.entry(tick).or_default().push(entry);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn deliver(&self, tick: u64, mailbox: &Mailbox) {
        for e in self.entries.get(&tick).into_iter().flatten() {
            match e {
                ScriptEntry::Inbound(m) => {
                    mailbox.post(*m);
                }
                ScriptEntry::Datagram(b) => {
                    let _ = mailbox.post_datagram(b);
                }
                ScriptEntry::Json(t) => {
                    match ClientMessage::parse(t).and_then(ClientMessage::into_inbound) {
                        Ok(m) => {
                            mailbox.post(m);
                        }
                        Err(_) => mailbox.count_malformed(),
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Hold each tick to its wall-clock deadline; otherwise run flat out.
    pub paced: bool,
    pub max_ticks: Option<u64>,
    pub record: Option<PathBuf>,
    pub script: Script,
    /// Where to write the game summary JSON.
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub ticks: u64,
    pub frames_recorded: u64,
    pub mailbox: MailboxStats,
    pub jitter: JitterStats,
    pub session: SessionCounters,
    pub bridge: Option<BridgeStats>,
    pub summary: Option<SessionSummary>,
}

struct UdpIngress {
    socket: UdpSocket,
    last_sender: Arc<Mutex<Option<SocketAddr>>>,
    failure: Arc<Mutex<Option<std::io::Error>>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl UdpIngress {
    fn start(socket: UdpSocket, mailbox: Arc<Mailbox>) -> std::io::Result<Self> {
        let rx = socket.try_clone()?;
        rx.set_read_timeout(Some(INGRESS_POLL))?;
        let last_sender: Arc<Mutex<Option<SocketAddr>>> = Arc::default();
        let failure: Arc<Mutex<Option<std::io::Error>>> = Arc::default();
        let stop = Arc::new(AtomicBool::new(false));
        let thread = {
            let (last_sender, failure, stop) = (last_sender.clone(), failure.clone(), stop.clone());
            std::thread::Builder::new()
                .name("udp-ingress".into())
                .spawn(move || {
                    let mut buf = [0u8; 2048];
                    while !stop.load(Ordering::Acquire) {
                        match rx.recv_from(&mut buf) {
                            Ok((n, from)) => {
                                if let Err(e) = mailbox.post_datagram(&buf[..n]) {
                                    log::debug!("dropped datagram from {from}: {e}");
                                } else if n == TRAP_COMMAND_LEN {
                                    *last_sender.lock().unwrap() = Some(from);
                                }
                            }
                            Err(e)
                                if matches!(
                                    e.kind(),
                                    ErrorKind::WouldBlock
                                        | ErrorKind::TimedOut
                                        | ErrorKind::ConnectionRefused
                                ) => {}
                            Err(e) => {
                                log::error!("UDP receive failed: {e}");
                                *failure.lock().unwrap() = Some(e);
                                return;
                            }
                        }
                    }
                })?
        };
        Ok(Self {
            socket,
            last_sender,
            failure,
            stop,
            thread: Some(thread),
        })
    }

    fn send(&self, update: &ParticleUpdate, peers: &[SocketAddr]) {
        let bytes = update.encode();
        let last = *self.last_sender.lock().unwrap();
        for to in last
            .iter()
            .chain(peers.iter().filter(|p| Some(**p) != last))
        {
            if let Err(e) = self.socket.send_to(&bytes, to) {
                log::debug!("update to {to} not sent: {e}");
            }
        }
    }

    fn take_failure(&self) -> Option<std::io::Error> {
        self.failure.lock().unwrap().take()
    }
}

impl Drop for UdpIngress {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Bound endpoints, ready to run a live session or a replay.
pub struct Server {
    config: ServerConfig,
    mailbox: Arc<Mailbox>,
    udp: UdpIngress,
    bridge: Option<Bridge>,
}

impl Server {
    /// Binds UDP and, unless `headless`, the WebSocket bridge. Input is
    /// accepted from here on, so commands sent before [`Server::run`] land
    /// in the first tick.
    pub fn bind(config: ServerConfig, headless: bool) -> Result<Self, ServerError> {
        let mailbox = Arc::new(Mailbox::new());
        let udp_addr = format!("{}:{}", config.bind, config.udp_port);
        let socket =
            UdpSocket::bind(&udp_addr).map_err(io_err(format!("binding UDP {udp_addr}")))?;
        let udp =
            UdpIngress::start(socket, mailbox.clone()).map_err(io_err("starting UDP ingress"))?;
        let bridge = if headless {
            None
        } else {
            let ws_addr = format!("{}:{}", config.bind, config.ws_port);
            let listener = TcpListener::bind(&ws_addr)
                .map_err(io_err(format!("binding WebSocket {ws_addr}")))?;
            Some(
                Bridge::start(listener, mailbox.clone(), config.hello(StreamMode::Live))
                    .map_err(io_err("starting WebSocket bridge"))?,
            )
        };
        Ok(Self {
            config,
            mailbox,
            udp,
            bridge,
        })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn udp_addr(&self) -> SocketAddr {
        self.udp
            .socket
            .local_addr()
            .expect("bound socket has an address")
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.bridge.as_ref().map(Bridge::local_addr)
    }

    pub fn mailbox_stats(&self) -> MailboxStats {
        self.mailbox.stats()
    }

    pub fn bridge_stats(&self) -> Option<BridgeStats> {
        self.bridge.as_ref().map(Bridge::stats)
    }

    fn publish(
        &self,
        update: &ParticleUpdate,
        record: &FrameRecord,
        status: Option<serde_json::Value>,
    ) {
        self.udp.send(update, &self.config.udp_peers);
        if let Some(b) = &self.bridge {
            let events = record.events().map(str::to_owned).collect();
            b.broadcast(&ServerMessage::particle(update, &record.trap(), events, status).to_json());
        }
    }

    /// Runs the live tick loop until `stop` is set, `max_ticks` is reached
    /// or the UDP socket fails.
    pub fn run(self, options: RunOptions, stop: &AtomicBool) -> Result<RunReport, ServerError> {
        let (mut sim, att) = self.config.build_simulation()?;
        let recorder = match &options.record {
            Some(path) => {
                if let (ServerMode::Pointing, Some(c)) = (self.config.mode, &self.config.pointing) {
                    write_condition(path, c)?;
                }
                Some(Recorder::start(SessionWriter::create(path)?)?)
            }
            None => None,
        };

        let period_ns = 1_000_000_000 / TICK_HZ as u128;
        let mut jitter = JitterLog::default();
        let start = Instant::now();
        let mut failure = None;
        while !stop.load(Ordering::Acquire) && options.max_ticks.is_none_or(|m| sim.ticks() < m) {
            if let Some(e) = self.udp.take_failure() {
                failure = Some(e);
                break;
            }
            let tick = sim.ticks();
            if options.paced {
                let deadline = start + Duration::from_nanos((tick as u128 * period_ns) as u64);
                sleep_until(deadline);
                jitter.record(Instant::now().saturating_duration_since(deadline));
            }
            options.script.deliver(tick, &self.mailbox);
            let out = sim.tick(&self.mailbox.take());
            self.publish(&out.update, &out.record, out.status);
            if let Some(r) = &recorder {
                r.push(out.record);
            }
        }

        let frames_recorded = match recorder {
            Some(r) => r.finish()?,
            None => 0,
        };
        let summary = att.game.map(|g| *g.lock().unwrap());
        if let (Some(path), Some(s)) = (&options.summary, &summary) {
            let text = serde_json::to_string_pretty(s).expect("summaries always serialize");
            std::fs::write(path, text).map_err(io_err(format!("writing {}", path.display())))?;
        }
        let bridge = self.bridge.as_ref().map(|b| {
            b.drain(Duration::from_millis(200));
            b.stats()
        });
        if let Some(e) = failure {
            return Err(ServerError::Io {
                context: "UDP socket".into(),
                source: e,
            });
        }
        Ok(RunReport {
            ticks: sim.ticks(),
            frames_recorded,
            mailbox: self.mailbox.stats(),
            jitter: jitter.stats(),
            session: sim.counters(),
            bridge,
            summary,
        })
    }

    /// Re-emits a recorded session to all clients at `speed` times real time.
    pub fn replay(
        &self,
        log: &Path,
        speed: f64,
        stop: &AtomicBool,
    ) -> Result<ReplayReport, ServerError> {
        if let Some(b) = &self.bridge {
            b.set_hello(self.config.hello(StreamMode::Replay));
        }
        let reader = SessionReader::open(log)?;
        let report = replay_session(reader, speed, stop, |u, rec| self.publish(u, rec, None))?;
        if let Some(b) = &self.bridge {
            b.drain(Duration::from_millis(200));
        }
        Ok(report)
    }
}

/// Writes frames on its own thread; dropping the sender drains it.
struct Recorder {
    tx: mpsc::Sender<FrameRecord>,
    thread: JoinHandle<Result<u64, RecordError>>,
}

impl Recorder {
    fn start<W: std::io::Write + Send + 'static>(
        mut writer: SessionWriter<W>,
    ) -> Result<Self, ServerError> {
        let (tx, rx) = mpsc::channel::<FrameRecord>();
        let thread = std::thread::Builder::new()
            .name("recorder".into())
            .spawn(move || {
                let mut n = 0;
                for rec in rx {
                    writer.write(&rec)?;
                    n += 1;
                }
                writer.flush()?;
                Ok(n)
            })
            .map_err(io_err("starting recorder"))?;
        Ok(Self { tx, thread })
    }

    fn push(&self, record: FrameRecord) {
        // A failed writer surfaces its error from `finish`.
        let _ = self.tx.send(record);
    }

    fn finish(self) -> Result<u64, RecordError> {
        drop(self.tx);
        self.thread.join().expect("recorder thread panicked")
    }
}

/// Runs a session without sockets: scripted input, no pacing.
pub fn run_offline(
    config: &ServerConfig,
    script: &Script,
    ticks: u64,
    mut sink: impl FnMut(&super::session::TickOutput),
) -> Result<(SessionCounters, MailboxStats), ServerError> {
    let (mut sim, _) = config.build_simulation()?;
    let mailbox = Mailbox::new();
    for tick in 0..ticks {
        script.deliver(tick, &mailbox);
        let out = sim.tick(&mailbox.take());
        sink(&out);
    }
    Ok((sim.counters(), mailbox.stats()))
}
