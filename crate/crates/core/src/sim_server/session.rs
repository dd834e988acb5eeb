//! The deterministic core of the server: one call per 90 Hz tick.

use serde::{Deserialize, Serialize};

use super::gain::{apply_cd_gain, GainConfig};
use super::mailbox::TickInput;
use super::recorder::FrameRecord;
use super::wire::{ParticleUpdate, UpdateFlags};
use crate::games::{GunPose, RacketPose};
use crate::geometry::{LevitationVolume, Vec3};
use crate::particle_dynamics::{step, IntegratorConfig, ParticleState, TrapModel};

pub const TICK_HZ: u64 = 90;
pub const TICK_SECONDS: f64 = 1.0 / TICK_HZ as f64;

/// Timestamp of the frame that ends tick `tick - 1`, µs.
pub fn frame_us(tick: u64) -> u64 {
    tick * 1_000_000 / TICK_HZ
}

/// Simulated time at the start of tick `tick`, s.
pub fn tick_seconds(tick: u64) -> f64 {
    tick as f64 / TICK_HZ as f64
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("invalid session setup: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub model: TrapModel,
    pub integrator: IntegratorConfig,
    pub gain: GainConfig,
    pub volume: LevitationVolume,
    /// Initial particle and trap position.
    pub start: Vec3,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let volume = LevitationVolume::prototype();
        Self {
            model: TrapModel::prototype(),
            integrator: IntegratorConfig::default(),
            gain: GainConfig::default(),
            start: volume.center(),
            volume,
        }
    }
}

/// Per-tick view handed to observers.
pub struct TickContext<'a> {
    /// Index of the tick being run, from 0.
    pub tick: u64,
    /// Simulated time at the start of the tick, s.
    pub time: f64,
    pub dt: f64,
    /// Timestamp of the frame this tick produces, µs.
    pub frame_us: u64,
    /// Raw input position recorded for this frame.
    pub input: Vec3,
    /// Trap position held during the tick; observers may move it before the step.
    pub trap: Vec3,
    /// Particle state: before the step in `before_step`, after it in `after_step`.
    pub particle: ParticleState,
    pub racket: Option<&'a RacketPose>,
    pub gun: Option<&'a GunPose>,
    pub volume: &'a LevitationVolume,
    pub events: &'a mut Vec<String>,
    pub target_hit: bool,
}

/// Something attached to the tick loop: an experiment harness or a game.
pub trait FrameObserver: Send {
    fn before_step(&mut self, _ctx: &mut TickContext<'_>) {}

    fn after_step(&mut self, _ctx: &mut TickContext<'_>) {}

    /// State to publish alongside each update, if any.
    fn status(&self) -> Option<serde_json::Value> {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TickOutput {
    pub update: ParticleUpdate,
    pub record: FrameRecord,
    pub trap: Vec3,
    pub status: Option<serde_json::Value>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCounters {
    pub ticks: u64,
    pub clamped: u64,
    pub integration_failures: u64,
}

pub struct Simulation {
    config: SimulationConfig,
    state: ParticleState,
    trap: Vec3,
    input: Vec3,
    tick: u64,
    escape_reported: bool,
    observers: Vec<Box<dyn FrameObserver>>,
    counters: SessionCounters,
}

impl Simulation {
    pub fn new(config: SimulationConfig) -> Result<Self, SessionError> {
        config
            .model
            .validate()
            .map_err(|e| SessionError::Invalid(e.to_string()))?;
        config
            .integrator
            .validate()
            .map_err(|e| SessionError::Invalid(e.to_string()))?;
        config.gain.validate().map_err(SessionError::Invalid)?;
        if !config.volume.is_valid() {
            return Err(SessionError::Invalid("empty levitation volume".into()));
        }
        if !config.volume.contains(&config.start) {
            return Err(SessionError::Invalid(format!(
                "start {:?} lies outside the volume",
                config.start.as_slice()
            )));
        }
        let g = &config.gain;
        let input = g.control_origin + (config.start - g.display_origin) * g.ratio;
        let mut config = config;
        if config.model.escape_volume.is_none() {
            config.model.escape_volume = Some(config.volume);
        }
        Ok(Self {
            state: ParticleState::at_rest(config.start),
            trap: config.start,
            input,
            tick: 0,
            escape_reported: false,
            observers: Vec::new(),
            counters: SessionCounters::default(),
            config,
        })
    }

    pub fn add_observer(&mut self, observer: Box<dyn FrameObserver>) {
        self.observers.push(observer);
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn state(&self) -> &ParticleState {
        &self.state
    }

    pub fn trap(&self) -> Vec3 {
        self.trap
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn counters(&self) -> SessionCounters {
        self.counters
    }

    pub fn status(&self) -> Option<serde_json::Value> {
        self.observers.iter().find_map(|o| o.status())
    }

    /// Applies the newest command, advances exactly one tick of simulated
    /// time with the trap held, and reports the frame.
    pub fn tick(&mut self, input: &TickInput) -> TickOutput {
        let k = self.tick;
        let mut events = Vec::new();
        if let Some(cmd) = input.trap {
            self.input = cmd.position;
            let g = apply_cd_gain(&cmd.position, &self.config.gain, &self.config.volume);
            self.trap = g.trap;
            if g.clamped {
                self.counters.clamped += 1;
                events.push("clamped".to_string());
            }
        }
        self.state.time = tick_seconds(k);
        let mut observers = std::mem::take(&mut self.observers);
        let mut ctx = TickContext {
            tick: k,
            time: tick_seconds(k),
            dt: TICK_SECONDS,
            frame_us: frame_us(k + 1),
            input: self.input,
            trap: self.trap,
            particle: self.state,
            racket: input.racket.as_ref(),
            gun: input.gun.as_ref(),
            volume: &self.config.volume,
            events: &mut events,
            target_hit: false,
        };
        for o in observers.iter_mut() {
            o.before_step(&mut ctx);
        }
        let (trap, frame_input) = (ctx.trap, ctx.input);
        let mut target_hit = ctx.target_hit;
        self.trap = trap;

        let next = match step(
            &self.state,
            &self.trap,
            &self.config.model,
            &self.config.integrator,
            TICK_SECONDS,
        ) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("tick {k}: integration failed, particle dropped: {e}");
                self.counters.integration_failures += 1;
                ParticleState {
                    velocity: Vec3::zeros(),
                    escaped: true,
                    ..self.state
                }
            }
        };
        self.state = ParticleState {
            time: tick_seconds(k + 1),
            ..next
        };
        if self.state.escaped && !self.escape_reported {
            self.escape_reported = true;
            events.push("escaped".to_string());
        }

        let mut ctx = TickContext {
            tick: k,
            time: tick_seconds(k),
            dt: TICK_SECONDS,
            frame_us: frame_us(k + 1),
            input: frame_input,
            trap: self.trap,
            particle: self.state,
            racket: input.racket.as_ref(),
            gun: input.gun.as_ref(),
            volume: &self.config.volume,
            events: &mut events,
            target_hit,
        };
        for o in observers.iter_mut() {
            o.after_step(&mut ctx);
        }
        target_hit = ctx.target_hit;
        self.observers = observers;

        self.tick += 1;
        self.counters.ticks = self.tick;
        let t_us = frame_us(self.tick);
        let update = ParticleUpdate {
            seq: self.tick as u32,
            t_us,
            position: self.state.position,
            velocity: self.state.velocity,
            flags: UpdateFlags::new(self.state.escaped, target_hit),
        };
        let record = FrameRecord::new(
            t_us,
            &frame_input,
            &self.trap,
            &self.state.position,
            &events,
        );
        TickOutput {
            update,
            record,
            trap: self.trap,
            status: self.status(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim_server::wire::TrapCommand;

    fn command(seq: u32, position: Vec3) -> TickInput {
        TickInput {
            trap: Some(TrapCommand {
                seq,
                t_us: 0,
                position,
            }),
            ..TickInput::default()
        }
    }

    #[test]
    fn frame_clock() {
        assert_eq!(frame_us(0), 0);
        assert_eq!(frame_us(1), 11_111);
        assert_eq!(frame_us(90), 1_000_000);
        assert_eq!(frame_us(270), 3_000_000);
        assert!((0..1000).all(|k| frame_us(k + 1) > frame_us(k)));
    }

    #[test]
    fn idle_second_emits_ninety_updates() {
        let mut sim = Simulation::new(SimulationConfig::default()).unwrap();
        let outs: Vec<_> = (0..90).map(|_| sim.tick(&TickInput::default())).collect();
        assert_eq!(outs.len(), 90);
        assert_eq!(outs.last().unwrap().update.t_us, 1_000_000);
        assert!(outs.windows(2).all(|w| w[1].update.t_us > w[0].update.t_us));
        assert!(outs.iter().all(|o| o.update.position == Vec3::zeros()));
        assert_eq!(sim.ticks(), 90);
    }

    #[test]
    fn particle_settles_toward_last_trap() {
        let mut sim = Simulation::new(SimulationConfig::default()).unwrap();
        let target = Vec3::new(0.005, 0.0, 0.0);
        sim.tick(&command(1, target));
        let mut last = f64::INFINITY;
        for second in 0..3 {
            for _ in 0..90 {
                sim.tick(&TickInput::default());
            }
            let err = (sim.state().position - target).norm();
            assert!(err < last, "second {second}");
            last = err;
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn clamped_commands_are_tagged() {
        let mut config = SimulationConfig::default();
        config.start = Vec3::new(0.065, 0.0, 0.0);
        let mut sim = Simulation::new(config).unwrap();
        let out = sim.tick(&command(1, Vec3::new(0.2, 0.0, 0.0)));
        assert_eq!(out.record.event, "clamped");
        assert_eq!(out.trap, Vec3::new(0.07, 0.0, 0.0));
        assert_eq!(out.record.in_x, 0.2);
        assert_eq!(sim.counters().clamped, 1);
    }

    #[test]
    fn integration_failure_drops_particle_and_continues() {
        let mut config = SimulationConfig::default();
        config.model.stiffness.z = 1e9;
        config.integrator.min_step = 1e-7;
        let mut sim = Simulation::new(config).unwrap();
        let out = sim.tick(&command(1, Vec3::new(0.0, 0.0, 0.001)));
        assert!(out.update.flags.escaped());
        assert_eq!(out.record.event, "escaped");
        let out = sim.tick(&TickInput::default());
        assert!(out.update.flags.escaped());
        assert_eq!(out.record.event, "");
        assert_eq!(sim.counters().integration_failures, 2);
    }

    #[test]
    fn observers_can_move_the_trap_and_tag_frames() {
        struct Pusher;
        impl FrameObserver for Pusher {
            fn before_step(&mut self, ctx: &mut TickContext<'_>) {
                ctx.trap = Vec3::new(0.001, 0.0, 0.0);
            }
            fn after_step(&mut self, ctx: &mut TickContext<'_>) {
                ctx.events.push("seen".into());
                ctx.target_hit = true;
            }
            fn status(&self) -> Option<serde_json::Value> {
                Some(serde_json::json!({"ok": true}))
            }
        }
        let mut sim = Simulation::new(SimulationConfig::default()).unwrap();
        sim.add_observer(Box::new(Pusher));
        let out = sim.tick(&TickInput::default());
        assert_eq!(out.trap.x, 0.001);
        assert!(out.update.position.x > 0.0);
        assert_eq!(out.record.event, "seen");
        assert!(out.update.flags.target_hit());
        assert_eq!(out.status.unwrap()["ok"], true);
    }

    #[test]
    fn rejects_bad_setup() {
        let mut config = SimulationConfig::default();
        config.start = Vec3::new(1.0, 0.0, 0.0);
        assert!(Simulation::new(config).is_err());
        let mut config = SimulationConfig::default();
        config.gain.ratio = 0.0;
        assert!(Simulation::new(config).is_err());
    }
}
