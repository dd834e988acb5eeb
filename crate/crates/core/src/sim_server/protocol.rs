//! JSON mirrors of the wire messages, carried over the WebSocket bridge.

use serde::{Deserialize, Serialize};

use super::mailbox::Inbound;
use super::wire::{ParticleUpdate, TrapCommand};
use crate::games::{GunPose, RacketPose};
use crate::geometry::{LevitationVolume, Vec3};

/// Messages a browser client may send.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Trap {
        seq: u32,
        #[serde(default)]
        t_us: u64,
        pos: Vec3,
    },
    Racket {
        seq: u32,
        #[serde(default)]
        t_us: u64,
        center: Vec3,
        normal: Vec3,
        #[serde(default)]
        radius: Option<f64>,
    },
    Gun {
        seq: u32,
        #[serde(default)]
        t_us: u64,
        origin: Vec3,
        direction: Vec3,
        #[serde(default)]
        trigger: bool,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Json(#[from] serde_json::Error),
    #[error("non-finite value in {0} message")]
    NonFinite(&'static str),
}

fn finite(vs: &[&Vec3]) -> bool {
    vs.iter().all(|v| v.iter().all(|c| c.is_finite()))
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn into_inbound(self) -> Result<Inbound, ProtocolError> {
        match self {
            ClientMessage::Trap { seq, t_us, pos } => {
                if !finite(&[&pos]) {
                    return Err(ProtocolError::NonFinite("trap"));
                }
                Ok(Inbound::Trap(TrapCommand {
                    seq,
                    t_us,
                    position: pos,
                }))
            }
            ClientMessage::Racket {
                seq,
                center,
                normal,
                radius,
                ..
            } => {
                let radius = radius.unwrap_or(RacketPose::DEFAULT_RADIUS);
                if !finite(&[&center, &normal]) || !(radius.is_finite() && radius > 0.0) {
                    return Err(ProtocolError::NonFinite("racket"));
                }
                Ok(Inbound::Racket {
                    seq,
                    pose: RacketPose {
                        center,
                        normal,
                        radius,
                        velocity: Vec3::zeros(),
                    },
                })
            }
            ClientMessage::Gun {
                seq,
                origin,
                direction,
                trigger,
                ..
            } => {
                if !finite(&[&origin, &direction]) {
                    return Err(ProtocolError::NonFinite("gun"));
                }
                Ok(Inbound::Gun {
                    seq,
                    pose: GunPose {
                        origin,
                        direction,
                        trigger,
                    },
                })
            }
        }
    }
}

impl From<&TrapCommand> for ClientMessage {
    fn from(cmd: &TrapCommand) -> Self {
        ClientMessage::Trap {
            seq: cmd.seq,
            t_us: cmd.t_us,
            pos: cmd.position,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamMode {
    Live,
    Replay,
}

/// Messages the server sends to browser clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        mode: StreamMode,
        tick_hz: u64,
        volume: LevitationVolume,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        game: Option<String>,
    },
    Particle {
        seq: u32,
        t_us: u64,
        pos: Vec3,
        vel: Vec3,
        flags: u32,
        escaped: bool,
        target_hit: bool,
        trap: Vec3,
        #[serde(default)]
        events: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        game: Option<serde_json::Value>,
    },
}

impl ServerMessage {
    pub fn particle(
        update: &ParticleUpdate,
        trap: &Vec3,
        events: Vec<String>,
        game: Option<serde_json::Value>,
    ) -> Self {
        ServerMessage::Particle {
            seq: update.seq,
            t_us: update.t_us,
            pos: update.position,
            vel: update.velocity,
            flags: update.flags.0,
            escaped: update.flags.escaped(),
            target_hit: update.flags.target_hit(),
            trap: *trap,
            events,
            game,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }

    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        Ok(serde_json::from_str(text)?)
    }

    /// The wire update carried by a particle message.
    pub fn update(&self) -> Option<ParticleUpdate> {
        match self {
            ServerMessage::Particle {
                seq,
                t_us,
                pos,
                vel,
                flags,
                ..
            } => Some(ParticleUpdate {
                seq: *seq,
                t_us: *t_us,
                position: *pos,
                velocity: *vel,
                flags: super::wire::UpdateFlags(*flags),
            }),
            ServerMessage::Hello { .. } => None,
        }
    }
}
