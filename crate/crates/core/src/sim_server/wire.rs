//! Fixed-size little-endian datagrams.
//!
//! ```text
//! offset  size  field
//! 0       2     magic 0x4C56
//! 2       1     version (1)
//! 3       1     type (1 = trap command, 2 = particle update)
//! 4       4     sequence
//! 8       8     timestamp, µs
//! 16      24    position x, y, z (f64)
//! 40      24    velocity x, y, z (f64)   update only
//! 64      4     flags                    update only
//! ```

use crate::geometry::Vec3;

pub const MAGIC: u16 = 0x4C56;
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
pub const TRAP_COMMAND_LEN: usize = 40;
pub const PARTICLE_UPDATE_LEN: usize = 68;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageType {
    TrapCommand = 1,
    ParticleUpdate = 2,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("datagram is {got} bytes, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("bad magic {0:#06x}")]
    Magic(u16),
    #[error("unsupported version {0}")]
    Version(u8),
    #[error("unexpected message type {0}")]
    Type(u8),
    #[error("non-finite coordinate")]
    NonFinite,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapCommand {
    pub seq: u32,
    /// Send time, µs since session start.
    pub t_us: u64,
    /// m
    pub position: Vec3,
}

/// Bit set carried in every particle update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct UpdateFlags(pub u32);

impl UpdateFlags {
    pub const ESCAPED: u32 = 1;
    pub const TARGET_HIT: u32 = 1 << 1;

    pub fn new(escaped: bool, target_hit: bool) -> Self {
        let mut bits = 0;
        if escaped {
            bits |= Self::ESCAPED;
        }
        if target_hit {
            bits |= Self::TARGET_HIT;
        }
        UpdateFlags(bits)
    }

    pub fn escaped(self) -> bool {
        self.0 & Self::ESCAPED != 0
    }

    pub fn target_hit(self) -> bool {
        self.0 & Self::TARGET_HIT != 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleUpdate {
    pub seq: u32,
    /// Simulated time, µs.
    pub t_us: u64,
    /// m
    pub position: Vec3,
    /// m/s
    pub velocity: Vec3,
    pub flags: UpdateFlags,
}

fn put_header(buf: &mut [u8], kind: MessageType, seq: u32, t_us: u64) {
    buf[0..2].copy_from_slice(&MAGIC.to_le_bytes());
    buf[2] = VERSION;
    buf[3] = kind as u8;
    buf[4..8].copy_from_slice(&seq.to_le_bytes());
    buf[8..16].copy_from_slice(&t_us.to_le_bytes());
}

fn put_vec(buf: &mut [u8], v: &Vec3) {
    for i in 0..3 {
        buf[8 * i..8 * i + 8].copy_from_slice(&v[i].to_le_bytes());
    }
}

fn get_vec(buf: &[u8]) -> Vec3 {
    let f = |i: usize| f64::from_le_bytes(buf[8 * i..8 * i + 8].try_into().unwrap());
    Vec3::new(f(0), f(1), f(2))
}

/// Checks length and header, returning `(seq, t_us)`.
fn check_header(buf: &[u8], kind: MessageType, len: usize) -> Result<(u32, u64), WireError> {
    if buf.len() != len {
        return Err(WireError::Length {
            expected: len,
            got: buf.len(),
        });
    }
    let magic = u16::from_le_bytes([buf[0], buf[1]]);
    if magic != MAGIC {
        return Err(WireError::Magic(magic));
    }
    if buf[2] != VERSION {
        return Err(WireError::Version(buf[2]));
    }
    if buf[3] != kind as u8 {
        return Err(WireError::Type(buf[3]));
    }
    let seq = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    let t_us = u64::from_le_bytes(buf[8..16].try_into().unwrap());
    Ok((seq, t_us))
}

impl TrapCommand {
    pub fn encode(&self) -> [u8; TRAP_COMMAND_LEN] {
        let mut buf = [0u8; TRAP_COMMAND_LEN];
        put_header(&mut buf, MessageType::TrapCommand, self.seq, self.t_us);
        put_vec(&mut buf[16..40], &self.position);
        buf
    }

    pub fn decode(buf: &[u8]) -> Result<Self, WireError> {
        let (seq, t_us) = check_header(buf, MessageType::TrapCommand, TRAP_COMMAND_LEN)?;
        let position = get_vec(&buf[16..40]);
        if !position.iter().all(|v| v.is_finite()) {
            return Err(WireError::NonFinite);
        }
        Ok(TrapCommand {
            seq,
            t_us,
            position,
        })
    }
}

impl ParticleUpdate {
    pub fn encode(&self) -> [u8; PARTICLE_UPDATE_LEN] {
        let mut buf = [0u8; PARTICLE_UPDATE_LEN];
        put_header(&mut buf, MessageType::ParticleUpdate, self.seq, self.t_us);
        put_vec(&mut buf[16..40], &self.position);
        put_vec(&mut buf[40..64], &self.velocity);
        buf[64..68].copy_from_slice(&self.flags.0.to_le_bytes());
        buf
    }

    pub fn decode(buf: &[u8]) -> Result<Self, WireError> {
        let (seq, t_us) = check_header(buf, MessageType::ParticleUpdate, PARTICLE_UPDATE_LEN)?;
        Ok(ParticleUpdate {
            seq,
            t_us,
            position: get_vec(&buf[16..40]),
            velocity: get_vec(&buf[40..64]),
            flags: UpdateFlags(u32::from_le_bytes(buf[64..68].try_into().unwrap())),
        })
    }
}
