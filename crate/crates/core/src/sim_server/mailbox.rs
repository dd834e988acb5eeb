use std::sync::Mutex;

use serde::Serialize;

use super::wire::{TrapCommand, WireError};
use crate::games::{GunPose, RacketPose};

/// A message from any input transport.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Inbound {
    Trap(TrapCommand),
    Racket { seq: u32, pose: RacketPose },
    Gun { seq: u32, pose: GunPose },
}

/// What the tick loop takes out of the mailbox once per tick.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TickInput {
    pub trap: Option<TrapCommand>,
    pub racket: Option<RacketPose>,
    pub gun: Option<GunPose>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MailboxStats {
    pub received: u64,
    /// Trap commands handed to the tick loop.
    pub applied: u64,
    /// Arrived with a sequence at or below one already seen.
    pub stale: u64,
    /// Replaced in the slot by a newer command before a tick took it.
    pub superseded: u64,
    pub malformed: u64,
    /// Largest number of commands ever waiting in one slot.
    pub max_depth: usize,
}

impl MailboxStats {
    pub fn dropped(&self) -> u64 {
        self.stale + self.superseded
    }
}

#[derive(Debug)]
struct Slot<T> {
    pending: Option<T>,
    last_seq: Option<u32>,
}

impl<T> Default for Slot<T> {
    fn default() -> Self {
        Self {
            pending: None,
            last_seq: None,
        }
    }
}

impl<T> Slot<T> {
    /// Stores `value` unless `seq` is stale. Returns whether it was stored
    /// and whether it replaced a pending value.
    fn offer(&mut self, seq: u32, value: T, merge: impl FnOnce(&T, &mut T)) -> Option<bool> {
        if self.last_seq.is_some_and(|last| seq <= last) {
            return None;
        }
        self.last_seq = Some(seq);
        let mut value = value;
        let replaced = match &self.pending {
            Some(old) => {
                merge(old, &mut value);
                true
            }
            None => false,
        };
        self.pending = Some(value);
        Some(replaced)
    }
}

#[derive(Debug, Default)]
struct Inner {
    trap: Slot<TrapCommand>,
    racket: Slot<RacketPose>,
    gun: Slot<GunPose>,
    stats: MailboxStats,
}

/// Single-slot, latest-wins hand-off between input transports and the
/// tick loop. Each input kind has its own slot and sequence filter; UDP and
/// WebSocket trap commands share one.
#[derive(Debug, Default)]
pub struct Mailbox {
    inner: Mutex<Inner>,
}

impl Mailbox {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` if the message was dropped as stale.
    pub fn post(&self, msg: Inbound) -> bool {
        let mut inner = self.inner.lock().unwrap();
        inner.stats.received += 1;
        let outcome = match msg {
            Inbound::Trap(cmd) => inner.trap.offer(cmd.seq, cmd, |_, _| {}),
            Inbound::Racket { seq, pose } => inner.racket.offer(seq, pose, |_, _| {}),
            // A press must survive being overtaken by a later release.
            Inbound::Gun { seq, pose } => inner
                .gun
                .offer(seq, pose, |old, new| new.trigger |= old.trigger),
        };
        match outcome {
            None => {
                inner.stats.stale += 1;
                false
            }
            Some(replaced) => {
                if replaced {
                    inner.stats.superseded += 1;
                }
                inner.stats.max_depth = inner.stats.max_depth.max(1);
                true
            }
        }
    }

    /// Decodes a trap-command datagram and posts it. Malformed datagrams are
    /// counted and dropped.
    pub fn post_datagram(&self, bytes: &[u8]) -> Result<bool, WireError> {
        match ingest_command(bytes) {
            Ok(cmd) => Ok(self.post(Inbound::Trap(cmd))),
            Err(e) => {
                self.count_malformed();
                Err(e)
            }
        }
    }

    pub fn count_malformed(&self) {
        let mut inner = self.inner.lock().unwrap();
        inner.stats.received += 1;
        inner.stats.malformed += 1;
    }

    /// Empties every slot.
    pub fn take(&self) -> TickInput {
        let mut inner = self.inner.lock().unwrap();
        let input = TickInput {
            trap: inner.trap.pending.take(),
            racket: inner.racket.pending.take(),
            gun: inner.gun.pending.take(),
        };
        inner.stats.applied += input.trap.is_some() as u64;
        input
    }

    pub fn stats(&self) -> MailboxStats {
        self.inner.lock().unwrap().stats
    }
}

/// Decodes one trap-command datagram.
pub fn ingest_command(bytes: &[u8]) -> Result<TrapCommand, WireError> {
    TrapCommand::decode(bytes)
}
