//! Per-frame CSV session logs and their replay.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::wire::{ParticleUpdate, UpdateFlags};
use crate::geometry::Vec3;

pub const EVENT_SEPARATOR: char = ';';

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("corrupt session log at row {row}: {message}")]
    Row { row: u64, message: String },
    #[error("replay speed must be positive, got {0}")]
    Speed(f64),
}

/// One rendered frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_us: u64,
    pub in_x: f64,
    pub in_y: f64,
    pub in_z: f64,
    pub trap_x: f64,
    pub trap_y: f64,
    pub trap_z: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    /// Event tags joined with `;`, empty when nothing happened.
    pub event: String,
}

impl FrameRecord {
    pub fn new(
        frame_us: u64,
        input: &Vec3,
        trap: &Vec3,
        particle: &Vec3,
        events: &[String],
    ) -> Self {
        Self {
            frame_us,
            in_x: input.x,
            in_y: input.y,
            in_z: input.z,
            trap_x: trap.x,
            trap_y: trap.y,
            trap_z: trap.z,
            p_x: particle.x,
            p_y: particle.y,
            p_z: particle.z,
            event: events.join(&EVENT_SEPARATOR.to_string()),
        }
    }

    pub fn input(&self) -> Vec3 {
        Vec3::new(self.in_x, self.in_y, self.in_z)
    }

    pub fn trap(&self) -> Vec3 {
        Vec3::new(self.trap_x, self.trap_y, self.trap_z)
    }

    pub fn particle(&self) -> Vec3 {
        Vec3::new(self.p_x, self.p_y, self.p_z)
    }

    pub fn events(&self) -> impl Iterator<Item = &str> {
        self.event.split(EVENT_SEPARATOR).filter(|e| !e.is_empty())
    }

    pub fn has_event(&self, name: &str) -> bool {
        self.events().any(|e| e == name)
    }

    fn is_finite(&self) -> bool {
        [self.input(), self.trap(), self.particle()]
            .iter()
            .all(|v| v.iter().all(|c| c.is_finite()))
    }
}

pub struct SessionWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl SessionWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self, RecordError> {
        let file = File::create(path).map_err(|source| RecordError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::new(BufWriter::new(file)))
    }
}

impl<W: Write> SessionWriter<W> {
    /// The header row is written with the first record.
    pub fn new(out: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(out),
        }
    }

    pub fn write(&mut self, record: &FrameRecord) -> Result<(), RecordError> {
        self.inner.serialize(record)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), RecordError> {
        self.inner.flush().map_err(|source| RecordError::Io {
            path: "session log".into(),
            source,
        })
    }

    pub fn into_inner(self) -> Result<W, RecordError> {
        self.inner.into_inner().map_err(|e| RecordError::Io {
            path: "session log".into(),
            source: std::io::Error::other(e.to_string()),
        })
    }
}

/// Streams records from a session log, reporting the file line of any
/// row that fails to parse.
pub struct SessionReader<R: Read> {
    reader: csv::Reader<R>,
    headers: Option<csv::StringRecord>,
    row: csv::StringRecord,
    last_us: Option<u64>,
}

impl SessionReader<File> {
    pub fn open(path: &Path) -> Result<Self, RecordError> {
        let file = File::open(path).map_err(|source| RecordError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::new(file))
    }
}

impl<R: Read> SessionReader<R> {
    pub fn new(input: R) -> Self {
        Self {
            reader: csv::Reader::from_reader(input),
            headers: None,
            row: csv::StringRecord::new(),
            last_us: None,
        }
    }

    fn corrupt(row: u64, message: impl Into<String>) -> RecordError {
        RecordError::Row {
            row,
            message: message.into(),
        }
    }
}

impl<R: Read> Iterator for SessionReader<R> {
    type Item = Result<FrameRecord, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.headers.is_none() {
            match self.reader.headers() {
                Ok(h) => self.headers = Some(h.clone()),
                Err(e) => return Some(Err(Self::corrupt(1, e.to_string()))),
            }
        }
        match self.reader.read_record(&mut self.row) {
            Ok(false) => None,
            Err(e) => {
                let row = e.position().map_or(0, |p| p.line());
                Some(Err(Self::corrupt(row, e.to_string())))
            }
            Ok(true) => {
                let row = self.row.position().map_or(0, |p| p.line());
                let rec: FrameRecord = match self.row.deserialize(self.headers.as_ref()) {
                    Ok(rec) => rec,
                    Err(e) => return Some(Err(Self::corrupt(row, e.to_string()))),
                };
                if !rec.is_finite() {
                    return Some(Err(Self::corrupt(row, "non-finite coordinate")));
                }
                if self.last_us.is_some_and(|t| rec.frame_us <= t) {
                    return Some(Err(Self::corrupt(
                        row,
                        format!("frame_us {} does not increase", rec.frame_us),
                    )));
                }
                self.last_us = Some(rec.frame_us);
                Some(Ok(rec))
            }
        }
    }
}

pub fn read_session(path: &Path) -> Result<Vec<FrameRecord>, RecordError> {
    SessionReader::open(path)?.collect()
}

/// Turns logged frames back into particle updates. Velocity is the
/// backward difference of logged positions.
#[derive(Debug, Default)]
pub struct UpdateReconstructor {
    prev: Option<(u64, Vec3)>,
    seq: u32,
    escaped: bool,
}

impl UpdateReconstructor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_update(&mut self, record: &FrameRecord) -> ParticleUpdate {
        let p = record.particle();
        let velocity = match self.prev {
            Some((t, q)) if record.frame_us > t => (p - q) / ((record.frame_us - t) as f64 * 1e-6),
            _ => Vec3::zeros(),
        };
        self.prev = Some((record.frame_us, p));
        self.seq = self.seq.wrapping_add(1);
        self.escaped |= record.has_event("escaped");
        let hit = record
            .events()
            .any(|e| e.starts_with("hit:") || e == "shot_hit");
        ParticleUpdate {
            seq: self.seq,
            t_us: record.frame_us,
            position: p,
            velocity,
            flags: UpdateFlags::new(self.escaped, hit),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReplayReport {
    pub frames: u64,
    pub wall: Duration,
}

/// Re-emits a logged session at `speed` times real time. Frame `k` is
/// emitted at `frame_us / speed` after the start. Stops early when `stop`
/// is set. A corrupt row aborts the replay after the frames before it were
/// emitted.
pub fn replay_session<R: Read>(
    reader: SessionReader<R>,
    speed: f64,
    stop: &AtomicBool,
    mut emit: impl FnMut(&ParticleUpdate, &FrameRecord),
) -> Result<ReplayReport, RecordError> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(RecordError::Speed(speed));
    }
    let start = Instant::now();
    let mut updates = UpdateReconstructor::new();
    let mut frames = 0;
    for record in reader {
        if stop.load(Ordering::Relaxed) {
            break;
        }
        let record = record?;
        let due = start + Duration::from_secs_f64(record.frame_us as f64 * 1e-6 / speed);
        super::pacing::sleep_until(due);
        emit(&updates.next_update(&record), &record);
        frames += 1;
    }
    Ok(ReplayReport {
        frames,
        wall: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(n: u64) -> Vec<FrameRecord> {
        (1..=n)
            .map(|k| {
                let p = Vec3::new(k as f64 * 1e-4, -0.002, 0.0);
                let events = if k == 3 {
                    vec!["clamped".to_string(), "hit:A".to_string()]
                } else {
                    vec![]
                };
                FrameRecord::new(k * 1_000_000 / 90, &p, &p, &p, &events)
            })
            .collect()
    }

    fn to_csv(recs: &[FrameRecord]) -> String {
        let mut w = SessionWriter::new(Vec::new());
        for r in recs {
            w.write(r).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    #[test]
    fn header_and_round_trip() {
        let recs = records(5);
        let text = to_csv(&recs);
        assert_eq!(
            text.lines().next().unwrap(),
            "frame_us,in_x,in_y,in_z,trap_x,trap_y,trap_z,p_x,p_y,p_z,event"
        );
        assert!(text.lines().nth(3).unwrap().ends_with(",clamped;hit:A"));
        let back: Vec<_> = SessionReader::new(text.as_bytes())
            .map(|r| r.unwrap())
            .collect();
        assert_eq!(back, recs);
        assert!(back[2].has_event("hit:A") && !back[1].has_event("hit:A"));
    }

    #[test]
    fn corrupt_row_reports_line() {
        let mut text = to_csv(&records(5));
        text = text.replacen("44444,", "44444,oops", 1);
        let mut reader = SessionReader::new(text.as_bytes());
        for _ in 0..3 {
            assert!(reader.next().unwrap().is_ok());
        }
        match reader.next().unwrap() {
            Err(RecordError::Row { row, .. }) => assert_eq!(row, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reconstructed_velocity_and_flags() {
        let recs = records(4);
        let mut r = UpdateReconstructor::new();
        let u: Vec<_> = recs.iter().map(|rec| r.next_update(rec)).collect();
        assert_eq!(u[0].velocity, Vec3::zeros());
        assert_eq!(u[1].t_us, 22222);
        // 0.1 mm per 11111 µs
        assert!((u[1].velocity.x - 1e-4 / 0.011111).abs() < 1e-9);
        assert!(u[2].flags.target_hit() && !u[3].flags.target_hit());
        assert_eq!(u[3].seq, 4);
    }

    #[test]
    fn empty_log_replays_nothing() {
        let stop = AtomicBool::new(false);
        let report = replay_session(
            SessionReader::new("".as_bytes()),
            1.0,
            &stop,
            |_, _| panic!(),
        )
        .unwrap();
        assert_eq!(report.frames, 0);
        assert!(report.wall < Duration::from_millis(50));
    }

    #[test]
    fn rejects_bad_speed() {
        let stop = AtomicBool::new(false);
        for speed in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                replay_session(SessionReader::new("".as_bytes()), speed, &stop, |_, _| {}),
                Err(RecordError::Speed(_))
            ));
        }
    }
}
