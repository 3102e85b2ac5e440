//! CSV schemas for trajectory and training-metric logs.
//!
//! Readers check the header exactly and report the 1-based file line of
//! the first bad record. Non-finite metric cells are written as `NaN`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::dynamics::{RigidBodyState, Vec3, NUM_ROTORS};

pub const STATE_COLUMNS: [&str; 22] = [
    "t", "x", "y", "z", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "p", "q", "r", "w1", "w2", "w3", "w4", "pwm1",
    "pwm2", "pwm3", "pwm4",
];
pub const GOAL_COLUMNS: [&str; 4] = ["goal_x", "goal_y", "goal_z", "reward"];
pub const METRICS_COLUMNS: [&str; 7] = ["step", "episode", "ep_reward", "q1_loss", "q2_loss", "pi_loss", "alpha"];

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One logged control step. `goal` and `reward` are absent in
/// simulator-only logs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub state: RigidBodyState,
    pub pwm: [f64; NUM_ROTORS],
    pub goal: Option<Vec3>,
    pub reward: Option<f64>,
}

impl TrajectoryRow {
    fn fields(&self) -> Vec<f64> {
        let s = &self.state;
        let mut v = Vec::with_capacity(26);
        v.push(self.t);
        v.extend_from_slice(&s.position);
        v.extend_from_slice(&s.attitude);
        v.extend_from_slice(&s.velocity);
        v.extend_from_slice(&s.body_rates);
        v.extend_from_slice(&s.rotor_speeds);
        v.extend_from_slice(&self.pwm);
        if let Some(g) = self.goal {
            v.extend_from_slice(&g);
            v.push(self.reward.unwrap_or(0.0));
        }
        v
    }

    fn from_fields(v: &[f64], with_goal: bool) -> Self {
        let take3 = |o: usize| [v[o], v[o + 1], v[o + 2]];
        let take4 = |o: usize| [v[o], v[o + 1], v[o + 2], v[o + 3]];
        Self {
            t: v[0],
            state: RigidBodyState {
                position: take3(1),
                attitude: take4(4),
                velocity: take3(8),
                body_rates: take3(11),
                rotor_speeds: take4(14),
            },
            pwm: take4(18),
            goal: with_goal.then(|| take3(22)),
            reward: with_goal.then(|| v[25]),
        }
    }
}

fn fmt(x: f64) -> String {
    // shortest round-trip form; `NaN`/`inf` spelled as Rust parses them
    format!("{x:?}")
}

pub struct TrajectoryWriter<W: Write> {
    inner: csv::Writer<W>,
    with_goal: bool,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(out: W, with_goal: bool) -> Result<Self, LogError> {
        let mut inner = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = STATE_COLUMNS.to_vec();
        if with_goal {
            header.extend_from_slice(&GOAL_COLUMNS);
        }
        inner.write_record(&header)?;
        Ok(Self { inner, with_goal })
    }

    pub fn write(&mut self, row: &TrajectoryRow) -> Result<(), LogError> {
        assert_eq!(row.goal.is_some(), self.with_goal, "row schema differs from header");
        self.inner.write_record(row.fields().into_iter().map(fmt))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, LogError> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| LogError::Io(e.into_error()))
    }
}

pub fn write_trajectory<W: Write>(out: W, rows: &[TrajectoryRow]) -> Result<W, LogError> {
    let with_goal = rows.first().is_none_or(|r| r.goal.is_some());
    let mut w = TrajectoryWriter::new(out, with_goal)?;
    for r in rows {
        w.write(r)?;
    }
    w.finish()
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn parse_numbers(rec: &csv::StringRecord, expected: usize) -> Result<Vec<f64>, LogError> {
    let line = line_of(rec);
    if rec.len() != expected {
        return Err(LogError::Malformed {
            line,
            msg: format!("expected {expected} fields, found {}", rec.len()),
        });
    }
    rec.iter()
        .enumerate()
        .map(|(i, cell)| {
            cell.trim().parse::<f64>().map_err(|_| LogError::Malformed {
                line,
                msg: format!("field {} is not a number: {cell:?}", i + 1),
            })
        })
        .collect()
}

fn read_header<R: Read>(rdr: &mut csv::Reader<R>) -> Result<csv::StringRecord, LogError> {
    let mut rec = csv::StringRecord::new();
    let got = rdr.read_record(&mut rec).map_err(|e| malformed_csv(&e))?;
    if !got {
        return Err(LogError::Malformed { line: 1, msg: "missing header".into() });
    }
    Ok(rec)
}

fn malformed_csv(e: &csv::Error) -> LogError {
    LogError::Malformed {
        line: e.position().map_or(0, |p| p.line()),
        msg: e.to_string(),
    }
}

/// Reads a trajectory log in either the simulator or the env schema.
pub fn read_trajectory<R: Read>(input: R) -> Result<Vec<TrajectoryRow>, LogError> {
    let mut rdr = reader(input);
    let header = read_header(&mut rdr)?;
    let names: Vec<&str> = header.iter().collect();
    let with_goal = if names == STATE_COLUMNS {
        false
    } else if names.len() == 26 && names[..22] == STATE_COLUMNS && names[22..] == GOAL_COLUMNS {
        true
    } else {
        return Err(LogError::Malformed {
            line: 1,
            msg: format!("unexpected header; expected `{}` optionally followed by `{}`", STATE_COLUMNS.join(","), GOAL_COLUMNS.join(",")),
        });
    };
    let width = if with_goal { 26 } else { 22 };
    let mut rows = Vec::new();
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec).map_err(|e| malformed_csv(&e))? {
        let v = parse_numbers(&rec, width)?;
        rows.push(TrajectoryRow::from_fields(&v, with_goal));
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub episode: u64,
    pub ep_reward: f64,
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub pi_loss: f64,
    pub alpha: f64,
}

pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W) -> Result<Self, LogError> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(METRICS_COLUMNS)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    /// Appends to a file that already carries the header.
    pub fn append(out: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(out),
        }
    }

    pub fn write(&mut self, m: &MetricsRow) -> Result<(), LogError> {
        self.inner.write_record([
            m.step.to_string(),
            m.episode.to_string(),
            fmt(m.ep_reward),
            fmt(m.q1_loss),
            fmt(m.q2_loss),
            fmt(m.pi_loss),
            fmt(m.alpha),
        ])?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRow>, LogError> {
    let mut rdr = reader(input);
    let header = read_header(&mut rdr)?;
    if header.iter().ne(METRICS_COLUMNS) {
        return Err(LogError::Malformed {
            line: 1,
            msg: format!("expected header `{}`", METRICS_COLUMNS.join(",")),
        });
    }
    let mut rows = Vec::new();
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec).map_err(|e| malformed_csv(&e))? {
        let line = line_of(&rec);
        if rec.len() != METRICS_COLUMNS.len() {
            return Err(LogError::Malformed {
                line,
                msg: format!("expected {} fields, found {}", METRICS_COLUMNS.len(), rec.len()),
            });
        }
        let int = |i: usize| {
            rec[i].trim().parse::<u64>().map_err(|_| LogError::Malformed {
                line,
                msg: format!("{} is not an unsigned integer: {:?}", METRICS_COLUMNS[i], &rec[i]),
            })
        };
        let float = |i: usize| {
            rec[i].trim().parse::<f64>().map_err(|_| LogError::Malformed {
                line,
                msg: format!("{} is not a number: {:?}", METRICS_COLUMNS[i], &rec[i]),
            })
        };
        rows.push(MetricsRow {
            step: int(0)?,
            episode: int(1)?,
            ep_reward: float(2)?,
            q1_loss: float(3)?,
            q2_loss: float(4)?,
            pi_loss: float(5)?,
            alpha: float(6)?,
        });
    }
    Ok(rows)
}
