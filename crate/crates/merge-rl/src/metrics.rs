//! CSV emission for training metrics and trajectory traces. Floats are
//! written with Rust's shortest-roundtrip formatting so every file
//! re-parses to exactly the values that produced it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::env::{EpisodeStatus, VehicleKind};
use crate::error::{Error, Result};
use crate::eval::TraceRow;
use crate::trainer::{EpisodeRecord, LossRecord};

pub const LOSS_HEADER: &str = "update_index,env_step,loss";
pub const EPISODES_HEADER: &str = "episode,outcome,steps,reward_total,reward_accel,reward_front,\
reward_back,reward_speed,merge_duration_s,min_front_gap_m,min_back_gap_m,mean_abs_accel";
pub const TRACE_HEADER: &str = "step,t,vehicle_id,kind,x,v,a,behavior,status";

pub fn loss_csv(records: &[LossRecord]) -> String {
    let mut out = String::from(LOSS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{},{},{}", r.update_index, r.env_step, r.loss);
    }
    out
}

pub fn episodes_csv(records: &[EpisodeRecord]) -> String {
    let mut out = String::from(EPISODES_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.episode,
            r.outcome.as_str(),
            r.steps,
            r.reward_total,
            r.reward_accel,
            r.reward_front,
            r.reward_back,
            r.reward_speed,
            r.merge_duration_s,
            r.min_front_gap_m,
            r.min_back_gap_m,
            r.mean_abs_accel
        );
    }
    out
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let kind = match r.kind {
            VehicleKind::Ego => "ego",
            VehicleKind::Mainline => "mainline",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.step,
            r.t,
            r.vehicle_id,
            kind,
            r.x,
            r.v,
            r.a,
            r.behavior.as_str(),
            r.status.as_str()
        );
    }
    out
}

pub fn write_loss_csv(records: &[LossRecord], path: &Path) -> Result<()> {
    fs::write(path, loss_csv(records))?;
    Ok(())
}

pub fn write_episodes_csv(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    fs::write(path, episodes_csv(records))?;
    Ok(())
}

pub fn write_trace_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    fs::write(path, trace_csv(rows))?;
    Ok(())
}

fn field<'a, T: FromStr>(fields: &[&'a str], idx: usize, line: usize) -> Result<T> {
    fields
        .get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Usage(format!("bad csv field {idx} on line {line}")))
}

fn parse_outcome(s: &str) -> Result<EpisodeStatus> {
    match s {
        "running" => Ok(EpisodeStatus::Running),
        "success" => Ok(EpisodeStatus::Success),
        "collision" => Ok(EpisodeStatus::Collision),
        "timeout" => Ok(EpisodeStatus::Timeout),
        other => Err(Error::Usage(format!("unknown outcome {other}"))),
    }
}

pub fn parse_loss_csv(text: &str) -> Result<Vec<LossRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(LOSS_HEADER) {
        return Err(Error::Usage("unexpected loss.csv header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            Ok(LossRecord {
                update_index: field(&f, 0, i + 2)?,
                env_step: field(&f, 1, i + 2)?,
                loss: field(&f, 2, i + 2)?,
            })
        })
        .collect()
}

pub fn parse_episodes_csv(text: &str) -> Result<Vec<EpisodeRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(EPISODES_HEADER) {
        return Err(Error::Usage("unexpected episodes.csv header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let n = i + 2;
            Ok(EpisodeRecord {
                episode: field(&f, 0, n)?,
                outcome: parse_outcome(f.get(1).copied().unwrap_or_default())?,
                steps: field(&f, 2, n)?,
                reward_total: field(&f, 3, n)?,
                reward_accel: field(&f, 4, n)?,
                reward_front: field(&f, 5, n)?,
                reward_back: field(&f, 6, n)?,
                reward_speed: field(&f, 7, n)?,
                merge_duration_s: field(&f, 8, n)?,
                min_front_gap_m: field(&f, 9, n)?,
                min_back_gap_m: field(&f, 10, n)?,
                mean_abs_accel: field(&f, 11, n)?,
            })
        })
        .collect()
}
