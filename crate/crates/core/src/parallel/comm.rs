use std::collections::BTreeMap;
use std::io::{self, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::message::{CoordinatorMessage, MessageKind, StageControl};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    ToWorker,
    ToCoordinator,
}

/// One traced message as seen by the coordinator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub elapsed_us: u64,
    pub direction: Direction,
    pub kind: MessageKind,
    pub sub: usize,
    /// Zero-based stage of this subsystem.
    pub stage: usize,
    pub order: Option<usize>,
    pub payload_bytes: usize,
}

/// Message recorder held by the coordinator.
#[derive(Clone, Debug)]
pub struct CommTrace {
    start: Instant,
    stage: Vec<Option<usize>>,
    pub events: Vec<TraceEvent>,
}

impl CommTrace {
    pub fn new(n_subsystems: usize) -> Self {
        Self { start: Instant::now(), stage: vec![None; n_subsystems], events: Vec::new() }
    }

    pub fn record(&mut self, direction: Direction, msg: &CoordinatorMessage) {
        let sub = msg.sub();
        if let CoordinatorMessage::StageControl { control: StageControl::Begin { .. }, .. } = msg {
            if let Some(s) = self.stage.get_mut(sub) {
                *s = Some(s.map_or(0, |k| k + 1));
            }
        }
        self.events.push(TraceEvent {
            elapsed_us: self.start.elapsed().as_micros() as u64,
            direction,
            kind: msg.kind(),
            sub,
            stage: self.stage.get(sub).copied().flatten().unwrap_or(0),
            order: msg.order(),
            payload_bytes: msg.payload_bytes(),
        });
    }
}

/// Writes one CSV line per message.
pub fn write_trace(events: &[TraceEvent], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "elapsed_us,direction,type,subsystem,stage,order,payload_bytes")?;
    for e in events {
        let order = e.order.map_or(String::new(), |o| o.to_string());
        writeln!(out, "{},{:?},{},{},{},{},{}", e.elapsed_us, e.direction, e.kind, e.sub, e.stage, order, e.payload_bytes)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommVolume {
    pub messages: usize,
    pub bytes: usize,
}

/// Message counts and bytes grouped by subsystem, stage, order and message type.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommReport {
    pub by_key: BTreeMap<(usize, usize, Option<usize>, MessageKind), CommVolume>,
}

impl CommReport {
    /// Bytes of order-indexed traffic (reduced right-hand sides and boundary coefficients)
    /// per `(subsystem, stage, order)`.
    pub fn per_order_bytes(&self) -> BTreeMap<(usize, usize, usize), usize> {
        let mut out = BTreeMap::new();
        for (&(sub, stage, order, _), v) in &self.by_key {
            if let Some(n) = order {
                *out.entry((sub, stage, n)).or_insert(0) += v.bytes;
            }
        }
        out
    }

    /// Number of messages of `kind` per `(stage, order)`, summed over subsystems.
    pub fn count_per_order(&self, kind: MessageKind) -> BTreeMap<(usize, usize), usize> {
        let mut out = BTreeMap::new();
        for (&(_, stage, order, k), v) in &self.by_key {
            if let (Some(n), true) = (order, k == kind) {
                *out.entry((stage, n)).or_insert(0) += v.messages;
            }
        }
        out
    }

    pub fn total(&self) -> CommVolume {
        self.by_key.values().fold(CommVolume::default(), |a, v| CommVolume { messages: a.messages + v.messages, bytes: a.bytes + v.bytes })
    }
}

pub fn measure_comm(events: &[TraceEvent]) -> CommReport {
    let mut by_key: BTreeMap<_, CommVolume> = BTreeMap::new();
    for e in events {
        let v = by_key.entry((e.sub, e.stage, e.order, e.kind)).or_default();
        v.messages += 1;
        v.bytes += e.payload_bytes;
    }
    CommReport { by_key }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_by_order() {
        let mut t = CommTrace::new(2);
        for sub in 0..2 {
            let begin = StageControl::Begin { alpha_done: 0.0, v_b0: vec![Default::default()], order: 2 };
            t.record(Direction::ToWorker, &CoordinatorMessage::StageControl { sub, control: begin });
            for order in 1..=2 {
                t.record(Direction::ToCoordinator, &CoordinatorMessage::ReducedRhs { sub, order, r_s: vec![0.0; 2] });
                t.record(Direction::ToWorker, &CoordinatorMessage::BoundaryCoeffs { sub, order, c_sb: vec![0.0], d_sb: vec![0.0] });
            }
        }
        let r = measure_comm(&t.events);
        assert!(r.per_order_bytes().values().all(|&b| b == 32));
        assert_eq!(r.count_per_order(MessageKind::ReducedRhs)[&(0, 1)], 2);
        assert_eq!(r.total().messages, 10);
        let mut buf = Vec::new();
        write_trace(&t.events, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 11);
    }
}
