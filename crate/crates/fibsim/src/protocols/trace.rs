//! Event traces: one structured record per protocol event, serialized as
//! line-delimited JSON. The trace is the interchange format between the
//! `run` and `stats` commands and the input to deterministic replay.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::operators::RandomSource;

/// One protocol event. `outcome` and `probability` are present exactly for
/// the stochastic operations (`measure_charge`, `fuse_adjacent`, `apply_d`)
/// and for post-selected steps; `dim` is the dimension of the state space
/// the run occupies after the event.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraceEvent {
    pub step: u64,
    pub op: String,
    pub params: String,
    pub outcome: Option<String>,
    #[serde(rename = "p")]
    pub probability: Option<f64>,
    pub dim: usize,
}

/// An append-only event log for one seeded run. Disabled traces drop
/// events, which keeps bulk Monte Carlo runs allocation-free.
#[derive(Debug, Clone, Default)]
pub struct ProtocolTrace {
    enabled: bool,
    events: Vec<TraceEvent>,
}

/// Operations that consume exactly one decision from the random source.
const STOCHASTIC_OPS: [&str; 3] = ["measure_charge", "fuse_adjacent", "apply_d"];

impl ProtocolTrace {
    pub fn enabled() -> ProtocolTrace {
        ProtocolTrace {
            enabled: true,
            events: Vec::new(),
        }
    }

    pub fn disabled() -> ProtocolTrace {
        ProtocolTrace::default()
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn record(
        &mut self,
        op: &str,
        params: String,
        outcome: Option<String>,
        probability: Option<f64>,
        dim: usize,
    ) {
        if !self.enabled {
            return;
        }
        let step = self.events.len() as u64;
        self.events.push(TraceEvent {
            step,
            op: op.to_string(),
            params,
            outcome,
            probability,
            dim,
        });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Writes the trace as one JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for event in &self.events {
            serde_json::to_writer(&mut writer, event)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> std::io::Result<ProtocolTrace> {
        let mut events = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event: TraceEvent = serde_json::from_str(&line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            events.push(event);
        }
        Ok(ProtocolTrace {
            enabled: true,
            events,
        })
    }

    /// A random source that replays this trace's recorded outcomes, in
    /// order. Rerunning the same protocol against it reproduces the run's
    /// states exactly.
    pub fn replay_source(&self) -> RandomSource {
        let decisions: VecDeque<bool> = self
            .events
            .iter()
            .filter(|e| STOCHASTIC_OPS.contains(&e.op.as_str()))
            .map(|e| match e.op.as_str() {
                "apply_d" => e.outcome.as_deref() == Some("ok"),
                _ => e.outcome.as_deref() == Some("0"),
            })
            .collect();
        RandomSource::replay(decisions)
    }
}
