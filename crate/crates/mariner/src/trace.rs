//! Mission traces: JSON Lines, one event per line, with a fixed field order
//! so identical runs produce byte-identical streams.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// One trace line. The `kind` tag and field order are part of the format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    MissionStart {
        command: String,
        seed: u64,
    },
    Heuristic {
        phase: usize,
        directive: String,
        region: String,
        score: f64,
        rationale: Vec<String>,
    },
    Task {
        phase: usize,
        init: String,
        goal: String,
    },
    Plan {
        phase: usize,
        steps: Vec<String>,
    },
    ActionStart {
        phase: usize,
        action: String,
    },
    Step {
        step: u64,
        pose: [f64; 6],
        control: [f64; 2],
    },
    Replan {
        step: u64,
        flag: u8,
        directive: String,
    },
    ActionEnd {
        phase: usize,
        action: String,
        outcome: String,
    },
    MissionEnd {
        success: bool,
        total_steps: u64,
        reason: String,
    },
}

/// Single-writer, append-only event sink.
pub struct TraceWriter<W: Write> {
    sink: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(sink: W) -> Self {
        TraceWriter { sink }
    }

    /// Writes exactly one canonical line per event.
    pub fn write_event(&mut self, event: &TraceEvent) -> io::Result<()> {
        let line = serde_json::to_string(event).map_err(io::Error::other)?;
        self.sink.write_all(line.as_bytes())?;
        self.sink.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

/// A writer that throws events away, for runs without a trace file.
pub fn null_writer() -> TraceWriter<io::Sink> {
    TraceWriter::new(io::sink())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replan_event_line_shape() {
        let mut w = TraceWriter::new(Vec::new());
        w.write_event(&TraceEvent::Replan { step: 120, flag: 2, directive: "abort_to_rescue".into() })
            .unwrap();
        let line = String::from_utf8(w.into_inner()).unwrap();
        assert!(line.contains(r#""kind":"replan","step":120,"flag":2"#), "line: {line}");
        assert!(line.ends_with('\n'));
    }

    #[test]
    fn step_event_carries_pose_and_control() {
        let mut w = TraceWriter::new(Vec::new());
        w.write_event(&TraceEvent::Step {
            step: 3,
            pose: [1.0, 2.0, -3.0, 0.0, 0.1, 0.2],
            control: [0.2, 0.0],
        })
        .unwrap();
        let line = String::from_utf8(w.into_inner()).unwrap();
        assert!(line.contains(r#""kind":"step","step":3"#));
        assert!(line.contains(r#""pose":[1.0,2.0,-3.0,0.0,0.1,0.2]"#));
    }

    #[test]
    fn identical_events_serialize_identically() {
        let ev = TraceEvent::Heuristic {
            phase: 1,
            directive: "Search the sector2-shallow area".into(),
            region: "sector2-shallow".into(),
            score: 0.5,
            rationale: vec!["observed:warship in sector2-shallow".into()],
        };
        let mut a = TraceWriter::new(Vec::new());
        let mut b = TraceWriter::new(Vec::new());
        a.write_event(&ev).unwrap();
        b.write_event(&ev).unwrap();
        assert_eq!(a.into_inner(), b.into_inner());
    }
}
