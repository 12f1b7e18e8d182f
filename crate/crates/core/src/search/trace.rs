use std::io::{BufRead, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub wall_seconds: f64,
    pub best_path_cost: f64,
    pub programs_trained: usize,
    pub nodes_expanded: usize,
}

/// Best path cost over time; the cost column never increases.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub events: Vec<TraceEvent>,
}

pub const CSV_HEADER: &str = "wall_seconds,best_path_cost,programs_trained,nodes_expanded";

impl SearchTrace {
    pub fn best(&self) -> Option<f64> {
        self.events.last().map(|e| e.best_path_cost)
    }

    /// First event whose cost is at most `target`.
    pub fn first_at_most(&self, target: f64) -> Option<&TraceEvent> {
        self.events.iter().find(|e| e.best_path_cost <= target)
    }

    pub fn is_monotone(&self) -> bool {
        self.events
            .windows(2)
            .all(|w| w[1].best_path_cost <= w[0].best_path_cost)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for e in &self.events {
            writeln!(
                w,
                "{},{},{},{}",
                e.wall_seconds, e.best_path_cost, e.programs_trained, e.nodes_expanded
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, String> {
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == CSV_HEADER => {}
            _ => return Err("missing trace header".into()),
        }
        let mut events = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            let cols: Vec<&str> = line.trim().split(',').collect();
            let bad = || format!("row {}: malformed trace row", i + 2);
            if cols.len() != 4 {
                return Err(bad());
            }
            events.push(TraceEvent {
                wall_seconds: cols[0].parse().map_err(|_| bad())?,
                best_path_cost: cols[1].parse().map_err(|_| bad())?,
                programs_trained: cols[2].parse().map_err(|_| bad())?,
                nodes_expanded: cols[3].parse().map_err(|_| bad())?,
            });
        }
        Ok(SearchTrace { events })
    }
}

/// Appends trace events on improvement, timed by a monotonic clock.
#[derive(Debug)]
pub struct Tracer {
    start: Instant,
    trace: SearchTrace,
    best: f64,
}

impl Default for Tracer {
    fn default() -> Self {
        Tracer::new()
    }
}

impl Tracer {
    pub fn new() -> Self {
        Tracer {
            start: Instant::now(),
            trace: SearchTrace::default(),
            best: f64::INFINITY,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Records `cost` if it beats the best so far; returns whether it did.
    pub fn offer(&mut self, cost: f64, programs_trained: usize, nodes_expanded: usize) -> bool {
        if cost < self.best {
            self.best = cost;
            self.push(programs_trained, nodes_expanded);
            true
        } else {
            false
        }
    }

    fn push(&mut self, programs_trained: usize, nodes_expanded: usize) {
        self.trace.events.push(TraceEvent {
            wall_seconds: self.start.elapsed().as_secs_f64(),
            best_path_cost: self.best,
            programs_trained,
            nodes_expanded,
        });
    }

    /// Closes the trace with a final event carrying the end-of-run counters.
    pub fn finish(mut self, programs_trained: usize, nodes_expanded: usize) -> SearchTrace {
        if self.best.is_finite() {
            self.push(programs_trained, nodes_expanded);
        }
        self.trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracer_records_only_improvements() {
        let mut t = Tracer::new();
        assert!(t.offer(0.5, 1, 1));
        assert!(!t.offer(0.7, 2, 2));
        assert!(t.offer(0.4, 3, 3));
        let tr = t.finish(4, 5);
        assert_eq!(tr.events.len(), 3);
        assert!(tr.is_monotone());
        assert_eq!(tr.events[2].programs_trained, 4);
        assert_eq!(tr.best(), Some(0.4));
    }

    #[test]
    fn csv_round_trip() {
        let tr = SearchTrace {
            events: vec![TraceEvent {
                wall_seconds: 0.25,
                best_path_cost: 0.123456789,
                programs_trained: 3,
                nodes_expanded: 2,
            }],
        };
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let back = SearchTrace::read_csv(&buf[..]).unwrap();
        assert_eq!(back, tr);
    }
}
