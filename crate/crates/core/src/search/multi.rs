use serde::{Deserialize, Serialize};

use super::trace::{SearchTrace, TraceEvent};
use crate::data::Report;

/// One seed's result as consumed by [`run_multi_seed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub report: Report,
    pub path_cost: f64,
    pub program: String,
    pub trace: SearchTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub stddev: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return MeanStd {
                mean: f64::NAN,
                stddev: f64::NAN,
            };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        MeanStd {
            mean,
            stddev: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeedSummary {
    pub runs: Vec<SeedRun>,
    pub accuracy: MeanStd,
    pub f1: MeanStd,
    pub depth: MeanStd,
    pub path_cost: MeanStd,
    /// Median best cost over wall time.
    pub median_trace: Vec<(f64, f64)>,
}

/// X axis for [`median_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceAxis {
    WallSeconds,
    ProgramsTrained,
}

fn x_of(e: &TraceEvent, axis: TraceAxis) -> f64 {
    match axis {
        TraceAxis::WallSeconds => e.wall_seconds,
        TraceAxis::ProgramsTrained => e.programs_trained as f64,
    }
}

/// Best cost of `trace` at `x`: +∞ before its first event, and its last value
/// after it ends.
fn value_at(trace: &SearchTrace, x: f64, axis: TraceAxis) -> f64 {
    trace
        .events
        .iter()
        .take_while(|e| x_of(e, axis) <= x)
        .last()
        .map_or(f64::INFINITY, |e| e.best_path_cost)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        let (a, b) = (v[n / 2 - 1], v[n / 2]);
        if a.is_infinite() || b.is_infinite() {
            b
        } else {
            0.5 * (a + b)
        }
    }
}

/// Pointwise median of step-function traces at every event position of any
/// trace, starting where the median first becomes finite. Finished traces
/// hold their final value, so the median stays non-increasing.
pub fn median_trace(traces: &[SearchTrace], axis: TraceAxis) -> Vec<(f64, f64)> {
    let mut xs: Vec<f64> = traces
        .iter()
        .flat_map(|t| t.events.iter().map(|e| x_of(e, axis)))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.into_iter()
        .map(|x| {
            (
                x,
                median(traces.iter().map(|t| value_at(t, x, axis)).collect()),
            )
        })
        .filter(|(_, m)| m.is_finite())
        .collect()
}

/// Runs `run` once per seed and aggregates the reports.
pub fn run_multi_seed<E, F>(seeds: &[u64], mut run: F) -> Result<MultiSeedSummary, E>
where
    F: FnMut(u64) -> Result<SeedRun, E>,
{
    let runs: Vec<SeedRun> = seeds.iter().map(|&s| run(s)).collect::<Result<_, _>>()?;
    let col = |f: &dyn Fn(&SeedRun) -> f64| runs.iter().map(f).collect::<Vec<_>>();
    let traces: Vec<SearchTrace> = runs.iter().map(|r| r.trace.clone()).collect();
    Ok(MultiSeedSummary {
        accuracy: MeanStd::of(&col(&|r| r.report.accuracy)),
        f1: MeanStd::of(&col(&|r| r.report.f1)),
        depth: MeanStd::of(&col(&|r| r.report.depth as f64)),
        path_cost: MeanStd::of(&col(&|r| r.path_cost)),
        median_trace: median_trace(&traces, TraceAxis::WallSeconds),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(points: &[(f64, f64)]) -> SearchTrace {
        SearchTrace {
            events: points
                .iter()
                .map(|&(t, c)| TraceEvent {
                    wall_seconds: t,
                    best_path_cost: c,
                    programs_trained: 0,
                    nodes_expanded: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn single_value_has_zero_stddev() {
        assert_eq!(MeanStd::of(&[0.7]).stddev, 0.0);
        assert_eq!(MeanStd::of(&[0.5, 0.5, 0.5]).stddev, 0.0);
        let m = MeanStd::of(&[1.0, 3.0]);
        assert_eq!((m.mean, m.stddev), (2.0, 1.0));
    }

    #[test]
    fn median_extends_finished_traces() {
        let a = tr(&[(1.0, 0.9), (2.0, 0.5)]);
        let b = tr(&[(1.5, 0.8)]);
        let c = tr(&[(0.5, 0.7), (3.0, 0.2)]);
        let m = median_trace(&[a, b, c], TraceAxis::WallSeconds);
        let xs: Vec<f64> = m.iter().map(|p| p.0).collect();
        // At t = 0.5 only one trace has started, so the median is still +∞.
        assert_eq!(xs, vec![1.0, 1.5, 2.0, 3.0]);
        // At t = 3 the values are 0.5, 0.8 (extended) and 0.2.
        assert_eq!(m.last().unwrap().1, 0.5);
        assert!(m.windows(2).all(|w| w[1].1 <= w[0].1));
    }
}
