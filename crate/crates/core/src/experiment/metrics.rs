use std::collections::VecDeque;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::EpisodeStats;
use crate::error::{Error, Result};

pub const MOVING_WINDOW: usize = 30;

/// Element `e` is the mean of the last `min(window, e + 1)` values.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let mut tracker = MovingAverage::new(window);
    values.iter().map(|&v| tracker.push(v)).collect()
}

/// Streaming form of `moving_average`. The mean is recomputed over the
/// window each time so results do not depend on accumulated rounding.
#[derive(Clone, Debug)]
pub struct MovingAverage {
    window: usize,
    recent: VecDeque<f64>,
}

impl MovingAverage {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            recent: VecDeque::with_capacity(window.max(1)),
        }
    }

    pub fn push(&mut self, v: f64) -> f64 {
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(v);
        self.recent.iter().sum::<f64>() / self.recent.len() as f64
    }
}

/// One line of a per-seed metrics file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub episode: u64,
    #[serde(rename = "return")]
    pub total_return: f64,
    pub steps: usize,
    pub moving_avg_30: f64,
    pub epsilon: f64,
    pub balls: usize,
    pub lava_death: u8,
    pub success: u8,
    pub buffer_pushes: u64,
    pub updates: u64,
}

impl MetricsRow {
    pub fn new(seed: u64, stats: &EpisodeStats, moving_avg_30: f64, updates: u64) -> Self {
        Self {
            seed,
            episode: stats.episode,
            total_return: stats.total_return,
            steps: stats.steps,
            moving_avg_30,
            epsilon: stats.epsilon,
            balls: stats.balls,
            lava_death: stats.lava_death.into(),
            success: stats.success.into(),
            buffer_pushes: stats.buffer_pushes,
            updates,
        }
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Across-seed summary of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub episode: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Aligns curves by episode; the shortest curve bounds the result.
pub fn aggregate_curves(curves: &[Vec<f64>]) -> Result<Vec<AggregateRow>> {
    if curves.is_empty() {
        return Err(Error::config("manifests", "nothing to aggregate"));
    }
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    Ok((0..len)
        .map(|e| {
            let column = curves.iter().map(|c| c[e]);
            AggregateRow {
                episode: e as u64,
                mean: column.clone().sum::<f64>() / curves.len() as f64,
                min: column.clone().fold(f64::INFINITY, f64::min),
                max: column.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect())
}

pub fn write_aggregate(rows: &[AggregateRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            inner: csv::Writer::from_writer(file),
        })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner.serialize(row)?;
        // Rows are flushed per episode so a crashed run keeps its history.
        self.inner.flush().map_err(|e| Error::io("metrics", e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io("metrics", e))
    }
}
