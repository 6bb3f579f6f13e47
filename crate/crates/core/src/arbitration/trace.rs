use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One arbitration step. `proposals` holds every module's action, joined
/// with `;` in the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub episode: usize,
    pub t: usize,
    pub module: usize,
    pub epsilon: f64,
    pub action: usize,
    pub r_star: f64,
    pub proposals: String,
    /// Empty for feed-forward selectors.
    pub hidden_zero: Option<bool>,
    /// Replay buffers that grew on this step.
    pub buffer_pushes: usize,
}

impl SelectionRecord {
    pub fn join_proposals(proposals: &[usize]) -> String {
        proposals.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
    }

    pub fn proposal_list(&self) -> Result<Vec<usize>> {
        self.proposals
            .split(';')
            .map(|p| {
                p.parse()
                    .map_err(|_| Error::Format(format!("bad proposal list {:?}", self.proposals)))
            })
            .collect()
    }
}

pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl TraceWriter<File> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(file))
    }
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(out),
        }
    }

    pub fn write(&mut self, record: &SelectionRecord) -> Result<()> {
        self.inner.serialize(record)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io("<trace>", e))
    }
}

pub fn read_trace(path: &Path) -> Result<Vec<SelectionRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}
