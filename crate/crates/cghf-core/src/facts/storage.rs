use std::collections::{BTreeMap, VecDeque};

use super::types::{FactsError, Sample};

pub const DEFAULT_RETENTION_MS: u64 = 3_600_000;

struct StreamLog {
    samples: VecDeque<(i64, f64)>,
    unit: String,
    newest: i64,
}

/// Time-ordered sample storage, one log per stream. Ingest requires
/// non-decreasing timestamps per stream; samples older than the retention
/// horizon (relative to the newest ingested timestamp) are evicted.
pub struct FactStore {
    streams: BTreeMap<String, StreamLog>,
    retention_ms: u64,
}

impl Default for FactStore {
    fn default() -> Self {
        FactStore::new(DEFAULT_RETENTION_MS)
    }
}

impl FactStore {
    pub fn new(retention_ms: u64) -> FactStore {
        FactStore { streams: BTreeMap::new(), retention_ms }
    }

    pub fn ingest(&mut self, sample: Sample) -> Result<(), FactsError> {
        let log = self.streams.entry(sample.stream_id.clone()).or_insert_with(|| StreamLog {
            samples: VecDeque::new(),
            unit: sample.unit.clone(),
            newest: i64::MIN,
        });
        if sample.timestamp < log.newest {
            return Err(FactsError::TimestampRegression {
                stream: sample.stream_id,
                last: log.newest,
                got: sample.timestamp,
            });
        }
        log.newest = sample.timestamp;
        log.unit = sample.unit;
        log.samples.push_back((sample.timestamp, sample.value));
        let cutoff = log.newest.saturating_sub(self.retention_ms as i64);
        while log.samples.front().is_some_and(|&(ts, _)| ts < cutoff) {
            log.samples.pop_front();
        }
        Ok(())
    }

    /// Samples with `from <= ts < to`, oldest first. Evicted samples are
    /// gone; an empty window on a known stream returns an empty list.
    pub fn query_history(
        &self,
        stream_id: &str,
        from: i64,
        to: i64,
    ) -> Result<Vec<Sample>, FactsError> {
        let log = self
            .streams
            .get(stream_id)
            .ok_or_else(|| FactsError::UnknownStream(stream_id.to_string()))?;
        let lo = log.samples.partition_point(|&(ts, _)| ts < from);
        let hi = log.samples.partition_point(|&(ts, _)| ts < to);
        Ok(log
            .samples
            .iter()
            .skip(lo)
            .take(hi.saturating_sub(lo))
            .map(|&(timestamp, value)| Sample {
                stream_id: stream_id.to_string(),
                timestamp,
                value,
                unit: log.unit.clone(),
            })
            .collect())
    }

    /// Raw (timestamp, value) pairs in `[from, to)` for a stream that may
    /// not exist yet; used by the aggregate functions.
    pub(crate) fn window(&self, stream_id: &str, from: i64, to: i64) -> Vec<(i64, f64)> {
        match self.streams.get(stream_id) {
            None => Vec::new(),
            Some(log) => {
                let lo = log.samples.partition_point(|&(ts, _)| ts < from);
                let hi = log.samples.partition_point(|&(ts, _)| ts < to);
                log.samples.iter().skip(lo).take(hi.saturating_sub(lo)).copied().collect()
            }
        }
    }

    pub fn stream_ids(&self) -> impl Iterator<Item = &str> {
        self.streams.keys().map(String::as_str)
    }

    pub fn len(&self, stream_id: &str) -> usize {
        self.streams.get(stream_id).map_or(0, |l| l.samples.len())
    }
}
