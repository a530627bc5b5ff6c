//! Weather and runway-report stores with snapshot reads.
//!
//! Readers take an `Arc` to the last committed snapshot and never block the
//! writer for longer than a pointer swap. A batch is applied to a private
//! copy of the affected runways and published only if every record in it
//! is accepted.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, PoisonError, RwLock};

use crate::error::{Error, Result};
use crate::features::{SnowtamHistory, SnowtamReport, WeatherSample, WeatherSeries};

/// Data visible to one request.
#[derive(Clone, Debug, Default)]
pub struct Snapshot {
    pub weather: BTreeMap<String, Arc<WeatherSeries>>,
    pub snowtams: BTreeMap<String, Arc<SnowtamHistory>>,
    /// Number of batches committed before this snapshot.
    pub generation: u64,
}

impl Snapshot {
    pub fn new(weather: BTreeMap<String, WeatherSeries>, snowtams: BTreeMap<String, SnowtamHistory>) -> Self {
        Self {
            weather: weather.into_iter().map(|(k, v)| (k, Arc::new(v))).collect(),
            snowtams: snowtams.into_iter().map(|(k, v)| (k, Arc::new(v))).collect(),
            generation: 0,
        }
    }

    pub fn runways(&self) -> Vec<String> {
        self.weather.keys().cloned().collect()
    }

    pub fn series(&self, runway: &str) -> Result<&WeatherSeries> {
        self.weather.get(runway).map(Arc::as_ref).ok_or_else(|| Error::NotFound(format!("unknown runway `{runway}`")))
    }

    pub fn history(&self, runway: &str) -> Option<&SnowtamHistory> {
        self.snowtams.get(runway).map(Arc::as_ref)
    }
}

/// New observations for several runways, committed together.
#[derive(Clone, Debug, Default)]
pub struct Batch {
    pub weather: Vec<(String, WeatherSample)>,
    pub snowtams: Vec<SnowtamReport>,
}

#[derive(Debug, Default)]
pub struct DataStore {
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
}

impl DataStore {
    pub fn new(snapshot: Snapshot) -> Self {
        Self { current: RwLock::new(Arc::new(snapshot)), writer: Mutex::new(()) }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().unwrap_or_else(PoisonError::into_inner).clone()
    }

    /// Appends a batch. On error nothing is published and the previous
    /// snapshot stays current.
    pub fn commit(&self, batch: Batch) -> Result<u64> {
        let _guard = self.writer.lock().unwrap_or_else(PoisonError::into_inner);
        let mut next = Snapshot::clone(&self.snapshot());
        for (runway, sample) in batch.weather {
            match next.weather.get_mut(&runway) {
                Some(series) => Arc::make_mut(series).push(sample)?,
                None => {
                    let series = WeatherSeries::from_samples(runway.clone(), [sample])?;
                    next.weather.insert(runway, Arc::new(series));
                }
            }
        }
        for report in batch.snowtams {
            let history = next.snowtams.entry(report.runway.clone()).or_default();
            Arc::make_mut(history).push(report)?;
        }
        next.generation += 1;
        let generation = next.generation;
        *self.current.write().unwrap_or_else(PoisonError::into_inner) = Arc::new(next);
        Ok(generation)
    }
}
