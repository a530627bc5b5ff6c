use serde::{Deserialize, Serialize};

use super::contamination::{contamination_group, layer_string, validate_layers, ContaminationGroup};
use crate::error::{Error, Result};
use crate::time::{format_timestamp, Timestamp};

/// Runway condition report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnowtamReport {
    pub issued_at: Timestamp,
    pub runway: String,
    /// Contamination codes, top layer first.
    pub layers: Vec<u8>,
    pub depth_mm: f64,
    pub coverage_pct: f64,
    pub sanded: bool,
    pub chemicals: bool,
    /// Braking action estimated by the inspector, 1 (poor) to 5 (good).
    pub inspector_ba: Option<u8>,
}

impl SnowtamReport {
    pub fn validate(&self) -> Result<()> {
        let at = format_timestamp(&self.issued_at);
        validate_layers(&self.layers).map_err(|e| Error::invalid(format!("snowtam {at}: {e}")))?;
        if !(self.depth_mm >= 0.0 && self.depth_mm.is_finite()) {
            return Err(Error::invalid(format!("snowtam {at}: depth {} mm", self.depth_mm)));
        }
        if !(0.0..=100.0).contains(&self.coverage_pct) {
            return Err(Error::invalid(format!("snowtam {at}: coverage {}% outside [0, 100]", self.coverage_pct)));
        }
        if let Some(ba) = self.inspector_ba {
            if !(1..=5).contains(&ba) {
                return Err(Error::invalid(format!("snowtam {at}: inspector braking action {ba} outside 1..=5")));
            }
        }
        Ok(())
    }

    pub fn layer_code(&self) -> String {
        layer_string(&self.layers)
    }

    pub fn group(&self) -> ContaminationGroup {
        contamination_group(&self.layers).unwrap_or(ContaminationGroup::Not)
    }
}

/// Reports for one runway ordered by issue time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SnowtamHistory {
    reports: Vec<SnowtamReport>,
}

impl SnowtamHistory {
    pub fn new(mut reports: Vec<SnowtamReport>) -> Result<Self> {
        for r in &reports {
            r.validate()?;
        }
        reports.sort_by_key(|r| r.issued_at);
        if let Some(w) = reports.windows(2).find(|w| w[0].runway != w[1].runway) {
            return Err(Error::invalid(format!("mixed runways {} and {} in one history", w[0].runway, w[1].runway)));
        }
        Ok(Self { reports })
    }

    /// Most recent report issued at or before `t`.
    pub fn latest_at(&self, t: &Timestamp) -> Option<&SnowtamReport> {
        let n = self.reports.partition_point(|r| r.issued_at <= *t);
        n.checked_sub(1).map(|i| &self.reports[i])
    }

    pub fn reports(&self) -> &[SnowtamReport] {
        &self.reports
    }

    pub fn push(&mut self, r: SnowtamReport) -> Result<()> {
        r.validate()?;
        if let Some(last) = self.reports.last() {
            if r.runway != last.runway {
                return Err(Error::invalid(format!("report for runway {} in history of {}", r.runway, last.runway)));
            }
        }
        let pos = self.reports.partition_point(|x| x.issued_at <= r.issued_at);
        self.reports.insert(pos, r);
        Ok(())
    }
}
