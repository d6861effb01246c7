//! Protection metric over simulated distances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtg::Loc;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("robot {0} travelled zero distance")]
    ZeroDistance(String),
    #[error("protection entry for robot {robot} on {edge:?} is inconsistent")]
    Inconsistent { robot: String, edge: Loc },
    #[error("empty protection log")]
    Empty,
}

/// Distances one robot travelled on one location, split by protection form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectionEntry {
    pub robot: String,
    pub edge: Loc,
    /// Distance travelled while a watcher coalition held the watch node.
    pub d_o: f64,
    /// Distance travelled in formation.
    pub d_f: f64,
    /// Distance travelled inside cover.
    pub d_c: f64,
    pub total: f64,
}

impl ProtectionEntry {
    pub fn new(robot: &str, edge: Loc) -> Self {
        Self { robot: robot.to_string(), edge, d_o: 0.0, d_f: 0.0, d_c: 0.0, total: 0.0 }
    }

    fn check(&self) -> bool {
        let ok = |d: f64| d.is_finite() && d >= 0.0 && d <= self.total + 1e-9 * self.total.max(1.0);
        self.total.is_finite() && ok(self.d_o) && ok(self.d_f) && ok(self.d_c)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProtectionLog {
    pub entries: Vec<ProtectionEntry>,
}

impl ProtectionLog {
    /// Entry for (robot, edge), created on first use.
    pub fn entry(&mut self, robot: &str, edge: Loc) -> &mut ProtectionEntry {
        let i = match self.entries.iter().position(|e| e.robot == robot && e.edge == edge) {
            Some(i) => i,
            None => {
                self.entries.push(ProtectionEntry::new(robot, edge));
                self.entries.len() - 1
            }
        };
        &mut self.entries[i]
    }

    /// Robot names in first-appearance order.
    pub fn robots(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.robot.as_str()) {
                out.push(&e.robot);
            }
        }
        out
    }

    /// Per-robot protection: summed protected distance over total distance.
    pub fn per_robot(&self) -> Result<Vec<(String, f64)>, MetricError> {
        if self.entries.is_empty() {
            return Err(MetricError::Empty);
        }
        if let Some(e) = self.entries.iter().find(|e| !e.check()) {
            return Err(MetricError::Inconsistent { robot: e.robot.clone(), edge: e.edge });
        }
        self.robots()
            .into_iter()
            .map(|r| {
                let mine = self.entries.iter().filter(|e| e.robot == r);
                let (d, protected) = mine.fold((0.0, 0.0), |(d, p), e| (d + e.total, p + e.d_o + e.d_f + e.d_c));
                if d <= 0.0 {
                    Err(MetricError::ZeroDistance(r.to_string()))
                } else {
                    Ok((r.to_string(), protected / d))
                }
            })
            .collect()
    }
}

/// Team mean of the per-robot protection; lies in [0, 3].
pub fn protection_metric(log: &ProtectionLog) -> Result<f64, MetricError> {
    let per = log.per_robot()?;
    Ok(per.iter().map(|x| x.1).sum::<f64>() / per.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtg::NodeId;
    use proptest::prelude::*;

    const E: Loc = (NodeId(1), NodeId(2));

    fn entry(robot: &str, d_o: f64, d_f: f64, d_c: f64, total: f64) -> ProtectionEntry {
        ProtectionEntry { robot: robot.into(), edge: E, d_o, d_f, d_c, total }
    }

    #[test]
    fn unit_constructions() {
        let cover = ProtectionLog { entries: vec![entry("a", 0.0, 0.0, 10.0, 10.0)] };
        assert_eq!(protection_metric(&cover), Ok(1.0));
        let both = ProtectionLog { entries: vec![entry("a", 10.0, 0.0, 10.0, 10.0)] };
        assert_eq!(protection_metric(&both), Ok(2.0));
        let mean = ProtectionLog { entries: vec![entry("a", 0.0, 0.0, 4.0, 4.0), entry("b", 0.0, 3.0, 0.0, 6.0)] };
        assert_eq!(protection_metric(&mean), Ok(0.75));
    }

    #[test]
    fn zero_distance_is_rejected() {
        let log = ProtectionLog { entries: vec![entry("a", 0.0, 0.0, 0.0, 0.0)] };
        assert_eq!(protection_metric(&log), Err(MetricError::ZeroDistance("a".into())));
        assert_eq!(protection_metric(&ProtectionLog::default()), Err(MetricError::Empty));
        let bad = ProtectionLog { entries: vec![entry("a", 3.0, 0.0, 0.0, 2.0)] };
        assert!(matches!(protection_metric(&bad), Err(MetricError::Inconsistent { .. })));
    }

    #[test]
    fn distances_accumulate_over_edges() {
        let mut log = ProtectionLog::default();
        log.entry("a", E).total += 2.0;
        log.entry("a", (NodeId(2), NodeId(3))).total += 2.0;
        log.entry("a", E).d_c += 2.0;
        assert_eq!(log.entries.len(), 2);
        assert_eq!(protection_metric(&log), Ok(0.5));
    }

    proptest! {
        #[test]
        fn metric_is_within_bounds(parts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.01..50.0f64, 0usize..3), 1..20)) {
            let entries = parts
                .iter()
                .map(|&(o, f, c, total, r)| entry(&format!("r{r}"), o * total, f * total, c * total, total))
                .collect();
            let m = protection_metric(&ProtectionLog { entries }).unwrap();
            prop_assert!((0.0..=3.0 + 1e-12).contains(&m));
        }
    }
}
