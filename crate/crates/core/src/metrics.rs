//! Success rate and SPL over a set of episodes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::sim::EpisodeResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub successes: usize,
    pub sr: f64,
    pub spl: f64,
    pub false_positive_stops: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(flatten)]
    pub overall: Summary,
    pub per_target: BTreeMap<String, Summary>,
}

fn summarize<'a>(results: impl Iterator<Item = &'a EpisodeResult>) -> Summary {
    let mut episodes = 0;
    let mut successes = 0;
    let mut spl_sum = 0.0;
    let mut fp = 0;
    for r in results {
        episodes += 1;
        successes += usize::from(r.success);
        spl_sum += r.spl_term();
        fp += usize::from(r.false_positive_stop);
    }
    let n = episodes.max(1) as f64;
    Summary { episodes, successes, sr: successes as f64 / n, spl: spl_sum / n, false_positive_stops: fp }
}

/// SR and SPL overall and per target class.
pub fn compute_metrics(results: &[EpisodeResult]) -> Result<Metrics> {
    if results.is_empty() {
        return Err(NavError::EmptyResults);
    }
    let mut targets: Vec<&str> = results.iter().map(|r| r.target.as_str()).collect();
    targets.sort_unstable();
    targets.dedup();
    let per_target =
        targets.into_iter().map(|t| (t.to_string(), summarize(results.iter().filter(|r| r.target == t)))).collect();
    Ok(Metrics { overall: summarize(results.iter()), per_target })
}

impl Metrics {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| NavError::io(path, e))
    }

    /// SR over the named targets only, 0 when none of them ran.
    pub fn sr_over(&self, targets: &[&str]) -> f64 {
        let (mut s, mut n) = (0, 0);
        for t in targets {
            if let Some(m) = self.per_target.get(*t) {
                s += m.successes;
                n += m.episodes;
            }
        }
        if n == 0 {
            0.0
        } else {
            s as f64 / n as f64
        }
    }
}
