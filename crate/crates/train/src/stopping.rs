//! Early-stopping rules, evaluated once per finished epoch.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum StoppingPolicy {
    /// Stop once `count` epochs (not necessarily consecutive) exceed
    /// `threshold` validation accuracy, or after `max_epochs`.
    Threshold { max_epochs: usize, threshold: f64, count: usize },
    /// Stop after `patience` consecutive epochs without a new validation
    /// maximum, or after `max_epochs`.
    Patience { patience: usize, max_epochs: usize },
}

impl StoppingPolicy {
    /// 100 epochs, five epochs above 99%.
    pub fn threshold_default() -> Self {
        StoppingPolicy::Threshold {
            max_epochs: 100,
            threshold: 0.99,
            count: 5,
        }
    }

    /// Ten epochs without improvement.
    pub fn patience_default() -> Self {
        StoppingPolicy::Patience {
            patience: 10,
            max_epochs: 100,
        }
    }

    pub fn max_epochs(&self) -> usize {
        match self {
            StoppingPolicy::Threshold { max_epochs, .. } | StoppingPolicy::Patience { max_epochs, .. } => *max_epochs,
        }
    }
}

impl Default for StoppingPolicy {
    fn default() -> Self {
        Self::threshold_default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EpochLimit,
    AccuracyReached,
    NoImprovement,
}

/// Running state of one policy over a run.
#[derive(Clone, Debug)]
pub struct Stopper {
    policy: StoppingPolicy,
    seen: usize,
    above: usize,
    best: Option<(usize, f64)>,
}

impl Stopper {
    pub fn new(policy: StoppingPolicy) -> Self {
        Self {
            policy,
            seen: 0,
            above: 0,
            best: None,
        }
    }

    /// Best epoch so far; ties keep the earliest.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }

    /// Feeds the validation accuracy of `epoch`; returns a reason when the
    /// run should end after it.
    pub fn observe(&mut self, epoch: usize, val_accuracy: f64) -> Option<StopReason> {
        self.seen += 1;
        if self.best.map_or(true, |(_, b)| val_accuracy > b) {
            self.best = Some((epoch, val_accuracy));
        }
        match self.policy {
            StoppingPolicy::Threshold { threshold, count, .. } => {
                if val_accuracy > threshold {
                    self.above += 1;
                }
                if self.above >= count {
                    return Some(StopReason::AccuracyReached);
                }
            }
            StoppingPolicy::Patience { patience, .. } => {
                let (best_epoch, _) = self.best.expect("set above");
                if epoch - best_epoch >= patience {
                    return Some(StopReason::NoImprovement);
                }
            }
        }
        (self.seen >= self.policy.max_epochs()).then_some(StopReason::EpochLimit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_limit() {
        let mut s = Stopper::new(StoppingPolicy::Threshold {
            max_epochs: 3,
            threshold: 0.99,
            count: 5,
        });
        assert_eq!(s.observe(0, 0.5), None);
        assert_eq!(s.observe(1, 0.5), None);
        assert_eq!(s.observe(2, 0.5), Some(StopReason::EpochLimit));
    }

    #[test]
    fn ties_keep_earliest() {
        let mut s = Stopper::new(StoppingPolicy::patience_default());
        s.observe(0, 0.7);
        s.observe(1, 0.8);
        s.observe(2, 0.8);
        assert_eq!(s.best(), Some((1, 0.8)));
    }
}
