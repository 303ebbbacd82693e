//! Early stopping on strict improvement of the development metric: training
//! halts exactly `patience` steps after the last improvement.

#[derive(Debug, Clone)]
pub struct EarlyStop {
    patience: usize,
    best: Option<(usize, f64)>,
}

impl EarlyStop {
    pub fn new(patience: usize) -> EarlyStop {
        EarlyStop {
            patience,
            best: None,
        }
    }

    /// Record a dev evaluation. Returns true when the metric strictly
    /// improved (the step becomes the new patience anchor).
    pub fn observe(&mut self, step: usize, metric: f64) -> bool {
        match self.best {
            Some((_, best)) if metric <= best => false,
            _ => {
                self.best = Some((step, metric));
                true
            }
        }
    }

    /// True once `patience` steps have elapsed since the last improvement.
    pub fn should_stop(&self, step: usize) -> bool {
        match self.best {
            Some((at, _)) => step >= at + self.patience,
            None => false,
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_exactly_patience_after_last_improvement() {
        // Improvement at step 100, flat afterwards, patience 500, evals
        // every 50 → stop fires at step 600.
        let mut es = EarlyStop::new(500);
        let mut stopped_at = None;
        for step in (50..=2000).step_by(50) {
            let metric = if step >= 100 { 0.8 } else { 0.5 };
            es.observe(step, metric);
            if es.should_stop(step) {
                stopped_at = Some(step);
                break;
            }
        }
        assert_eq!(stopped_at, Some(600));
        assert_eq!(es.best(), Some((100, 0.8)));
    }

    #[test]
    fn improvement_resets_the_counter() {
        let mut es = EarlyStop::new(500);
        es.observe(100, 0.8);
        assert!(!es.should_stop(550));
        assert!(es.observe(550, 0.85));
        assert!(!es.should_stop(600));
        assert!(!es.should_stop(1049));
        assert!(es.should_stop(1050));
        assert_eq!(es.best(), Some((550, 0.85)));
    }

    #[test]
    fn improvement_is_strict() {
        let mut es = EarlyStop::new(100);
        assert!(es.observe(10, 0.7));
        assert!(!es.observe(20, 0.7)); // equal is not an improvement
        assert!(es.should_stop(110));
        assert_eq!(es.best(), Some((10, 0.7)));
    }

    #[test]
    fn never_stops_before_any_observation() {
        let es = EarlyStop::new(10);
        assert!(!es.should_stop(1_000_000));
    }
}
