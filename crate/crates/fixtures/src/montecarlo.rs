/// Empirical Bernoulli rate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub hits: usize,
    pub trials: usize,
}

impl RateEstimate {
    pub fn run(trials: usize, mut trial: impl FnMut(usize) -> Option<bool>) -> Self {
        let mut hits = 0;
        let mut counted = 0;
        for i in 0..trials {
            if let Some(hit) = trial(i) {
                counted += 1;
                hits += usize::from(hit);
            }
        }
        Self { hits, trials: counted }
    }

    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }

    /// Standard error under the hypothesised rate `p`.
    pub fn sigma_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials.max(1) as f64).sqrt()
    }

    pub fn within_sigmas(&self, p: f64, k: f64) -> bool {
        (self.rate() - p).abs() <= k * self.sigma_at(p)
    }
}
