use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WINDOW: usize = 100;
const DECAY: f64 = 1000.0;
const WINDOW_QUANTILE: f64 = 0.1;

/// When the threshold adapts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptMode {
    /// Schedule runs from the first attempt and freezes once burn-in ends.
    StopAfterBurnin,
    /// Schedule runs from the first attempt for the whole chain.
    Always,
}

/// Threshold sequence
/// `eps_l = w1 eps0 + w2 g + (1 - w1 - w2) eps*`, with
/// `w1 = exp(-t / 1000)`, `w2 = (1 - w1) exp(-t / 1000)`, `t = max(0, l - anchor)`,
/// and `g` the 0.1 quantile of the last 100 observed distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    eps0: f64,
    eps_star: f64,
    mode: AdaptMode,
    anchor: u64,
    attempts: u64,
    burnin_attempts: Option<u64>,
    window: VecDeque<f64>,
    current: f64,
}

/// Linearly interpolated sample quantile (type 7).
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl EpsilonSchedule {
    pub fn new(eps0: f64, eps_star: f64, mode: AdaptMode) -> Result<Self> {
        if !(eps_star > 0.0 && eps0 >= eps_star && eps0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "threshold schedule needs eps0 >= eps* > 0, got eps0={eps0} eps*={eps_star}"
            )));
        }
        Ok(Self {
            eps0,
            eps_star,
            mode,
            anchor: 0,
            attempts: 0,
            burnin_attempts: None,
            window: VecDeque::with_capacity(WINDOW),
            current: eps0,
        })
    }

    /// Holds `eps0` until attempt `anchor` and counts the decay from there.
    pub fn with_anchor(mut self, anchor: u64) -> Self {
        self.anchor = anchor;
        self.current = self.compute();
        self
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn eps_star(&self) -> f64 {
        self.eps_star
    }

    pub fn mode(&self) -> AdaptMode {
        self.mode
    }

    /// Attempts recorded so far.
    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    pub fn burnin_attempts(&self) -> Option<u64> {
        self.burnin_attempts
    }

    pub fn window(&self) -> &VecDeque<f64> {
        &self.window
    }

    /// Threshold the next attempt is compared against.
    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn is_frozen(&self) -> bool {
        self.mode == AdaptMode::StopAfterBurnin && self.burnin_attempts.is_some()
    }

    /// Marks the end of burn-in at the current attempt count.
    pub fn end_burnin(&mut self) {
        if self.burnin_attempts.is_none() {
            self.burnin_attempts = Some(self.attempts);
            self.current = self.compute();
        }
    }

    /// `(w1, w2)` at the current attempt count.
    pub fn weights(&self) -> (f64, f64) {
        let t = self.attempts.saturating_sub(self.anchor) as f64;
        let decay = (-t / DECAY).exp();
        (decay, (1.0 - decay) * decay)
    }

    fn compute(&self) -> f64 {
        let (w1, w2) = self.weights();
        if self.window.is_empty() {
            return w1 * self.eps0 + (1.0 - w1) * self.eps_star;
        }
        let recent: Vec<f64> = self.window.iter().copied().collect();
        let g = quantile(&recent, WINDOW_QUANTILE);
        w1 * self.eps0 + w2 * g + (1.0 - w1 - w2).max(0.0) * self.eps_star
    }

    /// Records the distance of one attempt and returns the threshold for the
    /// next one. A frozen schedule keeps counting but no longer moves.
    pub fn update(&mut self, distance: f64) -> f64 {
        debug_assert!(distance >= 0.0);
        self.attempts += 1;
        if self.window.len() == WINDOW {
            self.window.pop_front();
        }
        self.window.push_back(distance);
        if !self.is_frozen() {
            self.current = self.compute();
        }
        self.current
    }
}
