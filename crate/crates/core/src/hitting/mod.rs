//! Expected hitting times of the top state of a birth-death chain.
//!
//! Three routes are provided and are expected to agree:
//! the one-step recurrence (normative), the reversible-chain weight formula
//! evaluated in log space, and a direct tridiagonal solve in exact or
//! double-double arithmetic ([`oracle`]).

mod double_double;
pub mod oracle;

pub use double_double::DoubleDouble;
pub use oracle::{
    hitting_time_double_double, hitting_time_exact, hitting_time_oracle, hitting_times_oracle_all,
};

use crate::chain::BirthDeathChain;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Recurrence,
    DetailedBalance,
    LinearSolve,
}

/// Per-step expectations `h_k = E_{k-1}[tau_k]` for `k = low+1 ..= high`.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingReport {
    low: usize,
    per_step: Vec<f64>,
    total: f64,
    method: Method,
    fell_back: bool,
}

impl HittingReport {
    fn new(low: usize, per_step: Vec<f64>, method: Method, fell_back: bool) -> Self {
        let total = per_step.iter().sum();
        Self {
            low,
            per_step,
            total,
            method,
            fell_back,
        }
    }

    pub fn low(&self) -> usize {
        self.low
    }

    pub fn high(&self) -> usize {
        self.low + self.per_step.len()
    }

    pub fn per_step(&self) -> &[f64] {
        &self.per_step
    }

    /// `E_{k-1}[tau_k]`.
    pub fn step(&self, k: usize) -> f64 {
        assert!(k > self.low && k <= self.high(), "step {k} out of range");
        self.per_step[k - self.low - 1]
    }

    /// `E_low[tau_high]`.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// `E_start[tau_high]`.
    pub fn total_from(&self, start: usize) -> Result<f64> {
        if start < self.low || start > self.high() {
            return Err(Error::invalid(format!(
                "start state {start} outside {}..={}",
                self.low,
                self.high()
            )));
        }
        Ok(self.per_step[start - self.low..].iter().sum())
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// True when some steps were computed by the recurrence because a zero
    /// down-probability broke the weight product.
    pub fn fell_back(&self) -> bool {
        self.fell_back
    }
}

/// `h_{low+1} = 1/p_low`, `h_k = (1 + q_{k-1} h_{k-1}) / p_{k-1}`.
pub fn step_expectations_recurrence(chain: &BirthDeathChain) -> Result<HittingReport> {
    let low = chain.low();
    let mut per_step = Vec::with_capacity(chain.high() - low);
    let mut prev = 0.0;
    for k in low + 1..=chain.high() {
        prev = recurrence_step(chain, k, prev)?;
        per_step.push(prev);
    }
    Ok(HittingReport::new(low, per_step, Method::Recurrence, false))
}

fn recurrence_step(chain: &BirthDeathChain, k: usize, prev: f64) -> Result<f64> {
    let p = chain.up(k - 1);
    if p == 0.0 {
        return Err(Error::Unreachable { state: k - 1 });
    }
    Ok((1.0 + chain.down(k - 1) * prev) / p)
}

/// Natural logs of the stationary weights `w_low = 1`,
/// `w_k = prod_{i=low+1}^{k} p_{i-1} / q_i`. Entries past a zero `q` are `+inf`.
pub fn log_balance_weights(chain: &BirthDeathChain) -> Vec<f64> {
    let mut log_w = Vec::with_capacity(chain.high() - chain.low() + 1);
    log_w.push(0.0);
    for k in chain.low() + 1..=chain.high() {
        let prev = *log_w.last().unwrap();
        let q = chain.down(k);
        let next = if q == 0.0 || prev == f64::INFINITY {
            f64::INFINITY
        } else {
            prev + chain.up(k - 1).ln() - q.ln()
        };
        log_w.push(next);
    }
    log_w
}

/// Streaming `ln(sum exp(x_i))`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl LogSumExp {
    pub(crate) fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    pub(crate) fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x == f64::INFINITY {
            self.max = f64::INFINITY;
            self.scaled = 1.0;
            return;
        }
        if self.max == f64::INFINITY {
            return;
        }
        if x <= self.max {
            self.scaled += (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else if self.max == f64::INFINITY {
            f64::INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// `h_k = (1 / (q_k w_k)) sum_{j=low}^{k-1} w_j`, using the balance identity
/// `q_k w_k = p_{k-1} w_{k-1}` so the top state's `q` never enters.
///
/// Steps beyond an interior zero `q` fall back to the recurrence and the
/// report is flagged.
pub fn step_expectations_detailed_balance(chain: &BirthDeathChain) -> Result<HittingReport> {
    let low = chain.low();
    let log_w = log_balance_weights(chain);
    let mut per_step = Vec::with_capacity(chain.high() - low);
    let mut acc = LogSumExp::new();
    let mut fell_back = false;
    for k in low + 1..=chain.high() {
        let p = chain.up(k - 1);
        if p == 0.0 {
            return Err(Error::Unreachable { state: k - 1 });
        }
        let lw_prev = log_w[k - 1 - low];
        let h = if lw_prev.is_finite() {
            acc.push(lw_prev);
            (acc.value() - p.ln() - lw_prev).exp()
        } else {
            fell_back = true;
            recurrence_step(chain, k, *per_step.last().unwrap_or(&0.0))?
        };
        per_step.push(h);
    }
    Ok(HittingReport::new(
        low,
        per_step,
        Method::DetailedBalance,
        fell_back,
    ))
}

/// `H_k = sum_{j=1}^{k} 1/j`.
pub fn harmonic(k: usize) -> f64 {
    // Summed from the small terms up.
    (1..=k).rev().map(|j| 1.0 / j as f64).sum()
}

/// `sum_{k=2}^{n-1} 1/(k-1) sum_{j=1}^{k-1} 1/(n-j)` for the voter with one
/// source. Requires `n >= 3`.
pub fn voter_double_sum(n: usize) -> f64 {
    assert!(n >= 3, "voter double sum needs n >= 3");
    let mut inner = 0.0;
    let mut total = 0.0;
    for k in 2..n {
        inner += 1.0 / (n - (k - 1)) as f64;
        total += inner / (k - 1) as f64;
    }
    total
}

/// `n^2` times [`voter_double_sum`]: the one-source voter's
/// `sum_{k=2}^{n-1} E_{k-1}[tau_k]`.
pub fn voter_main_sum(n: usize) -> f64 {
    (n * n) as f64 * voter_double_sum(n)
}

/// `E_{n-1}[tau_n]` for the one-source voter from the weight formula:
/// `(n/(n-1))^2 * (n-1) H_{n-1} = n^2 H_{n-1} / (n-1)`.
pub fn voter_final_step(n: usize) -> f64 {
    assert!(n >= 2, "voter final step needs n >= 2");
    let m = (n - 1) as f64;
    let ratio = n as f64 / m;
    ratio * ratio * m * harmonic(n - 1)
}

/// The reference scale `2 n^2 H_{n-1}`.
pub fn voter_reference_scale(n: usize) -> f64 {
    2.0 * (n * n) as f64 * harmonic(n - 1)
}
