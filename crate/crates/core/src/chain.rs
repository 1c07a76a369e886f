//! Birth-death chains describing the number of agents holding the correct
//! opinion.
//!
//! A memoryless rule is summarised by two tables `g0`, `g1`: an agent whose
//! current opinion is `x` adopts opinion 1 with probability `g_x(s)` after
//! seeing `s` ones in its sample. With `z` sources holding opinion 1 and `i`
//! agents holding 1 overall, the count moves up when a 0-holder is activated
//! and switches, and down when a non-source 1-holder is activated and switches.

use rand::Rng;

use crate::error::{Error, Result};

/// Slack allowed on `p_i + q_i <= 1` when validating floating-point chains.
const PROB_SLACK: f64 = 1e-12;

/// Behaviour at the top state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// `q_n = 0`: consensus is absorbing.
    Absorbing,
    /// `q_n = 1`: the reversible variant used for the weight formulas.
    Reflecting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathChain {
    low: usize,
    up: Vec<f64>,
    down: Vec<f64>,
    boundary: Boundary,
}

impl BirthDeathChain {
    /// Builds a chain on `{low, ..., low + up.len() - 1}` from full-length
    /// up/down tables indexed from `low`.
    pub fn new(low: usize, up: Vec<f64>, down: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if up.len() != down.len() {
            return Err(Error::invalid(format!(
                "up/down tables differ in length ({} vs {})",
                up.len(),
                down.len()
            )));
        }
        if up.len() < 2 {
            return Err(Error::invalid("a chain needs at least two states"));
        }
        let last = up.len() - 1;
        for (idx, (&p, &q)) in up.iter().zip(&down).enumerate() {
            let state = low + idx;
            if !(p.is_finite() && q.is_finite()) || p < 0.0 || q < 0.0 {
                return Err(Error::invalid(format!(
                    "state {state}: probabilities must be finite and non-negative (p = {p}, q = {q})"
                )));
            }
            if p + q > 1.0 + PROB_SLACK {
                return Err(Error::invalid(format!(
                    "state {state}: p + q = {} exceeds 1",
                    p + q
                )));
            }
        }
        if up[last] != 0.0 {
            return Err(Error::invalid("up-probability at the top state must be 0"));
        }
        if down[0] != 0.0 {
            return Err(Error::invalid(
                "down-probability at the bottom state must be 0",
            ));
        }
        let expected_top = match boundary {
            Boundary::Absorbing => 0.0,
            Boundary::Reflecting => 1.0,
        };
        if down[last] != expected_top {
            return Err(Error::invalid(format!(
                "{boundary:?} boundary requires q at the top state to be {expected_top}"
            )));
        }
        Ok(Self {
            low,
            up,
            down,
            boundary,
        })
    }

    pub fn low(&self) -> usize {
        self.low
    }

    pub fn high(&self) -> usize {
        self.low + self.up.len() - 1
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn states(&self) -> std::ops::RangeInclusive<usize> {
        self.low..=self.high()
    }

    pub fn contains(&self, state: usize) -> bool {
        self.states().contains(&state)
    }

    /// Up-probability `p_i`. Panics if `state` is outside the chain.
    pub fn up(&self, state: usize) -> f64 {
        self.up[self.index(state)]
    }

    /// Down-probability `q_i`. Panics if `state` is outside the chain.
    pub fn down(&self, state: usize) -> f64 {
        self.down[self.index(state)]
    }

    /// Lazy probability `r_i = 1 - p_i - q_i`.
    pub fn stay(&self, state: usize) -> f64 {
        1.0 - self.up(state) - self.down(state)
    }

    pub fn up_table(&self) -> &[f64] {
        &self.up
    }

    pub fn down_table(&self) -> &[f64] {
        &self.down
    }

    /// Same transition probabilities with the top state switched to `boundary`.
    pub fn with_boundary(&self, boundary: Boundary) -> Self {
        let mut chain = self.clone();
        let last = chain.down.len() - 1;
        chain.down[last] = match boundary {
            Boundary::Absorbing => 0.0,
            Boundary::Reflecting => 1.0,
        };
        chain.boundary = boundary;
        chain
    }

    fn index(&self, state: usize) -> usize {
        assert!(
            self.contains(state),
            "state {state} outside chain {}..={}",
            self.low,
            self.high()
        );
        state - self.low
    }
}

/// Tables `g0`, `g1` over the number of ones in a sample of size `ell`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorylessRule {
    ell: usize,
    g0: Vec<f64>,
    g1: Vec<f64>,
}

impl MemorylessRule {
    pub fn new(g0: Vec<f64>, g1: Vec<f64>) -> Result<Self> {
        let ell = validate_tables(&g0, &g1, "sample size")?;
        Ok(Self { ell, g0, g1 })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn g0(&self) -> &[f64] {
        &self.g0
    }

    pub fn g1(&self) -> &[f64] {
        &self.g1
    }

    /// Table for an agent currently holding `opinion` (0 or 1).
    pub fn table(&self, opinion: u8) -> &[f64] {
        if opinion == 0 {
            &self.g0
        } else {
            &self.g1
        }
    }
}

/// Rule for agents that observe the whole configuration: `g0`, `g1` are
/// indexed by the number of ones in the population.
#[derive(Debug, Clone, PartialEq)]
pub struct FullKnowledgeRule {
    n: usize,
    g0: Vec<f64>,
    g1: Vec<f64>,
}

impl FullKnowledgeRule {
    pub fn new(g0: Vec<f64>, g1: Vec<f64>) -> Result<Self> {
        let n = validate_tables(&g0, &g1, "population size")?;
        Ok(Self { n, g0, g1 })
    }

    /// `g0(i) = g1(i) = i/n`, the full-knowledge analogue of the voter model.
    pub fn voter_like(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("population size must be positive"));
        }
        let g: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        Self::new(g.clone(), g)
    }

    /// Every interior entry drawn i.i.d. uniform in `[0, 1)`, endpoints pinned
    /// to 0 and 1.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("population size must be positive"));
        }
        let mut draw = || {
            let mut g: Vec<f64> = (0..=n).map(|_| rng.random::<f64>()).collect();
            g[0] = 0.0;
            g[n] = 1.0;
            g
        };
        let g0 = draw();
        let g1 = draw();
        Self::new(g0, g1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn g0(&self) -> &[f64] {
        &self.g0
    }

    pub fn g1(&self) -> &[f64] {
        &self.g1
    }
}

fn validate_tables(g0: &[f64], g1: &[f64], what: &str) -> Result<usize> {
    if g0.len() != g1.len() {
        return Err(Error::invalid(format!(
            "g0 and g1 differ in length ({} vs {})",
            g0.len(),
            g1.len()
        )));
    }
    if g0.len() < 2 {
        return Err(Error::invalid(format!("{what} must be at least 1")));
    }
    let top = g0.len() - 1;
    for (name, g) in [("g0", g0), ("g1", g1)] {
        if let Some((s, v)) = g
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::invalid(format!(
                "{name}({s}) = {v} is not in [0, 1]"
            )));
        }
        if g[0] != 0.0 || g[top] != 1.0 {
            return Err(Error::invalid(format!(
                "{name} must map 0 to 0 and {top} to 1"
            )));
        }
    }
    Ok(top)
}

/// Which states a full-knowledge chain is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateWindow {
    /// `{z, ..., n}`.
    Full,
    /// `{n/4, ..., 3n/4}`; needs `4 | n`.
    Middle,
    /// An explicit inclusive interval.
    Range { low: usize, high: usize },
}

impl StateWindow {
    pub fn resolve(&self, n: usize, z: usize) -> Result<(usize, usize)> {
        let (low, high) = match *self {
            StateWindow::Full => (z, n),
            StateWindow::Middle => {
                if !n.is_multiple_of(4) {
                    return Err(Error::Precondition(format!(
                        "the middle window needs n divisible by 4, got n = {n}"
                    )));
                }
                (n / 4, 3 * n / 4)
            }
            StateWindow::Range { low, high } => (low, high),
        };
        if low < z || high > n || low >= high {
            return Err(Error::Precondition(format!(
                "window {low}..={high} is not a proper interval inside {z}..={n}"
            )));
        }
        Ok((low, high))
    }
}

/// `E[g(|S|)]` for `|S| ~ Binomial(ell, prob)`.
pub fn binomial_expectation(g: &[f64], ell: usize, prob: f64) -> Result<f64> {
    if g.len() != ell + 1 {
        return Err(Error::invalid(format!(
            "table has {} entries, expected ell + 1 = {}",
            g.len(),
            ell + 1
        )));
    }
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::invalid(format!(
            "probability {prob} is not in [0, 1]"
        )));
    }
    if prob == 0.0 {
        return Ok(g[0]);
    }
    if prob == 1.0 {
        return Ok(g[ell]);
    }
    Ok(binomial_pmf(ell, prob)
        .iter()
        .zip(g)
        .map(|(w, v)| w * v)
        .sum())
}

/// Binomial pmf for `0 < prob < 1`, anchored at the mode and extended by
/// consecutive-term ratios so neither tail underflows the anchor.
fn binomial_pmf(ell: usize, prob: f64) -> Vec<f64> {
    let mode = (((ell + 1) as f64 * prob).floor() as usize).min(ell);
    let odds = prob / (1.0 - prob);
    let ln_choose: f64 = (0..mode)
        .map(|j| ((ell - j) as f64 / (j + 1) as f64).ln())
        .sum();
    let mut pmf = vec![0.0; ell + 1];
    pmf[mode] = (ln_choose + mode as f64 * prob.ln() + (ell - mode) as f64 * (-prob).ln_1p()).exp();
    for s in mode..ell {
        pmf[s + 1] = pmf[s] * ((ell - s) as f64 / (s + 1) as f64) * odds;
    }
    for s in (1..=mode).rev() {
        pmf[s - 1] = pmf[s] * (s as f64 / (ell - s + 1) as f64) / odds;
    }
    pmf
}

fn check_population(n: usize, z: usize) -> Result<()> {
    if z == 0 || n <= z {
        return Err(Error::invalid(format!(
            "need n > z >= 1, got n = {n}, z = {z}"
        )));
    }
    Ok(())
}

fn top_down(boundary: Boundary) -> f64 {
    match boundary {
        Boundary::Absorbing => 0.0,
        Boundary::Reflecting => 1.0,
    }
}

/// Chain induced by a sample-based memoryless rule with `z` sources on opinion 1.
pub fn sample_chain_from_rule(
    rule: &MemorylessRule,
    n: usize,
    z: usize,
    boundary: Boundary,
) -> Result<BirthDeathChain> {
    check_population(n, z)?;
    let nf = n as f64;
    let mut up = vec![0.0; n - z + 1];
    let mut down = vec![0.0; n - z + 1];
    for i in z..n {
        let frac = i as f64 / nf;
        up[i - z] = (n - i) as f64 / nf * binomial_expectation(&rule.g0, rule.ell, frac)?;
        if i > z {
            down[i - z] =
                (i - z) as f64 / nf * (1.0 - binomial_expectation(&rule.g1, rule.ell, frac)?);
        }
    }
    down[n - z] = top_down(boundary);
    BirthDeathChain::new(z, up, down, boundary)
}

/// Closed-form voter chain: `p_i = (n-i)i/n^2`, `q_i = (n-i)(i-z)/n^2`.
pub fn voter_chain(n: usize, z: usize, boundary: Boundary) -> Result<BirthDeathChain> {
    check_population(n, z)?;
    let n2 = (n * n) as f64;
    let mut up = vec![0.0; n - z + 1];
    let mut down = vec![0.0; n - z + 1];
    for i in z..n {
        up[i - z] = ((n - i) * i) as f64 / n2;
        if i > z {
            down[i - z] = ((n - i) * (i - z)) as f64 / n2;
        }
    }
    down[n - z] = top_down(boundary);
    BirthDeathChain::new(z, up, down, boundary)
}

/// Chain `C` of a full-knowledge rule: states count opinion-1 holders and the
/// sources hold 1. Reflecting at the window's bottom, absorbing at its top.
pub fn full_knowledge_chain(
    rule: &FullKnowledgeRule,
    z: usize,
    window: StateWindow,
) -> Result<BirthDeathChain> {
    windowed_chain(rule, z, window, |i| {
        let n = rule.n;
        (
            (n - i) as f64 / n as f64 * rule.g0[i],
            (i - z) as f64 / n as f64 * (1.0 - rule.g1[i]),
        )
    })
}

/// Mirror chain `C'`: states count opinion-0 holders and the sources hold 0.
pub fn mirror_chain(
    rule: &FullKnowledgeRule,
    z: usize,
    window: StateWindow,
) -> Result<BirthDeathChain> {
    windowed_chain(rule, z, window, |i| {
        let n = rule.n;
        (
            (n - i) as f64 / n as f64 * (1.0 - rule.g1[n - i]),
            (i - z) as f64 / n as f64 * rule.g0[n - i],
        )
    })
}

fn windowed_chain(
    rule: &FullKnowledgeRule,
    z: usize,
    window: StateWindow,
    transition: impl Fn(usize) -> (f64, f64),
) -> Result<BirthDeathChain> {
    check_population(rule.n, z)?;
    let (low, high) = window.resolve(rule.n, z)?;
    let mut up = vec![0.0; high - low + 1];
    let mut down = vec![0.0; high - low + 1];
    for i in low..high {
        let (p, q) = transition(i);
        up[i - low] = p;
        if i > low {
            down[i - low] = q;
        }
    }
    BirthDeathChain::new(low, up, down, Boundary::Absorbing)
}

/// Random chain on `{low, ..., high}`: interior `p`, `q` drawn uniform and
/// rescaled when `p + q > 1`; every non-top `p` is bounded away from zero.
pub fn random_chain<R: Rng + ?Sized>(
    rng: &mut R,
    low: usize,
    high: usize,
    boundary: Boundary,
) -> Result<BirthDeathChain> {
    if high <= low {
        return Err(Error::invalid("random chain needs high > low"));
    }
    let len = high - low + 1;
    let mut up = vec![0.0; len];
    let mut down = vec![0.0; len];
    for idx in 0..len - 1 {
        let mut p: f64 = rng.random_range(f64::EPSILON..1.0);
        let mut q: f64 = if idx == 0 { 0.0 } else { rng.random() };
        if p + q > 1.0 {
            let scale = p + q;
            p /= scale;
            q /= scale;
        }
        up[idx] = p;
        down[idx] = q;
    }
    down[len - 1] = top_down(boundary);
    BirthDeathChain::new(low, up, down, boundary)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::dynamics::{majority_rule, mean_rule, voter_rule};

    #[test]
    fn binomial_expectation_examples() {
        let ell = 7;
        let mean: Vec<f64> = (0..=ell).map(|s| s as f64 / ell as f64).collect();
        assert_relative_eq!(
            binomial_expectation(&mean, ell, 0.3).unwrap(),
            0.3,
            epsilon = 1e-15
        );

        let top_only = [0.0, 0.0, 1.0];
        assert_relative_eq!(
            binomial_expectation(&top_only, 2, 0.5).unwrap(),
            0.25,
            epsilon = 1e-15
        );

        // Binomial(3, 1/2): P(2) + P(3) = 3/8 + 1/8.
        let majority = [0.0, 0.0, 1.0, 1.0];
        assert_relative_eq!(
            binomial_expectation(&majority, 3, 0.5).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn binomial_expectation_rejects_bad_input() {
        assert!(binomial_expectation(&[0.0, 1.0], 2, 0.5).is_err());
        assert!(binomial_expectation(&[0.0, 1.0], 1, 1.5).is_err());
    }

    #[test]
    fn binomial_pmf_survives_large_samples() {
        let pmf = binomial_pmf(5000, 0.5);
        let total: f64 = pmf.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        let pmf = binomial_pmf(300, 0.999);
        assert_relative_eq!(pmf.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn voter_chain_n4() {
        let c = voter_chain(4, 1, Boundary::Absorbing).unwrap();
        assert_eq!(c.up_table(), &[3.0 / 16.0, 4.0 / 16.0, 3.0 / 16.0, 0.0]);
        assert_eq!(c.down_table(), &[0.0, 2.0 / 16.0, 2.0 / 16.0, 0.0]);
        let r = c.with_boundary(Boundary::Reflecting);
        assert_eq!(r.down(4), 1.0);
        assert_eq!(r.stay(4), 0.0);

        let two = voter_chain(2, 1, Boundary::Absorbing).unwrap();
        assert_eq!(two.up(1), 0.25);
        assert_eq!(two.down(1), 0.0);
    }

    #[test]
    fn voter_chain_boundaries() {
        for (n, z) in [(5, 1), (9, 3), (20, 2)] {
            let c = voter_chain(n, z, Boundary::Absorbing).unwrap();
            assert_eq!(c.down(z), 0.0);
            assert_eq!(c.up(n), 0.0);
            assert_eq!(c.down(n), 0.0);
        }
        assert!(voter_chain(3, 3, Boundary::Absorbing).is_err());
        assert!(voter_chain(3, 0, Boundary::Absorbing).is_err());
    }

    #[test]
    fn rule_induced_chains() {
        let from_rule = sample_chain_from_rule(&voter_rule(), 4, 1, Boundary::Absorbing).unwrap();
        assert_eq!(from_rule, voter_chain(4, 1, Boundary::Absorbing).unwrap());

        for ell in 1..=6 {
            let c = sample_chain_from_rule(&mean_rule(ell).unwrap(), 8, 1, Boundary::Reflecting)
                .unwrap();
            let v = voter_chain(8, 1, Boundary::Reflecting).unwrap();
            for i in c.states() {
                assert_relative_eq!(c.up(i), v.up(i), epsilon = 1e-12);
                assert_relative_eq!(c.down(i), v.down(i), epsilon = 1e-12);
            }
        }

        let maj =
            sample_chain_from_rule(&majority_rule(3).unwrap(), 4, 1, Boundary::Absorbing).unwrap();
        assert_relative_eq!(maj.up(2), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn full_knowledge_examples() {
        let n = 8;
        let voterish = FullKnowledgeRule::voter_like(n).unwrap();
        let c = full_knowledge_chain(&voterish, 1, StateWindow::Full).unwrap();
        let v = voter_chain(n, 1, Boundary::Absorbing).unwrap();
        for i in c.states() {
            assert_relative_eq!(c.up(i), v.up(i), epsilon = 1e-15);
            assert_relative_eq!(c.down(i), v.down(i), epsilon = 1e-15);
        }

        let mut eager = vec![1.0; n + 1];
        eager[0] = 0.0;
        let rule = FullKnowledgeRule::new(eager.clone(), eager).unwrap();
        let c = full_knowledge_chain(&rule, 1, StateWindow::Range { low: 2, high: 6 }).unwrap();
        assert_eq!(c.up(2), 6.0 / 8.0);
        assert!((3..6).all(|i| c.down(i) == 0.0));
    }

    #[test]
    fn mirror_examples() {
        let n = 8;
        let voterish = FullKnowledgeRule::voter_like(n).unwrap();
        let c = full_knowledge_chain(&voterish, 1, StateWindow::Full).unwrap();
        let m = mirror_chain(&voterish, 1, StateWindow::Full).unwrap();
        for i in c.states() {
            assert_relative_eq!(c.up(i), m.up(i), epsilon = 1e-15);
            assert_relative_eq!(c.down(i), m.down(i), epsilon = 1e-15);
        }

        let mut step = vec![0.0; n + 1];
        step[n] = 1.0;
        let g1: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let rule = FullKnowledgeRule::new(step, g1).unwrap();
        let m = mirror_chain(&rule, 1, StateWindow::Full).unwrap();
        assert!((2..n).all(|i| m.down(i) == 0.0));
    }

    #[test]
    fn windows() {
        assert_eq!(StateWindow::Middle.resolve(64, 1).unwrap(), (16, 48));
        assert!(matches!(
            StateWindow::Middle.resolve(62, 1),
            Err(Error::Precondition(_))
        ));
        assert!(StateWindow::Range { low: 0, high: 4 }
            .resolve(8, 1)
            .is_err());
        assert!(StateWindow::Range { low: 2, high: 9 }
            .resolve(8, 1)
            .is_err());
    }

    #[test]
    fn chain_validation() {
        assert!(
            BirthDeathChain::new(1, vec![0.5, 0.0], vec![0.0, 0.0], Boundary::Absorbing).is_ok()
        );
        assert!(
            BirthDeathChain::new(1, vec![0.5, 0.1], vec![0.0, 0.0], Boundary::Absorbing).is_err()
        );
        assert!(
            BirthDeathChain::new(1, vec![0.5, 0.0], vec![0.1, 0.0], Boundary::Absorbing).is_err()
        );
        assert!(
            BirthDeathChain::new(1, vec![0.5, 0.0], vec![0.0, 0.0], Boundary::Reflecting).is_err()
        );
        assert!(BirthDeathChain::new(
            1,
            vec![0.7, 0.6, 0.0],
            vec![0.0, 0.6, 0.0],
            Boundary::Absorbing
        )
        .is_err());
    }

    #[test]
    fn rule_validation() {
        assert!(MemorylessRule::new(vec![0.0, 1.0], vec![0.0, 1.0]).is_ok());
        assert!(MemorylessRule::new(vec![0.1, 1.0], vec![0.0, 1.0]).is_err());
        assert!(MemorylessRule::new(vec![0.0, 0.9], vec![0.0, 1.0]).is_err());
        assert!(MemorylessRule::new(vec![0.0, 2.0, 1.0], vec![0.0, 0.5, 1.0]).is_err());
        assert!(MemorylessRule::new(vec![0.0, 1.0], vec![0.0, 0.5, 1.0]).is_err());
    }
}
