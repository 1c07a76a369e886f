//! Sequential activation on the complete graph.
//!
//! Each round one agent is drawn uniformly. Sources never change; any other
//! agent runs the dynamics on a sample drawn with replacement from all `n`
//! opinions, its own and the sources' included.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::chain::MemorylessRule;
use crate::dynamics::{trend_step_unchecked, voter_rule, DynamicsKind, Opinion, TrendMemory};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;

/// Samples larger than this are drawn as one binomial variate instead of
/// `ell` index draws.
pub const INDEX_SAMPLING_MAX: usize = 8;

const RECOUNT_EVERY: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitKind {
    /// Every opinion uniform over the labels; the sources share one draw.
    Uniform,
    /// Sources on 0, everyone else on a wrong label.
    Adversarial,
    /// Built directly from an opinion vector.
    Custom,
}

impl InitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InitKind::Uniform => "uniform",
            InitKind::Adversarial => "adversarial",
            InitKind::Custom => "custom",
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(InitKind::Uniform),
            "adversarial" => Ok(InitKind::Adversarial),
            _ => Err(Error::invalid(format!(
                "unknown init `{s}` (expected uniform or adversarial)"
            ))),
        }
    }
}

/// Opinions of `n` agents; agents `0..z` are the sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    opinions: Vec<Opinion>,
    sources: usize,
    correct: Opinion,
    labels: usize,
    counts: Vec<usize>,
    memories: Option<Vec<TrendMemory>>,
    init: InitKind,
}

impl Population {
    /// The first `sources` agents are the sources; their common opinion is
    /// the correct one.
    pub fn from_opinions(opinions: Vec<Opinion>, sources: usize, labels: usize) -> Result<Self> {
        Self::build(opinions, sources, labels, InitKind::Custom)
    }

    fn build(
        opinions: Vec<Opinion>,
        sources: usize,
        labels: usize,
        init: InitKind,
    ) -> Result<Self> {
        let n = opinions.len();
        if sources == 0 || sources >= n {
            return Err(Error::invalid(format!(
                "need 1 <= z < n, got z = {sources}, n = {n}"
            )));
        }
        if !(2..=usize::from(Opinion::MAX) + 1).contains(&labels) {
            return Err(Error::invalid(format!("unsupported label count {labels}")));
        }
        if let Some(bad) = opinions.iter().find(|&&o| usize::from(o) >= labels) {
            return Err(Error::invalid(format!("opinion {bad} outside 0..{labels}")));
        }
        let correct = opinions[0];
        if opinions[..sources].iter().any(|&o| o != correct) {
            return Err(Error::invalid("sources must share one opinion"));
        }
        let mut counts = vec![0; labels];
        for &o in &opinions {
            counts[usize::from(o)] += 1;
        }
        Ok(Self {
            opinions,
            sources,
            correct,
            labels,
            counts,
            memories: None,
            init,
        })
    }

    /// Attaches trend memories drawn uniformly from `0..=ell`, one per agent.
    pub fn with_trend_memories<R: Rng + ?Sized>(mut self, ell: usize, rng: &mut R) -> Self {
        self.memories = Some(
            (0..self.n())
                .map(|_| TrendMemory::random(ell, rng))
                .collect(),
        );
        self
    }

    pub fn n(&self) -> usize {
        self.opinions.len()
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn correct(&self) -> Opinion {
        self.correct
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn init_kind(&self) -> InitKind {
        self.init
    }

    pub fn opinions(&self) -> &[Opinion] {
        &self.opinions
    }

    pub fn memories(&self) -> Option<&[TrendMemory]> {
        self.memories.as_deref()
    }

    pub fn count(&self, label: Opinion) -> usize {
        self.counts.get(usize::from(label)).copied().unwrap_or(0)
    }

    pub fn correct_count(&self) -> usize {
        self.counts[usize::from(self.correct)]
    }

    pub fn is_converged(&self) -> bool {
        self.correct_count() == self.n()
    }

    /// Whether the maintained counts match a fresh recount.
    pub fn counts_consistent(&self) -> bool {
        let mut fresh = vec![0; self.labels];
        for &o in &self.opinions {
            fresh[usize::from(o)] += 1;
        }
        fresh == self.counts
    }

    fn set(&mut self, agent: usize, opinion: Opinion) {
        let old = self.opinions[agent];
        if old != opinion {
            self.counts[usize::from(old)] -= 1;
            self.counts[usize::from(opinion)] += 1;
            self.opinions[agent] = opinion;
        }
    }
}

pub fn init_uniform<R: Rng + ?Sized>(
    n: usize,
    z: usize,
    labels: usize,
    rng: &mut R,
) -> Result<Population> {
    if labels < 2 || labels > usize::from(Opinion::MAX) + 1 {
        return Err(Error::invalid(format!("unsupported label count {labels}")));
    }
    let mut opinions: Vec<Opinion> = (0..n)
        .map(|_| rng.random_range(0..labels) as Opinion)
        .collect();
    if let Some(&first) = opinions.first() {
        let z = z.min(n);
        opinions[..z].fill(first);
    }
    Population::build(opinions, z, labels, InitKind::Uniform)
}

/// Sources hold 0; the others hold the wrong labels `1..labels` in turn.
pub fn init_adversarial(n: usize, z: usize, labels: usize) -> Result<Population> {
    if labels < 2 || labels > usize::from(Opinion::MAX) + 1 {
        return Err(Error::invalid(format!("unsupported label count {labels}")));
    }
    let opinions = (0..n)
        .map(|u| {
            if u < z {
                0
            } else {
                (1 + (u - z) % (labels - 1)) as Opinion
            }
        })
        .collect();
    Population::build(opinions, z, labels, InitKind::Adversarial)
}

/// Number of agents holding `target` among `ell` uniform draws with
/// replacement.
pub fn draw_sample_ones<R: Rng + ?Sized>(
    pop: &Population,
    ell: usize,
    target: Opinion,
    rng: &mut R,
) -> usize {
    let n = pop.n();
    if ell <= INDEX_SAMPLING_MAX {
        (0..ell)
            .filter(|_| pop.opinions[rng.random_range(0..n)] == target)
            .count()
    } else {
        let frac = pop.count(target) as f64 / n as f64;
        Binomial::new(ell as u64, frac)
            .expect("fraction lies in [0, 1]")
            .sample(rng) as usize
    }
}

enum Stepper {
    Memoryless(MemorylessRule),
    Copy,
    Trend(usize),
}

impl Stepper {
    fn prepare(dynamics: &DynamicsKind, pop: &Population) -> Result<Self> {
        let binary = pop.labels == 2;
        match dynamics {
            DynamicsKind::Voter if binary => Ok(Stepper::Memoryless(voter_rule())),
            DynamicsKind::Voter => Ok(Stepper::Copy),
            DynamicsKind::Trend(_) => {
                if !binary {
                    return Err(Error::invalid("the trend rule is binary only"));
                }
                let ell = dynamics.trend_ell(pop.n()).unwrap_or(1);
                match &pop.memories {
                    Some(m)
                        if m.iter()
                            .all(|m| m.countdown() <= ell && m.previous_sample() <= ell) =>
                    {
                        Ok(Stepper::Trend(ell))
                    }
                    Some(_) => Err(Error::invalid("trend memory exceeds the sample size")),
                    None => Err(Error::invalid("population carries no trend memory")),
                }
            }
            other => {
                if !binary {
                    return Err(Error::invalid(format!(
                        "{other} is implemented for binary opinions only"
                    )));
                }
                let rule = other
                    .memoryless_rule()
                    .expect("non-trend dynamics are memoryless")?;
                Ok(Stepper::Memoryless(rule))
            }
        }
    }

    fn step<R: Rng + ?Sized>(&self, pop: &mut Population, rng: &mut R) {
        let n = pop.n();
        let agent = rng.random_range(0..n);
        if agent < pop.sources {
            return;
        }
        match self {
            Stepper::Memoryless(rule) => {
                let ones = draw_sample_ones(pop, rule.ell(), 1, rng);
                let current = pop.opinions[agent];
                let draw: f64 = rng.random();
                let next = Opinion::from(draw < rule.table(current)[ones]);
                pop.set(agent, next);
            }
            Stepper::Copy => {
                let other = rng.random_range(0..n);
                let next = pop.opinions[other];
                pop.set(agent, next);
            }
            Stepper::Trend(ell) => {
                let memory = pop.memories.as_ref().expect("checked in prepare")[agent];
                if !memory.is_busy() {
                    pop.memories.as_mut().unwrap()[agent].tick();
                    return;
                }
                let ones = draw_sample_ones(pop, *ell, 1, rng);
                let current = pop.opinions[agent];
                let (next, memory) = trend_step_unchecked(memory, current, ones, *ell);
                pop.memories.as_mut().unwrap()[agent] = memory;
                pop.set(agent, next);
            }
        }
    }
}

/// Activates one uniformly drawn agent. Trend dynamics need memories attached
/// with [`Population::with_trend_memories`].
pub fn activation_step<R: Rng + ?Sized>(
    pop: &mut Population,
    dynamics: &DynamicsKind,
    rng: &mut R,
) -> Result<()> {
    Stepper::prepare(dynamics, pop)?.step(pop, rng);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub converged: bool,
    /// Activations until the first all-correct configuration (or the cap).
    pub rounds: u64,
    /// `rounds / n`.
    pub parallel_rounds: f64,
    pub seed: u64,
    pub init: InitKind,
}

/// Default cap on activations: `10^4 n^2`.
pub fn default_max_rounds(n: usize) -> u64 {
    10_000 * (n as u64) * (n as u64)
}

fn run_with_rng<R: Rng + ?Sized>(
    mut pop: Population,
    dynamics: &DynamicsKind,
    rng: &mut R,
    seed: u64,
    max_rounds: u64,
) -> Result<TrialResult> {
    if max_rounds == 0 {
        return Err(Error::invalid("max_rounds must be at least 1"));
    }
    if let (Some(ell), None) = (dynamics.trend_ell(pop.n()), &pop.memories) {
        pop = pop.with_trend_memories(ell, rng);
    }
    let stepper = Stepper::prepare(dynamics, &pop)?;
    let n = pop.n();
    let mut rounds = 0;
    while !pop.is_converged() && rounds < max_rounds {
        stepper.step(&mut pop, rng);
        rounds += 1;
        if rounds % RECOUNT_EVERY == 0 {
            debug_assert!(pop.counts_consistent());
        }
    }
    Ok(TrialResult {
        converged: pop.is_converged(),
        rounds,
        parallel_rounds: rounds as f64 / n as f64,
        seed,
        init: pop.init,
    })
}

/// Runs until every agent holds the correct opinion or `max_rounds`
/// activations have happened. Trend memories, when missing, are drawn from
/// the trial's generator first.
pub fn run_trial(
    init: Population,
    dynamics: &DynamicsKind,
    seed: u64,
    max_rounds: u64,
) -> Result<TrialResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_with_rng(init, dynamics, &mut rng, seed, max_rounds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub n: usize,
    pub z: usize,
    pub labels: usize,
    pub init: InitKind,
    pub dynamics: DynamicsKind,
    pub max_rounds: u64,
}

impl TrialConfig {
    /// Binary opinions, default round cap.
    pub fn new(dynamics: DynamicsKind, n: usize, z: usize, init: InitKind) -> Self {
        Self {
            n,
            z,
            labels: 2,
            init,
            dynamics,
            max_rounds: default_max_rounds(n),
        }
    }

    fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Population> {
        match self.init {
            InitKind::Uniform => init_uniform(self.n, self.z, self.labels, rng),
            InitKind::Adversarial => init_adversarial(self.n, self.z, self.labels),
            InitKind::Custom => Err(Error::invalid(
                "custom populations go through run_trial directly",
            )),
        }
    }
}

/// Independent trials; trial `t` draws its initial configuration and its
/// activations from one generator seeded with `derive_seed(master_seed, t)`.
/// Output order is the trial index regardless of scheduling.
pub fn run_trials(
    config: &TrialConfig,
    trial_count: usize,
    master_seed: u64,
) -> Result<Vec<TrialResult>> {
    if trial_count == 0 {
        return Err(Error::invalid("trial count must be at least 1"));
    }
    (0..trial_count as u64)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(master_seed, t);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = config.initial(&mut rng)?;
            run_with_rng(pop, &config.dynamics, &mut rng, seed, config.max_rounds)
        })
        .collect()
}

/// Binary view: correct holders map to 1, every other label to 0.
pub fn collapse_opinions(pop: &Population) -> Population {
    let opinions: Vec<Opinion> = pop
        .opinions
        .iter()
        .map(|&o| Opinion::from(o == pop.correct))
        .collect();
    let mut collapsed = Population::build(opinions, pop.sources, 2, pop.init)
        .expect("collapsing keeps the population valid");
    collapsed.memories = pop.memories.clone();
    collapsed
}
