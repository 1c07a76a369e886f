//! Update rules executed by an activated non-source agent.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::Deserialize;

use crate::chain::MemorylessRule;
use crate::error::{Error, Result};

/// Opinion label. Binary dynamics use 0 and 1.
pub type Opinion = u8;

/// Copy the opinion of one uniformly sampled agent.
pub fn voter_rule() -> MemorylessRule {
    MemorylessRule::new(vec![0.0, 1.0], vec![0.0, 1.0]).expect("voter tables are valid")
}

/// Best-of-`ell` majority; on a tie the agent keeps its current opinion.
pub fn majority_rule(ell: usize) -> Result<MemorylessRule> {
    check_ell(ell)?;
    let g0 = (0..=ell)
        .map(|s| f64::from(u8::from(2 * s > ell)))
        .collect();
    let g1 = (0..=ell)
        .map(|s| f64::from(u8::from(2 * s >= ell)))
        .collect();
    MemorylessRule::new(g0, g1)
}

/// Adopt 1 with probability `s / ell`.
pub fn mean_rule(ell: usize) -> Result<MemorylessRule> {
    check_ell(ell)?;
    let g: Vec<f64> = (0..=ell).map(|s| s as f64 / ell as f64).collect();
    MemorylessRule::new(g.clone(), g)
}

fn check_ell(ell: usize) -> Result<()> {
    if ell == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    Ok(())
}

/// Returns 1 iff `draw < g_current(ones)`; `draw` is uniform in `[0, 1)`.
pub fn apply_memoryless(
    rule: &MemorylessRule,
    current: Opinion,
    ones: usize,
    draw: f64,
) -> Result<Opinion> {
    if ones > rule.ell() {
        return Err(Error::invalid(format!(
            "sample count {ones} exceeds sample size {}",
            rule.ell()
        )));
    }
    Ok(Opinion::from(draw < rule.table(current)[ones]))
}

/// Per-agent state of the trend rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrendMemory {
    previous_sample: u32,
    countdown: u32,
}

impl TrendMemory {
    pub fn new(previous_sample: usize, countdown: usize, ell: usize) -> Result<Self> {
        if previous_sample > ell || countdown > ell {
            return Err(Error::invalid(format!(
                "trend memory ({previous_sample}, {countdown}) outside 0..={ell}"
            )));
        }
        Ok(Self {
            previous_sample: previous_sample as u32,
            countdown: countdown as u32,
        })
    }

    /// Both fields independently uniform in `0..=ell`.
    pub fn random<R: Rng + ?Sized>(ell: usize, rng: &mut R) -> Self {
        let countdown = rng.random_range(0..=ell as u32);
        let previous_sample = rng.random_range(0..=ell as u32);
        Self {
            previous_sample,
            countdown,
        }
    }

    pub fn previous_sample(&self) -> usize {
        self.previous_sample as usize
    }

    pub fn countdown(&self) -> usize {
        self.countdown as usize
    }

    /// Whether the next activation compares samples.
    pub fn is_busy(&self) -> bool {
        self.countdown == 0
    }

    /// Bits needed to store one memory: two integers in `0..=ell`.
    pub fn bits(ell: usize) -> u32 {
        2 * (usize::BITS - ell.leading_zeros())
    }

    /// Non-busy activation: the sample is ignored.
    pub(crate) fn tick(&mut self) {
        debug_assert!(self.countdown > 0);
        self.countdown -= 1;
    }
}

/// One activation of the trend rule with `ones` ones in the sample.
///
/// With a positive countdown the opinion is kept and the countdown drops by
/// one. Otherwise the agent moves to 1 if the count rose since the last busy
/// activation, to 0 if it fell, and stays put on a tie; then it stores the
/// count and resets the countdown to `ell`.
pub fn trend_step(
    memory: TrendMemory,
    current: Opinion,
    ones: usize,
    ell: usize,
) -> Result<(Opinion, TrendMemory)> {
    if ones > ell {
        return Err(Error::invalid(format!(
            "sample count {ones} exceeds sample size {ell}"
        )));
    }
    if memory.countdown() > ell || memory.previous_sample() > ell {
        return Err(Error::invalid("trend memory exceeds the sample size"));
    }
    Ok(trend_step_unchecked(memory, current, ones, ell))
}

pub(crate) fn trend_step_unchecked(
    mut memory: TrendMemory,
    current: Opinion,
    ones: usize,
    ell: usize,
) -> (Opinion, TrendMemory) {
    if memory.countdown > 0 {
        memory.countdown -= 1;
        return (current, memory);
    }
    let previous = memory.previous_sample as usize;
    let next = match ones.cmp(&previous) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => current,
    };
    memory.previous_sample = ones as u32;
    memory.countdown = ell as u32;
    (next, memory)
}

/// `ceil(10 log2 n)`, at least 1.
pub fn default_trend_ell(n: usize) -> usize {
    if n.is_power_of_two() {
        return (10 * n.trailing_zeros() as usize).max(1);
    }
    ((10.0 * (n as f64).log2()).ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsKind {
    Voter,
    Majority(usize),
    Mean(usize),
    Table {
        name: String,
        rule: MemorylessRule,
    },
    /// Follow the trend; `None` picks [`default_trend_ell`] for the population size.
    Trend(Option<usize>),
}

#[derive(Deserialize)]
struct TableFile {
    ell: usize,
    g0: Vec<f64>,
    g1: Vec<f64>,
}

impl DynamicsKind {
    /// Reads a JSON table `{"ell": .., "g0": [..], "g1": [..]}`.
    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: TableFile = serde_json::from_str(&text)?;
        let rule = MemorylessRule::new(file.g0, file.g1)?;
        if rule.ell() != file.ell {
            return Err(Error::invalid(format!(
                "{}: ell = {} but tables have {} entries",
                path.display(),
                file.ell,
                rule.ell() + 1
            )));
        }
        Ok(DynamicsKind::Table {
            name: path.display().to_string(),
            rule,
        })
    }

    pub fn is_stateful(&self) -> bool {
        matches!(self, DynamicsKind::Trend(_))
    }

    /// Tables for memoryless dynamics, `None` for the trend rule.
    pub fn memoryless_rule(&self) -> Option<Result<MemorylessRule>> {
        match self {
            DynamicsKind::Voter => Some(Ok(voter_rule())),
            DynamicsKind::Majority(ell) => Some(majority_rule(*ell)),
            DynamicsKind::Mean(ell) => Some(mean_rule(*ell)),
            DynamicsKind::Table { rule, .. } => Some(Ok(rule.clone())),
            DynamicsKind::Trend(_) => None,
        }
    }

    /// Sample size of the trend rule at population size `n`.
    pub fn trend_ell(&self, n: usize) -> Option<usize> {
        match self {
            DynamicsKind::Trend(ell) => Some(ell.unwrap_or_else(|| default_trend_ell(n))),
            _ => None,
        }
    }
}

impl fmt::Display for DynamicsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynamicsKind::Voter => f.write_str("voter"),
            DynamicsKind::Majority(ell) => write!(f, "majority:{ell}"),
            DynamicsKind::Mean(ell) => write!(f, "mean:{ell}"),
            DynamicsKind::Table { name, .. } => write!(f, "table:{name}"),
            DynamicsKind::Trend(None) => f.write_str("trend"),
            DynamicsKind::Trend(Some(ell)) => write!(f, "trend:{ell}"),
        }
    }
}

impl FromStr for DynamicsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let ell = |arg: Option<&str>| -> Result<usize> {
            let arg = arg.ok_or_else(|| Error::invalid(format!("`{head}` needs `:<ell>`")))?;
            let ell: usize = arg
                .parse()
                .map_err(|_| Error::invalid(format!("bad sample size `{arg}`")))?;
            check_ell(ell)?;
            Ok(ell)
        };
        match head {
            "voter" if arg.is_none() => Ok(DynamicsKind::Voter),
            "majority" => Ok(DynamicsKind::Majority(ell(arg)?)),
            "mean" => Ok(DynamicsKind::Mean(ell(arg)?)),
            "trend" if arg.is_none() => Ok(DynamicsKind::Trend(None)),
            "trend" => Ok(DynamicsKind::Trend(Some(ell(arg)?))),
            "table" => match arg {
                Some(path) if !path.is_empty() => Self::from_table_file(Path::new(path)),
                _ => Err(Error::invalid("`table` needs `:<path>`")),
            },
            _ => Err(Error::invalid(format!("unknown dynamics `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn voter_rule_copies() {
        let v = voter_rule();
        assert_eq!(apply_memoryless(&v, 0, 1, 0.999).unwrap(), 1);
        assert_eq!(apply_memoryless(&v, 1, 0, 0.0).unwrap(), 0);
        assert_eq!(apply_memoryless(&v, 1, 1, 0.5).unwrap(), 1);
        assert!(apply_memoryless(&v, 1, 2, 0.5).is_err());
    }

    #[test]
    fn support_endpoints_are_deterministic() {
        let rule = mean_rule(5).unwrap();
        for draw in [0.0, 0.3, 0.999_999] {
            assert_eq!(apply_memoryless(&rule, 1, 0, draw).unwrap(), 0);
            assert_eq!(apply_memoryless(&rule, 0, 5, draw).unwrap(), 1);
        }
    }

    #[test]
    fn majority_tables() {
        let m3 = majority_rule(3).unwrap();
        assert_eq!(m3.g0(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(m3.g1(), &[0.0, 0.0, 1.0, 1.0]);

        let m2 = majority_rule(2).unwrap();
        assert_eq!(apply_memoryless(&m2, 0, 1, 0.0).unwrap(), 0);
        assert_eq!(apply_memoryless(&m2, 1, 1, 0.999).unwrap(), 1);

        assert_eq!(majority_rule(1).unwrap(), voter_rule());
        assert!(majority_rule(0).is_err());
    }

    #[test]
    fn mean_tables() {
        let m4 = mean_rule(4).unwrap();
        assert_eq!(m4.g0()[1], 0.25);
        assert_eq!(mean_rule(1).unwrap(), voter_rule());
    }

    #[test]
    fn trend_busy_activation() {
        let ell = 20;
        let mem = TrendMemory::new(5, 0, ell).unwrap();
        assert_eq!(
            trend_step(mem, 0, 7, ell).unwrap(),
            (1, TrendMemory::new(7, ell, ell).unwrap())
        );
        assert_eq!(
            trend_step(mem, 1, 3, ell).unwrap(),
            (0, TrendMemory::new(3, ell, ell).unwrap())
        );
        for current in [0, 1] {
            assert_eq!(
                trend_step(mem, current, 5, ell).unwrap(),
                (current, TrendMemory::new(5, ell, ell).unwrap())
            );
        }
    }

    #[test]
    fn trend_idle_activation() {
        let ell = 20;
        let mem = TrendMemory::new(5, 3, ell).unwrap();
        let (op, next) = trend_step(mem, 1, 0, ell).unwrap();
        assert_eq!(op, 1);
        assert_eq!(next.countdown(), 2);
        assert_eq!(next.previous_sample(), 5);
        assert!(trend_step(mem, 1, ell + 1, ell).is_err());
        assert!(TrendMemory::new(ell + 1, 0, ell).is_err());
    }

    #[test]
    fn busy_activation_cadence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ell in [1, 4, 30] {
            let mut mem = TrendMemory::random(ell, &mut rng);
            let mut op = 0;
            let mut busy_at = Vec::new();
            for t in 0..10 * (ell + 1) {
                let was_busy = mem.is_busy();
                let ones = rng.random_range(0..=ell);
                (op, mem) = trend_step(mem, op, ones, ell).unwrap();
                if was_busy {
                    busy_at.push(t);
                    assert_eq!(mem.countdown(), ell);
                    assert_eq!(mem.previous_sample(), ones);
                }
            }
            assert!(busy_at.windows(2).all(|w| w[1] - w[0] == ell + 1));
        }
    }

    #[test]
    fn memory_bits() {
        assert_eq!(TrendMemory::bits(1), 2);
        assert_eq!(TrendMemory::bits(100), 14);
        assert_eq!(TrendMemory::bits(127), 14);
        assert_eq!(TrendMemory::bits(128), 16);
    }

    #[test]
    fn default_ell_uses_base_two() {
        assert_eq!(default_trend_ell(1024), 100);
        assert_eq!(default_trend_ell(8), 30);
        assert_eq!(default_trend_ell(1000), 100);
        assert_eq!(default_trend_ell(1), 1);
    }

    #[test]
    fn parse_and_display() {
        for s in ["voter", "majority:3", "mean:5", "trend", "trend:40"] {
            let d: DynamicsKind = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert!("majority".parse::<DynamicsKind>().is_err());
        assert!("mean:0".parse::<DynamicsKind>().is_err());
        assert!("voter:2".parse::<DynamicsKind>().is_err());
        assert!("gossip".parse::<DynamicsKind>().is_err());
        assert!("table:".parse::<DynamicsKind>().is_err());
    }

    #[test]
    fn table_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rule.json");
        std::fs::write(
            &path,
            r#"{"ell": 2, "g0": [0, 0.5, 1], "g1": [0, 0.75, 1]}"#,
        )
        .unwrap();
        let d: DynamicsKind = format!("table:{}", path.display()).parse().unwrap();
        let rule = d.memoryless_rule().unwrap().unwrap();
        assert_eq!(rule.g1(), &[0.0, 0.75, 1.0]);

        std::fs::write(
            &path,
            r#"{"ell": 3, "g0": [0, 0.5, 1], "g1": [0, 0.75, 1]}"#,
        )
        .unwrap();
        assert!(DynamicsKind::from_table_file(&path).is_err());
        assert!(DynamicsKind::from_table_file(&dir.path().join("missing.json")).is_err());
    }
}
