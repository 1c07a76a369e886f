//! Lower bounds on hitting times from interval products of
//! `a_k = q_k / p_{k-1}`, and the two-sided certificate for full-knowledge
//! rules: a rule cannot be fast toward both opinions at once.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chain::{
    full_knowledge_chain, mirror_chain, BirthDeathChain, FullKnowledgeRule, StateWindow,
};
use crate::error::{Error, Result};
use crate::hitting::{step_expectations_recurrence, LogSumExp};
use crate::seeding::derive_seed;

/// `a_k = q_k / p_{k-1}` for `k = low+1 ..= high`.
pub fn a_coefficients(chain: &BirthDeathChain) -> Result<Vec<f64>> {
    (chain.low() + 1..=chain.high())
        .map(|k| {
            let p = chain.up(k - 1);
            if p == 0.0 {
                Err(Error::ZeroUpProbability { state: k - 1 })
            } else {
                Ok(chain.down(k) / p)
            }
        })
        .collect()
}

/// `ln a_k`, with `ln(0) = -inf` and `+inf` where `p_{k-1} = 0`.
fn log_a_coefficients(chain: &BirthDeathChain, ks: impl Iterator<Item = usize>) -> Vec<f64> {
    ks.map(|k| {
        let p = chain.up(k - 1);
        let q = chain.down(k);
        if p == 0.0 {
            f64::INFINITY
        } else {
            q.ln() - p.ln()
        }
    })
    .collect()
}

fn log_mul(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        a + b
    }
}

fn ln_1p_exp(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln sum_{i<j} prod_{k=i}^{j} a_k` from `ln a_k`.
///
/// Runs in one pass with `S_j = a_j (1 + S_{j-1})`, the sum of all products
/// ending at `j`; the pair total is `sum_j a_j S_{j-1}`.
pub fn log_interval_product_sum(log_a: &[f64]) -> f64 {
    let mut total = LogSumExp::new();
    let mut log_s = f64::NEG_INFINITY;
    for &la in log_a {
        total.push(log_mul(la, log_s));
        log_s = log_mul(la, ln_1p_exp(log_s));
    }
    total.value()
}

/// `sum_{i<j} a(i:j)` where `a(i:j)` is the product of `a[i..=j]`.
pub fn interval_product_sum(a: &[f64]) -> Result<f64> {
    if let Some((index, &value)) = a.iter().enumerate().find(|(_, v)| v.is_nan() || **v <= 0.0) {
        return Err(Error::NonPositive { index, value });
    }
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    Ok(log_interval_product_sum(&log_a).exp())
}

/// Lower bound on `E_low[tau_high]`: the sum of `a(i:j)` over all
/// `low < i < j <= high`.
pub fn hitting_lower_bound(chain: &BirthDeathChain) -> Result<f64> {
    let a = a_coefficients(chain)?;
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    Ok(log_interval_product_sum(&log_a).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dichotomy {
    /// `sum x >= threshold`.
    SumLarge,
    /// `sum x < threshold`; with `threshold = len`, `sum 1/x >= len` follows.
    InverseSumLarge,
}

/// AM-GM dichotomy: for positive `x` of length `N`, either `sum x >= N` or
/// `sum 1/x >= N`.
pub fn amgm_dichotomy(xs: &[f64], threshold: f64) -> Result<Dichotomy> {
    if let Some((index, &value)) = xs
        .iter()
        .enumerate()
        .find(|(_, v)| v.is_nan() || **v <= 0.0)
    {
        return Err(Error::NonPositive { index, value });
    }
    let mut acc = LogSumExp::new();
    xs.iter().for_each(|x| acc.push(x.ln()));
    Ok(dichotomy_from_log_sum(acc.value(), threshold))
}

fn dichotomy_from_log_sum(log_sum: f64, threshold: f64) -> Dichotomy {
    if log_sum >= threshold.ln() {
        Dichotomy::SumLarge
    } else {
        Dichotomy::InverseSumLarge
    }
}

/// Which of the two chains carries the certified slow hitting time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlowSide {
    /// Reaching `3n/4` ones from `n/4` with sources on 1.
    CSlow,
    /// Reaching `3n/4` zeros from `n/4` with sources on 0.
    CPrimeSlow,
}

impl SlowSide {
    pub fn as_str(self) -> &'static str {
        match self {
            SlowSide::CSlow => "CSlow",
            SlowSide::CPrimeSlow => "CPrimeSlow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundCertificate {
    pub n: usize,
    pub z: usize,
    /// Seed of the generator that drew the rule, if it was random.
    pub seed: Option<u64>,
    /// The middle window `(n/4, 3n/4)`.
    pub window: (usize, usize),
    /// `sum a(i:j)` over pairs `n/4 < i < j <= 3n/4` for `C`.
    pub sum_a: f64,
    /// The same for `C'`.
    pub sum_a_prime: f64,
    /// `sum 1/a(i:j)` over the same pairs for `C`.
    pub sum_inverse_a: f64,
    /// `n^2/8 + n/4`.
    pub threshold: f64,
    /// Number of pairs entering the dichotomy: `(n/2)(n/2 - 1)/2`.
    pub pair_count: f64,
    /// `exp(-4z)/2`.
    pub c: f64,
    /// `E_{n/4}[tau_{3n/4}]` on `C` restricted to the window.
    pub hit_c: f64,
    /// `E_{n/4}[tau'_{3n/4}]` on `C'` restricted to the window.
    pub hit_c_prime: f64,
    pub branch: SlowSide,
    /// Largest relative deviation of `a_{n-i+1} a'_i` from
    /// `((i-z)/i) ((n-i+1-z)/(n-i+1))` over the window (0 when every product
    /// is degenerate).
    pub pair_product_error: f64,
}

impl LowerBoundCertificate {
    pub fn max_hit(&self) -> f64 {
        self.hit_c.max(self.hit_c_prime)
    }

    pub const CSV_HEADER: [&'static str; 10] = [
        "n",
        "z",
        "seed",
        "sum_a",
        "sum_a_prime",
        "N",
        "c",
        "hit_C",
        "hit_Cprime",
        "branch",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.z.to_string(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            format!("{:e}", self.sum_a),
            format!("{:e}", self.sum_a_prime),
            format!("{}", self.threshold),
            format!("{:e}", self.c),
            format!("{:e}", self.hit_c),
            format!("{:e}", self.hit_c_prime),
            self.branch.as_str().to_string(),
        ]
    }
}

/// `(1 - 4z/n)^n >= exp(-4z)/2`, the size condition under which the pairwise
/// bound on `a'` holds with constant `c`.
pub fn certificate_size_ok(n: usize, z: usize) -> (bool, f64, f64) {
    let lhs = (1.0 - 4.0 * z as f64 / n as f64).powi(n as i32);
    let rhs = (-4.0 * z as f64).exp() / 2.0;
    (lhs >= rhs, lhs, rhs)
}

fn exact_hit(chain: &BirthDeathChain) -> Result<f64> {
    match step_expectations_recurrence(chain) {
        Ok(report) => Ok(report.total()),
        Err(Error::Unreachable { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Builds `C` and `C'` for `rule`, evaluates both interval-product sums over
/// the middle window and the exact window hitting times, and checks every
/// inequality the two-sided argument relies on.
pub fn theorem1_certificate(rule: &FullKnowledgeRule, z: usize) -> Result<LowerBoundCertificate> {
    let n = rule.n();
    if z == 0 {
        return Err(Error::invalid("need at least one source"));
    }
    if !n.is_multiple_of(4) {
        return Err(Error::Precondition(format!(
            "certificate needs n divisible by 4, got n = {n}"
        )));
    }
    if n <= 4 * z {
        return Err(Error::Precondition(format!(
            "certificate needs n > 4z, got n = {n}, z = {z}"
        )));
    }
    let (size_ok, lhs, rhs) = certificate_size_ok(n, z);
    if !size_ok {
        return Err(Error::TooSmall { n, z, lhs, rhs });
    }

    let (low, high) = StateWindow::Middle.resolve(n, z)?;
    let window_len = (high - low + 1) as f64;
    let threshold = (n * n) as f64 / 8.0 + n as f64 / 4.0;
    if threshold != window_len * (window_len - 1.0) / 2.0 {
        return Err(Error::CertificateFailed(format!(
            "threshold {threshold} differs from the window pair count"
        )));
    }
    let c = (-4.0 * z as f64).exp() / 2.0;

    let full = full_knowledge_chain(rule, z, StateWindow::Full)?;
    let full_mirror = mirror_chain(rule, z, StateWindow::Full)?;

    // Pair-product identity over the whole window.
    let mut pair_product_error: f64 = 0.0;
    for i in low..=high {
        let k = n - i + 1;
        let a = full.down(k) / full.up(k - 1);
        let a_prime = full_mirror.down(i) / full_mirror.up(i - 1);
        let product = a * a_prime;
        if product.is_finite() && product > 0.0 {
            let want = (i - z) as f64 / i as f64 * ((n - i + 1 - z) as f64 / (n - i + 1) as f64);
            pair_product_error = pair_product_error.max((product / want - 1.0).abs());
        }
    }

    // Lemma-2 pairs for a chain on the window: indices low+1..=high, a set the
    // mirror map k -> n-k+1 sends onto itself.
    let log_a = log_a_coefficients(&full, low + 1..=high);
    let log_a_prime = log_a_coefficients(&full_mirror, low + 1..=high);
    let log_inv_a: Vec<f64> = log_a.iter().map(|x| -x).collect();
    let m = log_a.len() as f64;
    let pair_count = m * (m - 1.0) / 2.0;

    let log_sum_a = log_interval_product_sum(&log_a);
    let log_sum_inv = log_interval_product_sum(&log_inv_a);
    let log_sum_a_prime = log_interval_product_sum(&log_a_prime);

    let branch = match dichotomy_from_log_sum(log_sum_a, pair_count) {
        Dichotomy::SumLarge => SlowSide::CSlow,
        Dichotomy::InverseSumLarge => SlowSide::CPrimeSlow,
    };
    let fail = |msg: String| Err(Error::CertificateFailed(msg));
    match branch {
        SlowSide::CSlow => {}
        SlowSide::CPrimeSlow => {
            if log_sum_inv < pair_count.ln() {
                return fail(format!(
                    "AM-GM violated: both sums below {pair_count} (n = {n})"
                ));
            }
            if log_sum_a_prime < (c * pair_count).ln() {
                return fail(format!(
                    "mirror sum {:e} below c * {pair_count} (n = {n})",
                    log_sum_a_prime.exp()
                ));
            }
        }
    }

    let chain = full_knowledge_chain(rule, z, StateWindow::Middle)?;
    let mirror = mirror_chain(rule, z, StateWindow::Middle)?;
    let hit_c = exact_hit(&chain)?;
    let hit_c_prime = exact_hit(&mirror)?;

    let sum_a = log_sum_a.exp();
    let sum_a_prime = log_sum_a_prime.exp();
    let slack = 1.0 - 1e-12;
    if hit_c < sum_a * slack || hit_c_prime < sum_a_prime * slack {
        return fail(format!(
            "hitting time below its interval-product bound (n = {n}): \
             {hit_c:e} vs {sum_a:e}, {hit_c_prime:e} vs {sum_a_prime:e}"
        ));
    }
    if hit_c.max(hit_c_prime) < c * threshold {
        return fail(format!(
            "both hitting times below c * N = {}",
            c * threshold
        ));
    }

    Ok(LowerBoundCertificate {
        n,
        z,
        seed: None,
        window: (low, high),
        sum_a,
        sum_a_prime,
        sum_inverse_a: log_sum_inv.exp(),
        threshold,
        pair_count,
        c,
        hit_c,
        hit_c_prime,
        branch,
        pair_product_error,
    })
}

/// Certificates for `count` random full-knowledge rules, rule `t` drawn from
/// a generator seeded with `derive_seed(master_seed, t)`.
pub fn random_rule_certificates(
    n: usize,
    z: usize,
    count: usize,
    master_seed: u64,
) -> Vec<Result<LowerBoundCertificate>> {
    (0..count as u64)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(master_seed, t);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rule = FullKnowledgeRule::random(n, &mut rng)?;
            let mut cert = theorem1_certificate(&rule, z)?;
            cert.seed = Some(seed);
            Ok(cert)
        })
        .collect()
}

pub fn write_certificates_csv<W: Write>(
    writer: W,
    certificates: &[LowerBoundCertificate],
) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(LowerBoundCertificate::CSV_HEADER)?;
    for cert in certificates {
        out.write_record(cert.csv_record())?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::chain::{voter_chain, Boundary};
    use crate::hitting::hitting_time_oracle;

    fn brute_pairs(a: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                total += a[i..=j].iter().product::<f64>();
            }
        }
        total
    }

    #[test]
    fn voter_a_coefficients() {
        let c = voter_chain(4, 1, Boundary::Absorbing).unwrap();
        let a = a_coefficients(&c).unwrap();
        assert_relative_eq!(a[0], 2.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn zero_up_probability_is_named() {
        let c = BirthDeathChain::new(
            1,
            vec![0.5, 0.0, 0.5, 0.0],
            vec![0.0, 0.1, 0.1, 0.0],
            Boundary::Absorbing,
        )
        .unwrap();
        assert!(matches!(
            a_coefficients(&c),
            Err(Error::ZeroUpProbability { state: 2 })
        ));
    }

    #[test]
    fn interval_sums() {
        for m in [2usize, 5, 40] {
            let ones = vec![1.0; m];
            assert_relative_eq!(
                interval_product_sum(&ones).unwrap(),
                (m * (m - 1) / 2) as f64,
                max_relative = 1e-12
            );
        }
        assert_relative_eq!(
            interval_product_sum(&[2.0, 0.5]).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        assert!(interval_product_sum(&[1.0, 0.0]).is_err());
        assert!(interval_product_sum(&[1.0, -2.0]).is_err());
        assert_eq!(interval_product_sum(&[3.0]).unwrap(), 0.0);
    }

    #[test]
    fn interval_sum_matches_brute_force_on_voter() {
        let c = voter_chain(8, 1, Boundary::Reflecting).unwrap();
        let a = a_coefficients(&c).unwrap();
        assert_relative_eq!(
            interval_product_sum(&a).unwrap(),
            brute_pairs(&a),
            max_relative = 1e-12
        );
    }

    #[test]
    fn lower_bound_below_exact() {
        let c = voter_chain(4, 1, Boundary::Absorbing).unwrap();
        let bound = hitting_lower_bound(&c).unwrap();
        assert!(bound <= 196.0 / 9.0);
        let r = c.with_boundary(Boundary::Reflecting);
        assert!(hitting_lower_bound(&r).unwrap() <= 196.0 / 9.0);
    }

    #[test]
    fn balanced_walk_bound() {
        // p = q = 1/2 in the interior: every a_k = 1 except the top.
        let m = 10;
        let mut up = vec![0.5; m + 1];
        up[m] = 0.0;
        let mut down = vec![0.5; m + 1];
        down[0] = 0.0;
        down[m] = 1.0;
        up[0] = 0.5;
        let c = BirthDeathChain::new(0, up, down, Boundary::Reflecting).unwrap();
        let a = a_coefficients(&c).unwrap();
        assert!(a[..m - 1].iter().all(|&x| x == 1.0));
        let exact = hitting_time_oracle(&c, 0).unwrap();
        assert!(hitting_lower_bound(&c).unwrap() <= exact);
    }

    #[test]
    fn amgm_examples() {
        assert_eq!(
            amgm_dichotomy(&[1.0, 1.0, 1.0], 3.0).unwrap(),
            Dichotomy::SumLarge
        );
        assert_eq!(
            amgm_dichotomy(&[0.5, 0.5, 0.5], 3.0).unwrap(),
            Dichotomy::InverseSumLarge
        );
        assert!(amgm_dichotomy(&[1.0, 0.0], 2.0).is_err());
    }

    #[test]
    fn voter_like_certificate() {
        let rule = FullKnowledgeRule::voter_like(64).unwrap();
        let cert = theorem1_certificate(&rule, 1).unwrap();
        assert_eq!(cert.threshold, 528.0);
        assert_eq!(cert.pair_count, 496.0);
        assert_relative_eq!(cert.c, (-4.0f64).exp() / 2.0);
        assert!(cert.pair_product_error < 1e-12);
        assert!(cert.max_hit() >= cert.c * cert.threshold);
        assert_eq!(cert.window, (16, 48));
    }

    #[test]
    fn eager_rule_is_slow_in_the_mirror() {
        let n = 64;
        let mut g = vec![1.0; n + 1];
        g[0] = 0.0;
        let rule = FullKnowledgeRule::new(g.clone(), g).unwrap();
        let cert = theorem1_certificate(&rule, 1).unwrap();
        assert_eq!(cert.branch, SlowSide::CPrimeSlow);
        assert_eq!(cert.sum_a, 0.0);
        assert!(cert.hit_c_prime >= cert.c * cert.threshold);
    }

    #[test]
    fn certificate_preconditions() {
        let rule = FullKnowledgeRule::voter_like(62).unwrap();
        assert!(matches!(
            theorem1_certificate(&rule, 1),
            Err(Error::Precondition(_))
        ));
        let rule = FullKnowledgeRule::voter_like(8).unwrap();
        assert!(matches!(
            theorem1_certificate(&rule, 1),
            Err(Error::TooSmall { .. })
        ));
        let rule = FullKnowledgeRule::voter_like(16).unwrap();
        assert!(matches!(
            theorem1_certificate(&rule, 4),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn size_condition_threshold() {
        let (ok8, lhs, rhs) = certificate_size_ok(8, 1);
        assert!(!ok8);
        assert_relative_eq!(lhs, 0.5f64.powi(8));
        assert_relative_eq!(rhs, 0.009_157_819_444_367_09, max_relative = 1e-12);
        assert!(certificate_size_ok(64, 1).0);
    }

    #[test]
    fn csv_rows() {
        let rule = FullKnowledgeRule::voter_like(64).unwrap();
        let cert = theorem1_certificate(&rule, 1).unwrap();
        let mut buf = Vec::new();
        write_certificates_csv(&mut buf, &[cert]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,z,seed,sum_a,sum_a_prime,N,c,hit_C,hit_Cprime,branch"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("64,1,,"));
        assert!(row.contains(",528,"));
    }
}
