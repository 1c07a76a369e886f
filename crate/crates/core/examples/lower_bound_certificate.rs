//! Quadratic lower-bound certificates for full-knowledge rules at n = 64.

use opinionlab::chain::FullKnowledgeRule;
use opinionlab::lowerbound::{random_rule_certificates, theorem1_certificate};

fn main() -> opinionlab::Result<()> {
    let (n, z) = (64, 1);
    let voter_like = theorem1_certificate(&FullKnowledgeRule::voter_like(n)?, z)?;
    println!(
        "voter-like: slow side {}, hit_C {:.1}, hit_C' {:.1}, c N = {:.3}",
        voter_like.branch.as_str(),
        voter_like.hit_c,
        voter_like.hit_c_prime,
        voter_like.c * voter_like.threshold
    );

    let certs = random_rule_certificates(n, z, 20, 7);
    for cert in certs {
        let cert = cert?;
        println!(
            "seed {:>20}: {:<10} max hit {:.3e}",
            cert.seed.unwrap_or_default(),
            cert.branch.as_str(),
            cert.max_hit()
        );
    }
    Ok(())
}
