//! Independent check on hitting times: solve
//! `E_top = 0`, `E_i = 1 + p_i E_{i+1} + q_i E_{i-1} + r_i E_i`
//! by tridiagonal elimination, without using any step-expectation formula.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{float::FloatCore, ToPrimitive, Zero};

use super::DoubleDouble;
use crate::chain::BirthDeathChain;
use crate::error::{Error, Result};

/// Chains whose top state is at most this use exact rational arithmetic.
pub const RATIONAL_MAX_STATE: usize = 64;
/// Largest top state the oracle accepts.
pub const ORACLE_MAX_STATE: usize = 4096;

fn check_bounds(chain: &BirthDeathChain, start: usize) -> Result<()> {
    let (low, high) = (chain.low(), chain.high());
    if !chain.contains(start) {
        return Err(Error::invalid(format!(
            "start state {start} outside {low}..={high}"
        )));
    }
    if high > ORACLE_MAX_STATE {
        return Err(Error::invalid(format!(
            "oracle handles chains up to state {ORACLE_MAX_STATE}, got {high}"
        )));
    }
    Ok(())
}

/// `E_i[tau_high]` for `i = start..=high` by forward elimination (rows
/// `low..high`, sub-diagonal `-q_i`, diagonal `p_i + q_i`, super-diagonal
/// `-p_i`) and back substitution.
fn solve_double_double(chain: &BirthDeathChain, start: usize) -> Result<Vec<DoubleDouble>> {
    check_bounds(chain, start)?;
    let (low, high) = (chain.low(), chain.high());
    if start == high {
        return Ok(vec![DoubleDouble::ZERO]);
    }
    let m = high - low;
    let mut c_prime = Vec::with_capacity(m);
    let mut d_prime = Vec::with_capacity(m);
    for idx in 0..m {
        let state = low + idx;
        let p = DoubleDouble::new(chain.up(state));
        let q = DoubleDouble::new(chain.down(state));
        let mut pivot = p + q;
        let mut rhs = DoubleDouble::ONE;
        if idx > 0 {
            pivot = pivot - q * c_prime[idx - 1];
            rhs = rhs + q * d_prime[idx - 1];
        }
        if pivot.is_zero() {
            return Err(Error::Unreachable { state });
        }
        c_prime.push(p / pivot);
        d_prime.push(rhs / pivot);
    }
    let mut values = vec![DoubleDouble::ZERO; high - start + 1];
    let mut value = DoubleDouble::ZERO;
    for idx in (start - low..m).rev() {
        value = d_prime[idx] + c_prime[idx] * value;
        values[idx - (start - low)] = value;
    }
    Ok(values)
}

/// Exact integer image of a probability at scale `2^scale`.
fn scaled(x: f64, scale: i32) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let (mantissa, exponent, _) = x.integer_decode();
    BigInt::from(mantissa) << (exponent as i32 + scale) as usize
}

fn lowest_exponent(x: f64) -> i32 {
    if x == 0.0 {
        0
    } else {
        x.integer_decode().1 as i32
    }
}

/// Exact `E_i[tau_high]` for `i = start..=high`, or just `E_start` unless
/// `all`.
///
/// Every `f64` probability is dyadic, so after scaling the system by a common
/// `2^s` all coefficients are integers. Eliminating from the top keeps each
/// `E_i = (A_i + B_i E_{i-1}) / C_i` with integer `A, B, C`:
/// `A_i = 2^s C_{i+1} + P_i A_{i+1}`, `B_i = Q_i C_{i+1}`,
/// `C_i = (P_i + Q_i) C_{i+1} - P_i B_{i+1}`. Only the final substitution
/// touches rationals.
fn solve_rational(chain: &BirthDeathChain, start: usize, all: bool) -> Result<Vec<BigRational>> {
    check_bounds(chain, start)?;
    let (low, high) = (chain.low(), chain.high());
    if start == high {
        return Ok(vec![BigRational::zero()]);
    }
    let scale = (low..high)
        .flat_map(|k| [chain.up(k), chain.down(k)])
        .map(|x| -lowest_exponent(x))
        .max()
        .unwrap_or(0)
        .max(0);
    let unit = BigInt::from(1) << scale as usize;

    let m = high - low;
    let mut a = vec![BigInt::zero(); m];
    let mut b = vec![BigInt::zero(); m];
    let mut c = vec![BigInt::zero(); m];
    let (mut a_next, mut b_next, mut c_next) = (BigInt::zero(), BigInt::zero(), BigInt::from(1));
    for idx in (0..m).rev() {
        let state = low + idx;
        let p = scaled(chain.up(state), scale);
        let q = scaled(chain.down(state), scale);
        a[idx] = &unit * &c_next + &p * &a_next;
        b[idx] = &q * &c_next;
        c[idx] = (&p + &q) * &c_next - &p * &b_next;
        if c[idx].is_zero() {
            return Err(Error::Unreachable { state });
        }
        a_next = a[idx].clone();
        b_next = b[idx].clone();
        c_next = c[idx].clone();
    }

    // q_low = 0, so B_low = 0 and E_low = A_low / C_low; walk up from there.
    let offset = start - low;
    let last = if all { m } else { offset + 1 };
    let mut value = BigRational::new(a[0].clone(), c[0].clone());
    let mut values = Vec::with_capacity(last - offset + 1);
    for idx in 0..last.min(m) {
        if idx > 0 {
            value = (BigRational::from_integer(a[idx].clone())
                + BigRational::from_integer(b[idx].clone()) * &value)
                / BigRational::from_integer(c[idx].clone());
        }
        if idx >= offset {
            values.push(value.clone());
        }
    }
    if all {
        values.push(BigRational::zero());
    }
    Ok(values)
}

/// `E_start[tau_high]` in exact rational arithmetic. Probabilities are taken
/// as the exact dyadic values of their `f64` representations.
pub fn hitting_time_exact(chain: &BirthDeathChain, start: usize) -> Result<BigRational> {
    solve_rational(chain, start, false).map(|mut v| v.swap_remove(0))
}

/// `E_start[tau_high]` in double-double arithmetic.
pub fn hitting_time_double_double(chain: &BirthDeathChain, start: usize) -> Result<f64> {
    solve_double_double(chain, start).map(|v| v[0].to_f64())
}

/// `E_start[tau_high]`: exact rationals up to [`RATIONAL_MAX_STATE`],
/// double-double beyond.
pub fn hitting_time_oracle(chain: &BirthDeathChain, start: usize) -> Result<f64> {
    if chain.high() <= RATIONAL_MAX_STATE {
        hitting_time_exact(chain, start).map(|r| rational_to_f64(&r))
    } else {
        hitting_time_double_double(chain, start)
    }
}

/// `E_i[tau_high]` for every state `i` of the chain, lowest first, with the
/// same arithmetic choice as [`hitting_time_oracle`].
pub fn hitting_times_oracle_all(chain: &BirthDeathChain) -> Result<Vec<f64>> {
    if chain.high() <= RATIONAL_MAX_STATE {
        solve_rational(chain, chain.low(), true).map(|v| v.iter().map(rational_to_f64).collect())
    } else {
        solve_double_double(chain, chain.low())
            .map(|v| v.into_iter().map(DoubleDouble::to_f64).collect())
    }
}

/// Correctly scaled conversion that does not overflow on huge numerators and
/// denominators.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let shift = |x: &BigInt| x.bits().saturating_sub(900);
    let (ns, ds) = (shift(r.numer()), shift(r.denom()));
    let n = (r.numer() >> ns).to_f64().unwrap_or(f64::NAN);
    let d = (r.denom() >> ds).to_f64().unwrap_or(f64::NAN);
    n / d * 2f64.powi(ns as i32 - ds as i32)
}
