//! A guessing game between an obfuscator and an attacker over a statement
//! set with one frequent statement `F` (index 0). The confidential
//! statement is `F` with probability `p_l` and otherwise uniform over the
//! remaining `n - 1`. The obfuscator adds one misleading statement and the
//! attacker picks one of the two.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::AttackError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObfStrategy {
    /// Misleading statement uniform over everything but the real one.
    UniformMisleading,
    /// Always use `F` as the misleading statement when the real one is not `F`.
    FrequentAsMisleading,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttStrategy {
    /// Pick `F` when it is shown, otherwise flip a coin.
    PreferFrequent,
    /// Always flip a coin.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GameValue {
    /// The attacker's exact success probability.
    pub exact: f64,
    /// The variant `p_l + (1 - p_l)(1 - 1/n)/2`, which treats the misleading
    /// statement as drawn from `n` candidates instead of `n - 1`.
    pub alt_form: f64,
}

fn check(p_l: f64, n: u32) -> Result<(), AttackError> {
    if !(0.0..=1.0).contains(&p_l) {
        return Err(AttackError::InvalidProbability(p_l));
    }
    if n < 2 {
        return Err(AttackError::TooFewStatements(n));
    }
    Ok(())
}

pub fn game_exact(
    p_l: f64,
    n: u32,
    obf: ObfStrategy,
    att: AttStrategy,
) -> Result<GameValue, AttackError> {
    check(p_l, n)?;
    let n_f = n as f64;
    let exact = match (obf, att) {
        (_, AttStrategy::Uniform) => 0.5,
        (ObfStrategy::UniformMisleading, AttStrategy::PreferFrequent) => {
            p_l + (1.0 - p_l) * (1.0 - 1.0 / (n_f - 1.0)) / 2.0
        }
        (ObfStrategy::FrequentAsMisleading, AttStrategy::PreferFrequent) => p_l,
    };
    Ok(GameValue {
        exact,
        alt_form: p_l + (1.0 - p_l) * (1.0 - 1.0 / n_f) / 2.0,
    })
}

/// Monte-Carlo estimate of the attacker's success rate.
pub fn game_simulate(
    p_l: f64,
    n: u32,
    trials: u64,
    seed: u64,
    obf: ObfStrategy,
    att: AttStrategy,
) -> Result<f64, AttackError> {
    check(p_l, n)?;
    if trials == 0 {
        return Ok(0.0);
    }
    const CHUNK: u64 = 1 << 16;
    let chunks = trials.div_ceil(CHUNK);
    let wins: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = CHUNK.min(trials - c * CHUNK);
            (0..count)
                .filter(|_| play(&mut rng, p_l, n, obf, att))
                .count() as u64
        })
        .sum();
    Ok(wins as f64 / trials as f64)
}

fn play(rng: &mut ChaCha8Rng, p_l: f64, n: u32, obf: ObfStrategy, att: AttStrategy) -> bool {
    let real = if rng.gen_bool(p_l) {
        0
    } else {
        rng.gen_range(1..n)
    };
    let misleading = match obf {
        ObfStrategy::FrequentAsMisleading if real != 0 => 0,
        _ => {
            let m = rng.gen_range(0..n - 1);
            if m >= real {
                m + 1
            } else {
                m
            }
        }
    };
    let guess = match att {
        AttStrategy::PreferFrequent if real == 0 || misleading == 0 => 0,
        _ => {
            if rng.gen_bool(0.5) {
                real
            } else {
                misleading
            }
        }
    };
    guess == real
}
