//! Excitation signal generators.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// 31-bit Fibonacci LFSR for the maximal-length polynomial `x^31 + x^28 + 1`.
#[derive(Debug, Clone)]
pub struct Lfsr31 {
    state: u32,
}

impl Lfsr31 {
    pub fn new(seed: u64) -> Self {
        // splitmix64 finalizer so nearby seeds land on unrelated states
        let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        let state = (z as u32) & 0x7FFF_FFFF;
        Self {
            state: if state == 0 { 1 } else { state },
        }
    }

    pub fn next_bit(&mut self) -> bool {
        let out = self.state & 1;
        let feedback = (self.state ^ (self.state >> 3)) & 1;
        self.state = (self.state >> 1) | (feedback << 30);
        out == 1
    }
}

/// Two-level pseudo-random binary sequence `u_center ± amplitude`, holding
/// each level for `switch_period` samples.
pub fn gen_prbs(
    length: usize,
    amplitude: f64,
    u_center: f64,
    switch_period: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if length == 0 || switch_period == 0 {
        return Err(Error::InvalidInput(format!(
            "PRBS needs length >= 1 and switch_period >= 1 (got {length}, {switch_period})"
        )));
    }
    if !(amplitude.is_finite() && u_center.is_finite()) {
        return Err(Error::NonFinite("PRBS levels"));
    }
    let mut lfsr = Lfsr31::new(seed);
    let mut out = Vec::with_capacity(length);
    let mut level = 0.0;
    for k in 0..length {
        if k % switch_period == 0 {
            level = if lfsr.next_bit() { amplitude } else { -amplitude };
        }
        out.push(u_center + level);
    }
    Ok(out)
}

/// `u_before` for `k < step_index`, `u_after` from `step_index` on.
pub fn gen_step(length: usize, u_before: f64, u_after: f64, step_index: usize) -> Result<Vec<f64>> {
    if step_index >= length {
        return Err(Error::InvalidInput(format!(
            "step index {step_index} out of range for length {length}"
        )));
    }
    let mut out = vec![u_before; length];
    out[step_index..].fill(u_after);
    Ok(out)
}

/// Piecewise-constant sequence visiting `levels` in order, each for an equal
/// share of `length` (the last level absorbs the remainder).
pub fn gen_staircase(length: usize, levels: &[f64]) -> Result<Vec<f64>> {
    if levels.is_empty() || length < levels.len() {
        return Err(Error::InvalidInput(format!(
            "staircase needs 1..=length levels (got {} levels, length {length})",
            levels.len()
        )));
    }
    let seg = length / levels.len();
    let mut out = Vec::with_capacity(length);
    for (i, &lv) in levels.iter().enumerate() {
        let n = if i + 1 == levels.len() { length - seg * i } else { seg };
        out.extend(core::iter::repeat_n(lv, n));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_is_constant() {
        let u = gen_prbs(50, 0.0, 0.3, 5, 7).unwrap();
        assert!(u.iter().all(|&x| x == 0.3));
    }

    #[test]
    fn deterministic_for_seed() {
        assert_eq!(
            gen_prbs(200, 0.1, 1.0, 3, 42).unwrap(),
            gen_prbs(200, 0.1, 1.0, 3, 42).unwrap()
        );
    }

    #[test]
    fn different_seeds_differ() {
        let a = gen_prbs(40, 0.1, 0.0, 10, 1).unwrap();
        let b = gen_prbs(40, 0.1, 0.0, 10, 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn levels_and_holding() {
        let u = gen_prbs(60, 0.2, 1.0, 6, 9).unwrap();
        for chunk in u.chunks(6) {
            assert!(chunk.iter().all(|&x| x == chunk[0]));
            assert!(chunk[0] == 1.2 || chunk[0] == 0.8);
        }
        // both levels show up over a long record
        let long = gen_prbs(3000, 1.0, 0.0, 1, 3).unwrap();
        let highs = long.iter().filter(|&&x| x > 0.0).count();
        assert!(highs > 1300 && highs < 1700);
    }

    #[test]
    fn prbs_preconditions() {
        assert!(gen_prbs(0, 1.0, 0.0, 1, 0).is_err());
        assert!(gen_prbs(10, 1.0, 0.0, 0, 0).is_err());
    }

    #[test]
    fn lfsr_period_is_not_short() {
        let mut l = Lfsr31::new(5);
        let start = l.state;
        for _ in 0..100_000 {
            l.next_bit();
            assert_ne!(l.state, 0);
        }
        assert_ne!(l.state, start);
    }

    #[test]
    fn step_cases() {
        assert_eq!(gen_step(4, 0.0, 1.0, 2).unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(gen_step(3, 0.5, 0.5, 1).unwrap(), vec![0.5; 3]);
        assert_eq!(gen_step(3, 0.0, 2.0, 0).unwrap(), vec![2.0; 3]);
        assert!(gen_step(3, 0.0, 1.0, 3).is_err());
    }

    #[test]
    fn staircase_segments() {
        assert_eq!(
            gen_staircase(7, &[0.0, 1.0, 2.0]).unwrap(),
            vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 2.0]
        );
        assert!(gen_staircase(2, &[0.0, 1.0, 2.0]).is_err());
    }
}
