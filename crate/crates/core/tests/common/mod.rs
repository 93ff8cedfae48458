//! Logic-level reference model of the ternary search, independent of the
//! diode and network code paths.

#![allow(dead_code)]

use fpma_core::MCAMBit;
use rand::Rng;

pub const I_OFF: f64 = 24e-9;
pub const I_ON: f64 = 24e-9 * 30.0;

/// Whether a row searching `q` is driven during the given step.
pub fn active(q: MCAMBit, en: bool) -> bool {
    matches!((en, q), (true, MCAMBit::One) | (false, MCAMBit::Zero))
}

/// Per-cell sum of one step current: OFF for a match or a stored X, ON for a mismatch.
pub fn step_current(stored: &[MCAMBit], query: &[MCAMBit], en: bool) -> f64 {
    stored
        .iter()
        .zip(query)
        .filter(|(_, &q)| active(q, en))
        .map(|(&s, &q)| if s == MCAMBit::X || s == q { I_OFF } else { I_ON })
        .sum()
}

pub fn distance(stored: &[MCAMBit], query: &[MCAMBit]) -> usize {
    stored
        .iter()
        .zip(query)
        .filter(|(&s, &q)| s != MCAMBit::X && q != MCAMBit::X && s != q)
        .count()
}

pub fn matches(stored: &[MCAMBit], query: &[MCAMBit]) -> bool {
    distance(stored, query) == 0
}

pub fn random_word<R: Rng>(len: usize, rng: &mut R) -> Vec<MCAMBit> {
    (0..len).map(|_| MCAMBit::ALL[rng.random_range(0..3)]).collect()
}

pub fn random_binary_word<R: Rng>(len: usize, rng: &mut R) -> Vec<MCAMBit> {
    (0..len)
        .map(|_| if rng.random_bool(0.5) { MCAMBit::One } else { MCAMBit::Zero })
        .collect()
}

pub fn all_words(len: usize) -> Vec<Vec<MCAMBit>> {
    (0..3usize.pow(len as u32))
        .map(|mut k| {
            (0..len)
                .map(|_| {
                    let b = MCAMBit::ALL[k % 3];
                    k /= 3;
                    b
                })
                .collect()
        })
        .collect()
}

pub fn flip(b: MCAMBit) -> MCAMBit {
    match b {
        MCAMBit::Zero => MCAMBit::One,
        MCAMBit::One => MCAMBit::Zero,
        MCAMBit::X => MCAMBit::X,
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}
