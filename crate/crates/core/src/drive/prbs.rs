//! Maximal-length Fibonacci LFSR.

use crate::error::{Error, Result};

/// Feedback taps (polynomial exponents) of a primitive polynomial for each
/// register length 2..=31.
const TAPS: [&[u32]; 30] = [
    &[2, 1],
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 11, 10, 4],
    &[13, 12, 11, 8],
    &[14, 13, 12, 2],
    &[15, 14],
    &[16, 15, 13, 4],
    &[17, 14],
    &[18, 11],
    &[19, 18, 17, 14],
    &[20, 17],
    &[21, 19],
    &[22, 21],
    &[23, 18],
    &[24, 23, 22, 17],
    &[25, 22],
    &[26, 6, 2, 1],
    &[27, 5, 2, 1],
    &[28, 25],
    &[29, 27],
    &[30, 6, 4, 1],
    &[31, 28],
];

pub const MIN_ORDER: u32 = 2;
pub const MAX_ORDER: u32 = 31;

/// Exponents of the feedback polynomial used for `order`, highest first.
pub fn feedback_taps(order: u32) -> Option<&'static [u32]> {
    if (MIN_ORDER..=MAX_ORDER).contains(&order) {
        Some(TAPS[(order - MIN_ORDER) as usize])
    } else {
        None
    }
}

/// Fibonacci LFSR emitting the bit shifted out of the low end of the register.
#[derive(Debug, Clone)]
pub struct Lfsr {
    order: u32,
    state: u32,
    tap_mask: u32,
}

impl Lfsr {
    pub fn new(order: u32, seed: u32) -> Result<Self> {
        let taps = feedback_taps(order).ok_or_else(|| {
            Error::invalid(
                "prbs.order",
                format!("order must be in {MIN_ORDER}..={MAX_ORDER}, got {order}"),
            )
        })?;
        let mask = (1u32 << order) - 1;
        if seed == 0 {
            return Err(Error::invalid("prbs.seed", "an all-zero register never leaves state 0"));
        }
        if seed & !mask != 0 {
            return Err(Error::invalid(
                "prbs.seed",
                format!("seed {seed:#x} does not fit in {order} bits"),
            ));
        }
        // Exponent k of the polynomial reads register bit (order - k).
        let tap_mask = taps.iter().fold(0u32, |m, &k| m | 1 << (order - k));
        Ok(Self {
            order,
            state: seed,
            tap_mask,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    /// Full period of a maximal-length sequence of this order.
    pub fn period(&self) -> u64 {
        (1u64 << self.order) - 1
    }
}

impl Iterator for Lfsr {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        let out = self.state & 1 == 1;
        let feedback = (self.state & self.tap_mask).count_ones() & 1;
        self.state = (self.state >> 1) | (feedback << (self.order - 1));
        Some(out)
    }
}
