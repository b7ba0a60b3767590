//! Square Q-QAM with per-axis Gray labelling.
//!
//! A symbol carries `log2(Q)` bits: the first half selects the in-phase level,
//! the second half the quadrature level. On each axis the bit group is read
//! MSB-first as a Gray code whose binary rank `i` selects the level
//! `(√Q − 1) − 2i`, so the all-zero label sits in the upper-right corner
//! (for 4-QAM, bits `00` map to `(1 + j)/√2`).

use crate::error::{OtfsError, Result};
use crate::zak::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct QamConstellation {
    order: usize,
    bits_per_axis: usize,
    levels_per_axis: usize,
    scale: f64,
    energy: f64,
}

impl QamConstellation {
    pub fn new(order: usize, symbol_energy: f64) -> Result<Self> {
        let bits = order.trailing_zeros() as usize;
        if order < 4 || !order.is_power_of_two() || !bits.is_multiple_of(2) {
            return Err(OtfsError::Config(format!(
                "QAM order must be a power of 4, got {order}"
            )));
        }
        if !(symbol_energy.is_finite() && symbol_energy > 0.0) {
            return Err(OtfsError::Config("symbol energy must be positive".into()));
        }
        let levels = 1usize << (bits / 2);
        // Mean energy of the unscaled odd-integer grid is 2(Q − 1)/3.
        let scale = (symbol_energy * 3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
        Ok(Self {
            order,
            bits_per_axis: bits / 2,
            levels_per_axis: levels,
            scale,
            energy: symbol_energy,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    pub fn symbol_energy(&self) -> f64 {
        self.energy
    }

    fn level(&self, rank: usize) -> f64 {
        ((self.levels_per_axis - 1) as f64 - 2.0 * rank as f64) * self.scale
    }

    fn axis_from_bits(&self, bits: &[u8]) -> f64 {
        let gray = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        // Gray → binary.
        let mut rank = gray;
        let mut shift = gray >> 1;
        while shift != 0 {
            rank ^= shift;
            shift >>= 1;
        }
        self.level(rank)
    }

    fn axis_rank(&self, x: f64) -> usize {
        let top = (self.levels_per_axis - 1) as f64;
        let rank = ((top - x / self.scale) / 2.0).round();
        rank.clamp(0.0, top) as usize
    }

    fn axis_to_bits(&self, rank: usize, out: &mut Vec<u8>) {
        let gray = rank ^ (rank >> 1);
        for i in (0..self.bits_per_axis).rev() {
            out.push(((gray >> i) & 1) as u8);
        }
    }

    /// Maps a bit stream (one bit per byte, values 0/1) to symbols.
    pub fn map(&self, bits: &[u8]) -> Result<Vec<C64>> {
        let per = self.bits_per_symbol();
        if !bits.len().is_multiple_of(per) {
            return Err(OtfsError::Shape(format!(
                "{} bits is not a multiple of {per}",
                bits.len()
            )));
        }
        Ok(bits
            .chunks_exact(per)
            .map(|c| {
                C64::new(
                    self.axis_from_bits(&c[..self.bits_per_axis]),
                    self.axis_from_bits(&c[self.bits_per_axis..]),
                )
            })
            .collect())
    }

    /// Nearest-neighbour hard decision back to bits.
    pub fn demap(&self, symbols: &[C64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol());
        for s in symbols {
            self.axis_to_bits(self.axis_rank(s.re), &mut out);
            self.axis_to_bits(self.axis_rank(s.im), &mut out);
        }
        out
    }

    /// Nearest constellation point.
    #[inline]
    pub fn decide(&self, s: C64) -> C64 {
        C64::new(self.level(self.axis_rank(s.re)), self.level(self.axis_rank(s.im)))
    }

    /// All points in label order (label = index as a big-endian bit string).
    pub fn points(&self) -> Vec<C64> {
        let per = self.bits_per_symbol();
        let bits: Vec<u8> = (0..self.order)
            .flat_map(|label| (0..per).rev().map(move |i| ((label >> i) & 1) as u8))
            .collect();
        self.map(&bits).expect("whole symbols")
    }
}
