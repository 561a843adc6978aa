//! Square QAM with per-axis reflected Gray labels.
//!
//! A `2^K`-point constellation is the product of two `2^(K/2)`-level PAM
//! axes. The first `K/2` bits of a symbol label the in-phase axis, the
//! remaining bits the quadrature axis, most significant bit first. On each
//! axis Gray code 0 sits at the most positive level, so for 4-QAM the bits
//! `00` map to `(1 + j)/√2`. The constellation has unit average energy.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Validated constellation size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QamOrder {
    bits: u32,
}

impl QamOrder {
    /// `order` must be an even power of two, at least 4.
    pub fn new(order: u32) -> Result<Self> {
        if order < 4 || !order.is_power_of_two() || !order.trailing_zeros().is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "QAM order {order} is not a square constellation (4, 16, 64, ...)"
            )));
        }
        Ok(Self {
            bits: order.trailing_zeros(),
        })
    }

    pub fn order(&self) -> u32 {
        1 << self.bits
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits as usize
    }

    pub fn bits_per_axis(&self) -> usize {
        (self.bits / 2) as usize
    }

    fn levels(&self) -> usize {
        1 << self.bits_per_axis()
    }

    /// Amplitude scale giving unit average symbol energy.
    pub fn scale(&self) -> f64 {
        let m = self.levels() as f64;
        (1.5 / (m * m - 1.0)).sqrt()
    }

    /// Maps `bits_per_axis` bits to one axis amplitude.
    pub fn encode_axis(&self, bits: &[bool]) -> f64 {
        debug_assert_eq!(bits.len(), self.bits_per_axis());
        let gray = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let level = gray_to_binary(gray);
        ((self.levels() - 1) as f64 - 2.0 * level as f64) * self.scale()
    }

    /// Slices one axis amplitude to the nearest level and appends its label.
    /// Exact midpoints go to the level with the smaller Gray label.
    pub fn decode_axis(&self, amplitude: f64, out: &mut Vec<bool>) {
        let m = self.levels();
        let x = ((m - 1) as f64 - amplitude / self.scale()) / 2.0;
        let level = if !x.is_finite() {
            0
        } else {
            let fl = x.floor();
            let frac = x - fl;
            let pick = if frac == 0.5 {
                let a = fl.clamp(0.0, (m - 1) as f64) as usize;
                let b = (fl + 1.0).clamp(0.0, (m - 1) as f64) as usize;
                if binary_to_gray(a) <= binary_to_gray(b) {
                    a
                } else {
                    b
                }
            } else {
                x.round().clamp(0.0, (m - 1) as f64) as usize
            };
            pick.min(m - 1)
        };
        let gray = binary_to_gray(level);
        let k = self.bits_per_axis();
        out.extend((0..k).rev().map(|i| (gray >> i) & 1 == 1));
    }

    /// All constellation points in label order.
    pub fn constellation(&self) -> Vec<Complex64> {
        let k = self.bits_per_symbol();
        (0..self.order() as usize)
            .map(|label| {
                let bits: Vec<bool> = (0..k).rev().map(|i| (label >> i) & 1 == 1).collect();
                self.encode_symbol(&bits)
            })
            .collect()
    }

    fn encode_symbol(&self, bits: &[bool]) -> Complex64 {
        let h = self.bits_per_axis();
        Complex64::new(self.encode_axis(&bits[..h]), self.encode_axis(&bits[h..]))
    }

    /// Half the distance between adjacent levels.
    pub fn half_min_distance(&self) -> f64 {
        self.scale()
    }
}

fn binary_to_gray(b: usize) -> usize {
    b ^ (b >> 1)
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// Maps a bit stream to QAM symbols.
pub fn qam_encode(bits: &[bool], order: QamOrder) -> Result<Vec<Complex64>> {
    let k = order.bits_per_symbol();
    if !bits.len().is_multiple_of(k) {
        return Err(Error::BitCount {
            bits: bits.len(),
            per_symbol: k,
        });
    }
    Ok(bits.chunks(k).map(|c| order.encode_symbol(c)).collect())
}

/// Minimum-distance hard decisions back to bits.
pub fn qam_decode(points: &[Complex64], order: QamOrder) -> Vec<bool> {
    let mut out = Vec::with_capacity(points.len() * order.bits_per_symbol());
    for p in points {
        order.decode_axis(p.re, &mut out);
        order.decode_axis(p.im, &mut out);
    }
    out
}
