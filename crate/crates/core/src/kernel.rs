//! Reproducing kernel of the space of bandpass functions.
//!
//! A [`BandSpec`] describes the symmetric spectral support
//! `(-ω1, -ω0] ∪ [ω0, ω1)` in radians per sample interval. The associated
//! kernel is the inverse Fourier transform of the band indicator,
//!
//! ```text
//! φ(t) = (1/2π) ∫_B e^{jωt} dω = (sin(ω1 t) − sin(ω0 t)) / (π t),
//! ```
//!
//! which reduces to `sinc(t)` for the Nyquist band `(0, π)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

// Slack for band edges typed as decimal approximations of π.
const PI_SLACK: f64 = 1e-12;

/// Symmetric spectral support `(-ω1, -ω0] ∪ [ω0, ω1)` on the unit sampling grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSpec {
    omega0: f64,
    omega1: f64,
}

impl BandSpec {
    pub fn new(omega0: f64, omega1: f64) -> Result<Self> {
        let ok =
            omega0.is_finite() && omega1.is_finite() && omega0 >= 0.0 && omega0 < omega1 && omega1 <= PI + PI_SLACK;
        if !ok {
            return Err(Error::InvalidBand { omega0, omega1 });
        }
        Ok(Self {
            omega0,
            omega1: omega1.min(PI),
        })
    }

    /// Shannon's band `(−π, π)`, whose kernel is `sinc`.
    pub fn nyquist() -> Self {
        Self {
            omega0: 0.0,
            omega1: PI,
        }
    }

    pub fn lowpass(omega1: f64) -> Result<Self> {
        Self::new(0.0, omega1)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    /// Kernel peak `φ(0) = (ω1 − ω0)/π`, the band measure over 2π.
    pub fn peak(&self) -> f64 {
        (self.omega1 - self.omega0) / PI
    }
}

impl fmt::Display for BandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.omega0, self.omega1)
    }
}

impl FromStr for BandSpec {
    type Err = Error;

    /// Parses `lo:hi`, where each edge is a number optionally scaled by
    /// `pi`, e.g. `0:pi`, `pi/32:17pi/32`, `0.5*pi:pi`.
    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s.split_once(':').ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("band `{s}` must have the form lo:hi"),
        })?;
        BandSpec::new(parse_angle(lo)?, parse_angle(hi)?)
    }
}

fn parse_angle(s: &str) -> Result<f64> {
    let bad = || Error::Parse {
        line: 0,
        message: format!("cannot parse angle `{s}`"),
    };
    let t = s.trim().to_ascii_lowercase().replace(' ', "");
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.to_string(), b.parse::<f64>().map_err(|_| bad())?),
        None => (t.clone(), 1.0),
    };
    let value = if let Some(coef) = num.strip_suffix("pi") {
        let coef = coef.trim_end_matches('*');
        let c = if coef.is_empty() {
            1.0
        } else {
            coef.parse::<f64>().map_err(|_| bad())?
        };
        c * PI
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    Ok(value / den)
}

impl Serialize for BandSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BandSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Evaluates the reproducing kernel `φ(t)` of `band` at offset `t` (in
/// sample intervals).
///
/// Written as `((ω1−ω0)/π) cos(c t) sin(h t)/(h t)` with `c = (ω1+ω0)/2` and
/// `h = (ω1−ω0)/2`, which is algebraically the sine-difference form but does
/// not cancel for small `t`. Factors whose argument is an exact multiple of
/// π (sine) or an odd multiple of π/2 (cosine) are set to zero, so integer
/// offsets in bands such as `(0, π)` give exact zeros.
pub fn kernel_value(band: &BandSpec, t: f64) -> f64 {
    let peak = band.peak();
    if t == 0.0 {
        return peak;
    }
    let half_width = 0.5 * (band.omega1 - band.omega0);
    let center = 0.5 * (band.omega1 + band.omega0);
    let x = half_width * t;
    let sinc = if t.abs() < 1e-12 {
        1.0 - x * x / 6.0
    } else if (half_width / PI * t).fract() == 0.0 {
        0.0
    } else {
        x.sin() / x
    };
    let cos = if (center / PI * t - 0.5).fract() == 0.0 {
        0.0
    } else {
        (center * t).cos()
    };
    peak * cos * sinc
}

/// Gram matrix `R[m][n] = φ(t_m − t_n)` of the given sampling locations.
pub fn gram_matrix(band: &BandSpec, locations: &[f64]) -> Result<SymMatrix> {
    ensure_distinct(locations)?;
    let n = locations.len();
    let mut r = SymMatrix::zeros(n);
    for i in 0..n {
        r[(i, i)] = band.peak();
        for j in 0..i {
            let v = kernel_value(band, locations[i] - locations[j]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

/// Checks that locations are finite and pairwise distinct.
pub(crate) fn ensure_distinct(locations: &[f64]) -> Result<()> {
    if let Some(&bad) = locations.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidSamples(format!("non-finite location {bad}")));
    }
    let mut sorted = locations.to_vec();
    sorted.sort_by(f64::total_cmp);
    match sorted.windows(2).find(|w| w[0] == w[1]) {
        Some(w) => Err(Error::DuplicateLocation { location: w[0] }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nyquist_kernel_is_sinc() {
        let b = BandSpec::nyquist();
        assert_eq!(kernel_value(&b, 0.0), 1.0);
        for n in 1..20 {
            assert_eq!(kernel_value(&b, n as f64), 0.0);
            assert_eq!(kernel_value(&b, -(n as f64)), 0.0);
        }
        assert!((kernel_value(&b, 0.5) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn upper_half_band_values() {
        let b = BandSpec::new(PI / 2.0, PI).unwrap();
        assert!((kernel_value(&b, 0.0) - 0.5).abs() < 1e-15);
        assert!((kernel_value(&b, 1.0) + 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn tiny_offsets_approach_peak() {
        let b = BandSpec::new(0.3, 2.0).unwrap();
        let p = kernel_value(&b, 0.0);
        assert!((kernel_value(&b, 1e-14) - p).abs() < 1e-15);
        assert!((kernel_value(&b, 1e-7) - p).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_bands() {
        assert!(BandSpec::new(1.0, 1.0).is_err());
        assert!(BandSpec::new(2.0, 1.0).is_err());
        assert!(BandSpec::new(-0.1, 1.0).is_err());
        assert!(BandSpec::new(0.0, 3.5).is_err());
        assert!(BandSpec::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn parses_band_strings() {
        let b: BandSpec = "0:pi".parse().unwrap();
        assert_eq!(b, BandSpec::nyquist());
        let b: BandSpec = "pi/32:17pi/32".parse().unwrap();
        assert!((b.omega0() - PI / 32.0).abs() < 1e-15);
        assert!((b.omega1() - 17.0 * PI / 32.0).abs() < 1e-15);
        let b: BandSpec = "0.5*pi:3.14159265358979".parse().unwrap();
        assert!((b.omega0() - PI / 2.0).abs() < 1e-15);
        assert!("1:0".parse::<BandSpec>().is_err());
        assert!("abc".parse::<BandSpec>().is_err());
        let round: BandSpec = b.to_string().parse().unwrap();
        assert_eq!(round, b);
    }

    #[test]
    fn gram_on_integer_grid_is_identity() {
        let r = gram_matrix(&BandSpec::nyquist(), &[0.0, 1.0, 2.0]).unwrap();
        assert!(r.max_abs_diff(&SymMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn gram_half_sample_offset() {
        let r = gram_matrix(&BandSpec::nyquist(), &[0.0, 0.5]).unwrap();
        let want = SymMatrix::from_row_major(2, vec![1.0, 2.0 / PI, 2.0 / PI, 1.0]);
        assert!(r.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn gram_rejects_duplicates() {
        assert!(matches!(
            gram_matrix(&BandSpec::nyquist(), &[0.0, 0.0]),
            Err(Error::DuplicateLocation { .. })
        ));
    }

    fn band_strategy() -> impl Strategy<Value = BandSpec> {
        (0.0..3.0f64, 0.01..1.0f64).prop_map(|(lo, frac)| {
            let hi = lo + frac * (PI - lo);
            BandSpec::new(lo, hi.max(lo + 1e-3).min(PI)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn kernel_is_even(band in band_strategy(), t in -64.0..64.0f64) {
            prop_assert_eq!(kernel_value(&band, t), kernel_value(&band, -t));
        }

        #[test]
        fn kernel_bounded_by_peak(band in band_strategy(), t in 1e-6..64.0f64) {
            prop_assert!(kernel_value(&band, t).abs() < band.peak());
        }
    }
}
