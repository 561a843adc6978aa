//! Minimum-norm bandpass interpolation from nonuniform samples.
//!
//! [`regress`] solves `(R + εI) α = y` for the expansion coefficients and
//! [`interpolate`] evaluates `f(t) = Σ αₙ φ(t − tₙ)`. With `ε = 0` the result
//! is the interpolant of least L2 norm among all functions of the band that
//! match the samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{ensure_distinct, gram_matrix, kernel_value, BandSpec};
use crate::linalg::Cholesky;

/// Relative floor of the automatic regularization, scaled by `trace(R)/N`.
pub const AUTO_EPSILON_SCALE: f64 = 1e-8;

/// Samples `{(tₙ, fₙ)}` at pairwise distinct locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    locations: Vec<f64>,
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(locations: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if locations.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: locations.len(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSamples(format!("non-finite value {v}")));
        }
        ensure_distinct(&locations)?;
        Ok(Self { locations, values })
    }

    /// Builds a set whose invariants are already guaranteed by the caller.
    pub(crate) fn from_parts_unchecked(locations: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(locations.len(), values.len());
        Self { locations, values }
    }

    pub fn empty() -> Self {
        Self {
            locations: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.locations.iter().copied().zip(self.values.iter().copied())
    }
}

/// Regularization weight ε added to the Gram diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Epsilon {
    /// `1e-8 · trace(R)/N`, i.e. proportional to the kernel peak.
    #[default]
    Auto,
    Fixed(f64),
}

impl Epsilon {
    pub fn resolve(&self, band: &BandSpec) -> Result<f64> {
        match *self {
            Epsilon::Auto => Ok(AUTO_EPSILON_SCALE * band.peak()),
            Epsilon::Fixed(e) if e.is_finite() && e >= 0.0 => Ok(e),
            Epsilon::Fixed(e) => Err(Error::InvalidEpsilon(e)),
        }
    }
}

impl std::fmt::Display for Epsilon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Epsilon::Auto => f.write_str("auto"),
            Epsilon::Fixed(e) => write!(f, "{e}"),
        }
    }
}

impl std::str::FromStr for Epsilon {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(Epsilon::Auto);
        }
        let e: f64 = s.trim().parse().map_err(|_| Error::Parse {
            line: 0,
            message: format!("epsilon `{s}` is neither `auto` nor a number"),
        })?;
        if !(e.is_finite() && e >= 0.0) {
            return Err(Error::InvalidEpsilon(e));
        }
        Ok(Epsilon::Fixed(e))
    }
}

impl Serialize for Epsilon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Epsilon::Auto => s.serialize_str("auto"),
            Epsilon::Fixed(e) => s.serialize_f64(*e),
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(e) if e.is_finite() && e >= 0.0 => Ok(Epsilon::Fixed(e)),
            Raw::Num(e) => Err(serde::de::Error::custom(Error::InvalidEpsilon(e))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Expansion `f(t) = Σ αₙ φ(t − tₙ)` obtained by [`regress`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFit {
    band: BandSpec,
    nodes: Vec<f64>,
    coefficients: Vec<f64>,
    epsilon: f64,
}

impl KernelFit {
    /// Assembles a fit from explicit coefficients.
    pub fn new(band: BandSpec, nodes: Vec<f64>, coefficients: Vec<f64>, epsilon: f64) -> Result<Self> {
        if nodes.len() != coefficients.len() {
            return Err(Error::LengthMismatch {
                expected: nodes.len(),
                got: coefficients.len(),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidSamples("non-finite coefficient".into()));
        }
        ensure_distinct(&nodes)?;
        Ok(Self {
            band,
            nodes,
            coefficients,
            epsilon,
        })
    }

    pub fn band(&self) -> &BandSpec {
        &self.band
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `f(t)` at a single location.
    pub fn eval(&self, t: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.coefficients)
            .map(|(&tn, &a)| a * kernel_value(&self.band, t - tn))
            .sum()
    }
}

/// Solves the ε-regularized kernel regression `(R + εI) α = y`.
pub fn regress(samples: &SampleSet, band: &BandSpec, epsilon: Epsilon) -> Result<KernelFit> {
    let eps = epsilon.resolve(band)?;
    let mut r = gram_matrix(band, samples.locations())?;
    r.add_diagonal(eps);
    let chol = Cholesky::factor(&r)?;
    let coefficients = chol.solve(samples.values());
    if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
        return Err(Error::IllConditioned {
            pivot: i,
            value: coefficients[i],
        });
    }
    Ok(KernelFit {
        band: *band,
        nodes: samples.locations().to_vec(),
        coefficients,
        epsilon: eps,
    })
}

/// Evaluates the fitted interpolant at each query location.
pub fn interpolate(fit: &KernelFit, queries: &[f64]) -> Vec<f64> {
    queries.iter().map(|&q| fit.eval(q)).collect()
}

/// Squared L2 norm `αᵀ R α` of the fitted function.
pub fn fit_norm(fit: &KernelFit) -> f64 {
    let r = gram_matrix(&fit.band, &fit.nodes).expect("fit nodes are distinct by construction");
    r.quadratic_form(&fit.coefficients).max(0.0)
}
