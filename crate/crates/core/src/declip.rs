//! Sliding-window reconstruction of saturated samples.
//!
//! Every saturated sample is estimated independently: its `N` nearest
//! unsaturated neighbors are fitted with the minimum-norm bandpass
//! interpolant and the fit is evaluated at the saturated location.
//! Unsaturated samples are never modified, and estimated values are never
//! fed back as regression inputs.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{gram_matrix, kernel_value, BandSpec};
use crate::linalg::{condition_number, Cholesky, SymMatrix};
use crate::reconstruct::{Epsilon, SampleSet};

/// Condition numbers above this are logged as warnings.
pub const CONDITION_WARN: f64 = 1e12;

/// Saturation state of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Ok,
    #[serde(rename = "lo")]
    Low,
    #[serde(rename = "hi")]
    High,
}

impl Flag {
    pub fn is_saturated(self) -> bool {
        self != Flag::Ok
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::Ok => "ok",
            Flag::Low => "lo",
            Flag::High => "hi",
        })
    }
}

impl FromStr for Flag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ok" => Ok(Flag::Ok),
            "lo" => Ok(Flag::Low),
            "hi" => Ok(Flag::High),
            other => Err(Error::Parse {
                line: 0,
                message: format!("unknown flag `{other}` (expected ok, lo or hi)"),
            }),
        }
    }
}

/// A sampled stream in which some samples sit at a saturation threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturatedStream {
    locations: Vec<f64>,
    values: Vec<f64>,
    flags: Vec<Flag>,
}

impl SaturatedStream {
    pub fn new(locations: Vec<f64>, values: Vec<f64>, flags: Vec<Flag>) -> Result<Self> {
        if values.len() != locations.len() {
            return Err(Error::LengthMismatch {
                expected: locations.len(),
                got: values.len(),
            });
        }
        if flags.len() != locations.len() {
            return Err(Error::LengthMismatch {
                expected: locations.len(),
                got: flags.len(),
            });
        }
        if let Some(t) = locations.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidStream(format!("non-finite location {t}")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidStream(format!("non-finite value {v}")));
        }
        if let Some(w) = locations.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidStream(format!(
                "locations must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let stream = Self {
            locations,
            values,
            flags,
        };
        let t0 = stream.level_of(Flag::Low)?;
        let t1 = stream.level_of(Flag::High)?;
        if let (Some(t0), Some(t1)) = (t0, t1) {
            if t0 >= t1 {
                return Err(Error::InvalidThresholds { t0, t1 });
            }
        }
        Ok(stream)
    }

    /// Stream on the integer grid `0, 1, 2, …`.
    pub fn gridded(values: Vec<f64>, flags: Vec<Flag>) -> Result<Self> {
        let locations = (0..values.len()).map(|i| i as f64).collect();
        Self::new(locations, values, flags)
    }

    /// Builds a stream from samples in arbitrary order.
    pub fn from_unsorted(mut samples: Vec<(f64, f64, Flag)>) -> Result<Self> {
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (locations, rest): (Vec<_>, Vec<_>) = samples.into_iter().map(|(t, v, f)| (t, (v, f))).unzip();
        let (values, flags) = rest.into_iter().unzip();
        Self::new(locations, values, flags)
    }

    fn level_of(&self, flag: Flag) -> Result<Option<f64>> {
        let mut level = None;
        for (&v, &f) in self.values.iter().zip(&self.flags) {
            if f != flag {
                continue;
            }
            match level {
                None => level = Some(v),
                Some(l) if l == v => {}
                Some(l) => {
                    return Err(Error::InvalidStream(format!(
                        "`{flag}` samples must share one threshold value ({l} and {v})"
                    )))
                }
            }
        }
        Ok(level)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn flags(&self) -> &[Flag] {
        &self.flags
    }

    pub fn saturated_count(&self) -> usize {
        self.flags.iter().filter(|f| f.is_saturated()).count()
    }

    /// Lower and upper threshold values carried by the saturated samples.
    pub fn thresholds(&self) -> (Option<f64>, Option<f64>) {
        let first = |flag| self.flags.iter().position(|&f| f == flag).map(|i| self.values[i]);
        (first(Flag::Low), first(Flag::High))
    }
}

/// Window parameters of the sliding-window reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    /// Number of unsaturated neighbors fitted per saturated sample.
    pub window_n: usize,
    /// Extra stream samples searched beyond the `window_n + 1` core window.
    pub margin: usize,
    pub epsilon: Epsilon,
    /// Samples per frame (e.g. one OFDM symbol with its prefix). Windows
    /// never cross a frame boundary. `None` treats the stream as one batch.
    pub frame_len: Option<usize>,
}

impl WindowConfig {
    pub fn new(window_n: usize) -> Self {
        Self {
            window_n,
            margin: window_n,
            epsilon: Epsilon::Auto,
            frame_len: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_n == 0 {
            return Err(Error::InvalidWindow("window_n must be at least 1".into()));
        }
        if self.frame_len == Some(0) {
            return Err(Error::InvalidWindow("frame_len must be positive".into()));
        }
        if let Epsilon::Fixed(e) = self.epsilon {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::InvalidEpsilon(e));
            }
        }
        Ok(())
    }

    /// Samples spanned by one search window.
    pub fn span(&self) -> usize {
        self.window_n + 1 + self.margin
    }
}

/// Estimated value of one saturated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Position of the sample in the stream.
    pub index: usize,
    pub location: f64,
    pub value: f64,
    pub flag: Flag,
    /// 1-norm condition number of the regularized window Gram matrix.
    pub condition: f64,
    pub from_table: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SkipReason {
    /// Fewer than `window_n` unsaturated samples inside the search window.
    SparseWindow { available: usize },
    /// Cholesky factorization failed.
    Solver { pivot: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub index: usize,
    pub reason: SkipReason,
}

/// Outcome of [`declip_stream`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeclipReport {
    pub estimates: Vec<Estimate>,
    pub skipped: Vec<Skipped>,
    /// Estimates that landed back inside the unsaturated range, i.e. below
    /// the high threshold or above the low one. They are kept as-is.
    pub inside_threshold_count: usize,
    pub table_hits: usize,
}

impl DeclipReport {
    pub fn skipped_count(&self) -> usize {
        self.skipped.len()
    }

    /// Stream values with every estimated sample replaced.
    pub fn apply(&self, stream: &SaturatedStream) -> Vec<f64> {
        let mut out = stream.values().to_vec();
        for e in &self.estimates {
            out[e.index] = e.value;
        }
        out
    }

    pub fn max_condition(&self) -> f64 {
        self.estimates.iter().map(|e| e.condition).fold(0.0, f64::max)
    }
}

/// Splits a stream by its flags into unsaturated samples and saturated
/// locations.
pub fn partition(stream: &SaturatedStream) -> (SampleSet, Vec<f64>) {
    let mut ok_t = Vec::new();
    let mut ok_v = Vec::new();
    let mut sat = Vec::new();
    for ((&t, &v), &f) in stream.locations.iter().zip(&stream.values).zip(&stream.flags) {
        if f.is_saturated() {
            sat.push(t);
        } else {
            ok_t.push(t);
            ok_v.push(v);
        }
    }
    (SampleSet::from_parts_unchecked(ok_t, ok_v), sat)
}

/// Picks the `n` candidates closest to `target`; on equal distance the
/// earlier location wins. Returns positions into `locations`, sorted by
/// location.
fn select_nearest(locations: &[f64], candidates: &mut Vec<usize>, target: f64, n: usize) {
    candidates.sort_by(|&a, &b| {
        let da = (locations[a] - target).abs();
        let db = (locations[b] - target).abs();
        da.total_cmp(&db).then(locations[a].total_cmp(&locations[b]))
    });
    candidates.truncate(n);
    candidates.sort_by(|&a, &b| locations[a].total_cmp(&locations[b]));
}

/// The `n` unsaturated samples nearest to `target`, sorted by location.
pub fn nearest_neighbors(unsaturated: &SampleSet, target: f64, n: usize) -> Result<SampleSet> {
    if unsaturated.len() < n {
        return Err(Error::DenseSaturation {
            available: unsaturated.len(),
            needed: n,
        });
    }
    let mut idx: Vec<usize> = (0..unsaturated.len()).collect();
    select_nearest(unsaturated.locations(), &mut idx, target, n);
    Ok(SampleSet::from_parts_unchecked(
        idx.iter().map(|&i| unsaturated.locations()[i]).collect(),
        idx.iter().map(|&i| unsaturated.values()[i]).collect(),
    ))
}

/// Pre-inverted regularized Gram matrices keyed by integer offset pattern.
///
/// On a regular grid, the Gram matrix of a window only depends on the
/// offsets of its nodes relative to the saturated sample, so common
/// configurations can skip the factorization entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TableFile", into = "TableFile")]
pub struct InverseTable {
    band: BandSpec,
    window_n: usize,
    epsilon: f64,
    entries: Vec<TableEntry>,
    index: HashMap<Vec<i64>, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub offsets: Vec<i64>,
    pub inverse: SymMatrix,
    pub condition: f64,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    band: BandSpec,
    window_n: usize,
    epsilon: f64,
    entries: Vec<TableEntry>,
}

impl From<TableFile> for InverseTable {
    fn from(f: TableFile) -> Self {
        let index = f
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.offsets.clone(), i))
            .collect();
        Self {
            band: f.band,
            window_n: f.window_n,
            epsilon: f.epsilon,
            entries: f.entries,
            index,
        }
    }
}

impl From<InverseTable> for TableFile {
    fn from(t: InverseTable) -> Self {
        Self {
            band: t.band,
            window_n: t.window_n,
            epsilon: t.epsilon,
            entries: t.entries,
        }
    }
}

impl InverseTable {
    pub fn band(&self) -> &BandSpec {
        &self.band
    }

    pub fn window_n(&self) -> usize {
        self.window_n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn get(&self, offsets: &[i64]) -> Option<&TableEntry> {
        self.index.get(offsets).map(|&i| &self.entries[i])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Offsets `−n/2 … −1, 1 … n/2` (anterior side first for odd `n`) of a
/// window around an isolated saturated sample on the integer grid.
pub fn isolated_pattern(window_n: usize) -> Vec<f64> {
    let before = window_n.div_ceil(2) as i64;
    let after = (window_n / 2) as i64;
    (-before..=after).filter(|&o| o != 0).map(|o| o as f64).collect()
}

/// Offset patterns of an isolated saturation at every position of a frame
/// of `frame_len` samples, as chosen by the sliding window with the given
/// `span`. Near the frame edges the windows turn one-sided.
pub fn frame_patterns(frame_len: usize, window_n: usize, span: usize) -> Vec<Vec<f64>> {
    let locations: Vec<f64> = (0..frame_len).map(|i| i as f64).collect();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for k in 0..frame_len {
        let (lo, hi) = search_range(k, 0, frame_len, span);
        let mut pool: Vec<usize> = (lo..hi).filter(|&i| i != k).collect();
        if pool.len() < window_n {
            continue;
        }
        select_nearest(&locations, &mut pool, k as f64, window_n);
        let p: Vec<f64> = pool.iter().map(|&i| i as f64 - k as f64).collect();
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Builds `(R + εI)⁻¹` for each integer offset pattern.
pub fn precompute_inverse_tables(
    band: &BandSpec,
    window_n: usize,
    epsilon: Epsilon,
    patterns: &[Vec<f64>],
) -> Result<InverseTable> {
    let eps = epsilon.resolve(band)?;
    let mut entries: Vec<TableEntry> = Vec::with_capacity(patterns.len());
    let mut index = HashMap::new();
    for p in patterns {
        let offsets = integer_offsets(p)
            .filter(|o| o.len() == window_n && o.windows(2).all(|w| w[0] < w[1]))
            .ok_or_else(|| Error::InvalidPattern(p.clone()))?;
        if index.contains_key(&offsets) {
            continue;
        }
        let mut r = gram_matrix(band, p)?;
        r.add_diagonal(eps);
        let chol = Cholesky::factor(&r)?;
        let condition = condition_number(&r, &chol);
        index.insert(offsets.clone(), entries.len());
        entries.push(TableEntry {
            offsets,
            inverse: chol.inverse(),
            condition,
        });
    }
    Ok(InverseTable {
        band: *band,
        window_n,
        epsilon: eps,
        entries,
        index,
    })
}

fn integer_offsets(p: &[f64]) -> Option<Vec<i64>> {
    p.iter()
        .map(|&o| (o.is_finite() && o.fract() == 0.0 && o.abs() < 1e15).then_some(o as i64))
        .collect()
}

/// Reconstructs every saturated sample of `stream`.
pub fn declip_stream(stream: &SaturatedStream, band: &BandSpec, config: &WindowConfig) -> Result<DeclipReport> {
    declip_stream_with_table(stream, band, config, None)
}

/// As [`declip_stream`], consulting `table` before factorizing.
pub fn declip_stream_with_table(
    stream: &SaturatedStream,
    band: &BandSpec,
    config: &WindowConfig,
    table: Option<&InverseTable>,
) -> Result<DeclipReport> {
    config.validate()?;
    let eps = config.epsilon.resolve(band)?;
    if let Some(t) = table {
        if t.band != *band || t.window_n != config.window_n || t.epsilon != eps {
            return Err(Error::InvalidWindow(
                "lookup table was built for a different band, window size or epsilon".into(),
            ));
        }
    }

    let len = stream.len();
    let frame_len = config.frame_len.unwrap_or(len.max(1));
    let mut report = DeclipReport::default();
    let (t0, t1) = stream.thresholds();

    for frame_start in (0..len).step_by(frame_len) {
        let frame_end = (frame_start + frame_len).min(len);
        let frame = frame_start..frame_end;
        let saturated: Vec<usize> = frame.clone().filter(|&i| stream.flags[i].is_saturated()).collect();
        if saturated.is_empty() {
            continue;
        }
        let available = frame.len() - saturated.len();
        if available < config.window_n {
            return Err(Error::DenseSaturation {
                available,
                needed: config.window_n,
            });
        }

        for &k in &saturated {
            let (lo, hi) = search_range(k, frame_start, frame_end, config.span());
            let mut pool: Vec<usize> = (lo..hi).filter(|&i| !stream.flags[i].is_saturated()).collect();
            if pool.len() < config.window_n {
                report.skipped.push(Skipped {
                    index: k,
                    reason: SkipReason::SparseWindow { available: pool.len() },
                });
                continue;
            }
            let target = stream.locations[k];
            select_nearest(&stream.locations, &mut pool, target, config.window_n);
            let offsets: Vec<f64> = pool.iter().map(|&i| stream.locations[i] - target).collect();
            let y: Vec<f64> = pool.iter().map(|&i| stream.values[i]).collect();

            let hit = table.and_then(|t| integer_offsets(&offsets).and_then(|o| t.get(&o)));
            let (value, condition, from_table) = match hit {
                Some(entry) => {
                    let alpha = entry.inverse.mul_vec(&y);
                    (evaluate_at_origin(band, &offsets, &alpha), entry.condition, true)
                }
                None => match solve_window(band, &offsets, &y, eps) {
                    Ok((alpha, cond)) => (evaluate_at_origin(band, &offsets, &alpha), cond, false),
                    Err(Error::IllConditioned { pivot, .. }) => {
                        log::warn!("window at index {k}: factorization failed at pivot {pivot}");
                        report.skipped.push(Skipped {
                            index: k,
                            reason: SkipReason::Solver { pivot },
                        });
                        continue;
                    }
                    Err(e) => return Err(e),
                },
            };
            if condition > CONDITION_WARN {
                log::warn!("window at index {k}: condition number {condition:.3e}");
            }
            if from_table {
                report.table_hits += 1;
            }
            let flag = stream.flags[k];
            let inside = match flag {
                Flag::High => t1.is_some_and(|t| value < t),
                Flag::Low => t0.is_some_and(|t| value > t),
                Flag::Ok => false,
            };
            if inside {
                report.inside_threshold_count += 1;
            }
            report.estimates.push(Estimate {
                index: k,
                location: target,
                value,
                flag,
                condition,
                from_table,
            });
        }
    }
    Ok(report)
}

/// Index range of `span` consecutive samples, centered on `k` as far as the
/// frame allows.
fn search_range(k: usize, start: usize, end: usize, span: usize) -> (usize, usize) {
    let frame = end - start;
    if span >= frame {
        return (start, end);
    }
    let before = (span - 1) / 2;
    let lo = k.saturating_sub(before).max(start);
    let lo = lo.min(end - span);
    (lo, lo + span)
}

fn solve_window(band: &BandSpec, offsets: &[f64], y: &[f64], eps: f64) -> Result<(Vec<f64>, f64)> {
    let mut r = gram_matrix(band, offsets)?;
    r.add_diagonal(eps);
    let chol = Cholesky::factor(&r)?;
    let alpha = chol.solve(y);
    if let Some(i) = alpha.iter().position(|a| !a.is_finite()) {
        return Err(Error::IllConditioned {
            pivot: i,
            value: alpha[i],
        });
    }
    Ok((alpha, condition_number(&r, &chol)))
}

fn evaluate_at_origin(band: &BandSpec, offsets: &[f64], alpha: &[f64]) -> f64 {
    offsets
        .iter()
        .zip(alpha)
        .map(|(&o, &a)| a * kernel_value(band, -o))
        .sum()
}
