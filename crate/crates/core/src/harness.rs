//! Seeded Monte-Carlo trials and parameter sweeps.
//!
//! One trial transmits a random OFDM symbol, passes it through the channel
//! and the receiver front end, and decodes it along three paths that share
//! the same bits and the same noise draws:
//!
//! * `base`: the ADC input quantized without a range limit,
//! * `sat`: the clipped ADC output decoded as is,
//! * `declip`: the clipped output with every flagged sample re-estimated.
//!
//! Trial `i` of sweep point `j` is seeded with [`trial_seed`]`(base, j, i)`,
//! so a sweep produces the same table no matter how many workers run it or
//! how its trials are split across invocations.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    add_noise, apply_channel, awgn_with, clip, equalize, gamma_for_target_cr, quantize, quantize_unbounded,
    ChannelResponse, SaturationThresholds,
};
use crate::declip::{
    declip_stream_with_table, frame_patterns, precompute_inverse_tables, DeclipReport, Estimate, Flag, InverseTable,
    SaturatedStream, WindowConfig,
};
use crate::error::{Error, Result};
use crate::ofdm::{add_cyclic_prefix, channel_papr, demodulate, modulate, LinkMode, OfdmConfig, SymbolFrame, Waveform};
use crate::presets::SimConfig;

/// Number of differing positions between two equal-length bit streams.
pub fn bit_errors(tx: &[bool], rx: &[bool]) -> Result<usize> {
    if tx.len() != rx.len() {
        return Err(Error::LengthMismatch {
            expected: tx.len(),
            got: rx.len(),
        });
    }
    if tx.is_empty() {
        return Err(Error::Empty);
    }
    Ok(tx.iter().zip(rx).filter(|(a, b)| a != b).count())
}

/// Bit-error-ratio, the Hamming distance over the stream length.
pub fn ber(tx: &[bool], rx: &[bool]) -> Result<f64> {
    Ok(bit_errors(tx, rx)? as f64 / tx.len() as f64)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at sweep point `point`:
/// `h = sm(base); h = sm(h ^ point); h = sm(h ^ trial)` with `sm` the
/// SplitMix64 finalizer. Trials draw from ChaCha8 seeded with this value.
pub fn trial_seed(base: u64, point: u64, trial: u64) -> u64 {
    let h = splitmix64(base);
    let h = splitmix64(h ^ point);
    splitmix64(h ^ trial)
}

/// Wilson score interval for `errors` successes out of `n` at z = 1.96.
pub fn wilson_interval(errors: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let n = n as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Parameters that vary between sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialPoint {
    pub cr: f64,
    pub window_n: usize,
    pub snr_db: Option<f64>,
}

/// Metrics of one trial. Bit counts cover the data carriers only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub preset: String,
    pub mode: LinkMode,
    pub cr_target: f64,
    pub window_n: usize,
    pub snr_db: Option<f64>,
    pub bits: usize,
    pub errors_sat: usize,
    pub errors_declip: usize,
    pub errors_base: usize,
    pub ber_sat: f64,
    /// Equals `ber_sat` when `declip_failed` is set.
    pub ber_declip: f64,
    pub ber_base: f64,
    pub gamma: f64,
    pub achieved_cr: f64,
    /// PAPR of the ADC input and of its clipped version, over the real
    /// channels pooled (see [`channel_papr`]).
    pub papr_orig: f64,
    pub papr_sat: f64,
    pub clipped: usize,
    pub clipped_per_channel: Vec<usize>,
    pub estimated: usize,
    pub skipped: usize,
    pub inside_threshold: usize,
    pub table_hits: usize,
    /// Saturation too dense for the window on at least one channel; those
    /// channels are decoded uncorrected.
    pub declip_failed: bool,
    pub max_condition: f64,
}

impl TrialResult {
    pub fn max_clipped_per_channel(&self) -> usize {
        self.clipped_per_channel.iter().copied().max().unwrap_or(0)
    }
}

/// Per-sample view of one real channel of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    pub original: Vec<f64>,
    pub saturated: Vec<f64>,
    pub declipped: Vec<f64>,
    pub flags: Vec<Flag>,
    pub estimated: Vec<bool>,
}

/// Received symbol of one data carrier along each path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstellationPoint {
    pub carrier: usize,
    pub tx: Complex64,
    pub base: Complex64,
    pub sat: Complex64,
    pub declip: Complex64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialDetail {
    pub channels: Vec<ChannelTrace>,
    pub constellation: Vec<ConstellationPoint>,
}

/// A validated configuration with its channel response and lookup tables
/// resolved, ready to run trials.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    ofdm: OfdmConfig,
    response: Option<ChannelResponse>,
    tables: BTreeMap<usize, InverseTable>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let ofdm = config.ofdm();
        let response = match (&config.channel_csv, config.loss_db) {
            (Some(path), _) => Some(ChannelResponse::from_csv(File::open(path)?)?),
            (None, Some(loss)) => {
                let fs = config.sample_rate_hz;
                Some(ChannelResponse::calibrated_loss(
                    ofdm.max_frequency() * fs,
                    loss,
                    fs / 2.0,
                )?)
            }
            (None, None) => None,
        };
        let mut sim = Self {
            config,
            ofdm,
            response,
            tables: BTreeMap::new(),
        };
        sim.prepare(sim.config.window_n)?;
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn ofdm(&self) -> &OfdmConfig {
        &self.ofdm
    }

    pub fn response(&self) -> Option<&ChannelResponse> {
        self.response.as_ref()
    }

    /// Operating point of the configuration itself.
    pub fn point(&self) -> TrialPoint {
        TrialPoint {
            cr: self.config.cr,
            window_n: self.config.window_n,
            snr_db: self.config.snr_db,
        }
    }

    pub fn table(&self, window_n: usize) -> Option<&InverseTable> {
        self.tables.get(&window_n)
    }

    /// Builds the lookup table for isolated saturations at every frame
    /// position, unless tables are disabled or already built.
    pub fn prepare(&mut self, window_n: usize) -> Result<()> {
        if !self.config.use_tables || self.tables.contains_key(&window_n) {
            return Ok(());
        }
        let w = self.window(window_n);
        let patterns = frame_patterns(self.declip_len(), window_n, w.span());
        let table = precompute_inverse_tables(&self.config.band, window_n, self.config.epsilon, &patterns)?;
        self.tables.insert(window_n, table);
        Ok(())
    }

    fn window(&self, window_n: usize) -> WindowConfig {
        WindowConfig {
            window_n,
            margin: self.config.margin,
            epsilon: self.config.epsilon,
            frame_len: Some(self.declip_len()),
        }
    }

    /// Length of the stream handed to the declipper for one symbol.
    fn declip_len(&self) -> usize {
        if self.config.periodic {
            3 * self.ofdm.taps
        } else {
            self.ofdm.frame_len()
        }
    }

    /// Declips one received symbol. In periodic mode the prefix-free body is
    /// repeated three times, the middle copy is reconstructed, and flagged
    /// prefix samples take the estimate of their twin in the body.
    fn declip_channel(
        &self,
        stream: &SaturatedStream,
        window: &WindowConfig,
        table: Option<&InverseTable>,
    ) -> Result<DeclipReport> {
        let band = &self.config.band;
        if !self.config.periodic {
            return declip_stream_with_table(stream, band, window, table);
        }
        let (taps, cp) = (self.ofdm.taps, self.ofdm.cp);
        let body_values = &stream.values()[cp..];
        let body_flags = &stream.flags()[cp..];
        let values: Vec<f64> = body_values.iter().cycle().take(3 * taps).copied().collect();
        let flags: Vec<Flag> = body_flags.iter().cycle().take(3 * taps).copied().collect();
        let extended = SaturatedStream::gridded(values, flags)?;
        let full = declip_stream_with_table(&extended, band, window, table)?;

        let mut report = DeclipReport::default();
        let mut by_body = vec![None; taps];
        for e in full.estimates.iter().filter(|e| (taps..2 * taps).contains(&e.index)) {
            let mut e = *e;
            e.index = e.index - taps + cp;
            e.location = e.index as f64;
            by_body[e.index - cp] = Some(e);
            report.estimates.push(e);
        }
        for s in full.skipped.iter().filter(|s| (taps..2 * taps).contains(&s.index)) {
            let mut s = *s;
            s.index = s.index - taps + cp;
            report.skipped.push(s);
        }
        for i in 0..cp {
            if !stream.flags()[i].is_saturated() {
                continue;
            }
            if let Some(twin) = by_body[taps - cp + i] {
                report.estimates.push(Estimate {
                    index: i,
                    location: i as f64,
                    flag: stream.flags()[i],
                    ..twin
                });
            }
        }
        report.estimates.sort_by_key(|e| e.index);
        let (t0, t1) = stream.thresholds();
        report.inside_threshold_count = report
            .estimates
            .iter()
            .filter(|e| match e.flag {
                Flag::High => t1.is_some_and(|t| e.value < t),
                Flag::Low => t0.is_some_and(|t| e.value > t),
                Flag::Ok => false,
            })
            .count();
        report.table_hits = report.estimates.iter().filter(|e| e.from_table).count();
        Ok(report)
    }

    pub fn run_trial(&self, point: &TrialPoint, seed: u64) -> Result<TrialResult> {
        self.run(point, seed, false).map(|(r, _)| r)
    }

    /// As [`Simulation::run_trial`], also returning the sample traces and the
    /// received constellation.
    pub fn run_trial_detailed(&self, point: &TrialPoint, seed: u64) -> Result<(TrialResult, TrialDetail)> {
        self.run(point, seed, true)
    }

    fn run(&self, point: &TrialPoint, seed: u64, detailed: bool) -> Result<(TrialResult, TrialDetail)> {
        let cfg = &self.config;
        let ofdm = &self.ofdm;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let frame = SymbolFrame::random(&mut rng, ofdm)?;
        let body_cfg = OfdmConfig { cp: 0, ..ofdm.clone() };
        let mut body = modulate(&frame, &body_cfg)?;
        if let Some(h) = &self.response {
            body = apply_channel(&body, h, cfg.sample_rate_hz);
        }
        // Filtering the body circularly and prefixing afterwards is what a
        // prefix at least as long as the channel memory achieves.
        let rx = body.per_channel(|c| add_cyclic_prefix(c, ofdm.cp));
        let rx = match point.snr_db {
            Some(snr) => awgn_with(&rx, snr, &mut rng),
            None => rx,
        };

        // The RMS of a complex signal is the RMS of its magnitudes.
        let magnitudes: Vec<f64> = rx.powers().iter().map(|p| p.sqrt()).collect();
        let gamma = gamma_for_target_cr(&magnitudes, point.cr)?;
        let thr = SaturationThresholds::symmetric(gamma)?;
        let (analog, quant) = match cfg.adc {
            Some(adc) => {
                let fs = adc.full_scale_for(gamma);
                let noisy = add_noise(&rx, adc.extra_noise_std(fs), &mut rng);
                (noisy, Some((adc.bits, fs, adc.step(fs))))
            }
            None => (rx, None),
        };

        let mut base_ch = Vec::new();
        let mut sat_ch = Vec::new();
        let mut declip_ch = Vec::new();
        let mut traces = Vec::new();
        let mut clipped_per_channel = Vec::new();
        let mut merged = DeclipReport::default();
        let mut declip_failed = false;
        let window = self.window(point.window_n);
        let table = self.tables.get(&point.window_n);

        for orig in analog.channels() {
            let clipped = clip(&orig, thr);
            let (base, sat) = match quant {
                Some((bits, fs, step)) => (quantize_unbounded(&orig, step), quantize(clipped.values(), bits, fs)),
                None => (orig.clone(), clipped.values().to_vec()),
            };
            let stream = SaturatedStream::new(clipped.locations().to_vec(), sat.clone(), clipped.flags().to_vec())?;
            clipped_per_channel.push(stream.saturated_count());
            let report = match self.declip_channel(&stream, &window, table) {
                Ok(r) => r,
                Err(Error::DenseSaturation { .. }) => {
                    declip_failed = true;
                    DeclipReport::default()
                }
                Err(e) => return Err(e),
            };
            let fixed = report.apply(&stream);
            if detailed {
                let mut estimated = vec![false; fixed.len()];
                report.estimates.iter().for_each(|e| estimated[e.index] = true);
                traces.push(ChannelTrace {
                    original: orig.clone(),
                    saturated: sat.clone(),
                    declipped: fixed.clone(),
                    flags: stream.flags().to_vec(),
                    estimated,
                });
            }
            merged.estimates.extend(report.estimates);
            merged.skipped.extend(report.skipped);
            merged.inside_threshold_count += report.inside_threshold_count;
            merged.table_hits += report.table_hits;
            base_ch.push(base);
            sat_ch.push(sat);
            declip_ch.push(fixed);
        }

        let clipped_wave = analog.per_channel(|c| clip(c, thr).values().to_vec());
        let clipped: usize = clipped_per_channel.iter().sum();
        let papr_orig = channel_papr(&analog)?;
        let papr_sat = channel_papr(&clipped_wave)?;
        let achieved_cr = gamma / clipped_wave.rms();

        let decode = |chans: Vec<Vec<f64>>| -> Result<(Vec<bool>, Vec<Complex64>)> {
            let w = Waveform::from_channels(ofdm.mode, chans)?;
            let mut d = demodulate(&w, ofdm)?;
            if let Some(h) = &self.response {
                d = equalize(&d, h, ofdm, cfg.sample_rate_hz)?;
            }
            Ok((d.decide(ofdm).bits, d.data_symbols(ofdm)))
        };
        let (bits_base, sym_base) = decode(base_ch)?;
        let (bits_sat, sym_sat) = decode(sat_ch)?;
        let (bits_declip, sym_declip) = decode(declip_ch)?;

        let errors_base = bit_errors(&frame.bits, &bits_base)?;
        let errors_sat = bit_errors(&frame.bits, &bits_sat)?;
        let errors_declip = bit_errors(&frame.bits, &bits_declip)?;
        let n = frame.bits.len();

        let detail = if detailed {
            let tx = frame.data_symbols(ofdm);
            let constellation = ofdm
                .carriers
                .iter()
                .enumerate()
                .map(|(i, &carrier)| ConstellationPoint {
                    carrier,
                    tx: tx[i],
                    base: sym_base[i],
                    sat: sym_sat[i],
                    declip: sym_declip[i],
                })
                .collect();
            TrialDetail {
                channels: traces,
                constellation,
            }
        } else {
            TrialDetail::default()
        };

        let result = TrialResult {
            seed,
            preset: cfg.preset.clone(),
            mode: ofdm.mode,
            cr_target: point.cr,
            window_n: point.window_n,
            snr_db: point.snr_db,
            bits: n,
            errors_sat,
            errors_declip,
            errors_base,
            ber_sat: errors_sat as f64 / n as f64,
            ber_declip: errors_declip as f64 / n as f64,
            ber_base: errors_base as f64 / n as f64,
            gamma,
            achieved_cr,
            papr_orig,
            papr_sat,
            clipped,
            clipped_per_channel,
            estimated: merged.estimates.len(),
            skipped: merged.skipped_count(),
            inside_threshold: merged.inside_threshold_count,
            table_hits: merged.table_hits,
            declip_failed,
            max_condition: merged.max_condition(),
        };
        Ok((result, detail))
    }
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Cr,
    WindowN,
    SnrDb,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Cr => "cr",
            SweepAxis::WindowN => "window-n",
            SweepAxis::SnrDb => "snr-db",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cr" => Ok(SweepAxis::Cr),
            "window-n" => Ok(SweepAxis::WindowN),
            "snr-db" => Ok(SweepAxis::SnrDb),
            other => Err(Error::InvalidSweep(format!(
                "unknown axis `{other}` (expected cr, window-n or snr-db)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Fixed parameters; the swept one is overridden per point.
    pub config: SimConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: u64,
    pub base_seed: u64,
    /// Threads used to run trials. Never affects the results.
    pub workers: usize,
    /// Index of the first trial, for splitting one sweep across runs.
    pub trial_offset: u64,
    /// Trials with more clipped samples than this on any real channel are
    /// run but left out of the aggregate.
    pub max_clipped: Option<usize>,
}

impl SweepSpec {
    pub fn new(config: SimConfig, axis: SweepAxis, values: Vec<f64>, trials: u64) -> Self {
        Self {
            config,
            axis,
            values,
            trials,
            base_seed: 0,
            workers: 1,
            trial_offset: 0,
            max_clipped: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSweep(m));
        if self.trials == 0 {
            return bad("at least one trial per point is required".into());
        }
        if self.workers == 0 {
            return bad("at least one worker is required".into());
        }
        if self.values.is_empty() {
            return bad("no axis values".into());
        }
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return bad(format!("axis value {v} is not finite"));
            }
            if self.values[..i].contains(v) {
                return bad(format!("axis value {v} listed twice"));
            }
            let ok = match self.axis {
                SweepAxis::Cr => *v > 0.0,
                SweepAxis::WindowN => *v >= 1.0 && v.fract() == 0.0,
                SweepAxis::SnrDb => true,
            };
            if !ok {
                return bad(format!("{v} is not a valid {} value", self.axis));
            }
        }
        self.config.validate()
    }

    pub fn point(&self, value: f64) -> TrialPoint {
        let mut p = TrialPoint {
            cr: self.config.cr,
            window_n: self.config.window_n,
            snr_db: self.config.snr_db,
        };
        match self.axis {
            SweepAxis::Cr => p.cr = value,
            SweepAxis::WindowN => p.window_n = value as usize,
            SweepAxis::SnrDb => p.snr_db = Some(value),
        }
        p
    }
}

/// Fixed-point scale of the summed clipping ratio, so that partial rows add
/// up exactly.
const CR_SCALE: f64 = 1e9;

/// Aggregate of the trials run at one sweep point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    /// Bit pattern of the axis value; see [`SweepRow::value`].
    value_bits: u64,
    pub trials: u64,
    /// Trials run but excluded by the clipped-sample cap.
    pub excluded: u64,
    pub bits: u64,
    pub errors_sat: u64,
    pub errors_declip: u64,
    pub errors_base: u64,
    pub clipped: u64,
    pub declip_failures: u64,
    pub skipped: u64,
    pub inside_threshold: u64,
    /// Sum of achieved clipping ratios in units of 1e-9.
    pub cr_sum_nano: u64,
    /// `histogram[c]` counts real channels with `c` clipped samples.
    pub histogram: Vec<u64>,
}

impl SweepRow {
    pub fn empty(axis: SweepAxis, value: f64) -> Self {
        Self {
            axis,
            value_bits: value.to_bits(),
            trials: 0,
            excluded: 0,
            bits: 0,
            errors_sat: 0,
            errors_declip: 0,
            errors_base: 0,
            clipped: 0,
            declip_failures: 0,
            skipped: 0,
            inside_threshold: 0,
            cr_sum_nano: 0,
            histogram: Vec::new(),
        }
    }

    pub fn value(&self) -> f64 {
        f64::from_bits(self.value_bits)
    }

    pub fn add(&mut self, r: &TrialResult) {
        self.trials += 1;
        self.bits += r.bits as u64;
        self.errors_sat += r.errors_sat as u64;
        self.errors_declip += r.errors_declip as u64;
        self.errors_base += r.errors_base as u64;
        self.clipped += r.clipped as u64;
        self.declip_failures += r.declip_failed as u64;
        self.skipped += r.skipped as u64;
        self.inside_threshold += r.inside_threshold as u64;
        self.cr_sum_nano += (r.achieved_cr * CR_SCALE).round() as u64;
        for &c in &r.clipped_per_channel {
            if self.histogram.len() <= c {
                self.histogram.resize(c + 1, 0);
            }
            self.histogram[c] += 1;
        }
    }

    /// Folds in the aggregate of a disjoint set of trials at the same point.
    pub fn merge(&mut self, other: &SweepRow) -> Result<()> {
        if self.axis != other.axis || self.value_bits != other.value_bits {
            return Err(Error::InvalidSweep(format!(
                "cannot merge rows of {}={} and {}={}",
                self.axis,
                self.value(),
                other.axis,
                other.value()
            )));
        }
        self.trials += other.trials;
        self.excluded += other.excluded;
        self.bits += other.bits;
        self.errors_sat += other.errors_sat;
        self.errors_declip += other.errors_declip;
        self.errors_base += other.errors_base;
        self.clipped += other.clipped;
        self.declip_failures += other.declip_failures;
        self.skipped += other.skipped;
        self.inside_threshold += other.inside_threshold;
        self.cr_sum_nano += other.cr_sum_nano;
        if self.histogram.len() < other.histogram.len() {
            self.histogram.resize(other.histogram.len(), 0);
        }
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
        Ok(())
    }

    fn ratio(&self, errors: u64) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            errors as f64 / self.bits as f64
        }
    }

    pub fn ber_sat(&self) -> f64 {
        self.ratio(self.errors_sat)
    }

    pub fn ber_declip(&self) -> f64 {
        self.ratio(self.errors_declip)
    }

    pub fn ber_base(&self) -> f64 {
        self.ratio(self.errors_base)
    }

    /// Wilson interval on the declipped BER.
    pub fn ci(&self) -> (f64, f64) {
        wilson_interval(self.errors_declip, self.bits)
    }

    pub fn mean_cr(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.cr_sum_nano as f64 / CR_SCALE / self.trials as f64
    }
}

/// Trials per parallel batch; bounds memory on long sweeps.
const BATCH: u64 = 4096;

/// Runs the sweep, calling `on_point` once per axis value, in order, with
/// the aggregate row and every trial run at that point.
pub fn sweep_each<F>(spec: &SweepSpec, mut on_point: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(&SweepRow, &[TrialResult]) -> Result<()>,
{
    spec.validate()?;
    let mut sim = Simulation::new(spec.config.clone())?;
    for &v in &spec.values {
        sim.prepare(spec.point(v).window_n)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::InvalidSweep(e.to_string()))?;

    let mut rows = Vec::with_capacity(spec.values.len());
    for (j, &v) in spec.values.iter().enumerate() {
        let point = spec.point(v);
        let mut row = SweepRow::empty(spec.axis, v);
        let mut results = Vec::new();
        let end = spec.trial_offset + spec.trials;
        let mut start = spec.trial_offset;
        while start < end {
            let stop = (start + BATCH).min(end);
            let batch: Vec<TrialResult> = pool.install(|| {
                (start..stop)
                    .into_par_iter()
                    .map(|i| sim.run_trial(&point, trial_seed(spec.base_seed, j as u64, i)))
                    .collect::<Result<Vec<_>>>()
            })?;
            for r in &batch {
                if spec.max_clipped.is_some_and(|m| r.max_clipped_per_channel() > m) {
                    row.excluded += 1;
                } else {
                    row.add(r);
                }
            }
            results.extend(batch);
            start = stop;
        }
        on_point(&row, &results)?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    sweep_each(spec, |_, _| Ok(()))
}

pub const SUMMARY_HEADER: &str = "axis,value,trials,ber_sat,ber_declip,ber_base,ci_lo,ci_hi";

/// One summary CSV line (no newline) matching [`SUMMARY_HEADER`].
pub fn summary_line(row: &SweepRow) -> String {
    let (lo, hi) = row.ci();
    format!(
        "{},{},{},{},{},{},{},{}",
        row.axis,
        row.value(),
        row.trials,
        row.ber_sat(),
        row.ber_declip(),
        row.ber_base(),
        lo,
        hi
    )
}

pub fn write_summary<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", summary_line(r))?;
    }
    Ok(())
}

/// Clipped-sample histogram as `value,clipped,channels` rows.
pub fn write_histogram<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "value,clipped,channels")?;
    for r in rows {
        for (c, n) in r.histogram.iter().enumerate() {
            writeln!(w, "{},{},{}", r.value(), c, n)?;
        }
    }
    Ok(())
}

/// Files written by [`emit_artifacts`].
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactPaths {
    pub trials: PathBuf,
    pub constellation: PathBuf,
    pub trace: PathBuf,
}

pub const CONSTELLATION_HEADER: &str = "carrier,tx_re,tx_im,base_re,base_im,sat_re,sat_im,declip_re,declip_im";
pub const TRACE_HEADER: &str = "channel,index,original,saturated,declipped,flag";

/// Writes `trials.jsonl` (one object per result), `constellation.csv` and
/// `trace.csv` into `dir`. Without a detail the two CSV files hold their
/// header only. In the trace, `flag` is `ok`, `lo`, `hi`, or `est` for a
/// saturated sample that received an estimate.
pub fn emit_artifacts(results: &[TrialResult], detail: Option<&TrialDetail>, dir: &Path) -> Result<ArtifactPaths> {
    if results.is_empty() {
        return Err(Error::Empty);
    }
    std::fs::create_dir_all(dir)?;
    let paths = ArtifactPaths {
        trials: dir.join("trials.jsonl"),
        constellation: dir.join("constellation.csv"),
        trace: dir.join("trace.csv"),
    };

    let mut w = BufWriter::new(File::create(&paths.trials)?);
    write_trials(results, &mut w)?;
    w.flush()?;

    let empty = TrialDetail::default();
    let detail = detail.unwrap_or(&empty);

    let mut w = BufWriter::new(File::create(&paths.constellation)?);
    writeln!(w, "{CONSTELLATION_HEADER}")?;
    for p in &detail.constellation {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            p.carrier, p.tx.re, p.tx.im, p.base.re, p.base.im, p.sat.re, p.sat.im, p.declip.re, p.declip.im
        )?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(&paths.trace)?);
    writeln!(w, "{TRACE_HEADER}")?;
    for (c, t) in detail.channels.iter().enumerate() {
        for i in 0..t.original.len() {
            let flag = if t.estimated[i] {
                "est".to_string()
            } else {
                t.flags[i].to_string()
            };
            writeln!(
                w,
                "{c},{i},{},{},{},{flag}",
                t.original[i], t.saturated[i], t.declipped[i]
            )?;
        }
    }
    w.flush()?;
    Ok(paths)
}

/// One JSON object per line.
pub fn write_trials<W: Write>(results: &[TrialResult], mut w: W) -> Result<()> {
    for r in results {
        let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset;

    #[test]
    fn ber_examples() {
        let a = [true, false, true, true, false, false, true, false];
        assert_eq!(ber(&a, &a).unwrap(), 0.0);
        let flipped: Vec<bool> = a.iter().map(|b| !b).collect();
        assert_eq!(ber(&a, &flipped).unwrap(), 1.0);
        let mut one = a;
        one[3] = !one[3];
        assert_eq!(ber(&a, &one).unwrap(), 0.125);
        assert!(matches!(ber(&a, &a[..7]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(ber(&[], &[]), Err(Error::Empty)));
    }

    #[test]
    fn seeds_differ_per_coordinate() {
        let s = trial_seed(7, 0, 0);
        assert_eq!(s, trial_seed(7, 0, 0));
        assert_ne!(s, trial_seed(7, 0, 1));
        assert_ne!(s, trial_seed(7, 1, 0));
        assert_ne!(s, trial_seed(8, 0, 0));
        // Swapping point and trial must not collide.
        assert_ne!(trial_seed(7, 1, 2), trial_seed(7, 2, 1));
    }

    #[test]
    fn wilson_interval_brackets_the_estimate() {
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.005);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        assert!(lo < 0.5 && hi > 0.5);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn no_clipping_makes_paths_coincide() {
        let sim = Simulation::new(preset("quality-wireless").unwrap()).unwrap();
        let point = TrialPoint {
            cr: 100.0,
            ..sim.point()
        };
        for i in 0..20 {
            let r = sim.run_trial(&point, i).unwrap();
            assert_eq!(r.clipped, 0);
            assert_eq!(r.errors_sat, r.errors_base);
            assert_eq!(r.errors_declip, r.errors_base);
            assert_eq!(r.papr_orig, r.papr_sat);
        }
    }

    #[test]
    fn trials_are_deterministic() {
        let sim = Simulation::new(preset("robustness").unwrap()).unwrap();
        let a = sim.run_trial_detailed(&sim.point(), 99).unwrap();
        let b = sim.run_trial_detailed(&sim.point(), 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, sim.run_trial(&sim.point(), 100).unwrap());
    }

    #[test]
    fn tables_match_direct_solves() {
        let mut c = preset("quality-wireline").unwrap();
        let with = Simulation::new(c.clone()).unwrap();
        c.use_tables = false;
        let without = Simulation::new(c).unwrap();
        let mut hits = 0;
        for i in 0..50 {
            let (a, da) = with.run_trial_detailed(&with.point(), i).unwrap();
            let (b, db) = without.run_trial_detailed(&without.point(), i).unwrap();
            hits += a.table_hits;
            assert_eq!(b.table_hits, 0);
            for (x, y) in da.channels.iter().zip(&db.channels) {
                for (u, v) in x.declipped.iter().zip(&y.declipped) {
                    assert!((u - v).abs() <= 1e-10 * (1.0 + v.abs()));
                }
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn sweep_spec_validation() {
        let c = preset("robustness").unwrap();
        let ok = SweepSpec::new(c.clone(), SweepAxis::SnrDb, vec![10.0, 20.0], 1);
        ok.validate().unwrap();
        let mut bad = ok.clone();
        bad.trials = 0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.values = vec![10.0, 10.0];
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.values = vec![f64::NAN];
        assert!(bad.validate().is_err());
        let bad = SweepSpec::new(c.clone(), SweepAxis::WindowN, vec![2.5], 1);
        assert!(bad.validate().is_err());
        let bad = SweepSpec::new(c, SweepAxis::Cr, vec![], 1);
        assert!(bad.validate().is_err());
        assert_eq!("window-n".parse::<SweepAxis>().unwrap(), SweepAxis::WindowN);
        assert!("n".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn merging_rows_of_different_points_fails() {
        let mut a = SweepRow::empty(SweepAxis::Cr, 1.0);
        let b = SweepRow::empty(SweepAxis::Cr, 2.0);
        assert!(a.merge(&b).is_err());
    }
}
