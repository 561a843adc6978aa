//! Impairments between transmitter and reconstruction.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::declip::{Flag, SaturatedStream};
use crate::error::{Error, Result};
use crate::ofdm::{dft, idft, Demodulated, OfdmConfig, Waveform};

/// Under- and over-saturation thresholds `T0 < T1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationThresholds {
    t0: f64,
    t1: f64,
}

impl SaturationThresholds {
    pub fn new(t0: f64, t1: f64) -> Result<Self> {
        if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::InvalidThresholds { t0, t1 });
        }
        Ok(Self { t0, t1 })
    }

    /// `(−γ, γ)` for a clipping level `γ > 0`.
    pub fn symmetric(gamma: f64) -> Result<Self> {
        Self::new(-gamma, gamma)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }
}

/// Hard-limits `signal` to the thresholds and flags every limited sample.
pub fn clip(signal: &[f64], thr: SaturationThresholds) -> SaturatedStream {
    let (values, flags) = signal
        .iter()
        .map(|&x| {
            if x <= thr.t0 {
                (thr.t0, Flag::Low)
            } else if x >= thr.t1 {
                (thr.t1, Flag::High)
            } else {
                (x, Flag::Ok)
            }
        })
        .unzip();
    SaturatedStream::gridded(values, flags).expect("clipped stream is consistent")
}

pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|x| x * x).sum::<f64>() / values.len() as f64).sqrt()
}

/// `CR = γ / RMS(f_s)` over the clipped values.
pub fn clipping_ratio(gamma: f64, clipped: &SaturatedStream) -> Result<f64> {
    if clipped.is_empty() {
        return Err(Error::Empty);
    }
    let r = rms(clipped.values());
    if r == 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok(gamma / r)
}

/// Clipping level that yields `target_cr` relative to the RMS of the
/// unclipped signal. The ratio achieved after clipping is slightly higher,
/// since clipping lowers the RMS.
pub fn gamma_for_target_cr(signal: &[f64], target_cr: f64) -> Result<f64> {
    let r = rms(signal);
    if r == 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok(target_cr * r)
}

/// Per-channel noise variance for a requested SNR. Complex signals split the
/// noise power evenly over I and Q.
pub fn noise_variance(signal: &Waveform, snr_db: f64) -> f64 {
    let per_channel = match signal {
        Waveform::Real(_) => 1.0,
        Waveform::Complex(_) => 0.5,
    };
    per_channel * signal.mean_power() / 10f64.powf(snr_db / 10.0)
}

/// Adds white Gaussian noise at `snr_db` relative to the signal power,
/// independently on each real channel. `snr_db = +∞` is the identity.
pub fn awgn(signal: &Waveform, snr_db: f64, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    awgn_with(signal, snr_db, &mut rng)
}

pub fn awgn_with<R: Rng + ?Sized>(signal: &Waveform, snr_db: f64, rng: &mut R) -> Waveform {
    if snr_db == f64::INFINITY {
        return signal.clone();
    }
    let sigma = noise_variance(signal, snr_db).sqrt();
    add_noise(signal, sigma, rng)
}

/// Adds zero-mean Gaussian noise of standard deviation `sigma` per channel.
pub fn add_noise<R: Rng + ?Sized>(signal: &Waveform, sigma: f64, rng: &mut R) -> Waveform {
    let mut draw = || -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        sigma * z
    };
    match signal {
        Waveform::Real(v) => Waveform::Real(v.iter().map(|x| x + draw()).collect()),
        Waveform::Complex(v) => Waveform::Complex(
            v.iter()
                .map(|x| {
                    let re = draw();
                    let im = draw();
                    x + Complex64::new(re, im)
                })
                .collect(),
        ),
    }
}

/// Off-grid evaluation rule of a [`ChannelResponse`]. Frequencies outside
/// the grid hold the nearest edge value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Linear,
    Nearest,
}

/// Sampled frequency response of a wireline channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelResponse {
    freqs_hz: Vec<f64>,
    mag_db: Vec<f64>,
    phase_rad: Option<Vec<f64>>,
    /// Group delay of the linear-phase model used when no phase is given.
    pub delay_s: f64,
    pub interpolation: Interpolation,
}

impl ChannelResponse {
    pub fn new(freqs_hz: Vec<f64>, mag_db: Vec<f64>, phase_rad: Option<Vec<f64>>) -> Result<Self> {
        if freqs_hz.is_empty() {
            return Err(Error::InvalidResponse("empty frequency grid".into()));
        }
        if mag_db.len() != freqs_hz.len() {
            return Err(Error::LengthMismatch {
                expected: freqs_hz.len(),
                got: mag_db.len(),
            });
        }
        if let Some(p) = &phase_rad {
            if p.len() != freqs_hz.len() {
                return Err(Error::LengthMismatch {
                    expected: freqs_hz.len(),
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidResponse("non-finite phase".into()));
            }
        }
        if freqs_hz.iter().any(|f| !f.is_finite()) || freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidResponse(
                "frequencies must be finite and strictly increasing".into(),
            ));
        }
        if mag_db.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidResponse("non-finite magnitude".into()));
        }
        Ok(Self {
            freqs_hz,
            mag_db,
            phase_rad,
            delay_s: 0.0,
            interpolation: Interpolation::Linear,
        })
    }

    /// 0 dB at every frequency.
    pub fn flat() -> Self {
        Self::new(vec![0.0], vec![0.0], None).expect("flat response is valid")
    }

    /// Insertion loss `−(a√f + b f)` dB with `f` in GHz, sampled on `points`
    /// frequencies from DC to `max_hz`.
    pub fn synthetic_loss(a_db_per_sqrt_ghz: f64, b_db_per_ghz: f64, max_hz: f64, points: usize) -> Result<Self> {
        if points < 2 || !(max_hz > 0.0) {
            return Err(Error::InvalidResponse(
                "need at least two points and a positive span".into(),
            ));
        }
        let freqs: Vec<f64> = (0..points).map(|i| max_hz * i as f64 / (points - 1) as f64).collect();
        let mags = freqs
            .iter()
            .map(|&f| {
                let g = f * 1e-9;
                -(a_db_per_sqrt_ghz * g.sqrt() + b_db_per_ghz * g)
            })
            .collect();
        Self::new(freqs, mags, None)
    }

    /// Synthetic loss reaching `edge_loss_db` at `edge_hz`, split evenly
    /// between the skin-effect (√f) and dielectric (f) terms.
    pub fn calibrated_loss(edge_hz: f64, edge_loss_db: f64, max_hz: f64) -> Result<Self> {
        let g = edge_hz * 1e-9;
        if !(g > 0.0) {
            return Err(Error::InvalidResponse("edge frequency must be positive".into()));
        }
        let a = 0.5 * edge_loss_db / g.sqrt();
        let b = 0.5 * edge_loss_db / g;
        Self::synthetic_loss(a, b, max_hz, 257)
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn mag_db(&self) -> &[f64] {
        &self.mag_db
    }

    pub fn phase_rad(&self) -> Option<&[f64]> {
        self.phase_rad.as_deref()
    }

    fn lookup(&self, values: &[f64], f: f64) -> f64 {
        let fs = &self.freqs_hz;
        if f <= fs[0] {
            return values[0];
        }
        let last = fs.len() - 1;
        if f >= fs[last] {
            return values[last];
        }
        let hi = fs.partition_point(|&x| x <= f);
        let lo = hi - 1;
        match self.interpolation {
            Interpolation::Linear => {
                let w = (f - fs[lo]) / (fs[hi] - fs[lo]);
                values[lo] + w * (values[hi] - values[lo])
            }
            Interpolation::Nearest => {
                if f - fs[lo] <= fs[hi] - f {
                    values[lo]
                } else {
                    values[hi]
                }
            }
        }
    }

    /// Magnitude in dB at a nonnegative frequency.
    pub fn magnitude_db(&self, f_hz: f64) -> f64 {
        self.lookup(&self.mag_db, f_hz)
    }

    /// Complex gain at a nonnegative frequency.
    pub fn gain(&self, f_hz: f64) -> Complex64 {
        let mag = 10f64.powf(self.magnitude_db(f_hz) / 20.0);
        let phase = match &self.phase_rad {
            Some(p) => self.lookup(p, f_hz),
            None => -2.0 * std::f64::consts::PI * f_hz * self.delay_s,
        };
        Complex64::from_polar(mag, phase)
    }

    /// Gain at DFT bin `k` of an `n`-point transform. Bins above `n/2` are
    /// negative frequencies and get the conjugate gain of a real channel;
    /// the Nyquist bin keeps only the magnitude so real signals stay real.
    pub fn bin_gain(&self, k: usize, n: usize, sample_rate: f64) -> Complex64 {
        let m = k.min(n - k);
        let f = m as f64 * sample_rate / n as f64;
        let g = self.gain(f);
        if 2 * k == n {
            Complex64::new(g.norm(), 0.0)
        } else if k > n / 2 {
            g.conj()
        } else {
            g
        }
    }

    /// Reads `freq_hz,mag_db[,phase_rad]` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let with_phase = match cols.as_slice() {
            ["freq_hz", "mag_db"] => false,
            ["freq_hz", "mag_db", "phase_rad"] => true,
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header freq_hz,mag_db[,phase_rad], got {}", cols.join(",")),
                })
            }
        };
        let (mut f, mut m, mut p) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: "missing column".into(),
                    })?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse {
                        line,
                        message: e.to_string(),
                    })
            };
            f.push(num(0)?);
            m.push(num(1)?);
            if with_phase {
                p.push(num(2)?);
            }
        }
        Self::new(f, m, with_phase.then_some(p))
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        match &self.phase_rad {
            Some(p) => {
                w.write_record(["freq_hz", "mag_db", "phase_rad"])?;
                for i in 0..self.freqs_hz.len() {
                    w.write_record([
                        self.freqs_hz[i].to_string(),
                        self.mag_db[i].to_string(),
                        p[i].to_string(),
                    ])?;
                }
            }
            None => {
                w.write_record(["freq_hz", "mag_db"])?;
                for i in 0..self.freqs_hz.len() {
                    w.write_record([self.freqs_hz[i].to_string(), self.mag_db[i].to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Filters one block by multiplying its DFT with the channel gain.
pub fn apply_channel(signal: &Waveform, response: &ChannelResponse, sample_rate: f64) -> Waveform {
    let n = signal.len();
    if n == 0 {
        return signal.clone();
    }
    let mut spec = dft(&signal.to_complex());
    for (k, x) in spec.iter_mut().enumerate() {
        *x *= response.bin_gain(k, n, sample_rate);
    }
    let out = idft(&spec);
    match signal {
        Waveform::Real(_) => Waveform::Real(out.iter().map(|c| c.re).collect()),
        Waveform::Complex(_) => Waveform::Complex(out),
    }
}

/// Magnitudes below this count as a zero of the channel.
const MIN_INVERTIBLE_GAIN: f64 = 1e-12;

/// Divides every occupied bin by the channel gain.
pub fn equalize(
    received: &Demodulated,
    response: &ChannelResponse,
    config: &OfdmConfig,
    sample_rate: f64,
) -> Result<Demodulated> {
    let n = received.spectrum.len();
    let mut spectrum = received.spectrum.clone();
    for k in config.occupied() {
        let g = response.bin_gain(k, n, sample_rate);
        if g.norm() < MIN_INVERTIBLE_GAIN {
            return Err(Error::NotInvertible { carrier: k });
        }
        spectrum[k] /= g;
    }
    Ok(Demodulated { spectrum })
}

/// Uniform mid-tread quantizer with `2^bits` levels over
/// `[−full_scale, +full_scale)`; out-of-range inputs saturate to the
/// extreme codes.
pub fn quantize(signal: &[f64], bits: u32, full_scale: f64) -> Vec<f64> {
    assert!((1..53).contains(&bits), "quantizer resolution out of range");
    let step = quantizer_step(bits, full_scale);
    let top = (1i64 << (bits - 1)) as f64;
    signal
        .iter()
        .map(|&x| (x / step).round().clamp(-top, top - 1.0) * step)
        .collect()
}

/// Mid-tread rounding to multiples of `step` without a range limit.
pub fn quantize_unbounded(signal: &[f64], step: f64) -> Vec<f64> {
    signal.iter().map(|&x| (x / step).round() * step).collect()
}

pub fn quantizer_step(bits: u32, full_scale: f64) -> f64 {
    2.0 * full_scale / 2f64.powi(bits as i32)
}

/// ADC with `bits` of resolution degraded to an effective number of bits by
/// additive noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcModel {
    pub bits: u32,
    pub enob: f64,
}

impl AdcModel {
    /// Full scale whose top decision level coincides with the clipping level
    /// `gamma`, so every unclipped sample is quantized as if the range were
    /// unlimited.
    pub fn full_scale_for(&self, gamma: f64) -> f64 {
        gamma / (1.0 - 2f64.powi(-(self.bits as i32)))
    }

    pub fn step(&self, full_scale: f64) -> f64 {
        quantizer_step(self.bits, full_scale)
    }

    /// Target SINAD of a full-scale sine, `6.02·ENOB + 1.76` dB.
    pub fn sinad_db(&self) -> f64 {
        6.02 * self.enob + 1.76
    }

    /// Standard deviation of the extra noise that brings the quantizer's
    /// SINAD down to the effective resolution.
    pub fn extra_noise_std(&self, full_scale: f64) -> f64 {
        let signal_power = 0.5 * full_scale * full_scale;
        let total = signal_power / 10f64.powf(self.sinad_db() / 10.0);
        let quant = self.step(full_scale).powi(2) / 12.0;
        (total - quant).max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{demodulate, modulate, SymbolFrame};
    use proptest::prelude::*;

    #[test]
    fn clip_examples() {
        let thr = SaturationThresholds::new(-1.0, 2.0).unwrap();
        let s = clip(&[0.5, 2.0, 3.0, -1.0, -4.0, 1.999], thr);
        assert_eq!(s.values(), &[0.5, 2.0, 2.0, -1.0, -1.0, 1.999]);
        assert_eq!(
            s.flags(),
            &[Flag::Ok, Flag::High, Flag::High, Flag::Low, Flag::Low, Flag::Ok]
        );
    }

    #[test]
    fn clip_is_idempotent_and_bounded() {
        let thr = SaturationThresholds::symmetric(0.8).unwrap();
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 1.5).collect();
        let once = clip(&x, thr);
        let twice = clip(once.values(), thr);
        assert_eq!(once, twice);
        assert!(once.values().iter().all(|v| v.abs() <= 0.8));
    }

    #[test]
    fn bad_thresholds() {
        assert!(SaturationThresholds::new(1.0, 1.0).is_err());
        assert!(SaturationThresholds::symmetric(-1.0).is_err());
    }

    #[test]
    fn clipping_ratio_examples() {
        let s = clip(&[3.0, 3.0, 3.0], SaturationThresholds::symmetric(3.0).unwrap());
        assert!((clipping_ratio(3.0, &s).unwrap() - 1.0).abs() < 1e-15);

        let s = clip(&[1.0, -1.0, 5.0], SaturationThresholds::symmetric(2.0).unwrap());
        // Independent RMS: sqrt((1 + 1 + 4) / 3) = sqrt(2).
        let rms_direct = ((1.0f64 + 1.0 + 4.0) / 3.0).sqrt();
        assert!((rms_direct - 2f64.sqrt()).abs() < 1e-15);
        assert!((clipping_ratio(2.0, &s).unwrap() - 2.0 / rms_direct).abs() < 1e-15);

        let scaled = clip(&[7.0, -7.0, 35.0], SaturationThresholds::symmetric(14.0).unwrap());
        assert!((clipping_ratio(14.0, &scaled).unwrap() - clipping_ratio(2.0, &s).unwrap()).abs() < 1e-14);

        let z = clip(&[0.0, 0.0], SaturationThresholds::symmetric(1.0).unwrap());
        assert!(matches!(clipping_ratio(1.0, &z), Err(Error::ZeroPower)));
    }

    #[test]
    fn gamma_from_target() {
        let x = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(gamma_for_target_cr(&x, 1.31).unwrap(), 1.31);
        let g = gamma_for_target_cr(&x, 10.0).unwrap();
        let s = clip(&x, SaturationThresholds::symmetric(g).unwrap());
        assert_eq!(s.saturated_count(), 0);
        assert!((clipping_ratio(g, &s).unwrap() - 10.0).abs() < 1e-12);
        assert!(gamma_for_target_cr(&[0.0], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn achieved_ratio_is_at_least_the_target(
            xs in proptest::collection::vec(-5.0f64..5.0, 8..64),
            cr in 0.5f64..4.0,
        ) {
            prop_assume!(rms(&xs) > 1e-3);
            let g = gamma_for_target_cr(&xs, cr).unwrap();
            let s = clip(&xs, SaturationThresholds::symmetric(g).unwrap());
            prop_assert!(clipping_ratio(g, &s).unwrap() >= cr * (1.0 - 1e-12));
        }
    }

    #[test]
    fn infinite_snr_is_identity_and_seeds_repeat() {
        let x = Waveform::Real(vec![0.1, -0.3, 0.7]);
        assert_eq!(awgn(&x, f64::INFINITY, 1), x);
        assert_eq!(awgn(&x, 10.0, 42), awgn(&x, 10.0, 42));
        assert_ne!(awgn(&x, 10.0, 42), awgn(&x, 10.0, 43));
    }

    #[test]
    fn flat_response_is_identity() {
        let x = Waveform::Real(vec![0.1, -0.3, 0.7, 0.2]);
        let y = apply_channel(&x, &ChannelResponse::flat(), 1.0);
        let (Waveform::Real(a), Waveform::Real(b)) = (&x, &y) else {
            panic!("real in, real out")
        };
        for (p, q) in a.iter().zip(b) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn equalize_inverts_channel() {
        let cfg = OfdmConfig::wireline_default();
        let fs = 24e9;
        let resp = ChannelResponse::calibrated_loss(6.0e9, 11.0, 12e9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let frame = SymbolFrame::random(&mut rng, &cfg).unwrap();
            let rx = apply_channel(&modulate(&frame, &cfg).unwrap(), &resp, fs);
            let eq = equalize(&demodulate(&rx, &cfg).unwrap(), &resp, &cfg, fs).unwrap();
            for k in cfg.occupied() {
                assert!((eq.spectrum[k] - frame.spectrum[k]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn lossy_edge_attenuates_carrier_by_eleven_db() {
        let mut cfg = OfdmConfig::wireline_default();
        cfg.carriers = vec![6];
        cfg.qam = 4;
        let fs = 24e9;
        let edge = 6.0 * fs / 32.0;
        let resp = ChannelResponse::calibrated_loss(edge, 11.0, fs / 2.0).unwrap();
        assert!((resp.magnitude_db(edge) + 11.0).abs() < 1e-9);
        let frame = SymbolFrame::from_bits(vec![false, false], &cfg).unwrap();
        let rx = apply_channel(&modulate(&frame, &cfg).unwrap(), &resp, fs);
        let d = demodulate(&rx, &cfg).unwrap();
        let ratio_db = 20.0 * (d.spectrum[6].norm() / frame.spectrum[6].norm()).log10();
        assert!((ratio_db + 11.0).abs() < 1e-9, "{ratio_db}");
    }

    #[test]
    fn zero_gain_is_not_invertible() {
        let cfg = OfdmConfig::wireline_default();
        let resp = ChannelResponse::new(vec![0.0, 1e9], vec![-400.0, -400.0], None).unwrap();
        let d = Demodulated {
            spectrum: vec![Complex64::new(1.0, 0.0); 32],
        };
        assert!(matches!(
            equalize(&d, &resp, &cfg, 1e9),
            Err(Error::NotInvertible { .. })
        ));
    }

    #[test]
    fn response_validation_and_lookup() {
        assert!(ChannelResponse::new(vec![1.0, 0.5], vec![0.0, 0.0], None).is_err());
        assert!(ChannelResponse::new(vec![1.0], vec![f64::NAN], None).is_err());
        assert!(ChannelResponse::new(vec![], vec![], None).is_err());
        let mut r = ChannelResponse::new(vec![0.0, 10.0], vec![0.0, -10.0], None).unwrap();
        assert_eq!(r.magnitude_db(5.0), -5.0);
        assert_eq!(r.magnitude_db(20.0), -10.0);
        r.interpolation = Interpolation::Nearest;
        assert_eq!(r.magnitude_db(6.0), -10.0);
    }

    #[test]
    fn response_csv_round_trip() {
        let r = ChannelResponse::new(vec![0.0, 1e9, 2e9], vec![0.0, -3.5, -7.25], Some(vec![0.0, -0.5, -1.0])).unwrap();
        let mut buf = Vec::new();
        r.to_csv(&mut buf).unwrap();
        let back = ChannelResponse::from_csv(buf.as_slice()).unwrap();
        assert_eq!(back, r);

        let err = ChannelResponse::from_csv("freq_hz,mag_db\n0,0\n1e9,oops\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        assert!(ChannelResponse::from_csv("f,m\n".as_bytes()).is_err());
    }

    #[test]
    fn quantizer_basics() {
        assert_eq!(quantize(&[0.0], 7, 1.0), vec![0.0]);
        let step = quantizer_step(7, 1.0);
        let x: Vec<f64> = (0..200).map(|i| -0.99 + i as f64 * 0.0099).collect();
        for (a, b) in quantize(&x, 7, 1.0).iter().zip(&x) {
            assert!((a - b).abs() <= step / 2.0 + 1e-15);
        }
        let sat = quantize(&[5.0, -5.0], 3, 1.0);
        assert_eq!(sat, vec![0.75, -1.0]);
    }

    #[test]
    fn adc_top_level_matches_clip_level() {
        let adc = AdcModel { bits: 7, enob: 6.5 };
        let gamma = 0.8;
        let fs = adc.full_scale_for(gamma);
        let step = adc.step(fs);
        let below: Vec<f64> = (0..1000)
            .map(|i| -gamma + 1e-9 + i as f64 * (2.0 * gamma - 2e-9) / 999.0)
            .collect();
        assert_eq!(quantize(&below, 7, fs), quantize_unbounded(&below, step));
        assert!((adc.sinad_db() - 40.89).abs() < 1e-12);
        assert!(adc.extra_noise_std(fs) > 0.0);
    }
}
