//! OFDM baseband transmitter and receiver.
//!
//! Transforms are unitary (`1/√N` in both directions), so time-domain and
//! subcarrier energies agree. In wireline mode only the independent carriers
//! are listed; their conjugate mirrors `N − k` are filled in so the
//! time-domain signal is real. Self-mirrored carriers (DC, and `N/2` for even
//! `N`) carry a real PAM symbol on the in-phase axis only.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qam::{qam_decode, QamOrder};

/// Wireline links transmit a real signal with Hermitian spectrum; wireless
/// links transmit independent I and Q channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    Wireline,
    Wireless,
}

impl fmt::Display for LinkMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkMode::Wireline => "wireline",
            LinkMode::Wireless => "wireless",
        })
    }
}

impl FromStr for LinkMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "wireline" => Ok(LinkMode::Wireline),
            "wireless" => Ok(LinkMode::Wireless),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode `{other}` (expected wireline or wireless)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct OfdmConfig {
    /// IDFT size.
    pub taps: usize,
    /// Data-carrying subcarrier indices. In wireline mode, the independent
    /// half only.
    pub carriers: Vec<usize>,
    /// Constellation size, e.g. 64.
    pub qam: u32,
    pub mode: LinkMode,
    /// Cyclic-prefix length in samples.
    pub cp: usize,
    pub dc_zeroed: bool,
}

impl OfdmConfig {
    /// 32 taps, the 16 carriers nearest DC (±1…±8), DC zeroed, 64-QAM.
    pub fn wireless_default() -> Self {
        Self {
            taps: 32,
            carriers: (1..=8).chain(24..32).collect(),
            qam: 64,
            mode: LinkMode::Wireless,
            cp: 0,
            dc_zeroed: true,
        }
    }

    /// 32 taps, carriers 1…8 with their Hermitian mirrors, DC zeroed, 64-QAM.
    pub fn wireline_default() -> Self {
        Self {
            taps: 32,
            carriers: (1..=8).collect(),
            qam: 64,
            mode: LinkMode::Wireline,
            cp: 0,
            dc_zeroed: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.taps < 2 {
            return bad(format!("IDFT size {} is too small", self.taps));
        }
        QamOrder::new(self.qam)?;
        if self.carriers.is_empty() {
            return bad("no active carriers".into());
        }
        let mut seen = BTreeSet::new();
        for &k in &self.carriers {
            if k >= self.taps {
                return bad(format!("carrier {k} outside [0, {})", self.taps));
            }
            if !seen.insert(k) {
                return bad(format!("carrier {k} listed twice"));
            }
        }
        if self.dc_zeroed && seen.contains(&0) {
            return bad("DC is zeroed but carrier 0 is active".into());
        }
        if self.mode == LinkMode::Wireline {
            for &k in &self.carriers {
                let m = self.mirror(k);
                if m != k && seen.contains(&m) {
                    return bad(format!(
                        "wireline carriers {k} and {m} are mirrors; list only one of each pair"
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn qam_order(&self) -> QamOrder {
        QamOrder::new(self.qam).expect("validated QAM order")
    }

    fn mirror(&self, k: usize) -> usize {
        (self.taps - k) % self.taps
    }

    fn is_self_mirrored(&self, k: usize) -> bool {
        self.mode == LinkMode::Wireline && self.mirror(k) == k
    }

    fn bits_on(&self, k: usize) -> usize {
        let q = self.qam_order();
        if self.is_self_mirrored(k) {
            q.bits_per_axis()
        } else {
            q.bits_per_symbol()
        }
    }

    /// Source bits carried by one symbol.
    pub fn bits_per_frame(&self) -> usize {
        self.carriers.iter().map(|&k| self.bits_on(k)).sum()
    }

    /// Samples per transmitted symbol, prefix included.
    pub fn frame_len(&self) -> usize {
        self.taps + self.cp
    }

    /// Every occupied bin, mirrors included.
    pub fn occupied(&self) -> BTreeSet<usize> {
        let mut s: BTreeSet<usize> = self.carriers.iter().copied().collect();
        if self.mode == LinkMode::Wireline {
            s.extend(self.carriers.iter().map(|&k| self.mirror(k)));
        }
        s
    }

    /// Largest occupied frequency in cycles per sample, in `[0, 0.5]`.
    pub fn max_frequency(&self) -> f64 {
        self.occupied()
            .iter()
            .map(|&k| k.min(self.taps - k) as f64 / self.taps as f64)
            .fold(0.0, f64::max)
    }
}

/// Frequency-domain content of one OFDM symbol plus the bits it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub spectrum: Vec<Complex64>,
    pub bits: Vec<bool>,
}

impl SymbolFrame {
    /// Maps `bits` onto the active carriers in listed order.
    pub fn from_bits(bits: Vec<bool>, config: &OfdmConfig) -> Result<Self> {
        config.validate()?;
        let need = config.bits_per_frame();
        if bits.len() != need {
            return Err(Error::LengthMismatch {
                expected: need,
                got: bits.len(),
            });
        }
        let q = config.qam_order();
        let h = q.bits_per_axis();
        let mut spectrum = vec![Complex64::new(0.0, 0.0); config.taps];
        let mut pos = 0;
        for &k in &config.carriers {
            let sym = if config.is_self_mirrored(k) {
                Complex64::new(q.encode_axis(&bits[pos..pos + h]), 0.0)
            } else {
                Complex64::new(
                    q.encode_axis(&bits[pos..pos + h]),
                    q.encode_axis(&bits[pos + h..pos + 2 * h]),
                )
            };
            pos += config.bits_on(k);
            spectrum[k] = sym;
            if config.mode == LinkMode::Wireline {
                spectrum[config.mirror(k)] = sym.conj();
            }
        }
        Ok(Self { spectrum, bits })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, config: &OfdmConfig) -> Result<Self> {
        config.validate()?;
        let bits = (0..config.bits_per_frame()).map(|_| rng.random()).collect();
        Self::from_bits(bits, config)
    }

    pub fn zero(config: &OfdmConfig) -> Result<Self> {
        Self::from_bits(vec![false; config.bits_per_frame()], config).map(|mut f| {
            f.spectrum.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            f
        })
    }

    /// Symbols on the listed carriers, in order.
    pub fn data_symbols(&self, config: &OfdmConfig) -> Vec<Complex64> {
        config.carriers.iter().map(|&k| self.spectrum[k]).collect()
    }

    fn check(&self, config: &OfdmConfig) -> Result<()> {
        if self.spectrum.len() != config.taps {
            return Err(Error::LengthMismatch {
                expected: config.taps,
                got: self.spectrum.len(),
            });
        }
        let occupied = config.occupied();
        for (k, c) in self.spectrum.iter().enumerate() {
            if !occupied.contains(&k) && (c.re != 0.0 || c.im != 0.0) {
                return Err(Error::InvalidConfig(format!("inactive carrier {k} is nonzero")));
            }
        }
        if config.mode == LinkMode::Wireline {
            for &k in &config.carriers {
                let a = self.spectrum[k];
                let b = self.spectrum[config.mirror(k)];
                if (a - b.conj()).norm() > 1e-12 * (1.0 + a.norm()) {
                    return Err(Error::InvalidConfig(format!("carrier {k} breaks Hermitian symmetry")));
                }
            }
        }
        Ok(())
    }
}

/// Time-domain signal: real for wireline links, complex for wireless ones.
#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Waveform {
    pub fn len(&self) -> usize {
        match self {
            Waveform::Real(v) => v.len(),
            Waveform::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        match self {
            Waveform::Real(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Waveform::Complex(v) => v.clone(),
        }
    }

    /// Per-sample instantaneous power.
    pub fn powers(&self) -> Vec<f64> {
        match self {
            Waveform::Real(v) => v.iter().map(|x| x * x).collect(),
            Waveform::Complex(v) => v.iter().map(|x| x.norm_sqr()).collect(),
        }
    }

    pub fn mean_power(&self) -> f64 {
        let p = self.powers();
        if p.is_empty() {
            return 0.0;
        }
        p.iter().sum::<f64>() / p.len() as f64
    }

    /// Root-mean-square magnitude.
    pub fn rms(&self) -> f64 {
        self.mean_power().sqrt()
    }

    /// Real-valued channels: one for real signals, I and Q for complex ones.
    pub fn channels(&self) -> Vec<Vec<f64>> {
        match self {
            Waveform::Real(v) => vec![v.clone()],
            Waveform::Complex(v) => {
                let (i, q) = split_iq(v);
                vec![i, q]
            }
        }
    }

    /// Inverse of [`Waveform::channels`].
    pub fn from_channels(mode: LinkMode, mut channels: Vec<Vec<f64>>) -> Result<Self> {
        match (mode, channels.len()) {
            (LinkMode::Wireline, 1) => Ok(Waveform::Real(channels.pop().unwrap())),
            (LinkMode::Wireless, 2) => Ok(Waveform::Complex(merge_iq(&channels[0], &channels[1])?)),
            (_, n) => Err(Error::InvalidConfig(format!(
                "{mode} signals have {} channel(s), got {n}",
                if mode == LinkMode::Wireline { 1 } else { 2 }
            ))),
        }
    }

    /// Applies `f` to every real channel independently.
    pub fn per_channel(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Waveform {
        match self {
            Waveform::Real(v) => Waveform::Real(f(v)),
            Waveform::Complex(v) => {
                let (i, q) = split_iq(v);
                Waveform::Complex(merge_iq(&f(&i), &f(&q)).expect("equal-length channels"))
            }
        }
    }
}

/// Splits a complex signal into its in-phase and quadrature streams.
pub fn split_iq(signal: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    signal.iter().map(|c| (c.re, c.im)).unzip()
}

pub fn merge_iq(i: &[f64], q: &[f64]) -> Result<Vec<Complex64>> {
    if i.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: i.len(),
            got: q.len(),
        });
    }
    Ok(i.iter().zip(q).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unitary DFT, `X_k = N^{-1/2} Σ x_n e^{-j2πkn/N}`.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    plan(buf.len(), false).process(&mut buf);
    let s = 1.0 / (buf.len() as f64).sqrt();
    buf.iter_mut().for_each(|c| *c *= s);
    buf
}

/// Unitary inverse DFT.
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    plan(buf.len(), true).process(&mut buf);
    let s = 1.0 / (buf.len() as f64).sqrt();
    buf.iter_mut().for_each(|c| *c *= s);
    buf
}

/// Prepends the last `cp` samples.
pub fn add_cyclic_prefix<T: Clone>(body: &[T], cp: usize) -> Vec<T> {
    let n = body.len();
    body[n - cp.min(n)..].iter().chain(body).cloned().collect()
}

/// IDFT of the frame's spectrum with the cyclic prefix prepended.
pub fn modulate(frame: &SymbolFrame, config: &OfdmConfig) -> Result<Waveform> {
    config.validate()?;
    frame.check(config)?;
    let body = idft(&frame.spectrum);
    Ok(match config.mode {
        LinkMode::Wireless => Waveform::Complex(add_cyclic_prefix(&body, config.cp)),
        LinkMode::Wireline => {
            let re: Vec<f64> = body.iter().map(|c| c.re).collect();
            Waveform::Real(add_cyclic_prefix(&re, config.cp))
        }
    })
}

/// Received spectrum of one symbol, inactive bins included.
#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    pub spectrum: Vec<Complex64>,
}

impl Demodulated {
    /// Hard decisions on the active carriers. Inactive bins of the returned
    /// frame are zeroed.
    pub fn decide(&self, config: &OfdmConfig) -> SymbolFrame {
        let q = config.qam_order();
        let mut bits = Vec::with_capacity(config.bits_per_frame());
        let mut spectrum = vec![Complex64::new(0.0, 0.0); config.taps];
        for &k in &config.carriers {
            let s = self.spectrum[k];
            if config.is_self_mirrored(k) {
                q.decode_axis(s.re, &mut bits);
            } else {
                bits.extend(qam_decode(&[s], q));
            }
            spectrum[k] = s;
            if config.mode == LinkMode::Wireline {
                spectrum[config.mirror(k)] = s.conj();
            }
        }
        SymbolFrame { spectrum, bits }
    }

    /// Energy on bins that carry no data, i.e. distortion leaking out of band.
    pub fn inactive_energy(&self, config: &OfdmConfig) -> f64 {
        let occupied = config.occupied();
        self.spectrum
            .iter()
            .enumerate()
            .filter(|(k, _)| !occupied.contains(k))
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    pub fn data_symbols(&self, config: &OfdmConfig) -> Vec<Complex64> {
        config.carriers.iter().map(|&k| self.spectrum[k]).collect()
    }
}

/// Strips the cyclic prefix and takes the DFT.
pub fn demodulate(signal: &Waveform, config: &OfdmConfig) -> Result<Demodulated> {
    config.validate()?;
    if signal.len() != config.frame_len() {
        return Err(Error::LengthMismatch {
            expected: config.frame_len(),
            got: signal.len(),
        });
    }
    let x = signal.to_complex();
    Ok(Demodulated {
        spectrum: dft(&x[config.cp..]),
    })
}

/// Peak-to-average power ratio on the linear scale, over sample peaks.
pub fn papr(signal: &Waveform) -> Result<f64> {
    if signal.is_empty() {
        return Err(Error::Empty);
    }
    let p = signal.powers();
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    if mean == 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok(p.iter().copied().fold(0.0, f64::max) / mean)
}

/// PAPR seen by per-channel converters: peak over mean of the squared
/// samples of every real channel pooled together. Equals [`papr`] for real
/// signals. For complex ones it tracks I/Q clipping, which can leave the
/// envelope peak untouched.
pub fn channel_papr(signal: &Waveform) -> Result<f64> {
    let pooled = Waveform::Real(signal.channels().concat());
    papr(&pooled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * t) as f64 / n as f64))
                    .sum::<Complex64>()
                    / (n as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn dft_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Complex64> = (0..32).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let fast = dft(&x);
        for (a, b) in fast.iter().zip(naive_dft(&x)) {
            assert!((a - b).norm() < 1e-12);
        }
        let back = idft(&fast);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn default_configs_are_valid() {
        let w = OfdmConfig::wireless_default();
        w.validate().unwrap();
        assert_eq!(w.carriers.len(), 16);
        assert_eq!(w.bits_per_frame(), 96);
        let l = OfdmConfig::wireline_default();
        l.validate().unwrap();
        assert_eq!(l.bits_per_frame(), 48);
        assert_eq!(l.occupied().len(), 16);
        assert!((l.max_frequency() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut c = OfdmConfig::wireline_default();
        c.carriers.push(31);
        assert!(c.validate().is_err());
        let mut c = OfdmConfig::wireless_default();
        c.carriers.push(0);
        assert!(c.validate().is_err());
        let mut c = OfdmConfig::wireless_default();
        c.carriers.push(40);
        assert!(c.validate().is_err());
        let mut c = OfdmConfig::wireless_default();
        c.qam = 32;
        assert!(c.validate().is_err());
        let mut c = OfdmConfig::wireline_default();
        c.dc_zeroed = false;
        c.carriers.push(0);
        c.validate().unwrap();
        assert_eq!(c.bits_per_frame(), 48 + 3);
    }

    #[test]
    fn zero_frame_gives_zero_signal() {
        let c = OfdmConfig::wireless_default();
        let f = SymbolFrame::zero(&c).unwrap();
        let s = modulate(&f, &c).unwrap();
        assert!(s.powers().iter().all(|&p| p == 0.0));
        let d = demodulate(&s, &c).unwrap();
        assert!(d.spectrum.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn single_carrier_is_idft_column() {
        let mut c = OfdmConfig::wireless_default();
        c.carriers = vec![3];
        c.qam = 4;
        let mut f = SymbolFrame::from_bits(vec![false, false], &c).unwrap();
        f.spectrum[3] = Complex64::new(1.0, 0.0);
        let Waveform::Complex(s) = modulate(&f, &c).unwrap() else {
            panic!("wireless signal must be complex");
        };
        for (n, v) in s.iter().enumerate() {
            let want = Complex64::from_polar(1.0 / 32f64.sqrt(), 2.0 * PI * 3.0 * n as f64 / 32.0);
            assert!((v - want).norm() < 1e-15);
        }
    }

    #[test]
    fn round_trip_frames_and_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mut c in [OfdmConfig::wireless_default(), OfdmConfig::wireline_default()] {
            c.cp = 4;
            for _ in 0..20 {
                let f = SymbolFrame::random(&mut rng, &c).unwrap();
                let s = modulate(&f, &c).unwrap();
                assert_eq!(s.len(), 36);
                let d = demodulate(&s, &c).unwrap();
                for (a, b) in d.spectrum.iter().zip(&f.spectrum) {
                    assert!((a - b).norm() < 1e-10);
                }
                assert_eq!(d.decide(&c).bits, f.bits);
            }
        }
    }

    #[test]
    fn wireline_signal_is_real_and_dc_carries_pam() {
        let c = OfdmConfig {
            carriers: (0..7).collect(),
            dc_zeroed: false,
            ..OfdmConfig::wireline_default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = SymbolFrame::random(&mut rng, &c).unwrap();
        assert_eq!(f.spectrum[0].im, 0.0);
        let s = modulate(&f, &c).unwrap();
        assert!(matches!(s, Waveform::Real(_)));
        let d = demodulate(&s, &c).unwrap();
        assert_eq!(d.decide(&c).bits, f.bits);
    }

    #[test]
    fn parseval_holds() {
        let c = OfdmConfig::wireless_default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = SymbolFrame::random(&mut rng, &c).unwrap();
        let s = modulate(&f, &c).unwrap();
        let et: f64 = s.powers().iter().sum();
        let ef: f64 = f.spectrum.iter().map(|x| x.norm_sqr()).sum();
        assert!((et - ef).abs() < 1e-10);
    }

    #[test]
    fn demodulate_rejects_wrong_length() {
        let c = OfdmConfig::wireless_default();
        let s = Waveform::Complex(vec![Complex64::new(0.0, 0.0); 31]);
        assert!(matches!(demodulate(&s, &c), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn modulate_rejects_dirty_inactive_bins() {
        let c = OfdmConfig::wireless_default();
        let mut f = SymbolFrame::zero(&c).unwrap();
        f.spectrum[16] = Complex64::new(1.0, 0.0);
        assert!(modulate(&f, &c).is_err());
    }

    #[test]
    fn papr_examples() {
        let tone: Vec<Complex64> = (0..16).map(|n| Complex64::from_polar(2.0, n as f64 * 0.3)).collect();
        assert!((papr(&Waveform::Complex(tone)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(papr(&Waveform::Real(vec![0.7; 5])).unwrap(), 1.0);
        assert!((papr(&Waveform::Real(vec![1.0, 3.0])).unwrap() - 1.8).abs() < 1e-15);
        assert!(matches!(papr(&Waveform::Real(vec![0.0; 3])), Err(Error::ZeroPower)));
        assert!(matches!(papr(&Waveform::Real(vec![])), Err(Error::Empty)));
    }

    #[test]
    fn iq_split_merge() {
        let x = vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)];
        let (i, q) = split_iq(&x);
        assert_eq!(merge_iq(&i, &q).unwrap(), x);
        let (_, q) = split_iq(&[Complex64::new(3.0, 0.0)]);
        assert_eq!(q, vec![0.0]);
        assert!(merge_iq(&[1.0], &[]).is_err());
    }

    #[test]
    fn mode_text() {
        assert_eq!("wireline".parse::<LinkMode>().unwrap(), LinkMode::Wireline);
        assert!("wired".parse::<LinkMode>().is_err());
    }
}
