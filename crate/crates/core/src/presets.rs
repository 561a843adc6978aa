//! Named simulation configurations.
//!
//! A [`SimConfig`] serializes to a flat TOML document whose keys mirror the
//! command-line flags, so any preset can be dumped, edited and passed back.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel::AdcModel;
use crate::error::{Error, Result};
use crate::kernel::BandSpec;
use crate::ofdm::{LinkMode, OfdmConfig};
use crate::reconstruct::Epsilon;

pub const PRESET_NAMES: [&str; 5] = [
    "ideal-case",
    "quality-wireline",
    "quality-wireless",
    "robustness",
    "wireline-link",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SimConfig {
    pub preset: String,
    pub mode: LinkMode,
    pub taps: usize,
    pub carriers: Vec<usize>,
    pub qam: u32,
    pub cp: usize,
    pub dc_zeroed: bool,
    /// Kernel band `lo:hi` in radians per sample.
    pub band: BandSpec,
    pub window_n: usize,
    pub margin: usize,
    pub epsilon: Epsilon,
    /// Target clipping ratio; the clipping level is this times the RMS of
    /// the unclipped receiver input. Trials also report the ratio achieved
    /// after clipping.
    pub cr: f64,
    /// Omitted for a noiseless channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    /// Synthetic insertion loss at the highest occupied carrier, in dB.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_db: Option<f64>,
    /// Measured response; takes precedence over `loss-db`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_csv: Option<PathBuf>,
    /// Treat each received symbol as one period of a periodic signal, so
    /// reconstruction windows wrap around the symbol edges instead of
    /// turning one-sided.
    #[serde(default)]
    pub periodic: bool,
    /// Consult pre-inverted Gram matrices for isolated saturations.
    #[serde(default = "default_true")]
    pub use_tables: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adc: Option<AdcModel>,
}

fn default_sample_rate() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl SimConfig {
    pub fn ofdm(&self) -> OfdmConfig {
        OfdmConfig {
            taps: self.taps,
            carriers: self.carriers.clone(),
            qam: self.qam,
            mode: self.mode,
            cp: self.cp,
            dc_zeroed: self.dc_zeroed,
        }
    }

    pub fn set_ofdm(&mut self, o: &OfdmConfig) {
        self.mode = o.mode;
        self.taps = o.taps;
        self.carriers = o.carriers.clone();
        self.qam = o.qam;
        self.cp = o.cp;
        self.dc_zeroed = o.dc_zeroed;
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm().validate()?;
        if self.window_n == 0 {
            return Err(Error::InvalidWindow("window-n must be at least 1".into()));
        }
        self.epsilon.resolve(&self.band)?;
        if !(self.cr.is_finite() && self.cr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "clipping ratio {} must be positive",
                self.cr
            )));
        }
        if let Some(s) = self.snr_db {
            if s.is_nan() {
                return Err(Error::InvalidConfig("snr-db is NaN".into()));
            }
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidConfig("sample-rate-hz must be positive".into()));
        }
        if let Some(adc) = &self.adc {
            if !(1..=24).contains(&adc.bits) || !(adc.enob > 0.0 && adc.enob <= adc.bits as f64) {
                return Err(Error::InvalidConfig(format!(
                    "ADC needs 1..=24 bits and 0 < enob <= bits, got {} / {}",
                    adc.bits, adc.enob
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let c: SimConfig = toml::from_str(s).map_err(|e| Error::Parse {
            line: e.span().map(|sp| s[..sp.start].lines().count().max(1)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }
}

/// Kernel band spanning exactly the occupied carriers of one real channel:
/// `[0, ω_max]`, or `[ω_min, ω_max]` for a bandpass fit.
fn occupied_band(ofdm: &OfdmConfig, bandpass: bool) -> BandSpec {
    let n = ofdm.taps;
    let freq = |k: usize| 2.0 * PI * k.min(n - k) as f64 / n as f64;
    let hi = freq_bound(ofdm, freq, f64::max);
    let lo = if bandpass {
        freq_bound(ofdm, freq, f64::min)
    } else {
        0.0
    };
    BandSpec::new(lo, hi).expect("occupied band below Nyquist")
}

fn freq_bound(ofdm: &OfdmConfig, freq: impl Fn(usize) -> f64, pick: fn(f64, f64) -> f64) -> f64 {
    ofdm.occupied().into_iter().map(freq).reduce(pick).unwrap_or(0.0)
}

pub fn preset(name: &str) -> Result<SimConfig> {
    let wireless = OfdmConfig::wireless_default();
    let wireline = OfdmConfig::wireline_default();
    let mut c = SimConfig {
        preset: name.to_string(),
        mode: LinkMode::Wireless,
        taps: 32,
        carriers: Vec::new(),
        qam: 64,
        cp: 0,
        dc_zeroed: true,
        band: occupied_band(&wireless, false),
        window_n: 8,
        margin: 32,
        epsilon: Epsilon::Auto,
        cr: 1.31,
        snr_db: None,
        sample_rate_hz: 1.0,
        loss_db: None,
        channel_csv: None,
        periodic: true,
        use_tables: true,
        adc: None,
    };
    match name {
        "ideal-case" => {
            c.set_ofdm(&wireless);
            c.band = occupied_band(&wireless, true);
            c.epsilon = Epsilon::Fixed(0.0);
            c.cr = 1.0;
        }
        "quality-wireline" => {
            c.set_ofdm(&wireline);
            c.band = occupied_band(&wireline, false);
            c.window_n = 10;
            c.cr = 1.66;
        }
        "quality-wireless" => {
            c.set_ofdm(&wireless);
            c.window_n = 10;
            c.cr = 1.31;
        }
        "robustness" => {
            c.set_ofdm(&wireless);
            c.cr = 1.31;
            c.snr_db = Some(20.0);
        }
        "wireline-link" => {
            let link = OfdmConfig {
                carriers: (0..7).collect(),
                dc_zeroed: false,
                cp: 4,
                ..wireline
            };
            c.set_ofdm(&link);
            c.band = occupied_band(&link, false);
            c.cr = 2.03;
            c.sample_rate_hz = 24e9;
            c.loss_db = Some(11.0);
            c.adc = Some(AdcModel { bits: 7, enob: 6.5 });
        }
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                available: PRESET_NAMES.join(", "),
            })
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid_and_round_trips() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            let text = c.to_toml();
            assert_eq!(SimConfig::from_toml(&text).unwrap(), c, "{name}:\n{text}");
        }
    }

    #[test]
    fn unknown_preset_lists_available() {
        match preset("bogus") {
            Err(Error::UnknownPreset { available, .. }) => assert!(available.contains("ideal-case")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = preset("robustness").unwrap().to_toml();
        text.insert_str(0, "windw-n = 3\n");
        assert!(SimConfig::from_toml(&text).is_err());
    }

    #[test]
    fn bands_cover_the_occupied_carriers() {
        let ideal = preset("ideal-case").unwrap();
        assert!((ideal.band.omega0() - PI / 16.0).abs() < 1e-15);
        assert!((ideal.band.omega1() - PI / 2.0).abs() < 1e-15);
        for name in ["quality-wireline", "quality-wireless", "robustness"] {
            let c = preset(name).unwrap();
            assert_eq!(c.band.omega0(), 0.0);
            assert!((c.band.omega1() - PI / 2.0).abs() < 1e-15, "{name}");
        }
        let link = preset("wireline-link").unwrap();
        assert!((link.band.omega1() - 2.0 * PI * 6.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn wireline_link_carries_dc() {
        let c = preset("wireline-link").unwrap();
        assert!(c.carriers.contains(&0));
        assert_eq!(c.carriers.len(), 7);
        assert_eq!(c.cp, 4);
        assert_eq!(c.adc.unwrap().enob, 6.5);
    }
}
