use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::RingConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// client learns which database entries match
    Indices,
    /// client learns whether any entry matches
    Bit,
}

/// Which comparison pipeline runs the basic phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// division gate then FSS dReLU
    Fss,
    /// FSS dReLU on `y - th * z`, skipping the division
    FssDirect,
    /// prefix-adder comparison on `y - th * z`
    Ss,
}

impl Mode {
    pub fn to_u8(self) -> u8 {
        match self {
            Mode::Indices => 0,
            Mode::Bit => 1,
        }
    }

    pub fn from_u8(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Mode::Indices),
            1 => Ok(Mode::Bit),
            _ => Err(Error::DealerFile(format!("mode byte {b}"))),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "indices" => Ok(Mode::Indices),
            "bit" => Ok(Mode::Bit),
            _ => Err(Error::Config(format!("unknown mode {s:?} (indices|bit)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Indices => "indices",
            Mode::Bit => "bit",
        }
    }
}

impl Variant {
    pub fn to_u8(self) -> u8 {
        match self {
            Variant::Fss => 0,
            Variant::FssDirect => 1,
            Variant::Ss => 2,
        }
    }

    pub fn from_u8(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Variant::Fss),
            1 => Ok(Variant::FssDirect),
            2 => Ok(Variant::Ss),
            _ => Err(Error::DealerFile(format!("variant byte {b}"))),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fss" => Ok(Variant::Fss),
            "fss-direct" => Ok(Variant::FssDirect),
            "ss" => Ok(Variant::Ss),
            _ => Err(Error::Config(format!("unknown protocol {s:?} (fss|fss-direct|ss)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fss => "fss",
            Variant::FssDirect => "fss-direct",
            Variant::Ss => "ss",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub threshold: f64,
    pub mode: Mode,
    pub variant: Variant,
    pub ring: RingConfig,
    pub guard_band: f64,
}

impl ProtocolConfig {
    pub fn new(threshold: f64, mode: Mode, variant: Variant, ring: RingConfig) -> Result<Self> {
        let c = Self { threshold, mode, variant, ring, guard_band: default_guard_band(&ring) };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > -1.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} outside (-1, 1)", self.threshold)));
        }
        let ulp = 2f64.powi(-(self.ring.frac() as i32));
        if self.guard_band < 4.0 * ulp {
            return Err(Error::Config(format!("guard band {} below 4 ulp", self.guard_band)));
        }
        self.ring.encode(self.threshold)?;
        // y * 2^f and th * z live at 3f fractional bits in the direct comparison
        if self.variant != Variant::Fss && 3 * self.ring.frac() + 6 > self.ring.ell() - 1 {
            return Err(Error::Config(format!(
                "direct comparison needs ell >= 3 * frac + 7, have ell = {}",
                self.ring.ell()
            )));
        }
        Ok(())
    }

    /// Threshold as used by every pipeline: rounded to `frac` bits.
    pub fn threshold_encoded(&self) -> i64 {
        self.ring.to_signed(self.ring.encode(self.threshold).unwrap().0)
    }
}

/// `2^(2-f) + 2 * 2^(1-f)`: truncation error plus twice the division error.
pub fn default_guard_band(ring: &RingConfig) -> f64 {
    let f = ring.frac() as i32;
    2f64.powi(2 - f) + 2.0 * 2f64.powi(1 - f)
}

/// On-disk session configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub threshold: f64,
    pub mode: Mode,
    #[serde(default = "default_ell")]
    pub ell: u32,
    #[serde(default = "default_frac")]
    pub frac: u32,
    #[serde(default = "default_net")]
    pub net_profile: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_ell() -> u32 {
    64
}

fn default_frac() -> u32 {
    16
}

fn default_net() -> String {
    "lan".into()
}

impl SessionConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn protocol(&self, variant: Variant) -> Result<ProtocolConfig> {
        ProtocolConfig::new(self.threshold, self.mode, variant, RingConfig::new(self.ell, self.frac)?)
    }
}
