use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bandwidth and round-trip latency of a simulated link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetProfile {
    pub name: String,
    /// bits per second
    pub bandwidth: f64,
    /// milliseconds
    pub rtt: f64,
}

impl NetProfile {
    pub fn new(name: impl Into<String>, bandwidth: f64, rtt: f64) -> Result<Self> {
        let p = Self { name: name.into(), bandwidth, rtt };
        p.validate()?;
        Ok(p)
    }

    pub fn lan() -> Self {
        Self { name: "lan".into(), bandwidth: 1e9, rtt: 0.2 }
    }

    pub fn wan() -> Self {
        Self { name: "wan".into(), bandwidth: 100e6, rtt: 40.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::Config(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if !(self.rtt.is_finite() && self.rtt >= 0.0) {
            return Err(Error::Config(format!("rtt must be non-negative, got {}", self.rtt)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: NetProfile = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    /// `lan`, `wan`, or a path to a JSON profile.
    pub fn resolve(spec: &str) -> Result<Self> {
        match spec {
            "lan" => Ok(Self::lan()),
            "wan" => Ok(Self::wan()),
            path if path.ends_with(".json") => {
                let text = std::fs::read_to_string(Path::new(path))
                    .map_err(|e| Error::Config(format!("cannot read profile {path}: {e}")))?;
                Self::from_json(&text)
            }
            other => Err(Error::Config(format!("unknown network profile {other:?}"))),
        }
    }

    /// Milliseconds to push `bits` through the link.
    pub fn transfer_ms(&self, bits: u64) -> f64 {
        bits as f64 / self.bandwidth * 1e3
    }
}
