use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Generation setting a task belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Text to diagram.
    #[serde(rename = "T2I")]
    T2I,
    /// Text plus reference image to diagram.
    #[serde(rename = "TI2I")]
    TI2I,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::T2I, Mode::TI2I];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::T2I => "T2I",
            Mode::TI2I => "TI2I",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "T2I" => Ok(Mode::T2I),
            "TI2I" | "T+I2I" => Ok(Mode::TI2I),
            other => Err(format!("unknown mode '{other}' (expected T2I or TI2I)")),
        }
    }
}
