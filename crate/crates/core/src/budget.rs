//! Compute budgets shared by the CLI and the gallery runner.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Quick,
    #[default]
    Standard,
    Deep,
}

impl Budget {
    /// Largest truncation window handed to graph-based diagnostics.
    pub fn max_window(self) -> usize {
        match self {
            Budget::Quick => 64,
            Budget::Standard => 1024,
            Budget::Deep => 65536,
        }
    }

    /// Largest tail start in capacity ladders.
    pub fn max_tail(self) -> usize {
        match self {
            Budget::Quick => 1 << 12,
            Budget::Standard => 1 << 22,
            Budget::Deep => 1 << 24,
        }
    }

    /// Doubling window sequence `16, 32, ...` up to [`Budget::max_window`].
    pub fn windows(self) -> Vec<usize> {
        std::iter::successors(Some(16usize), |n| Some(n * 2))
            .take_while(|&n| n <= self.max_window())
            .collect()
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Budget::Quick => "quick",
            Budget::Standard => "standard",
            Budget::Deep => "deep",
        })
    }
}

impl FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Budget::Quick),
            "standard" => Ok(Budget::Standard),
            "deep" => Ok(Budget::Deep),
            _ => Err(Error::Input(format!(
                "unknown budget `{s}` (expected quick, standard or deep)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_windows() {
        for b in [Budget::Quick, Budget::Standard, Budget::Deep] {
            assert_eq!(b.to_string().parse::<Budget>().unwrap(), b);
        }
        assert_eq!(Budget::Quick.windows(), vec![16, 32, 64]);
        assert!("huge".parse::<Budget>().is_err());
    }
}
