//! Smoothers for the multigrid cycle.

mod gauss_seidel;
mod hybrid;
mod mass;
pub mod splitting;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gauss_seidel::GaussSeidelSmoother;
pub use hybrid::HybridSmoother;
pub use mass::SubspaceMassSmoother;
pub use splitting::{build_splitting, UnivariateSplitting};

use crate::error::{Error, Result};

/// One smoothing step `u ← u + L⁻¹ (f - A u)` for the operator the smoother
/// was built with. Every smoother here is symmetric, so the same step serves
/// as pre- and post-smoother.
pub trait Smoother: Send + Sync {
    fn smooth(&self, u: &mut [f64], rhs: &[f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmootherKind {
    Gs,
    Mass,
    Hybrid,
}

impl SmootherKind {
    pub const ALL: [SmootherKind; 3] = [SmootherKind::Gs, SmootherKind::Mass, SmootherKind::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gs => "gs",
            Self::Mass => "mass",
            Self::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for SmootherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmootherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown smoother '{s}' (expected gs, mass or hybrid)")))
    }
}

/// How the scaled inverse-inequality parameter `σ` is chosen on a level with
/// mesh size `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaRule {
    /// `paper-2d` in two dimensions and for the hybrid smoother, `paper-3d` otherwise.
    Paper,
    /// `σ⁻¹ = 0.015 h⁴`
    Paper2d,
    /// `σ⁻¹ = 0.020 h⁴`
    Paper3d,
    /// `σ = 144 h⁻⁴`
    Theory,
    /// `σ = c h⁻⁴`
    Scaled(f64),
}

impl SigmaRule {
    pub fn sigma(self, dim: usize, kind: SmootherKind, h: f64) -> f64 {
        let h4 = h.powi(4);
        match self {
            Self::Paper if dim == 2 || kind == SmootherKind::Hybrid => 1.0 / (0.015 * h4),
            Self::Paper => 1.0 / (0.020 * h4),
            Self::Paper2d => 1.0 / (0.015 * h4),
            Self::Paper3d => 1.0 / (0.020 * h4),
            Self::Theory => 144.0 / h4,
            Self::Scaled(c) => c / h4,
        }
    }
}

impl fmt::Display for SigmaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Paper => f.write_str("paper"),
            Self::Paper2d => f.write_str("paper-2d"),
            Self::Paper3d => f.write_str("paper-3d"),
            Self::Theory => f.write_str("theory"),
            Self::Scaled(c) => write!(f, "{c}"),
        }
    }
}

impl FromStr for SigmaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "paper-2d" => Ok(Self::Paper2d),
            "paper-3d" => Ok(Self::Paper3d),
            "theory" => Ok(Self::Theory),
            v => match v.parse::<f64>() {
                Ok(c) if c > 0.0 && c.is_finite() => Ok(Self::Scaled(c)),
                _ => Err(Error::InvalidArgument(format!(
                    "sigma must be paper, paper-2d, paper-3d, theory or a positive number, got '{s}'"
                ))),
            },
        }
    }
}

/// Damping of the mass step inside the hybrid smoother.
pub fn default_tau_mass(dim: usize) -> f64 {
    if dim == 2 {
        0.125
    } else {
        0.09
    }
}
