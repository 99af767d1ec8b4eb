//! Critical points of the energy: global and half-space minimization, a
//! mountain-pass path method, Morse indices and geometry probes.

mod minimize;
mod morse;
mod mountain_pass;
mod probes;

pub use minimize::{minimize_global, minimize_halfspace};
pub use morse::{morse_index, MorseIndex};
pub use mountain_pass::mountain_pass;
pub use probes::{
    probe_local_linking, probe_mountain_pass_geometry, probe_saddle_geometry, LocalLinkingProbe, LocalLinkingRow,
    MountainPassCertificate, MountainPassProbe, ProbeOptions, SaddleProbe,
};

use crate::functional::IterateRecord;
use crate::mesh::DiscreteFunction;

pub(crate) const MODULE: &str = "critical";

/// Armijo sufficient-decrease constant.
pub const ARMIJO: f64 = 1e-4;
/// Step sizes below this count as a stalled line search.
pub const MIN_STEP: f64 = 1e-16;
const MAX_STEP: f64 = 1e8;
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Finder {
    GlobalMin,
    MinAplus,
    MinAminus,
    MountainPass,
}

impl Finder {
    pub fn name(&self) -> &'static str {
        match self {
            Finder::GlobalMin => "global_min",
            Finder::MinAplus => "min_Aplus",
            Finder::MinAminus => "min_Aminus",
            Finder::MountainPass => "mountain_pass",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Finder::GlobalMin, Finder::MinAplus, Finder::MinAminus, Finder::MountainPass].into_iter().find(|f| f.name() == s)
    }
}

/// `A⁺ = {tφ₁ + w : t ≥ 0}` or `A⁻ = {tφ₁ + w : t ≤ 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfSpaceConstraint {
    Plus,
    Minus,
}

impl HalfSpaceConstraint {
    pub fn sign(&self) -> f64 {
        match self {
            HalfSpaceConstraint::Plus => 1.0,
            HalfSpaceConstraint::Minus => -1.0,
        }
    }

    pub fn is_feasible(&self, t: f64) -> bool {
        t * self.sign() >= 0.0
    }

    pub fn finder(&self) -> Finder {
        match self {
            HalfSpaceConstraint::Plus => Finder::MinAplus,
            HalfSpaceConstraint::Minus => Finder::MinAminus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the Cerami metric falls to this value.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iters: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub u: DiscreteFunction,
    pub j_value: f64,
    pub grad_norm: f64,
    pub cerami_metric: f64,
    pub finder: Finder,
    pub converged: bool,
    pub iterations: usize,
    /// Half-space finders only: the clamp `t = 0` was active at the end.
    pub constraint_active: bool,
    pub morse: Option<MorseIndex>,
    pub iterate_log: Vec<IterateRecord>,
    /// Mountain pass only: `(arc-length parameter, J)` along the final path.
    pub path_profile: Vec<(f64, f64)>,
}
