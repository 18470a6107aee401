//! Comparison learners.
//!
//! All of them reuse [`OnlineLearner`](crate::learner::OnlineLearner) and the
//! reservoir; they differ in which space they learn in, whether they keep
//! updating after the feature change, and whether the manifold term is on.
//!
//! | kind | new-space model | updates | manifold |
//! |------|-----------------|---------|----------|
//! | NOGD | fresh learner on `x2` | labeled rounds | off |
//! | uROGD | old learner on `psi(x2)` | labeled rounds | off |
//! | fROGD | old learner on `psi(x2)` | never | off |
//! | `*_MR` | as above | every round | on |
//! | FESL-Variant | ensemble of the two | labeled rounds | off |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::engine::{run_ensemble, run_single, MethodRun, SeedContext, SingleModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaselineKind {
    Nogd,
    NogdMr,
    Urogd,
    UrogdMr,
    Frogd,
    FrogdMr,
    FeslVariant,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 7] = [
        BaselineKind::Nogd,
        BaselineKind::NogdMr,
        BaselineKind::Urogd,
        BaselineKind::UrogdMr,
        BaselineKind::Frogd,
        BaselineKind::FrogdMr,
        BaselineKind::FeslVariant,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Nogd => "NOGD",
            BaselineKind::NogdMr => "NOGD_MR",
            BaselineKind::Urogd => "uROGD",
            BaselineKind::UrogdMr => "uROGD_MR",
            BaselineKind::Frogd => "fROGD",
            BaselineKind::FrogdMr => "fROGD_MR",
            BaselineKind::FeslVariant => "FESL_Variant",
        }
    }

    pub fn uses_manifold(&self) -> bool {
        matches!(self, BaselineKind::NogdMr | BaselineKind::UrogdMr | BaselineKind::FrogdMr)
    }

    /// Whether the method predicts on data mapped back into the old space.
    pub fn needs_mapping(&self) -> bool {
        !matches!(self, BaselineKind::Nogd | BaselineKind::NogdMr)
    }

    /// The plain counterpart of an MR variant, and vice versa.
    pub fn counterpart(&self) -> BaselineKind {
        match self {
            BaselineKind::Nogd => BaselineKind::NogdMr,
            BaselineKind::NogdMr => BaselineKind::Nogd,
            BaselineKind::Urogd => BaselineKind::UrogdMr,
            BaselineKind::UrogdMr => BaselineKind::Urogd,
            BaselineKind::Frogd => BaselineKind::FrogdMr,
            BaselineKind::FrogdMr => BaselineKind::Frogd,
            BaselineKind::FeslVariant => BaselineKind::FeslVariant,
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['+', '-'], "_");
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name().to_ascii_lowercase() == norm)
            .ok_or_else(|| Error::Config(format!("unknown baseline '{s}'")))
    }
}

/// Runs one baseline over the new-space phase of the context's stream.
pub fn run_baseline(kind: BaselineKind, ctx: &SeedContext<'_>) -> Result<MethodRun> {
    if kind.needs_mapping() && ctx.stream().schedule.overlap < 1 {
        return Err(Error::Config(format!("{kind} needs an overlap period with B >= 1")));
    }
    let mr = kind.uses_manifold();
    match kind {
        BaselineKind::Nogd | BaselineKind::NogdMr => run_single(ctx, SingleModel::Fresh { manifold: mr }),
        BaselineKind::Urogd | BaselineKind::UrogdMr => run_single(ctx, SingleModel::Recovered { manifold: mr, frozen: false }),
        BaselineKind::Frogd | BaselineKind::FrogdMr => run_single(ctx, SingleModel::Recovered { manifold: mr, frozen: true }),
        BaselineKind::FeslVariant => run_ensemble(ctx, false),
    }
}
