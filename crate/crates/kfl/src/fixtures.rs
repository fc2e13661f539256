//! Named initial profiles. Each is shipped as a profile file under
//! `crates/kfl/fixtures/` and embedded in the binary; a fixture directory can
//! override the embedded copies.

use std::path::{Path, PathBuf};

use kfl_core::flow::Sample;
use kfl_core::geometry::{perturbed_profile, MomentumProfile};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::formats::parse_profile;

/// Uniform bounds on `sup|u|`, `sup|∇u|` and `sup|R|` along a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerelmanBounds {
    pub sup_u: f64,
    pub sup_grad_u: f64,
    pub sup_r: f64,
}

impl PerelmanBounds {
    /// Samples that break a bound, with the offending monitor.
    pub fn violations(&self, samples: &[Sample]) -> Vec<(f64, &'static str, f64)> {
        let mut out = Vec::new();
        for s in samples {
            for (key, v, c) in
                [("sup_u", s.sup_u, self.sup_u), ("sup_grad_u", s.sup_grad_u, self.sup_grad_u), ("sup_R", s.sup_r, self.sup_r)]
            {
                if !(v <= c) {
                    out.push((s.t, key, v));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    pub n: usize,
    pub text: &'static str,
    pub bounds: Option<PerelmanBounds>,
}

pub const FIXTURES: [Fixture; 4] = [
    Fixture {
        name: "fs-p1",
        n: 1,
        text: include_str!("../fixtures/fs-p1.profile"),
        bounds: Some(PerelmanBounds { sup_u: 1e-9, sup_grad_u: 1e-9, sup_r: 1.0 + 1e-9 }),
    },
    Fixture { name: "fs-p2", n: 2, text: include_str!("../fixtures/fs-p2.profile"), bounds: None },
    // Largest observed values along the t ≤ 20 run are 0.253, 0.285 and 1.403.
    Fixture {
        name: "perturbed-p1",
        n: 1,
        text: include_str!("../fixtures/perturbed-p1.profile"),
        bounds: Some(PerelmanBounds { sup_u: 0.5, sup_grad_u: 0.5, sup_r: 2.0 }),
    },
    Fixture { name: "perturbed-p2", n: 2, text: include_str!("../fixtures/perturbed-p2.profile"), bounds: None },
];

/// Perturbation parameters `(ε, κ)` of `perturbed-p1`: θ = w + εw²(1 + κ(2τ − 1)).
pub const PERTURBED_P1: (f64, f64) = (0.8, 0.1);

pub fn lookup(name: &str) -> Result<&'static Fixture> {
    FIXTURES
        .iter()
        .find(|f| f.name == name)
        .ok_or_else(|| HarnessError::Config(format!("unknown fixture `{name}`")))
}

/// Where named fixtures are read from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum FixtureSource {
    #[default]
    Embedded,
    Dir(PathBuf),
}

/// A loaded profile together with the exact bytes it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub profile: MomentumProfile,
    pub text: String,
    pub origin: String,
}

impl FixtureSource {
    pub fn from_env() -> Self {
        match std::env::var_os("KFL_FIXTURES") {
            Some(d) if !d.is_empty() => Self::Dir(d.into()),
            _ => Self::Embedded,
        }
    }

    pub fn text(&self, name: &str) -> Result<(String, String)> {
        let f = lookup(name)?;
        match self {
            Self::Embedded => Ok((f.text.to_string(), format!("fixture:{name}"))),
            Self::Dir(d) => {
                let path = d.join(format!("{name}.profile"));
                let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
                Ok((text, path.display().to_string()))
            }
        }
    }

    pub fn load(&self, name: &str) -> Result<Loaded> {
        let (text, origin) = self.text(name)?;
        let profile = parse_profile(&text)?;
        let f = lookup(name)?;
        if profile.n() != f.n {
            return Err(HarnessError::Format(format!("fixture `{name}` must have n={}", f.n)));
        }
        Ok(Loaded { profile, text, origin })
    }
}

/// Reads a profile file from disk.
pub fn load_profile_file(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let profile = parse_profile(&text)?;
    Ok(Loaded { profile, text, origin: path.display().to_string() })
}

/// Five distinct U(1)-invariant metrics on P¹ in the anticanonical class.
pub fn futaki_family(m: usize) -> Result<Vec<(String, MomentumProfile)>> {
    [(0.0, 0.0), (0.4, 0.0), (0.8, 0.1), (0.6, -0.3), (0.3, 0.5)]
        .iter()
        .map(|&(eps, kappa)| Ok((format!("p1-eps{eps}-kappa{kappa}"), perturbed_profile(1, m, eps, kappa)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use kfl_core::geometry::fubini_study_profile_on;

    #[test]
    fn shipped_files_match_generators() {
        let e = FixtureSource::Embedded;
        assert_eq!(e.load("fs-p1").unwrap().profile, fubini_study_profile_on(1, 257).unwrap());
        assert_eq!(e.load("fs-p2").unwrap().profile, fubini_study_profile_on(2, 129).unwrap());
        let (eps, kappa) = PERTURBED_P1;
        assert_eq!(e.load("perturbed-p1").unwrap().profile, perturbed_profile(1, 257, eps, kappa).unwrap());
        assert_eq!(e.load("perturbed-p2").unwrap().profile, perturbed_profile(2, 129, eps, kappa).unwrap());
    }

    #[test]
    fn perturbed_p1_is_a_twenty_percent_perturbation() {
        let p = FixtureSource::Embedded.load("perturbed-p1").unwrap().profile;
        let rel = (0..p.len())
            .map(|i| (p.theta()[i] - p.tau(i) * (1.0 - p.tau(i))).abs())
            .fold(0.0_f64, f64::max)
            / 0.25;
        assert!((rel - 0.2).abs() < 1e-3, "{rel}");
    }

    #[test]
    fn unknown_fixture_is_a_config_error() {
        assert!(matches!(lookup("nope"), Err(HarnessError::Config(_))));
    }
}
