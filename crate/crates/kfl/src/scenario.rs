//! Scenario files: flat `key = value` lines, `#` starts a comment.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `name` | run label, also the stem of the output files | file stem |
//! | `fixture` | named initial profile (see [`crate::fixtures`]) | |
//! | `profile` | profile file, relative to the scenario file | |
//! | `n` | expected complex dimension, checked against the profile | |
//! | `grid` | grid size; a different size resamples the profile smoothly | profile size |
//! | `dt` | time step, or `auto` for 0.9 of the CFL limit | `auto` |
//! | `cfl_safety` | fraction of `h²/max(θ/A)` allowed for dt | 0.5 |
//! | `t_max` | final time | 1 |
//! | `sample_every` | monitor cadence in steps | |
//! | `sample_dt` | monitor cadence in time units (then rounded to steps) | `t_max/200` |
//! | `expensive_every` | λ and Chen margin every this many samples | 1 |
//! | `scheme` | `rk4` or `imex` | `rk4` |
//! | `sectors` | angular sector cutoff K | 8 |
//! | `seed` | optimizer seed | 0 |
//! | `restarts` | optimizer restarts | 32 |
//! | `bounds` | `C_u,C_grad,C_R` Perelman constants | fixture constants |
//! | `csv`, `manifest` | output file names inside the output directory | `<name>.csv`, `<name>.json` |
//!
//! Exactly one of `fixture` and `profile` is required.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use kfl_core::flow::{run_flow, FlowConfig, FlowRun, Scheme};
use kfl_core::geometry::{MomentumProfile, SmoothProfile};
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::fixtures::{self, FixtureSource, Loaded, PerelmanBounds};
use crate::formats::{git_blob_hash, series_csv, write_profile};

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    Fixture(String),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dt {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cadence {
    Steps(usize),
    Time(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub n: Option<usize>,
    pub grid: Option<usize>,
    pub source: ProfileSource,
    pub dt: Dt,
    pub cfl_safety: f64,
    pub t_max: f64,
    pub cadence: Option<Cadence>,
    pub expensive_every: usize,
    pub scheme: Scheme,
    pub sectors: usize,
    pub seed: u64,
    pub restarts: usize,
    pub bounds: Option<PerelmanBounds>,
    pub csv: String,
    pub manifest: String,
}

const KEYS: [&str; 18] = [
    "name",
    "n",
    "grid",
    "fixture",
    "profile",
    "dt",
    "cfl_safety",
    "t_max",
    "sample_every",
    "sample_dt",
    "expensive_every",
    "scheme",
    "sectors",
    "seed",
    "restarts",
    "bounds",
    "csv",
    "manifest",
];

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(HarnessError::Config(format!("line {}: unknown key `{k}`", i + 1)));
        }
        if map.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(HarnessError::Config(format!("line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(map)
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|_| HarnessError::Config(format!("`{key}`: cannot parse `{v}`"))))
        .transpose()
}

impl Scenario {
    /// Parses scenario text; relative profile paths resolve against `base`.
    pub fn parse(text: &str, default_name: &str, base: &Path) -> Result<Self> {
        let map = parse_kv(text)?;
        let name = map.get("name").cloned().unwrap_or_else(|| default_name.to_string());
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(HarnessError::Config(format!("invalid scenario name `{name}`")));
        }
        let source = match (map.get("fixture"), map.get("profile")) {
            (Some(f), None) => {
                fixtures::lookup(f)?;
                ProfileSource::Fixture(f.clone())
            }
            (None, Some(p)) => ProfileSource::File(base.join(p)),
            _ => return Err(HarnessError::Config("exactly one of `fixture` and `profile` is required".into())),
        };
        let dt = match map.get("dt").map(String::as_str) {
            None | Some("auto") => Dt::Auto,
            Some(v) => Dt::Fixed(v.parse().map_err(|_| HarnessError::Config(format!("`dt`: cannot parse `{v}`")))?),
        };
        let cadence = match (num::<usize>(&map, "sample_every")?, num::<f64>(&map, "sample_dt")?) {
            (Some(_), Some(_)) => return Err(HarnessError::Config("give `sample_every` or `sample_dt`, not both".into())),
            (Some(k), None) => Some(Cadence::Steps(k)),
            (None, Some(t)) => Some(Cadence::Time(t)),
            (None, None) => None,
        };
        let scheme = match map.get("scheme").map(String::as_str) {
            None | Some("rk4") => Scheme::Rk4,
            Some("imex") => Scheme::Imex,
            Some(v) => return Err(HarnessError::Config(format!("unknown scheme `{v}`"))),
        };
        let bounds = match map.get("bounds") {
            None => None,
            Some(v) => {
                let c: Vec<f64> = v
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| HarnessError::Config(format!("`bounds`: cannot parse `{v}`")))?;
                if c.len() != 3 {
                    return Err(HarnessError::Config("`bounds` needs C_u,C_grad,C_R".into()));
                }
                Some(PerelmanBounds { sup_u: c[0], sup_grad_u: c[1], sup_r: c[2] })
            }
        };
        let defaults = FlowConfig::default();
        let s = Self {
            csv: map.get("csv").cloned().unwrap_or_else(|| format!("{name}.csv")),
            manifest: map.get("manifest").cloned().unwrap_or_else(|| format!("{name}.json")),
            name,
            n: num(&map, "n")?,
            grid: num(&map, "grid")?,
            source,
            dt,
            cfl_safety: num(&map, "cfl_safety")?.unwrap_or(defaults.cfl_safety),
            t_max: num(&map, "t_max")?.unwrap_or(1.0),
            cadence,
            expensive_every: num(&map, "expensive_every")?.unwrap_or(1),
            scheme,
            sectors: num(&map, "sectors")?.unwrap_or(defaults.sectors),
            seed: num(&map, "seed")?.unwrap_or(0),
            restarts: num(&map, "restarts")?.unwrap_or(defaults.restarts),
            bounds,
        };
        for f in [&s.csv, &s.manifest] {
            if f.is_empty() || f.contains(['/', '\\']) {
                return Err(HarnessError::Config(format!("output name `{f}` must be a plain file name")));
            }
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Self::parse(&text, stem, path.parent().unwrap_or(Path::new(".")))
    }

    /// A scenario on a named fixture with default settings.
    pub fn for_fixture(fixture: &str, t_max: f64) -> Result<Self> {
        Self::parse(&format!("fixture = {fixture}\nt_max = {t_max}\n"), fixture, Path::new("."))
    }

    /// Initial profile with the bytes it was read from (for the content hash).
    pub fn load_profile(&self, fixtures: &FixtureSource) -> Result<Loaded> {
        let mut loaded = match &self.source {
            ProfileSource::Fixture(f) => fixtures.load(f)?,
            ProfileSource::File(p) => fixtures::load_profile_file(p)?,
        };
        if let Some(n) = self.n {
            if n != loaded.profile.n() {
                return Err(HarnessError::Config(format!("scenario says n={n}, profile has n={}", loaded.profile.n())));
            }
        }
        if let Some(m) = self.grid {
            if m != loaded.profile.len() {
                loaded.profile = SmoothProfile::fit(&loaded.profile)?.resample(m)?;
            }
        }
        Ok(loaded)
    }

    /// Flow configuration; every guard is checked, so an error here means
    /// nothing was stepped.
    pub fn flow_config(&self, p: &MomentumProfile) -> Result<FlowConfig> {
        let mut cfg = FlowConfig {
            t_max: self.t_max,
            expensive_every: self.expensive_every,
            scheme: self.scheme,
            cfl_safety: self.cfl_safety,
            sectors: self.sectors,
            seed: self.seed,
            restarts: self.restarts,
            ..FlowConfig::default()
        };
        cfg.dt = match self.dt {
            Dt::Auto => 0.9 * cfg.dt_limit(p),
            Dt::Fixed(dt) => dt,
        };
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(HarnessError::Config("dt must be positive".into()));
        }
        cfg.sample_every = match self.cadence {
            Some(Cadence::Steps(k)) => k,
            Some(Cadence::Time(t)) => {
                if !(t > 0.0) {
                    return Err(HarnessError::Config("sample_dt must be positive".into()));
                }
                ((t / cfg.dt).round() as usize).max(1)
            }
            None => ((self.t_max / 200.0 / cfg.dt).round() as usize).max(1),
        };
        cfg.validate(p).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileRecord {
    pub origin: String,
    /// Git blob hash of the profile file bytes.
    pub hash: String,
    /// Hash of the profile actually integrated (differs after resampling).
    pub grid_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsRecord {
    pub bounds: PerelmanBounds,
    pub violations: usize,
}

/// Run manifest. The timestamp lives only here, never in the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub name: String,
    pub status: String,
    pub error: Option<String>,
    pub config: Option<FlowConfig>,
    pub seed: u64,
    pub grid: Grid,
    pub initial_profile: Option<ProfileRecord>,
    pub samples: usize,
    pub perelman: Option<BoundsRecord>,
    pub csv: Option<String>,
    pub timestamp_unix: u64,
    pub version: &'static str,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Grid {
    pub n: Option<usize>,
    pub points: Option<usize>,
}

#[derive(Debug)]
pub struct Outcome {
    pub run: FlowRun,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub bounds_ok: Option<bool>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Loads, validates, integrates and writes `<out>/<csv>` and `<out>/<manifest>`.
/// A failed scenario writes only its manifest, so outputs of other scenarios
/// are never touched.
pub fn run_scenario(s: &Scenario, fixtures: &FixtureSource, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let manifest_path = out.join(&s.manifest);
    let mut manifest = Manifest {
        name: s.name.clone(),
        status: "config-error".into(),
        error: None,
        config: None,
        seed: s.seed,
        grid: Grid { n: s.n, points: s.grid },
        initial_profile: None,
        samples: 0,
        perelman: None,
        csv: None,
        timestamp_unix: timestamp(),
        version: env!("CARGO_PKG_VERSION"),
    };
    let result = execute(s, fixtures, out, &mut manifest);
    if let Err(e) = &result {
        manifest.status = if e.exit_code() == crate::error::EXIT_HALT { "halted" } else { "config-error" }.into();
        manifest.error = Some(e.to_string());
    }
    write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    let (run, csv_path, bounds_ok) = result?;
    Ok(Outcome { run, csv_path, manifest_path, bounds_ok })
}

fn execute(s: &Scenario, fixtures: &FixtureSource, out: &Path, manifest: &mut Manifest) -> Result<(FlowRun, PathBuf, Option<bool>)> {
    let loaded = s.load_profile(fixtures)?;
    let p = &loaded.profile;
    manifest.grid = Grid { n: Some(p.n()), points: Some(p.len()) };
    manifest.initial_profile = Some(ProfileRecord {
        origin: loaded.origin.clone(),
        hash: git_blob_hash(loaded.text.as_bytes()),
        grid_hash: git_blob_hash(write_profile(p).as_bytes()),
    });
    let cfg = s.flow_config(p)?;
    manifest.config = Some(cfg.clone());
    let run = run_flow(&cfg, p).map_err(HarnessError::Halt)?;
    let bounds = s.bounds.or_else(|| match &s.source {
        ProfileSource::Fixture(f) => fixtures::lookup(f).ok().and_then(|f| f.bounds),
        ProfileSource::File(_) => None,
    });
    let bounds_ok = bounds.map(|b| {
        let v = b.violations(&run.series.samples).len();
        manifest.perelman = Some(BoundsRecord { bounds: b, violations: v });
        v == 0
    });
    let csv_path = out.join(&s.csv);
    write_atomic(&csv_path, series_csv(&run.series).as_bytes())?;
    manifest.status = "ok".into();
    manifest.samples = run.series.samples.len();
    manifest.csv = Some(s.csv.clone());
    Ok((run, csv_path, bounds_ok))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario> {
        Scenario::parse(text, "t", Path::new("/base"))
    }

    #[test]
    fn parses_documented_keys() {
        let s = parse(
            "name = demo  # trailing comment\nfixture = perturbed-p1\ndt = 1e-6\nt_max = 2\nsample_dt = 0.1\n\
             scheme = imex\nsectors = 4\nseed = 9\nrestarts = 8\nbounds = 1, 2, 3\nexpensive_every = 5\n",
        )
        .unwrap();
        assert_eq!(s.name, "demo");
        assert_eq!(s.source, ProfileSource::Fixture("perturbed-p1".into()));
        assert_eq!(s.dt, Dt::Fixed(1e-6));
        assert_eq!(s.cadence, Some(Cadence::Time(0.1)));
        assert_eq!(s.scheme, Scheme::Imex);
        assert_eq!(s.bounds, Some(PerelmanBounds { sup_u: 1.0, sup_grad_u: 2.0, sup_r: 3.0 }));
        assert_eq!(s.csv, "demo.csv");
        let f = parse("profile = p.txt\n").unwrap();
        assert_eq!(f.source, ProfileSource::File(PathBuf::from("/base/p.txt")));
        assert_eq!(f.name, "t");
    }

    #[test]
    fn rejects_bad_scenarios() {
        for bad in [
            "",
            "fixture = fs-p1\nprofile = x\n",
            "fixture = nope\n",
            "fixture = fs-p1\nbogus = 1\n",
            "fixture = fs-p1\nt_max = 1\nt_max = 2\n",
            "fixture = fs-p1\nscheme = euler\n",
            "fixture = fs-p1\nsample_every = 3\nsample_dt = 0.1\n",
            "fixture = fs-p1\nbounds = 1,2\n",
            "fixture = fs-p1\ncsv = ../x.csv\n",
            "fixture fs-p1\n",
        ] {
            assert!(matches!(parse(bad), Err(HarnessError::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn cfl_violation_is_caught_before_stepping() {
        let s = parse("fixture = fs-p1\ndt = 0.1\n").unwrap();
        let p = s.load_profile(&FixtureSource::Embedded).unwrap().profile;
        let e = s.flow_config(&p).unwrap_err();
        assert_eq!(e.exit_code(), crate::error::EXIT_CONFIG);
    }

    #[test]
    fn grid_key_resamples() {
        let s = parse("fixture = perturbed-p1\ngrid = 65\n").unwrap();
        let p = s.load_profile(&FixtureSource::Embedded).unwrap().profile;
        assert_eq!(p.len(), 65);
    }
}
