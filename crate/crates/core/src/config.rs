//! TOML run configuration.
//!
//! ```toml
//! schema_version = 1
//! seed = 42
//! ensemble_size = 200
//!
//! [grid]
//! n_points = 128
//! x_min = -16.0
//! x_max = 16.0
//!
//! [hamiltonian]
//! kind = "harmonic"
//! omega = 1.0
//!
//! [detector]
//! q = { kind = "gaussian" }
//! p = { kind = "perturbed-gaussian", a = 0.3 }
//!
//! [sse]
//! dt = 1e-3
//! n_steps = 1000
//! ```
//!
//! Exactly one of `[discrete]`, `[sse]` and `[converge]` selects the run
//! mode. Relative file paths are resolved against the directory holding the
//! configuration file. See `docs/config.md` for every key and default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::detector::{DetectorProfile, Normalization, ProfileSpec};
use crate::grid::GridSpec;
use crate::hamiltonian::HamiltonianSpec;
use crate::io::{load_snapshot, read_columns};
use crate::measurement::{AkOptions, CouplingSchedule, DiscreteSimulator, MeasurementModel, ScalingRule};
use crate::sse::{SseConfig, SseScheme};
use crate::stats::{ConvergenceSpec, EnsembleSpec, Simulation};
use crate::wavefunction::WaveFunction;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Trajectory count M for `ensemble` and `converge`.
    #[serde(default = "one")]
    pub ensemble_size: usize,
    /// Checkpoint spacing in steps; the first and last states are always
    /// recorded.
    #[serde(default = "one")]
    pub record_every: usize,
    pub grid: GridSpec,
    #[serde(default)]
    pub hamiltonian: HamiltonianConfig,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sse: Option<SseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeConfig>,
    /// Directory against which relative paths resolve.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianConfig {
    /// `Ĥ = 0`: no kinetic term, no potential.
    #[default]
    Zero,
    Free {
        #[serde(default = "one_f")]
        mass: f64,
    },
    Harmonic {
        #[serde(default = "one_f")]
        mass: f64,
        omega: f64,
    },
    /// `Φ = λq⁴`
    Quartic {
        #[serde(default = "one_f")]
        mass: f64,
        lambda: f64,
    },
    /// Three-column file `(q, Φ, Φ″)`, spline-interpolated onto the grid.
    Table {
        #[serde(default = "one_f")]
        mass: f64,
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    Gaussian {
        #[serde(default)]
        center: f64,
        /// Position standard deviation.
        #[serde(default = "one_f")]
        width: f64,
        #[serde(default)]
        momentum: f64,
    },
    Snapshot { path: PathBuf },
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Gaussian {
            center: 0.0,
            width: 1.0,
            momentum: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    #[serde(default = "one_f")]
    pub sigma: f64,
    #[serde(default)]
    pub normalization: Normalization,
    /// Position-channel profile χ.
    #[serde(default)]
    pub q: ProfileSpec,
    /// Momentum-channel profile Λ.
    #[serde(default)]
    pub p: ProfileSpec,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            sigma: 1.0,
            normalization: Normalization::Probabilistic,
            q: ProfileSpec::Gaussian,
            p: ProfileSpec::Gaussian,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteConfig {
    #[serde(default)]
    pub model: MeasurementModel,
    pub tau: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub scaling: ScalingRule,
    /// Couplings for `scaling = "fixed"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default)]
    pub ak: AkOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SseSection {
    /// Defaults to κ of the configured position-channel profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_q: Option<f64>,
    /// Defaults to κ of the configured momentum-channel profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_p: Option<f64>,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default = "yes")]
    pub renormalize: bool,
    #[serde(default)]
    pub scheme: SseScheme,
}

fn default_taus() -> Vec<f64> {
    vec![4e-3, 1e-3, 2.5e-4]
}

fn default_dt_sse() -> f64 {
    1.25e-4
}

fn default_bootstrap() -> usize {
    200
}

fn exponential() -> SseScheme {
    SseScheme::Exponential
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    #[serde(default = "one_f")]
    pub t: f64,
    #[serde(default = "default_dt_sse")]
    pub dt_sse: f64,
    #[serde(default = "exponential")]
    pub sse_scheme: SseScheme,
    #[serde(default = "default_bootstrap")]
    pub n_bootstrap: usize,
    #[serde(default)]
    pub ak: AkOptions,
}

/// Which simulation a configuration describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Discrete,
    Sse,
    Converge,
}

/// Keys accepted in each table, by dotted path.
fn known_keys(path: &str) -> Option<&'static [&'static str]> {
    Some(match path {
        "" => &[
            "schema_version",
            "seed",
            "output_dir",
            "ensemble_size",
            "record_every",
            "grid",
            "hamiltonian",
            "initial_state",
            "detector",
            "discrete",
            "sse",
            "converge",
        ],
        "grid" => &["n_points", "x_min", "x_max", "hbar"],
        "hamiltonian" => &["kind", "mass", "omega", "lambda", "path"],
        "initial_state" => &["kind", "center", "width", "momentum", "path"],
        "detector" => &["sigma", "normalization", "q", "p"],
        "detector.q" | "detector.p" => &["kind", "a", "path"],
        "discrete" => &["model", "tau", "n_steps", "scaling", "mu", "nu", "ak"],
        "discrete.ak" | "converge.ak" => &["n_qpp", "qpp_half_width"],
        "sse" => &["kappa_q", "kappa_p", "dt", "n_steps", "renormalize", "scheme"],
        "converge" => &["taus", "t", "dt_sse", "sse_scheme", "n_bootstrap", "ak"],
        _ => return None,
    })
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn suggest(key: &str, candidates: &[&str]) -> Option<String> {
    candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(key, c), *c))
        .filter(|(s, _)| *s >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string())
}

fn check_keys(table: &Table, prefix: &str, problems: &mut Vec<String>) {
    let Some(known) = known_keys(prefix) else {
        return;
    };
    for (k, v) in table {
        let path = join(prefix, k);
        if !known.contains(&k.as_str()) {
            let hint = suggest(k, known)
                .map(|s| format!(" (did you mean `{}`?)", join(prefix, &s)))
                .unwrap_or_default();
            problems.push(format!("unknown key `{path}`{hint}"));
        } else if let Value::Table(t) = v {
            check_keys(t, &path, problems);
        }
    }
}

/// Dotted leaf paths of `table` with their values.
fn leaves(table: &Table, prefix: &str, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let path = join(prefix, k);
        match v {
            Value::Table(t) => leaves(t, &path, out),
            other => out.push((path, other.clone())),
        }
    }
}

fn lookup<'a>(table: &'a Table, path: &str) -> Option<&'a Value> {
    let mut parts = path.split('.');
    let mut cur = table.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

/// Apply one `key.path=value` override. The value is read as a TOML value
/// and falls back to a plain string.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override {assignment:?} is not of the form key=value")))?;
    let (key, raw) = (key.trim(), raw.trim());
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::config(format!("override key {key:?} is malformed")));
    }
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override {key:?}: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parse and validate `text`. Returns the configuration and the dotted
    /// paths of every field filled in by a default, with its value.
    pub fn from_toml_str(text: &str, base_dir: &Path, overrides: &[String]) -> Result<(Self, Vec<String>)> {
        let mut raw: Table = toml::from_str(text).map_err(|e| Error::config(format!("invalid TOML: {e}")))?;
        for o in overrides {
            apply_override(&mut raw, o)?;
        }
        let mut problems = Vec::new();
        check_keys(&raw, "", &mut problems);
        match raw.get("schema_version") {
            None => problems.push(format!("missing `schema_version` (current version is {SCHEMA_VERSION})")),
            Some(Value::Integer(v)) if *v == SCHEMA_VERSION as i64 => {}
            Some(v) => problems.push(format!("unsupported schema_version {v}; expected {SCHEMA_VERSION}")),
        }
        if !raw.contains_key("seed") {
            problems.push("missing `seed`: runs need an explicit master seed".into());
        }
        if !problems.is_empty() {
            return Err(itemized(problems));
        }
        let mut cfg: RunConfig = raw
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;

        let full = Table::try_from(&cfg).map_err(|e| Error::config(e.to_string()))?;
        let mut all = Vec::new();
        leaves(&full, "", &mut all);
        let defaulted = all
            .into_iter()
            .filter(|(p, _)| lookup(&raw, p).is_none())
            .map(|(p, v)| format!("{p} = {v}"))
            .collect();
        Ok((cfg, defaulted))
    }

    /// Read, parse and validate `path`, logging every defaulted field.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let (cfg, defaulted) = Self::from_toml_str(&text, base, overrides)?;
        for d in &defaulted {
            log::info!("default: {d}");
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.resolve(&self.output_dir).join(name)
    }

    fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if let Err(e) = self.grid.validate() {
            p.push(e.to_string());
        }
        if self.ensemble_size == 0 {
            p.push("ensemble_size must be >= 1".into());
        }
        if self.record_every == 0 {
            p.push("record_every must be >= 1".into());
        }
        let modes = [self.discrete.is_some(), self.sse.is_some(), self.converge.is_some()];
        match modes.iter().filter(|m| **m).count() {
            1 => {}
            0 => p.push("one of [discrete], [sse] or [converge] is required".into()),
            _ => p.push("only one of [discrete], [sse] and [converge] may be given".into()),
        }
        let mut need = |what: &str, path: &Path| {
            let r = self.resolve(path);
            if !r.is_file() {
                p.push(format!("{what} file {} does not exist", r.display()));
            }
        };
        if let HamiltonianConfig::Table { path, .. } = &self.hamiltonian {
            need("hamiltonian table", path);
        }
        if let InitialState::Snapshot { path } = &self.initial_state {
            need("snapshot", path);
        }
        for spec in [&self.detector.q, &self.detector.p] {
            if let ProfileSpec::Table { path } = spec {
                need("detector table", Path::new(path));
            }
        }
        if !(self.detector.sigma > 0.0) {
            p.push("detector.sigma must be positive".into());
        }
        if let Some(d) = &self.discrete {
            if !(d.tau > 0.0) {
                p.push("discrete.tau must be positive".into());
            }
            let joint = d.model == MeasurementModel::Joint;
            match d.scaling {
                ScalingRule::Fixed if d.mu.is_none() || (joint && d.nu.is_none()) => {
                    p.push("discrete.scaling = \"fixed\" needs discrete.mu (and discrete.nu for the joint model)".into())
                }
                ScalingRule::SqrtTau if d.mu.is_some() || d.nu.is_some() => {
                    p.push("discrete.mu/nu are only used with scaling = \"fixed\"".into())
                }
                _ => {}
            }
        }
        if let Some(s) = &self.sse {
            if !(s.dt > 0.0) {
                p.push("sse.dt must be positive".into());
            }
            if s.kappa_q.is_some_and(|k| k < 0.0) || s.kappa_p.is_some_and(|k| k < 0.0) {
                p.push("sse.kappa_q and sse.kappa_p must be >= 0".into());
            }
        }
        if let Some(c) = &self.converge {
            if c.taus.is_empty() || c.taus.windows(2).any(|w| w[1] >= w[0]) || c.taus[c.taus.len() - 1] <= 0.0 {
                p.push("converge.taus must be positive and strictly decreasing".into());
            }
            if !(c.dt_sse > 0.0) || !(c.t > 0.0) {
                p.push("converge.dt_sse and converge.t must be positive".into());
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(itemized(p))
        }
    }

    pub fn mode(&self) -> RunMode {
        if self.discrete.is_some() {
            RunMode::Discrete
        } else if self.sse.is_some() {
            RunMode::Sse
        } else {
            RunMode::Converge
        }
    }

    pub fn hamiltonian(&self) -> Result<HamiltonianSpec> {
        let g = &self.grid;
        match &self.hamiltonian {
            HamiltonianConfig::Zero => Ok(HamiltonianSpec::zero(g)),
            HamiltonianConfig::Free { mass } => HamiltonianSpec::free(g, *mass),
            HamiltonianConfig::Harmonic { mass, omega } => HamiltonianSpec::harmonic(g, *mass, *omega),
            HamiltonianConfig::Quartic { mass, lambda } => HamiltonianSpec::quartic(g, *mass, *lambda),
            HamiltonianConfig::Table { mass, path } => {
                let c = read_columns(&self.resolve(path), 3)?;
                HamiltonianSpec::from_table(g, *mass, &c[0], &c[1], &c[2])
            }
        }
    }

    pub fn initial_state(&self) -> Result<WaveFunction> {
        let psi = match &self.initial_state {
            InitialState::Gaussian {
                center,
                width,
                momentum,
            } => {
                if !(*width > 0.0) {
                    return Err(Error::config("initial_state.width must be positive"));
                }
                WaveFunction::gaussian(&self.grid, *center, *width, *momentum)
            }
            InitialState::Snapshot { path } => {
                let psi = load_snapshot(&self.resolve(path))?;
                if psi.grid() != &self.grid {
                    return Err(Error::config("snapshot grid differs from the configured grid"));
                }
                psi
            }
        };
        psi.check_normalized()?;
        psi.check_boundary()?;
        Ok(psi)
    }

    fn profile(&self, spec: &ProfileSpec) -> Result<DetectorProfile> {
        let spec = match spec {
            ProfileSpec::Table { path } => ProfileSpec::Table {
                path: self.resolve(Path::new(path)).to_string_lossy().into_owned(),
            },
            other => other.clone(),
        };
        DetectorProfile::from_spec(&spec, self.detector.sigma, self.detector.normalization)
    }

    /// Position- and momentum-channel profiles.
    pub fn profiles(&self) -> Result<(DetectorProfile, DetectorProfile)> {
        Ok((self.profile(&self.detector.q)?, self.profile(&self.detector.p)?))
    }

    pub fn sse_config(&self) -> Result<SseConfig> {
        let s = self.sse.as_ref().ok_or_else(|| Error::config("this command needs an [sse] section"))?;
        let (chi, lambda) = self.profiles()?;
        let kq = match s.kappa_q {
            Some(k) => k,
            None => chi.kappa()?,
        };
        let kp = match s.kappa_p {
            Some(k) => k,
            None => lambda.kappa()?,
        };
        let mut cfg = SseConfig::new(kq, kp, s.dt, self.hamiltonian()?, s.n_steps, self.seed);
        cfg.renormalize = s.renormalize;
        cfg.record_every = self.record_every;
        cfg.scheme = s.scheme;
        cfg.validate(&self.grid)?;
        Ok(cfg)
    }

    /// The discrete simulator and its step count.
    pub fn discrete_simulator(&self) -> Result<(DiscreteSimulator, usize)> {
        let d = self
            .discrete
            .as_ref()
            .ok_or_else(|| Error::config("this command needs a [discrete] section"))?;
        let sigma = self.detector.sigma;
        let schedule = match d.scaling {
            ScalingRule::SqrtTau => CouplingSchedule::sqrt_tau(d.tau, sigma)?,
            ScalingRule::Fixed => {
                let mu = d.mu.unwrap_or(0.0);
                CouplingSchedule::fixed(mu, d.nu.unwrap_or(0.0), d.tau, sigma)?
            }
        };
        let (chi, lambda) = self.profiles()?;
        let h = self.hamiltonian()?;
        let sim = match d.model {
            MeasurementModel::Position => DiscreteSimulator::position(&self.grid, &h, &chi, schedule)?,
            MeasurementModel::Joint => DiscreteSimulator::joint(&self.grid, &h, &chi, &lambda, schedule, d.ak)?,
        };
        Ok((sim.with_record_every(self.record_every)?, d.n_steps))
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let psi0 = self.initial_state()?;
        let sim = match self.mode() {
            RunMode::Discrete => {
                let (sim, n_steps) = self.discrete_simulator()?;
                Simulation::Discrete { sim, n_steps }
            }
            RunMode::Sse => Simulation::Sse {
                grid: self.grid.clone(),
                cfg: self.sse_config()?,
            },
            RunMode::Converge => return Err(Error::config("ensembles need a [discrete] or [sse] section")),
        };
        Ok(EnsembleSpec { psi0, sim })
    }

    pub fn convergence_spec(&self) -> Result<ConvergenceSpec> {
        let c = self
            .converge
            .as_ref()
            .ok_or_else(|| Error::config("this command needs a [converge] section"))?;
        let (chi, lambda) = self.profiles()?;
        Ok(ConvergenceSpec {
            psi0: self.initial_state()?,
            hamiltonian: self.hamiltonian()?,
            chi,
            lambda,
            sigma: self.detector.sigma,
            taus: c.taus.clone(),
            t: c.t,
            m: self.ensemble_size,
            dt_sse: c.dt_sse,
            sse_scheme: c.sse_scheme,
            ak: c.ak,
            n_bootstrap: c.n_bootstrap,
            seed: self.seed,
        })
    }
}

fn itemized(problems: Vec<String>) -> Error {
    if problems.len() == 1 {
        return Error::Config(problems.into_iter().next().unwrap());
    }
    let mut s = format!("{} problems:", problems.len());
    for p in problems {
        s.push_str("\n  - ");
        s.push_str(&p);
    }
    Error::Config(s)
}
