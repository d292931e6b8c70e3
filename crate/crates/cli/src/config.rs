//! Flat `key = value` run configuration.
//!
//! Grammar: `[section]` headers, `key = value` lines, `#` starts a comment,
//! vectors are comma separated decimals. Every problem found is reported, not
//! just the first.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use polykin::chu::Boundary;
use polykin::closure::{MixtureCoupling, SpeciesParams};
use polykin::dynamics::{GridSpec, InitialSpecies, Model, TensorCrossTerm};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: duplicate key `{key}` in [{section}]")]
    Duplicate { line: usize, section: String, key: String },
    #[error("missing required key `{key}` in [{section}]")]
    Missing { section: String, key: String },
    #[error("[{section}] {key} = {value}: {reason}")]
    Invalid {
        section: String,
        key: String,
        value: String,
        reason: String,
    },
    #[error("closure inadmissible: {0}")]
    Closure(String),
}

/// All problems found while reading a configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSetting {
    /// Resolved to the positivity bound.
    Max,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesBlock {
    pub mass: f64,
    pub l: usize,
    pub nu_self: f64,
    pub nu_cross: f64,
    pub mu: f64,
    pub z_rot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBlock {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub gamma: GammaSetting,
    pub tensor_cross: TensorCrossTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBlock {
    pub d: usize,
    pub n_v: usize,
    pub n_eta: usize,
    pub n_x: usize,
    /// Grid half-width in thermal speeds.
    pub width: f64,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeBlock {
    pub t_end: f64,
    /// Fixed step; when absent the stable step from `cfl_relax` is used.
    pub dt: Option<f64>,
    pub cfl_relax: f64,
    pub cfl_adv: f64,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialBlock {
    pub n: f64,
    pub u: Vec<f64>,
    pub t_tr: f64,
    pub t_rot: f64,
    /// Defaults to `t_rot`.
    pub theta0: Option<f64>,
    /// Row-major traceless addition to `T^t I`.
    pub anisotropy: Option<Vec<f64>>,
}

impl InitialBlock {
    pub fn to_initial(&self) -> InitialSpecies {
        let d = self.u.len();
        let mut s = InitialSpecies::isotropic(self.n, self.u.clone(), self.t_tr, self.t_rot);
        if let Some(t) = self.theta0 {
            s.theta0 = t;
        }
        if let Some(a) = &self.anisotropy {
            s.anisotropy = DMatrix::from_row_slice(d, d, a);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub seed: u64,
    pub species: [SpeciesBlock; 2],
    pub coupling: CouplingBlock,
    pub grid: GridBlock,
    pub time: TimeBlock,
    pub initial: [InitialBlock; 2],
    /// Right-hand Riemann state for `transport1d`; defaults to `initial`.
    pub right: Option<[InitialBlock; 2]>,
}

impl RunConfig {
    pub fn species_params(&self) -> [SpeciesParams; 2] {
        let d = self.grid.d;
        let conv = |s: &SpeciesBlock| SpeciesParams {
            mass: s.mass,
            dof_internal: s.l,
            dof_translational: d,
            nu_self: s.nu_self,
            nu_cross: s.nu_cross,
            es_parameter: s.mu,
            z_rot: s.z_rot,
        };
        [conv(&self.species[0]), conv(&self.species[1])]
    }

    /// Coupling with `gamma = max` resolved.
    pub fn coupling_params(&self) -> MixtureCoupling {
        let c = &self.coupling;
        let base = MixtureCoupling {
            epsilon: c.epsilon,
            delta: c.delta,
            alpha: c.alpha,
            gamma: match c.gamma {
                GammaSetting::Value(g) => g,
                GammaSetting::Max => 0.0,
            },
        };
        match c.gamma {
            GammaSetting::Max => base.with_max_gamma(&self.species_params()),
            GammaSetting::Value(_) => base,
        }
    }

    pub fn model(&self) -> polykin::Result<Model> {
        let mut m = Model::new(self.species_params(), self.coupling_params())?;
        m.tensor_cross = self.coupling.tensor_cross;
        Ok(m)
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            n_v: self.grid.n_v,
            n_eta: self.grid.n_eta,
            width: self.grid.width,
        }
    }

    pub fn initial_states(&self) -> [InitialSpecies; 2] {
        [self.initial[0].to_initial(), self.initial[1].to_initial()]
    }

    pub fn right_states(&self) -> [InitialSpecies; 2] {
        match &self.right {
            Some(r) => [r[0].to_initial(), r[1].to_initial()],
            None => self.initial_states(),
        }
    }

    /// Semantic checks: species parameters, initial data shapes and closure
    /// admissibility.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut errs = Vec::new();
        let d = self.grid.d;
        let sp = self.species_params();
        for (k, s) in sp.iter().enumerate() {
            if let Err(e) = s.validate() {
                errs.push(ConfigError::Invalid {
                    section: format!("species{}", k + 1),
                    key: "*".into(),
                    value: String::new(),
                    reason: e.to_string(),
                });
            }
        }
        let mut blocks: Vec<(String, &InitialBlock)> = self
            .initial
            .iter()
            .enumerate()
            .map(|(k, b)| (format!("initial{}", k + 1), b))
            .collect();
        if let Some(r) = &self.right {
            blocks.extend(r.iter().enumerate().map(|(k, b)| (format!("right{}", k + 1), b)));
        }
        for (name, b) in blocks {
            let k = name.ends_with('2') as usize;
            check_initial(&name, b, d, self.species[k].l, &mut errs);
        }
        let invalid_grid = |key: &str, value: String, reason: &str| ConfigError::Invalid {
            section: "grid".into(),
            key: key.into(),
            value,
            reason: reason.into(),
        };
        if d == 0 || d > 3 {
            errs.push(invalid_grid("d", d.to_string(), "must be 1, 2 or 3"));
        }
        if self.grid.n_v < 2 {
            errs.push(invalid_grid("n_v", self.grid.n_v.to_string(), "must be at least 2"));
        }
        if self.grid.n_x < 2 {
            errs.push(invalid_grid("n_x", self.grid.n_x.to_string(), "must be at least 2"));
        }
        if !(self.grid.width > 0.0) {
            errs.push(invalid_grid("width", self.grid.width.to_string(), "must be positive"));
        }
        let t = &self.time;
        let invalid_time = |key: &str, value: String, reason: &str| ConfigError::Invalid {
            section: "time".into(),
            key: key.into(),
            value,
            reason: reason.into(),
        };
        if !(t.t_end > 0.0) {
            errs.push(invalid_time("t_end", t.t_end.to_string(), "must be positive"));
        }
        if t.dt.is_some_and(|x| !(x > 0.0)) {
            errs.push(invalid_time("dt", format!("{:?}", t.dt), "must be positive"));
        }
        if !(t.cfl_relax > 0.0 && t.cfl_relax <= 1.0) {
            errs.push(invalid_time("cfl_relax", t.cfl_relax.to_string(), "must lie in (0, 1]"));
        }
        if !(t.cfl_adv > 0.0 && t.cfl_adv <= 1.0) {
            errs.push(invalid_time("cfl_adv", t.cfl_adv.to_string(), "must lie in (0, 1]"));
        }
        if t.stride == 0 {
            errs.push(invalid_time("stride", "0".into(), "must be at least 1"));
        }
        if errs.is_empty() {
            for v in self.coupling_params().violations(&sp) {
                errs.push(ConfigError::Closure(v.to_string()));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errs))
        }
    }
}

fn check_initial(name: &str, b: &InitialBlock, d: usize, l: usize, errs: &mut Vec<ConfigError>) {
    let bad = |key: &str, value: String, reason: String| ConfigError::Invalid {
        section: name.into(),
        key: key.into(),
        value,
        reason,
    };
    if b.u.len() != d {
        errs.push(bad("u", format!("{:?}", b.u), format!("expected {d} components")));
    }
    if !(b.n > 0.0) {
        errs.push(bad("n", b.n.to_string(), "must be positive".into()));
    }
    if !(b.t_tr > 0.0) {
        errs.push(bad("t_tr", b.t_tr.to_string(), "must be positive".into()));
    }
    if l > 0 && !(b.t_rot > 0.0) {
        errs.push(bad("t_rot", b.t_rot.to_string(), "must be positive for l > 0".into()));
    }
    if let Some(a) = &b.anisotropy {
        if a.len() != d * d {
            errs.push(bad("anisotropy", format!("{a:?}"), format!("expected {} entries", d * d)));
        } else {
            let m = DMatrix::from_row_slice(d, d, a);
            if (&m - m.transpose()).abs().max() > 0.0 || m.trace().abs() > 1e-12 {
                errs.push(bad("anisotropy", format!("{a:?}"), "must be symmetric and traceless".into()));
            }
        }
    }
}

type Section = BTreeMap<String, (usize, String)>;

const SECTIONS: &[(&str, &[&str])] = &[
    ("run", &["scenario", "seed"]),
    ("species1", &["mass", "l", "nu_self", "nu_cross", "mu", "z_rot"]),
    ("species2", &["mass", "l", "nu_self", "nu_cross", "mu", "z_rot"]),
    ("coupling", &["epsilon", "delta", "alpha", "gamma", "tensor_cross"]),
    ("grid", &["d", "n_v", "n_eta", "n_x", "width", "boundary"]),
    ("time", &["t_end", "dt", "cfl_relax", "cfl_adv", "stride"]),
    ("initial1", &["n", "u", "t_tr", "t_rot", "theta0", "anisotropy"]),
    ("initial2", &["n", "u", "t_tr", "t_rot", "theta0", "anisotropy"]),
    ("right1", &["n", "u", "t_tr", "t_rot", "theta0", "anisotropy"]),
    ("right2", &["n", "u", "t_tr", "t_rot", "theta0", "anisotropy"]),
];

pub const SCENARIOS: &[&str] = &["relax-homogeneous", "mono-diatomic", "two-diatomic"];

fn tokenize(text: &str, errs: &mut Vec<ConfigError>) -> BTreeMap<String, Section> {
    let mut out: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    // Inside a rejected section: its keys are not reported again.
    let mut skipping = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                errs.push(ConfigError::Syntax {
                    line,
                    msg: format!("unterminated section header `{s}`"),
                });
                current = None;
                skipping = true;
                continue;
            };
            let name = name.trim().to_string();
            if SECTIONS.iter().any(|(n, _)| *n == name) {
                out.entry(name.clone()).or_default();
                current = Some(name);
                skipping = false;
            } else {
                errs.push(ConfigError::UnknownSection { line, section: name });
                current = None;
                skipping = true;
            }
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            errs.push(ConfigError::Syntax {
                line,
                msg: format!("expected `key = value`, got `{s}`"),
            });
            continue;
        };
        let Some(sec) = &current else {
            if !skipping {
                errs.push(ConfigError::Syntax {
                    line,
                    msg: "key outside of any section".into(),
                });
            }
            continue;
        };
        let key = k.trim().to_string();
        let allowed = SECTIONS.iter().find(|(n, _)| n == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key.as_str()) {
            errs.push(ConfigError::UnknownKey {
                line,
                section: sec.clone(),
                key,
            });
            continue;
        }
        let entry = out.get_mut(sec).expect("section registered");
        if entry.contains_key(&key) {
            errs.push(ConfigError::Duplicate {
                line,
                section: sec.clone(),
                key,
            });
            continue;
        }
        entry.insert(key, (line, v.trim().to_string()));
    }
    out
}

struct Reader<'a> {
    sections: &'a BTreeMap<String, Section>,
    errs: &'a mut Vec<ConfigError>,
}

impl Reader<'_> {
    fn raw(&mut self, sec: &str, key: &str, required: bool) -> Option<String> {
        let v = self.sections.get(sec).and_then(|s| s.get(key)).map(|(_, v)| v.clone());
        if v.is_none() && required {
            self.errs.push(ConfigError::Missing {
                section: sec.into(),
                key: key.into(),
            });
        }
        v
    }

    fn invalid(&mut self, sec: &str, key: &str, value: &str, reason: impl Into<String>) {
        self.errs.push(ConfigError::Invalid {
            section: sec.into(),
            key: key.into(),
            value: value.into(),
            reason: reason.into(),
        });
    }

    fn parse<T: std::str::FromStr>(&mut self, sec: &str, key: &str, what: &str) -> Option<Option<T>> {
        let v = self.raw(sec, key, false)?;
        match v.parse::<T>() {
            Ok(x) => Some(Some(x)),
            Err(_) => {
                self.invalid(sec, key, &v, format!("expected {what}"));
                Some(None)
            }
        }
    }

    fn f64_opt(&mut self, sec: &str, key: &str) -> Option<f64> {
        self.parse::<f64>(sec, key, "a decimal number").flatten()
    }

    fn f64_req(&mut self, sec: &str, key: &str) -> f64 {
        match self.parse::<f64>(sec, key, "a decimal number") {
            Some(v) => v.unwrap_or(f64::NAN),
            None => {
                self.raw(sec, key, true);
                f64::NAN
            }
        }
    }

    fn f64_or(&mut self, sec: &str, key: &str, default: f64) -> f64 {
        self.f64_opt(sec, key).unwrap_or(default)
    }

    fn usize_or(&mut self, sec: &str, key: &str, default: Option<usize>) -> usize {
        match self.parse::<usize>(sec, key, "a non-negative integer") {
            Some(v) => v.unwrap_or(0),
            None => match default {
                Some(d) => d,
                None => {
                    self.raw(sec, key, true);
                    0
                }
            },
        }
    }

    fn vec_opt(&mut self, sec: &str, key: &str) -> Option<Vec<f64>> {
        let v = self.raw(sec, key, false)?;
        let parsed: Result<Vec<f64>, _> = v.split(',').map(|x| x.trim().parse::<f64>()).collect();
        match parsed {
            Ok(x) => Some(x),
            Err(_) => {
                self.invalid(sec, key, &v, "expected comma separated decimals");
                Some(Vec::new())
            }
        }
    }

    fn initial(&mut self, sec: &str) -> InitialBlock {
        let u = match self.vec_opt(sec, "u") {
            Some(u) => u,
            None => {
                self.raw(sec, "u", true);
                Vec::new()
            }
        };
        InitialBlock {
            n: self.f64_req(sec, "n"),
            u,
            t_tr: self.f64_req(sec, "t_tr"),
            t_rot: self.f64_or(sec, "t_rot", 0.0),
            theta0: self.f64_opt(sec, "theta0"),
            anisotropy: self.vec_opt(sec, "anisotropy"),
        }
    }

    fn species(&mut self, sec: &str) -> SpeciesBlock {
        SpeciesBlock {
            mass: self.f64_req(sec, "mass"),
            l: self.usize_or(sec, "l", None),
            nu_self: self.f64_req(sec, "nu_self"),
            nu_cross: self.f64_req(sec, "nu_cross"),
            mu: self.f64_or(sec, "mu", 0.0),
            z_rot: self.f64_or(sec, "z_rot", 1.0),
        }
    }
}

/// Parses syntax and keys without checking physics or closure admissibility.
pub fn parse_config_unchecked(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut errs = Vec::new();
    let sections = tokenize(text, &mut errs);
    let mut r = Reader {
        sections: &sections,
        errs: &mut errs,
    };
    let scenario = r.raw("run", "scenario", true).unwrap_or_default();
    if !scenario.is_empty() && !SCENARIOS.contains(&scenario.as_str()) {
        r.invalid("run", "scenario", &scenario, format!("expected one of {}", SCENARIOS.join(", ")));
    }
    let seed = r.parse::<u64>("run", "seed", "an unsigned integer").flatten().unwrap_or(1);
    let species = [r.species("species1"), r.species("species2")];

    let gamma = match r.raw("coupling", "gamma", true) {
        Some(v) if v == "max" => GammaSetting::Max,
        Some(v) => match v.parse::<f64>() {
            Ok(g) => GammaSetting::Value(g),
            Err(_) => {
                r.invalid("coupling", "gamma", &v, "expected a decimal number or `max`");
                GammaSetting::Value(f64::NAN)
            }
        },
        None => GammaSetting::Value(f64::NAN),
    };
    let tensor_cross = match r.raw("coupling", "tensor_cross", false).as_deref() {
        None | Some("moment") => TensorCrossTerm::MomentConsistent,
        Some("internal") => TensorCrossTerm::Internal,
        Some(other) => {
            let other = other.to_string();
            r.invalid("coupling", "tensor_cross", &other, "expected `moment` or `internal`");
            TensorCrossTerm::MomentConsistent
        }
    };
    let coupling = CouplingBlock {
        epsilon: r.f64_req("coupling", "epsilon"),
        delta: r.f64_req("coupling", "delta"),
        alpha: r.f64_req("coupling", "alpha"),
        gamma,
        tensor_cross,
    };

    let boundary = match r.raw("grid", "boundary", false).as_deref() {
        None | Some("periodic") => Boundary::Periodic,
        Some("outflow") => Boundary::Outflow,
        Some(other) => {
            let other = other.to_string();
            r.invalid("grid", "boundary", &other, "expected `periodic` or `outflow`");
            Boundary::Periodic
        }
    };
    let grid = GridBlock {
        d: r.usize_or("grid", "d", None),
        n_v: r.usize_or("grid", "n_v", None),
        n_eta: r.usize_or("grid", "n_eta", Some(16)),
        n_x: r.usize_or("grid", "n_x", Some(100)),
        width: r.f64_or("grid", "width", 6.0),
        boundary,
    };
    let time = TimeBlock {
        t_end: r.f64_req("time", "t_end"),
        dt: r.f64_opt("time", "dt"),
        cfl_relax: r.f64_or("time", "cfl_relax", polykin::dynamics::DEFAULT_CFL),
        cfl_adv: r.f64_or("time", "cfl_adv", 0.5),
        stride: r.usize_or("time", "stride", Some(1)),
    };
    let initial = [r.initial("initial1"), r.initial("initial2")];
    let has_right = [sections.contains_key("right1"), sections.contains_key("right2")];
    let right = match has_right {
        [false, false] => None,
        _ => {
            let mut r = Reader {
                sections: &sections,
                errs: &mut errs,
            };
            Some([r.initial("right1"), r.initial("right2")])
        }
    };
    if errs.is_empty() {
        Ok(RunConfig {
            scenario,
            seed,
            species,
            coupling,
            grid,
            time,
            initial,
            right,
        })
    } else {
        Err(ConfigErrors(errs))
    }
}

/// Parses and fully validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let c = parse_config_unchecked(text)?;
    c.validate()?;
    Ok(c)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn write_initial(f: &mut fmt::Formatter<'_>, name: &str, b: &InitialBlock) -> fmt::Result {
    writeln!(f, "\n[{name}]")?;
    writeln!(f, "n = {}", b.n)?;
    writeln!(f, "u = {}", join(&b.u))?;
    writeln!(f, "t_tr = {}", b.t_tr)?;
    writeln!(f, "t_rot = {}", b.t_rot)?;
    if let Some(t) = b.theta0 {
        writeln!(f, "theta0 = {t}")?;
    }
    if let Some(a) = &b.anisotropy {
        writeln!(f, "anisotropy = {}", join(a))?;
    }
    Ok(())
}

/// Prints in the accepted grammar; `parse_config(&c.to_string()) == c`.
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[run]\nscenario = {}\nseed = {}", self.scenario, self.seed)?;
        for (k, s) in self.species.iter().enumerate() {
            writeln!(f, "\n[species{}]", k + 1)?;
            writeln!(f, "mass = {}\nl = {}\nnu_self = {}\nnu_cross = {}", s.mass, s.l, s.nu_self, s.nu_cross)?;
            writeln!(f, "mu = {}\nz_rot = {}", s.mu, s.z_rot)?;
        }
        let c = &self.coupling;
        writeln!(f, "\n[coupling]")?;
        writeln!(f, "epsilon = {}\ndelta = {}\nalpha = {}", c.epsilon, c.delta, c.alpha)?;
        match c.gamma {
            GammaSetting::Max => writeln!(f, "gamma = max")?,
            GammaSetting::Value(g) => writeln!(f, "gamma = {g}")?,
        }
        let tc = match c.tensor_cross {
            TensorCrossTerm::MomentConsistent => "moment",
            TensorCrossTerm::Internal => "internal",
        };
        writeln!(f, "tensor_cross = {tc}")?;
        let g = &self.grid;
        let b = match g.boundary {
            Boundary::Periodic => "periodic",
            Boundary::Outflow => "outflow",
        };
        writeln!(f, "\n[grid]")?;
        writeln!(f, "d = {}\nn_v = {}\nn_eta = {}\nn_x = {}", g.d, g.n_v, g.n_eta, g.n_x)?;
        writeln!(f, "width = {}\nboundary = {b}", g.width)?;
        let t = &self.time;
        writeln!(f, "\n[time]\nt_end = {}", t.t_end)?;
        if let Some(dt) = t.dt {
            writeln!(f, "dt = {dt}")?;
        }
        writeln!(f, "cfl_relax = {}\ncfl_adv = {}\nstride = {}", t.cfl_relax, t.cfl_adv, t.stride)?;
        write_initial(f, "initial1", &self.initial[0])?;
        write_initial(f, "initial2", &self.initial[1])?;
        if let Some(r) = &self.right {
            write_initial(f, "right1", &r[0])?;
            write_initial(f, "right2", &r[1])?;
        }
        Ok(())
    }
}
