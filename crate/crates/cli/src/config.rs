//! Scenario files.
//!
//! A scenario is an INI file with the sections `[species]`, `[friction]`,
//! `[sim]`, `[forcing]`, `[init]` and `[output]`. Lists are comma
//! separated. Unknown sections and keys are errors, so a typo never silently
//! falls back to a default.
//!
//! ```ini
//! [species]
//! n = 2
//! masses = 1, 2
//! law = log, log
//! vbar0 = 1, 0.5
//! g0 = 2, 2
//! p0 = 1
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use msmix::sim1d::{DensityProfile, Grid1D, InitialData, SimConfig, Stepping};
use msmix::thermo::{GibbsLaw, SpeciesSet};
use msmix::transport::{FrictionKind, FrictionModel};

/// Raised for anything wrong with a scenario; the CLI maps it to exit 3.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<msmix::Error> for ConfigError {
    fn from(e: msmix::Error) -> Self {
        ConfigError(e.to_string())
    }
}

type Res<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Res<T> {
    Err(ConfigError(msg.into()))
}

/// Section name → key → raw value, both sorted by name.
pub type RawConfig = BTreeMap<String, BTreeMap<String, String>>;

const SECTIONS: [&str; 6] = ["species", "friction", "sim", "forcing", "init", "output"];

/// Reads the INI text into raw sections, rejecting duplicates and keys
/// outside any section.
pub fn parse_raw(text: &str) -> Res<RawConfig> {
    let ini =
        ini::Ini::load_from_str(text).map_err(|e| ConfigError(format!("malformed config: {e}")))?;
    let mut raw = RawConfig::new();
    for (section, props) in ini.iter() {
        let Some(section) = section else {
            if let Some((k, _)) = props.iter().next() {
                return err(format!("key `{k}` appears before any [section] header"));
            }
            continue;
        };
        if !SECTIONS.contains(&section) {
            return err(format!("unknown section [{section}]"));
        }
        if raw.contains_key(section) {
            return err(format!("section [{section}] appears twice"));
        }
        let mut keys = BTreeMap::new();
        for (k, v) in props.iter() {
            if keys.insert(k.to_string(), v.trim().to_string()).is_some() {
                return err(format!("key `{k}` appears twice in [{section}]"));
            }
        }
        raw.insert(section.to_string(), keys);
    }
    Ok(raw)
}

/// Applies a `section.key=value` override.
pub fn apply_override(raw: &mut RawConfig, assignment: &str) -> Res<()> {
    let Some((path, value)) = assignment.split_once('=') else {
        return err(format!(
            "override `{assignment}` is not of the form section.key=value"
        ));
    };
    let Some((section, key)) = path.trim().split_once('.') else {
        return err(format!(
            "override `{assignment}` is not of the form section.key=value"
        ));
    };
    if !SECTIONS.contains(&section) {
        return err(format!(
            "unknown section [{section}] in override `{assignment}`"
        ));
    }
    raw.entry(section.to_string())
        .or_default()
        .insert(key.trim().to_string(), value.trim().to_string());
    Ok(())
}

/// Pulls typed values out of one section and remembers which keys were used.
struct Section<'a> {
    name: &'static str,
    keys: BTreeMap<&'a str, &'a str>,
}

impl<'a> Section<'a> {
    fn new(name: &'static str, raw: &'a BTreeMap<String, String>) -> Self {
        Section {
            name,
            keys: raw.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect(),
        }
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        self.keys.remove(key)
    }

    fn need(&mut self, key: &str) -> Res<&'a str> {
        self.take(key)
            .ok_or_else(|| ConfigError(format!("[{}] is missing `{key}`", self.name)))
    }

    fn float(&self, key: &str, v: &str) -> Res<f64> {
        v.parse::<f64>()
            .map_err(|_| ConfigError(format!("[{}] {key}: `{v}` is not a number", self.name)))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Res<f64> {
        match self.take(key) {
            Some(v) => self.float(key, v),
            None => Ok(default),
        }
    }

    fn f64_req(&mut self, key: &str) -> Res<f64> {
        let v = self.need(key)?;
        self.float(key, v)
    }

    fn list(&self, key: &str, v: &str) -> Res<Vec<f64>> {
        v.split(',').map(|t| self.float(key, t.trim())).collect()
    }

    fn list_req(&mut self, key: &str, n: usize) -> Res<Vec<f64>> {
        let v = self.need(key)?;
        let l = self.list(key, v)?;
        self.check_len(key, &l, n)?;
        Ok(l)
    }

    fn list_opt(&mut self, key: &str, n: usize) -> Res<Option<Vec<f64>>> {
        match self.take(key) {
            Some(v) => {
                let l = self.list(key, v)?;
                self.check_len(key, &l, n)?;
                Ok(Some(l))
            }
            None => Ok(None),
        }
    }

    fn check_len(&self, key: &str, l: &[f64], n: usize) -> Res<()> {
        if l.len() != n {
            return err(format!(
                "[{}] {key}: expected {n} values, got {}",
                self.name,
                l.len()
            ));
        }
        Ok(())
    }

    fn usize_req(&mut self, key: &str) -> Res<usize> {
        let v = self.need(key)?;
        v.parse().map_err(|_| {
            ConfigError(format!(
                "[{}] {key}: `{v}` is not a nonnegative integer",
                self.name
            ))
        })
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Res<bool> {
        match self.take(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => err(format!(
                "[{}] {key}: expected true or false, got `{v}`",
                self.name
            )),
        }
    }

    fn finish(self) -> Res<()> {
        match self.keys.keys().next() {
            Some(k) => err(format!("unknown key `{k}` in [{}]", self.name)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    Log,
    Blended,
}

impl LawKind {
    fn name(self) -> &'static str {
        match self {
            LawKind::Log => "log",
            LawKind::Blended => "blended",
        }
    }
}

/// `[species]`. `g0` applies to logarithmic species; `alpha`, `m0` and `m1`
/// to blended ones and are required as soon as one species is blended
/// (entries of logarithmic species are ignored).
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesSection {
    pub masses: Vec<f64>,
    pub laws: Vec<LawKind>,
    pub vbar0: Vec<f64>,
    pub g0: Vec<f64>,
    pub blended: Option<BlendedParams>,
    pub p0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlendedParams {
    pub alpha: Vec<f64>,
    pub m0: Vec<f64>,
    pub m1: Vec<f64>,
}

impl SpeciesSection {
    fn parse(raw: &BTreeMap<String, String>) -> Res<Self> {
        let mut s = Section::new("species", raw);
        let n = s.usize_req("n")?;
        if n == 0 {
            return err("[species] n must be at least 1");
        }
        let laws = s
            .need("law")?
            .split(',')
            .map(|t| match t.trim() {
                "log" => Ok(LawKind::Log),
                "blended" => Ok(LawKind::Blended),
                other => err(format!(
                    "[species] law: unknown law `{other}` (expected log or blended)"
                )),
            })
            .collect::<Res<Vec<_>>>()?;
        if laws.len() != n {
            return err(format!(
                "[species] law: expected {n} values, got {}",
                laws.len()
            ));
        }
        let masses = s.list_req("masses", n)?;
        let vbar0 = s.list_req("vbar0", n)?;
        let g0 = s.list_opt("g0", n)?.unwrap_or_else(|| vec![0.0; n]);
        let alpha = s.list_opt("alpha", n)?;
        let m0 = s.list_opt("m0", n)?;
        let m1 = s.list_opt("m1", n)?;
        let blended = match (alpha, m0, m1) {
            (Some(alpha), Some(m0), Some(m1)) => Some(BlendedParams { alpha, m0, m1 }),
            (None, None, None) => None,
            _ => return err("[species] alpha, m0 and m1 must be given together"),
        };
        if laws.contains(&LawKind::Blended) && blended.is_none() {
            return err("[species] blended laws need alpha, m0 and m1");
        }
        let p0 = s.f64_req("p0")?;
        s.finish()?;
        Ok(SpeciesSection {
            masses,
            laws,
            vbar0,
            g0,
            blended,
            p0,
        })
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn build(&self) -> Res<SpeciesSet> {
        let laws = (0..self.len())
            .map(|i| match self.laws[i] {
                LawKind::Log => GibbsLaw::log(self.g0[i], self.vbar0[i], self.p0),
                LawKind::Blended => {
                    let b = self.blended.as_ref().expect("checked while parsing");
                    GibbsLaw::blended(b.alpha[i], b.m0[i], b.m1[i], self.vbar0[i], self.p0)
                }
            })
            .collect::<msmix::Result<Vec<_>>>()?;
        Ok(SpeciesSet::new(self.masses.clone(), laws)?)
    }

    fn write(&self, out: &mut String) {
        let _ = writeln!(out, "[species]");
        let _ = writeln!(out, "n = {}", self.len());
        let laws: Vec<&str> = self.laws.iter().map(|l| l.name()).collect();
        let _ = writeln!(out, "law = {}", laws.join(", "));
        let _ = writeln!(out, "masses = {}", list(&self.masses));
        let _ = writeln!(out, "vbar0 = {}", list(&self.vbar0));
        let _ = writeln!(out, "g0 = {}", list(&self.g0));
        if let Some(b) = &self.blended {
            let _ = writeln!(out, "alpha = {}", list(&b.alpha));
            let _ = writeln!(out, "m0 = {}", list(&b.m0));
            let _ = writeln!(out, "m1 = {}", list(&b.m1));
        }
        let _ = writeln!(out, "p0 = {}", num(self.p0));
    }
}

/// `[friction]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionSection {
    pub f_c: f64,
    pub p1: f64,
    pub switch_width: f64,
    pub kind: FrictionKind,
}

impl FrictionSection {
    fn parse(raw: &BTreeMap<String, String>) -> Res<Self> {
        let mut s = Section::new("friction", raw);
        let f_c = s.f64_req("f_c")?;
        let p1 = s.f64_req("p1")?;
        let switch_width = s.f64_or("switch_width", 0.5)?;
        let kind = match s.take("kind").unwrap_or("singular") {
            "singular" => FrictionKind::Singular,
            "constant" => FrictionKind::Constant,
            other => {
                return err(format!(
                    "[friction] kind: unknown kind `{other}` (expected singular or constant)"
                ))
            }
        };
        s.finish()?;
        Ok(FrictionSection {
            f_c,
            p1,
            switch_width,
            kind,
        })
    }

    fn write(&self, out: &mut String) {
        let kind = match self.kind {
            FrictionKind::Singular => "singular",
            FrictionKind::Constant => "constant",
        };
        let _ = writeln!(out, "[friction]");
        let _ = writeln!(out, "f_c = {}", num(self.f_c));
        let _ = writeln!(out, "p1 = {}", num(self.p1));
        let _ = writeln!(out, "switch_width = {}", num(self.switch_width));
        let _ = writeln!(out, "kind = {kind}");
    }
}

/// `[sim]`. Everything except the grid has a default.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSection {
    pub length: f64,
    pub n_cells: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub sigma_reg: f64,
    pub eta_shear: f64,
    pub eta_bulk: f64,
    pub floor_density: f64,
    pub output_every: f64,
    pub stepping: Stepping,
    pub audit: bool,
}

impl SimSection {
    fn parse(raw: &BTreeMap<String, String>) -> Res<Self> {
        let mut s = Section::new("sim", raw);
        // Defaults follow `SimConfig::new`.
        let length = s.f64_req("L")?;
        let n_cells = s.usize_req("n_cells")?;
        let out = SimSection {
            length,
            n_cells,
            cfl: s.f64_or("cfl", 0.4)?,
            t_end: s.f64_or("t_end", 0.1)?,
            sigma_reg: s.f64_or("sigma_reg", 1e-3)?,
            eta_shear: s.f64_or("eta_shear", 0.05)?,
            eta_bulk: s.f64_or("eta_bulk", 0.0)?,
            floor_density: s.f64_or("floor_density", 1e-12)?,
            output_every: s.f64_or("output_every", 0.0)?,
            stepping: match s.take("stepping").unwrap_or("primitive") {
                "primitive" => Stepping::Primitive,
                "entropic" => Stepping::Entropic,
                other => {
                    return err(format!(
                        "[sim] stepping: unknown mode `{other}` (expected primitive or entropic)"
                    ))
                }
            },
            audit: s.bool_or("audit", true)?,
        };
        s.finish()?;
        Ok(out)
    }

    fn write(&self, out: &mut String) {
        let stepping = match self.stepping {
            Stepping::Primitive => "primitive",
            Stepping::Entropic => "entropic",
        };
        let _ = writeln!(out, "[sim]");
        let _ = writeln!(out, "L = {}", num(self.length));
        let _ = writeln!(out, "n_cells = {}", self.n_cells);
        let _ = writeln!(out, "cfl = {}", num(self.cfl));
        let _ = writeln!(out, "t_end = {}", num(self.t_end));
        let _ = writeln!(out, "sigma_reg = {}", num(self.sigma_reg));
        let _ = writeln!(out, "eta_shear = {}", num(self.eta_shear));
        let _ = writeln!(out, "eta_bulk = {}", num(self.eta_bulk));
        let _ = writeln!(out, "floor_density = {}", num(self.floor_density));
        let _ = writeln!(out, "output_every = {}", num(self.output_every));
        let _ = writeln!(out, "stepping = {stepping}");
        let _ = writeln!(out, "audit = {}", self.audit);
    }
}

/// `[init]`: `profile = uniform | step | gaussian` plus its parameters, and
/// an optional velocity `velocity_amplitude · sin(velocity_mode π x / L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitSection {
    pub profile: DensityProfile,
    pub velocity_amplitude: f64,
    pub velocity_mode: u32,
}

impl InitSection {
    fn parse(raw: &BTreeMap<String, String>, n: usize) -> Res<Self> {
        let mut s = Section::new("init", raw);
        let profile = match s.need("profile")? {
            "uniform" => DensityProfile::Uniform(s.list_req("rho", n)?),
            "step" => DensityProfile::Step {
                left: s.list_req("left", n)?,
                right: s.list_req("right", n)?,
                position: s.f64_req("position")?,
                width: s.f64_or("width", 0.0)?,
            },
            "gaussian" => DensityProfile::Gaussian {
                base: s.list_req("base", n)?,
                amplitude: s.list_req("amplitude", n)?,
                center: s.f64_req("center")?,
                width: s.f64_req("width")?,
            },
            other => {
                return err(format!(
                "[init] profile: unknown profile `{other}` (expected uniform, step or gaussian)"
            ))
            }
        };
        let velocity_amplitude = s.f64_or("velocity_amplitude", 0.0)?;
        let velocity_mode = match s.take("velocity_mode") {
            Some(v) => v.parse().map_err(|_| {
                ConfigError(format!(
                    "[init] velocity_mode: `{v}` is not a nonnegative integer"
                ))
            })?,
            None => 1,
        };
        s.finish()?;
        Ok(InitSection {
            profile,
            velocity_amplitude,
            velocity_mode,
        })
    }

    fn write(&self, out: &mut String) {
        let _ = writeln!(out, "[init]");
        match &self.profile {
            DensityProfile::Uniform(r) => {
                let _ = writeln!(out, "profile = uniform");
                let _ = writeln!(out, "rho = {}", list(r));
            }
            DensityProfile::Step {
                left,
                right,
                position,
                width,
            } => {
                let _ = writeln!(out, "profile = step");
                let _ = writeln!(out, "left = {}", list(left));
                let _ = writeln!(out, "right = {}", list(right));
                let _ = writeln!(out, "position = {}", num(*position));
                let _ = writeln!(out, "width = {}", num(*width));
            }
            DensityProfile::Gaussian {
                base,
                amplitude,
                center,
                width,
            } => {
                let _ = writeln!(out, "profile = gaussian");
                let _ = writeln!(out, "base = {}", list(base));
                let _ = writeln!(out, "amplitude = {}", list(amplitude));
                let _ = writeln!(out, "center = {}", num(*center));
                let _ = writeln!(out, "width = {}", num(*width));
            }
        }
        let _ = writeln!(out, "velocity_amplitude = {}", num(self.velocity_amplitude));
        let _ = writeln!(out, "velocity_mode = {}", self.velocity_mode);
    }
}

/// A parsed scenario. Sections are optional here; [`ScenarioConfig::simulation`]
/// insists on the ones a run needs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioConfig {
    pub species: Option<SpeciesSection>,
    pub friction: Option<FrictionSection>,
    pub sim: Option<SimSection>,
    /// `[forcing] b`: one constant body force per species.
    pub forcing: Option<Vec<f64>>,
    pub init: Option<InitSection>,
    /// `[output] csv`: where `run` writes its CSV; standard output if absent.
    pub output: Option<PathBuf>,
}

/// Everything `msmix run` needs.
pub struct Simulation {
    pub config: SimConfig,
    pub init: InitialData,
    pub csv: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Res<Self> {
        Self::from_raw(&parse_raw(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Res<Self> {
        let species = raw.get("species").map(SpeciesSection::parse).transpose()?;
        let n = species.as_ref().map(SpeciesSection::len);
        let need_n = |section: &str| {
            n.ok_or_else(|| {
                ConfigError(format!("missing [species] section (needed by [{section}])"))
            })
        };
        let forcing = match raw.get("forcing") {
            Some(r) => {
                let mut s = Section::new("forcing", r);
                let b = s.list_req("b", need_n("forcing")?)?;
                s.finish()?;
                Some(b)
            }
            None => None,
        };
        let init = match raw.get("init") {
            Some(r) => Some(InitSection::parse(r, need_n("init")?)?),
            None => None,
        };
        let output = match raw.get("output") {
            Some(r) => {
                let mut s = Section::new("output", r);
                let csv = s.need("csv")?;
                s.finish()?;
                Some(PathBuf::from(csv))
            }
            None => None,
        };
        Ok(ScenarioConfig {
            species,
            friction: raw
                .get("friction")
                .map(FrictionSection::parse)
                .transpose()?,
            sim: raw.get("sim").map(SimSection::parse).transpose()?,
            forcing,
            init,
            output,
        })
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let sep = |out: &mut String| {
            if !out.is_empty() {
                out.push('\n');
            }
        };
        if let Some(s) = &self.species {
            sep(&mut out);
            s.write(&mut out);
        }
        if let Some(f) = &self.friction {
            sep(&mut out);
            f.write(&mut out);
        }
        if let Some(s) = &self.sim {
            sep(&mut out);
            s.write(&mut out);
        }
        if let Some(b) = &self.forcing {
            sep(&mut out);
            let _ = writeln!(out, "[forcing]\nb = {}", list(b));
        }
        if let Some(i) = &self.init {
            sep(&mut out);
            i.write(&mut out);
        }
        if let Some(p) = &self.output {
            sep(&mut out);
            let _ = writeln!(out, "[output]\ncsv = {}", p.display());
        }
        out
    }

    pub fn species_set(&self) -> Res<SpeciesSet> {
        match &self.species {
            Some(s) => s.build(),
            None => err("missing [species] section"),
        }
    }

    /// Builds and validates the simulation.
    pub fn simulation(&self) -> Res<Simulation> {
        let sp = self.species_set()?;
        let fr = self
            .friction
            .as_ref()
            .ok_or_else(|| ConfigError("missing [friction] section".into()))?;
        let sim = self
            .sim
            .as_ref()
            .ok_or_else(|| ConfigError("missing [sim] section".into()))?;
        let init = self
            .init
            .as_ref()
            .ok_or_else(|| ConfigError("missing [init] section".into()))?;
        let model = FrictionModel::new(&sp, fr.f_c, fr.p1, fr.switch_width, fr.kind)?;
        let n = sp.len();
        let mut cfg = SimConfig::new(sp, model, Grid1D::new(sim.length, sim.n_cells)?);
        cfg.cfl = sim.cfl;
        cfg.t_end = sim.t_end;
        cfg.sigma_reg = sim.sigma_reg;
        cfg.eta_shear = sim.eta_shear;
        cfg.eta_bulk = sim.eta_bulk;
        cfg.floor_density = sim.floor_density;
        cfg.output_every = sim.output_every;
        cfg.stepping = sim.stepping;
        cfg.audit = sim.audit;
        cfg.b = self.forcing.clone().unwrap_or_else(|| vec![0.0; n]);
        cfg.validate()?;
        let mut data = InitialData::new(init.profile.clone());
        data.velocity_amplitude = init.velocity_amplitude;
        data.velocity_mode = init.velocity_mode;
        Ok(Simulation {
            config: cfg,
            init: data,
            csv: self.output.clone(),
        })
    }
}

/// Shortest text that parses back to the same `f64`.
fn num(v: f64) -> String {
    if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
[species]
n = 2
masses = 1, 2
law = log, blended
vbar0 = 1, 0.5
g0 = 2, 0
alpha = 1.4, 1.4
m0 = 10, 10
m1 = 1000, 1000
p0 = 1

[friction]
f_c = 1
p1 = 0.1

[sim]
L = 1
n_cells = 16
t_end = 1e-3

[forcing]
b = 0.5, -0.25

[init]
profile = step
left = 0.8, 0.4
right = 0.2, 1.6
position = 0.5
width = 0.05

[output]
csv = out.csv
";

    #[test]
    fn round_trip_is_identity() {
        let c = ScenarioConfig::parse(FULL).unwrap();
        let text = c.to_ini();
        let again = ScenarioConfig::parse(&text).unwrap();
        assert_eq!(c, again);
        assert_eq!(text, again.to_ini());
        assert!(c.simulation().is_ok());
    }

    #[test]
    fn awkward_numbers_survive_the_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-12, 6.02214076e23, -2.5e-7, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let e = ScenarioConfig::parse(&format!("{FULL}\n[extra]\na = 1\n")).unwrap_err();
        assert!(e.0.contains("[extra]"), "{e}");
        let e = ScenarioConfig::parse(&FULL.replace("t_end = 1e-3", "t_end = 1e-3\ntend = 2"))
            .unwrap_err();
        assert!(e.0.contains("tend"), "{e}");
    }

    #[test]
    fn list_lengths_are_checked() {
        let e =
            ScenarioConfig::parse(&FULL.replace("masses = 1, 2", "masses = 1, 2, 3")).unwrap_err();
        assert!(e.0.contains("masses"), "{e}");
    }

    #[test]
    fn overrides_replace_values() {
        let mut raw = parse_raw(FULL).unwrap();
        apply_override(&mut raw, "sim.n_cells=32").unwrap();
        let c = ScenarioConfig::from_raw(&raw).unwrap();
        assert_eq!(c.sim.unwrap().n_cells, 32);
        assert!(apply_override(&mut raw, "nonsense").is_err());
    }

    #[test]
    fn missing_species_is_named() {
        let text = FULL.split("[friction]").nth(1).unwrap();
        let e = ScenarioConfig::parse(&format!("[friction]{text}")).unwrap_err();
        assert!(e.0.contains("[species]"), "{e}");
    }
}
