//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7                  # random profiles only; `--seed` overrides
//! temperature = 0.0
//! pathway = "auto"          # auto | general | translation-invariant | partial | momentum
//! gauge = "auto"            # auto | a | b
//!
//! [model]
//! kind = "chain"            # chain | chern
//! l = 100
//! ly = 100                  # chern only, defaults to l
//!
//! [pre]
//! mass = 1.5                # or profile = [...], regions = [...], random = {...}
//!
//! [post]
//! regions = [{ sites = 50, mass = 0.5 }, { sites = 50, mass = 1.7 }]
//!
//! [time]
//! max = 30.0
//! steps = 600
//!
//! [[subsystem]]
//! name = "A"
//! start = 10
//! len = 30
//!
//! [detector]
//! delta_jump = 0.01
//!
//! [output]
//! dir = "out"
//! spectrum = true
//! loschmidt = true
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;

use entecho::correlation::{Broken, PathwayKind, QuenchProtocol, Subsystem};
use entecho::detect::DetectorConfig;
use entecho::models::{Gauge, GaugeChoice, ModelSpec};

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub pre: MassSection,
    pub post: MassSection,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default, rename = "subsystem")]
    pub subsystems: Vec<SubsystemSection>,
    #[serde(default)]
    pub pathway: PathwayChoice,
    #[serde(default)]
    pub gauge: GaugeSetting,
    #[serde(default)]
    pub detector: DetectorSection,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModelKindSetting {
    Chain,
    Chern,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKindSetting,
    pub l: usize,
    pub ly: Option<usize>,
}

/// Exactly one of the four forms.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassSection {
    pub mass: Option<f64>,
    pub profile: Option<Vec<f64>>,
    pub regions: Option<Vec<Region>>,
    pub random: Option<RandomRange>,
}

/// Consecutive sites sharing one mass.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub sites: usize,
    pub mass: f64,
}

/// Independent uniform draws in `[low, high)` per site.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomRange {
    pub low: f64,
    pub high: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default = "default_time_max")]
    pub max: f64,
    #[serde(default = "default_time_steps")]
    pub steps: usize,
}

fn default_time_max() -> f64 {
    30.0
}

fn default_time_steps() -> usize {
    600
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            max: default_time_max(),
            steps: default_time_steps(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemSection {
    pub name: Option<String>,
    #[serde(default)]
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PathwayChoice {
    #[default]
    Auto,
    General,
    TranslationInvariant,
    Partial,
    Momentum,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum GaugeSetting {
    #[default]
    Auto,
    A,
    B,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub eps_deg: Option<f64>,
    pub delta_jump: Option<f64>,
    pub delta_slope: Option<f64>,
    pub depth: Option<usize>,
    pub time_tol: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub spectrum: bool,
    #[serde(default = "yes")]
    pub loschmidt: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            spectrum: true,
            loschmidt: true,
        }
    }
}

fn invalid(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn is_2d(&self) -> bool {
        self.model.kind == ModelKindSetting::Chern
    }

    pub fn lx(&self) -> usize {
        self.model.l
    }

    pub fn ly(&self) -> usize {
        match self.model.kind {
            ModelKindSetting::Chain => 1,
            ModelKindSetting::Chern => self.model.ly.unwrap_or(self.model.l),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.model.l < 2 {
            return Err(invalid("model.l", "need at least 2 sites"));
        }
        if self.model.kind == ModelKindSetting::Chain && self.model.ly.is_some() {
            return Err(invalid("model.ly", "only meaningful for kind = \"chern\""));
        }
        if self.ly() < 1 {
            return Err(invalid("model.ly", "must be positive"));
        }
        for (field, section) in [("pre", &self.pre), ("post", &self.post)] {
            self.validate_mass(field, section)?;
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(invalid("temperature", "must be finite and non-negative"));
        }
        if !(self.time.max > 0.0 && self.time.max.is_finite()) {
            return Err(invalid("time.max", "must be positive"));
        }
        if self.time.steps < 1 {
            return Err(invalid("time.steps", "must be at least 1"));
        }
        if self.subsystems.is_empty() {
            return Err(invalid("subsystem", "declare at least one [[subsystem]]"));
        }
        for (i, s) in self.subsystems.iter().enumerate() {
            let field = format!("subsystem[{i}]");
            if s.len == 0 {
                return Err(invalid(&format!("{field}.len"), "must be positive"));
            }
            if s.start + s.len > self.lx() {
                return Err(invalid(
                    &field,
                    format!("sites {}..{} exceed l = {}", s.start, s.start + s.len, self.lx()),
                ));
            }
        }
        let mut names: Vec<String> = self.subsystem_names();
        names.sort();
        names.dedup();
        if names.len() != self.subsystems.len() {
            return Err(invalid("subsystem.name", "names must be unique"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be positive"));
        }
        let d = self.detector();
        if !(d.eps_deg >= 0.0 && d.delta_jump > 0.0 && d.delta_slope > 0.0 && d.time_tol > 0.0) {
            return Err(invalid("detector", "thresholds must be positive"));
        }
        self.pathway_kind().map(|_| ())
    }

    fn validate_mass(&self, field: &str, section: &MassSection) -> Result<(), CliError> {
        let given = [
            section.mass.is_some(),
            section.profile.is_some(),
            section.regions.is_some(),
            section.random.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if given != 1 {
            return Err(invalid(
                field,
                "give exactly one of mass, profile, regions, random",
            ));
        }
        if self.is_2d() && section.mass.is_none() {
            return Err(invalid(field, "the chern model takes a scalar mass only"));
        }
        if let Some(p) = &section.profile {
            if p.len() != self.lx() {
                return Err(invalid(
                    &format!("{field}.profile"),
                    format!("expected {} entries, got {}", self.lx(), p.len()),
                ));
            }
        }
        if let Some(regions) = &section.regions {
            let total: usize = regions.iter().map(|r| r.sites).sum();
            if total != self.lx() {
                return Err(invalid(
                    &format!("{field}.regions"),
                    format!("sites add up to {total}, expected {}", self.lx()),
                ));
            }
        }
        if let Some(r) = section.random {
            if !(r.low < r.high && r.low.is_finite() && r.high.is_finite()) {
                return Err(invalid(&format!("{field}.random"), "need low < high"));
            }
        }
        Ok(())
    }

    /// Subsystem names, `A`, `B`, … where not given.
    pub fn subsystem_names(&self) -> Vec<String> {
        self.subsystem_list().into_iter().map(|(name, _)| name).collect()
    }

    pub fn subsystem_list(&self) -> Vec<(String, Subsystem)> {
        self.subsystems
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let name = s
                    .name
                    .clone()
                    .unwrap_or_else(|| ((b'A' + (i % 26) as u8) as char).to_string());
                (name, Subsystem::new(s.start, s.len))
            })
            .collect()
    }

    pub fn detector(&self) -> DetectorConfig {
        let base = DetectorConfig::default();
        let d = &self.detector;
        DetectorConfig {
            eps_deg: d.eps_deg.unwrap_or(base.eps_deg),
            delta_jump: d.delta_jump.unwrap_or(base.delta_jump),
            delta_slope: d.delta_slope.unwrap_or(base.delta_slope),
            depth: d.depth.unwrap_or(base.depth),
            time_tol: d.time_tol.unwrap_or(base.time_tol),
        }
    }

    pub fn gauge_choice(&self) -> GaugeChoice {
        match self.gauge {
            GaugeSetting::Auto => GaugeChoice::Auto,
            GaugeSetting::A => GaugeChoice::Fixed(Gauge::A),
            GaugeSetting::B => GaugeChoice::Fixed(Gauge::B),
        }
    }

    fn is_uniform(section: &MassSection) -> bool {
        section.mass.is_some()
    }

    /// `None` selects per protocol.
    pub fn pathway_kind(&self) -> Result<Option<PathwayKind>, CliError> {
        let (pre_u, post_u) = (Self::is_uniform(&self.pre), Self::is_uniform(&self.post));
        let kind = match self.pathway {
            PathwayChoice::Auto => return Ok(None),
            PathwayChoice::General => PathwayKind::General,
            PathwayChoice::TranslationInvariant => {
                if !(pre_u && post_u) {
                    return Err(invalid("pathway", "translation-invariant needs scalar masses"));
                }
                PathwayKind::TranslationInvariant
            }
            PathwayChoice::Partial => match (pre_u, post_u) {
                (false, true) => PathwayKind::PartialTi(Broken::Pre),
                (true, false) => PathwayKind::PartialTi(Broken::Post),
                _ => {
                    return Err(invalid(
                        "pathway",
                        "partial needs exactly one of pre/post to be a profile",
                    ))
                }
            },
            PathwayChoice::Momentum => {
                if !self.is_2d() {
                    return Err(invalid("pathway", "momentum needs kind = \"chern\""));
                }
                PathwayKind::MomentumResolved
            }
        };
        Ok(Some(kind))
    }

    /// Pre- and post-quench models. Random profiles draw the pre-quench sites
    /// first, then the post-quench sites, from one ChaCha20 stream seeded with
    /// `seed` (default 0).
    pub fn models(&self, seed_override: Option<u64>) -> Result<(ModelSpec, ModelSpec), CliError> {
        let seed = seed_override.or(self.seed).unwrap_or(0);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pre = self.model_for("pre", &self.pre, &mut rng)?;
        let post = self.model_for("post", &self.post, &mut rng)?;
        Ok((pre, post))
    }

    fn model_for(
        &self,
        field: &str,
        section: &MassSection,
        rng: &mut ChaCha20Rng,
    ) -> Result<ModelSpec, CliError> {
        let l = self.lx();
        let built = if let Some(m) = section.mass {
            match self.model.kind {
                ModelKindSetting::Chain => ModelSpec::chain(l, m),
                ModelKindSetting::Chern => ModelSpec::chern(l, self.ly(), m),
            }
        } else if let Some(p) = &section.profile {
            ModelSpec::profile(p.clone())
        } else if let Some(regions) = &section.regions {
            let masses = regions
                .iter()
                .flat_map(|r| std::iter::repeat_n(r.mass, r.sites))
                .collect();
            ModelSpec::profile(masses)
        } else if let Some(r) = section.random {
            let masses = (0..l).map(|_| rng.random_range(r.low..r.high)).collect();
            ModelSpec::profile(masses)
        } else {
            unreachable!("validated")
        };
        built.map_err(|e| invalid(field, e))
    }

    pub fn protocol(
        &self,
        pre: &ModelSpec,
        post: &ModelSpec,
        subsystem: Subsystem,
    ) -> Result<QuenchProtocol, CliError> {
        QuenchProtocol::new(pre.clone(), post.clone(), self.temperature, subsystem)
            .map(|p| p.with_gauge(self.gauge_choice()))
            .map_err(|e| invalid("protocol", e))
    }
}
