//! TOML run configuration.
//!
//! Every key is optional. Missing keys take the defaults below and unknown
//! keys are rejected. The resolved form serializes back to the same schema,
//! so a manifest's `config` block can be fed to `--config` to rerun.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use ppls::em::{EmConfig, InitStrategy};
use ppls::stiefel::StiefelConfig;
use ppls::study::{Method, Scenario, StudyConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioName {
    Study1,
    Study2,
}

impl From<ScenarioName> for Scenario {
    fn from(s: ScenarioName) -> Self {
        match s {
            ScenarioName::Study1 => Scenario::Study1,
            ScenarioName::Study2 => Scenario::Study2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Original,
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitName {
    SvdStart,
    RandomStart,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for the replicate pool. Absent means all cores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub study: StudySection,
    pub fit: FitSection,
    pub em: EmSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub scenario: ScenarioName,
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub snr: f64,
    pub rejection_threshold: f64,
    pub condition_cap: f64,
    pub rejection_budget: usize,
    pub methods: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub model: ModelKind,
    pub r: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmSection {
    pub max_iters: usize,
    pub loglik_tol: f64,
    pub init: InitName,
    pub ridge: f64,
    pub stiefel: StiefelSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StiefelSection {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub step_shrink: f64,
    pub initial_step: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: StudyConfig::default().base_seed,
            threads: None,
            study: StudySection::default(),
            fit: FitSection::default(),
            em: EmSection::default(),
        }
    }
}

impl Default for StudySection {
    fn default() -> Self {
        let d = StudyConfig::default();
        Self {
            scenario: ScenarioName::Study1,
            p: d.p,
            q: d.q,
            r: d.r,
            sample_sizes: d.sample_sizes,
            replicates: d.replicates,
            snr: d.snr,
            rejection_threshold: d.rejection_threshold,
            condition_cap: d.condition_cap,
            rejection_budget: d.rejection_budget,
            methods: d.methods.iter().map(|m| m.name().to_string()).collect(),
        }
    }
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            model: ModelKind::Extended,
            r: 3,
        }
    }
}

impl Default for EmSection {
    fn default() -> Self {
        let d = EmConfig::default();
        Self {
            max_iters: d.max_iters,
            loglik_tol: d.loglik_tol,
            init: match d.init {
                InitStrategy::SvdStart => InitName::SvdStart,
                InitStrategy::RandomStart => InitName::RandomStart,
            },
            ridge: d.ridge,
            stiefel: StiefelSection::default(),
        }
    }
}

impl Default for StiefelSection {
    fn default() -> Self {
        let d = StiefelConfig::default();
        Self {
            max_iters: d.max_iters,
            grad_tol: d.grad_tol,
            armijo_c: d.armijo_c,
            step_shrink: d.step_shrink,
            initial_step: d.initial_step,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn thread_count(&self) -> Result<usize> {
        match self.threads {
            Some(0) => bail!("threads: must be at least 1"),
            Some(t) => Ok(t),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    pub fn em_config(&self) -> Result<EmConfig> {
        let e = &self.em;
        let s = &e.stiefel;
        let cfg = EmConfig {
            max_iters: e.max_iters,
            loglik_tol: e.loglik_tol,
            init: match e.init {
                InitName::SvdStart => InitStrategy::SvdStart,
                InitName::RandomStart => InitStrategy::RandomStart,
            },
            ridge: e.ridge,
            stiefel: StiefelConfig {
                max_iters: s.max_iters,
                grad_tol: s.grad_tol,
                armijo_c: s.armijo_c,
                step_shrink: s.step_shrink,
                initial_step: s.initial_step,
            },
        };
        cfg.stiefel.validate().context("em.stiefel")?;
        cfg.validate().context("em")?;
        Ok(cfg)
    }

    pub fn study_config(&self) -> Result<StudyConfig> {
        let s = &self.study;
        if s.r >= s.p.min(s.q) {
            bail!(
                "study.r = {}: constraint (i) requires r < min(p, q) = {}",
                s.r,
                s.p.min(s.q)
            );
        }
        if let Some((i, n)) = s.sample_sizes.iter().enumerate().find(|(_, &n)| n <= s.r) {
            bail!("study.sample_sizes[{i}] = {n}: must exceed r = {}", s.r);
        }
        let mut methods = Vec::with_capacity(s.methods.len());
        for (i, name) in s.methods.iter().enumerate() {
            methods.push(
                name.parse::<Method>()
                    .with_context(|| format!("study.methods[{i}]"))?,
            );
        }
        let cfg = StudyConfig {
            p: s.p,
            q: s.q,
            r: s.r,
            sample_sizes: s.sample_sizes.clone(),
            replicates: s.replicates,
            snr: s.snr,
            rejection_threshold: s.rejection_threshold,
            base_seed: self.seed,
            methods,
            condition_cap: s.condition_cap,
            rejection_budget: s.rejection_budget,
            em: self.em_config()?,
        };
        cfg.validate().context("study")?;
        Ok(cfg)
    }

    pub fn check_fit(&self) -> Result<()> {
        if self.fit.r == 0 {
            bail!("fit.r: must be at least 1");
        }
        self.em_config().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        let s = cfg.study_config().unwrap();
        assert_eq!((s.p, s.q, s.r), (20, 20, 3));
        assert_eq!(s.snr, 0.25);
        assert_eq!(s.replicates, 100);
        assert_eq!(s.sample_sizes, vec![50, 250, 500, 1000, 5000]);
        assert_eq!(s.rejection_threshold, 0.8);
        assert_eq!(s.methods, Method::ALL.to_vec());
        assert_eq!(cfg.fit.model, ModelKind::Extended);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("[study]\nreplicate = 3\n").unwrap_err();
        assert!(format!("{err:#}").contains("replicate"));
        assert!(RunConfig::parse("colour = 1\n").is_err());
        assert!(RunConfig::parse("[em.stiefel]\nsteps = 1\n").is_err());
    }

    #[test]
    fn rank_equal_to_dimension_names_constraint_i() {
        let cfg = RunConfig::parse("[study]\np = 20\nr = 20\n").unwrap();
        let msg = format!("{:#}", cfg.study_config().unwrap_err());
        assert!(msg.contains("(i)"), "{msg}");
        assert!(msg.contains("study.r"), "{msg}");
    }

    #[test]
    fn bad_values_report_key_paths() {
        let cfg = RunConfig::parse("[study]\nmethods = [\"pca\", \"cca\"]\n").unwrap();
        let msg = format!("{:#}", cfg.study_config().unwrap_err());
        assert!(msg.contains("study.methods[1]"), "{msg}");

        let cfg = RunConfig::parse("[em.stiefel]\narmijo_c = 2.0\n").unwrap();
        let msg = format!("{:#}", cfg.em_config().unwrap_err());
        assert!(msg.starts_with("em.stiefel"), "{msg}");

        let cfg = RunConfig::parse("threads = 0\n").unwrap();
        assert!(cfg.thread_count().is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = RunConfig::parse("seed = 7\n[study]\nreplicates = 1000\n").unwrap();
        cfg.threads = Some(4);
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(again.to_toml(), cfg.to_toml());
        assert_eq!(again.study.replicates, 1000);
        assert_eq!(again.seed, 7);
    }
}
