use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use mtp_core::describer::DescribeOptions;
use mtp_core::evaluator::{Matching, DEFAULT_DELTA_T_S};
use mtp_core::gateway::{BackendConfig, Gateway, Limiter, ResponseCache, RetryPolicy};
use mtp_core::mtp_data::DEFAULT_DELTA_MERGE_S;
use mtp_core::preprocess::{FramePolicy, DEFAULT_SIM_THRESHOLD};
use mtp_core::reasoner::{PromptBundle, ReasonerOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything a run needs, read from one TOML file. Relative paths are
/// resolved against the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub prompt_bundle: Option<PathBuf>,
    pub strict: bool,
    pub reproducible: bool,
    pub parallelism: Option<usize>,
    pub backends: Backends,
    pub limits: Limits,
    pub reasoner: ReasonerOptions,
    pub evaluation: EvaluationOptions,
    pub consensus: ConsensusOptions,
    pub preprocess: PreprocessOptions,
    pub describe: DescribeOptions,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Backends {
    pub chat: Option<BackendConfig>,
    /// Defaults to `chat`.
    pub concluder: Option<BackendConfig>,
    pub vision: Option<BackendConfig>,
    pub embedding: Option<BackendConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_in_flight: usize,
    pub requests_per_s: Option<f64>,
    pub max_attempts: u32,
    pub retry_base_ms: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_in_flight: 8,
            requests_per_s: None,
            max_attempts: 3,
            retry_base_ms: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationOptions {
    pub delta_t: f64,
    pub matching: Matching,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        Self {
            delta_t: DEFAULT_DELTA_T_S,
            matching: Matching::Exists,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusOptions {
    pub delta_merge: f64,
    pub judge_id: String,
}

impl Default for ConsensusOptions {
    fn default() -> Self {
        Self {
            delta_merge: DEFAULT_DELTA_MERGE_S,
            judge_id: "judge".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessOptions {
    pub sim_threshold: f64,
    pub frame_policy: FramePolicy,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            sim_threshold: DEFAULT_SIM_THRESHOLD,
            frame_policy: FramePolicy::default(),
        }
    }
}

fn resolve(base: &Path, path: &mut Option<PathBuf>) {
    if let Some(p) = path {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

fn must_exist(what: &str, path: &Option<PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) if !p.exists() => Err(CliError::Config(format!(
            "{what} {} does not exist",
            p.display()
        ))),
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut config.dataset,
            &mut config.output_dir,
            &mut config.cache_dir,
            &mut config.prompt_bundle,
        ] {
            resolve(base, p);
        }
        for b in config.backends.all_mut() {
            resolve(base, &mut b.mock);
        }
        Ok(config)
    }

    /// Checks referenced inputs exist and numeric options are in range.
    pub fn validate(&self) -> Result<(), CliError> {
        must_exist("dataset", &self.dataset)?;
        must_exist("prompt bundle", &self.prompt_bundle)?;
        for b in self.backends.all() {
            must_exist("mock fixture", &b.mock)?;
        }
        let dt = self.evaluation.delta_t;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CliError::Config(format!(
                "evaluation.delta_t must be positive, got {dt}"
            )));
        }
        let dm = self.consensus.delta_merge;
        if !(dm > 0.0 && dm.is_finite()) {
            return Err(CliError::Config(format!(
                "consensus.delta_merge must be positive, got {dm}"
            )));
        }
        let st = self.preprocess.sim_threshold;
        if !(st > 0.0 && st <= 1.0) {
            return Err(CliError::Config(format!(
                "preprocess.sim_threshold must be in (0, 1], got {st}"
            )));
        }
        if self.limits.max_in_flight == 0 || self.limits.max_attempts == 0 {
            return Err(CliError::Config(
                "limits.max_in_flight and limits.max_attempts must be at least 1".into(),
            ));
        }
        if self.parallelism == Some(0) {
            return Err(CliError::Config("parallelism must be at least 1".into()));
        }
        Ok(())
    }

    pub fn bundle(&self) -> Result<PromptBundle, CliError> {
        match &self.prompt_bundle {
            Some(p) => Ok(PromptBundle::load(p)?),
            None => Ok(PromptBundle::default()),
        }
    }
}

impl Backends {
    fn all(&self) -> impl Iterator<Item = &BackendConfig> {
        [&self.chat, &self.concluder, &self.vision, &self.embedding]
            .into_iter()
            .flatten()
    }

    fn all_mut(&mut self) -> impl Iterator<Item = &mut BackendConfig> {
        [
            &mut self.chat,
            &mut self.concluder,
            &mut self.vision,
            &mut self.embedding,
        ]
        .into_iter()
        .flatten()
    }
}

/// Shared cache and limiter for every model role of one command.
pub struct GatewayFactory {
    cache: Option<Arc<ResponseCache>>,
    limiter: Arc<Limiter>,
    retry: RetryPolicy,
}

impl GatewayFactory {
    pub fn new(config: &RunConfig) -> Result<Self, CliError> {
        let cache = match &config.cache_dir {
            Some(dir) => Some(Arc::new(
                ResponseCache::open(dir)
                    .map_err(CliError::io(dir))?
                    .reproducible(config.reproducible),
            )),
            None => None,
        };
        let mut limiter = Limiter::new(config.limits.max_in_flight);
        if let Some(rps) = config.limits.requests_per_s {
            limiter = limiter.with_rate(rps);
        }
        Ok(Self {
            cache,
            limiter: Arc::new(limiter),
            retry: RetryPolicy {
                max_attempts: config.limits.max_attempts,
                base_delay: Duration::from_millis(config.limits.retry_base_ms),
            },
        })
    }

    pub fn build(&self, role: &str, backend: Option<&BackendConfig>) -> Result<Gateway, CliError> {
        let backend_config = backend.ok_or_else(|| {
            CliError::Config(format!("no `backends.{role}` section in the config"))
        })?;
        let backend = backend_config.build()?;
        let model_id = backend_config
            .model_id
            .clone()
            .unwrap_or_else(|| backend.name().to_string());
        let mut gw = Gateway::new(backend, model_id)
            .with_limiter(self.limiter.clone())
            .with_retry(self.retry);
        if let Some(cache) = &self.cache {
            gw = gw.with_cache(cache.clone());
        }
        Ok(gw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_resolve_against_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "dataset = \"data.jsonl\"\n[backends.chat]\nmock = \"rules.json\"\n",
        )
        .unwrap();
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.dataset, Some(dir.path().join("data.jsonl")));
        assert_eq!(
            config.backends.chat.as_ref().unwrap().mock,
            Some(dir.path().join("rules.json"))
        );
        // neither file exists yet
        assert_eq!(config.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn defaults_and_unknown_keys() {
        let config: RunConfig = toml::from_str("").unwrap();
        assert_eq!(config.evaluation.delta_t, 20.0);
        assert_eq!(config.consensus.delta_merge, 5.0);
        assert_eq!(config.limits.max_attempts, 3);
        assert!(config.validate().is_ok());
        assert!(toml::from_str::<RunConfig>("[limits]\nmax_inflight = 2\n").is_err());
    }
}
