//! Service configuration, layered as defaults, then a TOML file, then
//! `TESTPILOT_*` environment variables, then command-line flags.
//!
//! Credentials never appear here: the configuration only names the
//! environment variable that holds the key, and transports read it per call.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{FixtureStore, GatewayMode, HttpTransport, LlmGateway, Provider, RequestDefaults};
use crate::language::TargetLanguage;
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::runner::{AdapterConfig, AdapterRegistry};
use crate::synth::DEFAULT_PROMPT_BUDGET_BYTES;

pub const ENV_PREFIX: &str = "TESTPILOT_";

#[derive(Debug, Error)]
#[error("configuration `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub workspace_roots: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub provider: Provider,
    pub model: String,
    pub credential_env_var: String,
    pub gateway_mode: GatewayMode,
    pub fixture_path: Option<PathBuf>,
    pub llm_timeout_s: u64,
    pub runner_timeout_s: u64,
    pub prompt_size_budget_bytes: usize,
    pub listen_address: String,
    pub run_log: Option<PathBuf>,
    pub lock_timeout_s: u64,
    pub dot_renderer: String,
    /// Runner per language name; languages left out use the default runner.
    pub runners: BTreeMap<TargetLanguage, AdapterConfig>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let provider = Provider::Gemini;
        Self {
            workspace_roots: Vec::new(),
            output_dir: PathBuf::from("testpilot-output"),
            provider,
            model: provider.default_model().into(),
            credential_env_var: provider.default_credential_env().into(),
            gateway_mode: GatewayMode::Live,
            fixture_path: None,
            llm_timeout_s: 120,
            runner_timeout_s: 600,
            prompt_size_budget_bytes: DEFAULT_PROMPT_BUDGET_BYTES,
            listen_address: "127.0.0.1:8080".into(),
            run_log: None,
            lock_timeout_s: 600,
            dot_renderer: "dot".into(),
            runners: BTreeMap::new(),
        }
    }
}

/// One configuration layer. Unset fields leave lower layers alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub workspace_roots: Option<Vec<PathBuf>>,
    pub output_dir: Option<PathBuf>,
    pub provider: Option<Provider>,
    pub model: Option<String>,
    pub credential_env_var: Option<String>,
    pub gateway_mode: Option<GatewayMode>,
    pub fixture_path: Option<PathBuf>,
    pub llm_timeout_s: Option<u64>,
    pub runner_timeout_s: Option<u64>,
    pub prompt_size_budget_bytes: Option<usize>,
    pub listen_address: Option<String>,
    pub run_log: Option<PathBuf>,
    pub lock_timeout_s: Option<u64>,
    pub dot_renderer: Option<String>,
    #[serde(default)]
    pub runners: BTreeMap<TargetLanguage, AdapterConfig>,
}

impl ConfigLayer {
    /// Parses a TOML file; relative paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config_file", format!("{}: {e}", path.display())))?;
        let mut layer: ConfigLayer = toml::from_str(&text).map_err(|e| {
            let field = e.message().split('`').nth(1).unwrap_or("config_file").to_string();
            ConfigError::new(field, format!("{}: {}", path.display(), e.message()))
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        layer.resolve_paths(&base);
        Ok(layer)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.workspace_roots.iter_mut().flatten().for_each(fix);
        self.output_dir.iter_mut().for_each(fix);
        self.fixture_path.iter_mut().for_each(fix);
        self.run_log.iter_mut().for_each(fix);
        self.runners.values_mut().for_each(|r| r.resolve_paths(base));
    }

    /// Reads `TESTPILOT_*` variables through `var`. `TESTPILOT_WORKSPACE_ROOTS`
    /// is a platform path list.
    pub fn from_env(var: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        fn parsed<T: std::str::FromStr>(
            var: &impl Fn(&str) -> Option<String>,
            field: &str,
        ) -> Result<Option<T>, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            let name = format!("{ENV_PREFIX}{}", field.to_ascii_uppercase());
            match var(&name).filter(|v| !v.trim().is_empty()) {
                None => Ok(None),
                Some(v) => v.trim().parse().map(Some).map_err(|e| ConfigError::new(field, format!("{name}: {e}"))),
            }
        }
        let roots: Option<String> = parsed(&var, "workspace_roots")?;
        Ok(ConfigLayer {
            workspace_roots: roots.map(|r| std::env::split_paths(&r).collect()),
            output_dir: parsed(&var, "output_dir")?,
            provider: parsed(&var, "provider")?,
            model: parsed(&var, "model")?,
            credential_env_var: parsed(&var, "credential_env_var")?,
            gateway_mode: parsed(&var, "gateway_mode")?,
            fixture_path: parsed(&var, "fixture_path")?,
            llm_timeout_s: parsed(&var, "llm_timeout_s")?,
            runner_timeout_s: parsed(&var, "runner_timeout_s")?,
            prompt_size_budget_bytes: parsed(&var, "prompt_size_budget_bytes")?,
            listen_address: parsed(&var, "listen_address")?,
            run_log: parsed(&var, "run_log")?,
            lock_timeout_s: parsed(&var, "lock_timeout_s")?,
            dot_renderer: parsed(&var, "dot_renderer")?,
            runners: BTreeMap::new(),
        })
    }

    fn apply(self, config: &mut ServiceConfig) {
        if let Some(provider) = self.provider {
            if provider != config.provider {
                // the provider's own defaults unless this layer names them
                config.model = provider.default_model().into();
                config.credential_env_var = provider.default_credential_env().into();
            }
            config.provider = provider;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = self.$field { config.$field = v; })*};
        }
        set!(
            workspace_roots,
            output_dir,
            model,
            credential_env_var,
            gateway_mode,
            llm_timeout_s,
            runner_timeout_s,
            prompt_size_budget_bytes,
            listen_address,
            lock_timeout_s,
            dot_renderer
        );
        if self.fixture_path.is_some() {
            config.fixture_path = self.fixture_path;
        }
        if self.run_log.is_some() {
            config.run_log = self.run_log;
        }
        config.runners.extend(self.runners);
    }
}

/// Merges the layers over the defaults and validates the result.
pub fn merge_layers(layers: impl IntoIterator<Item = ConfigLayer>) -> Result<ServiceConfig, ConfigError> {
    let mut config = ServiceConfig::default();
    for layer in layers {
        layer.apply(&mut config);
    }
    config.validate()?;
    Ok(config)
}

/// Defaults, then `file` (if any), then the process environment, then `flags`.
pub fn load_config(file: Option<&Path>, flags: ConfigLayer) -> Result<ServiceConfig, ConfigError> {
    load_config_with_env(file, |k| std::env::var(k).ok(), flags)
}

pub fn load_config_with_env(
    file: Option<&Path>,
    var: impl Fn(&str) -> Option<String>,
    flags: ConfigLayer,
) -> Result<ServiceConfig, ConfigError> {
    let mut layers = Vec::new();
    if let Some(path) = file {
        layers.push(ConfigLayer::from_file(path)?);
    }
    layers.push(ConfigLayer::from_env(var)?);
    layers.push(flags);
    merge_layers(layers)
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workspace_roots.is_empty() {
            return Err(ConfigError::new("workspace_roots", "at least one workspace root is required"));
        }
        if self.gateway_mode == GatewayMode::Replay && self.fixture_path.is_none() {
            return Err(ConfigError::new("fixture_path", "replay mode requires a fixture file"));
        }
        if self.gateway_mode == GatewayMode::Record && self.fixture_path.is_none() {
            return Err(ConfigError::new("fixture_path", "record mode requires a fixture file"));
        }
        for (field, value) in [
            ("llm_timeout_s", self.llm_timeout_s),
            ("runner_timeout_s", self.runner_timeout_s),
            ("lock_timeout_s", self.lock_timeout_s),
            ("prompt_size_budget_bytes", self.prompt_size_budget_bytes as u64),
        ] {
            if value == 0 {
                return Err(ConfigError::new(field, "must be positive"));
            }
        }
        if self.model.trim().is_empty() {
            return Err(ConfigError::new("model", "must not be empty"));
        }
        if self.credential_env_var.trim().is_empty() || self.credential_env_var.contains('=') {
            return Err(ConfigError::new("credential_env_var", "must name an environment variable"));
        }
        let port = self.listen_address.rsplit_once(':').map(|(host, port)| (host, port.parse::<u16>()));
        if !matches!(port, Some((host, Ok(_))) if !host.is_empty()) {
            return Err(ConfigError::new("listen_address", format!("`{}` is not host:port", self.listen_address)));
        }
        Ok(())
    }

    pub fn request_defaults(&self) -> RequestDefaults {
        RequestDefaults { model: self.model.clone(), ..RequestDefaults::for_provider(self.provider) }
    }

    pub fn gateway(&self) -> Result<LlmGateway, ConfigError> {
        let store_err = |e| ConfigError::new("fixture_path", format!("{e}"));
        let mut gateway = LlmGateway::new(self.gateway_mode, self.request_defaults())
            .with_timeout(Duration::from_secs(self.llm_timeout_s));
        if let Some(path) = &self.fixture_path {
            let store = match self.gateway_mode {
                GatewayMode::Replay => FixtureStore::load(path).map_err(store_err)?,
                GatewayMode::Record => FixtureStore::open(path).map_err(store_err)?,
                GatewayMode::Live => return Ok(gateway),
            };
            gateway = gateway.with_store(store);
        }
        if self.provider != Provider::Stub {
            gateway = gateway.with_transport(
                self.provider,
                Arc::new(HttpTransport::new(self.provider, self.credential_env_var.clone())),
            );
        }
        Ok(gateway)
    }

    pub fn adapters(&self) -> AdapterRegistry {
        let mut registry = AdapterRegistry::new();
        for language in TargetLanguage::ALL {
            let adapter = self.runners.get(&language).cloned().unwrap_or_else(|| AdapterConfig::default_for(language));
            registry.insert(adapter.build(language, Some(self.runner_timeout_s)));
        }
        registry
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            workspace_roots: self.workspace_roots.clone(),
            output_dir: self.output_dir.clone(),
            prompt_budget_bytes: self.prompt_size_budget_bytes,
            lock_timeout: Duration::from_secs(self.lock_timeout_s),
            dot_renderer: self.dot_renderer.clone(),
            run_log: self.run_log.clone(),
        }
    }

    pub fn pipeline(&self) -> Result<Pipeline, ConfigError> {
        Ok(Pipeline::new(self.pipeline_config(), Arc::new(self.gateway()?), self.adapters()))
    }

    /// Upper bound for answering one request: LLM and runner timeouts plus
    /// 30 seconds of slack.
    pub fn request_deadline(&self) -> Duration {
        Duration::from_secs(self.llm_timeout_s + self.runner_timeout_s + 30)
    }
}
