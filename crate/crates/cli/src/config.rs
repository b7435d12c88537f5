//! TOML configuration file. Secrets never live here: the HTTP backend
//! reads its token from the environment variable named by `http.token_env`.

use std::path::{Path, PathBuf};

use finagent::llm::{HttpBackendConfig, LlmConfig};
use finagent::orchestrator::OrchestratorConfig;
use finagent::sandbox::SandboxConfig;
use finagent::search::SearchConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub engine: EngineSection,
    pub llm: LlmConfig,
    pub search: SearchConfig,
    pub sandbox: SandboxConfig,
    pub http: HttpBackendConfig,
    pub web_search: WebSearchSection,
    pub prompts: PromptsSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub max_steps: u32,
    pub reflexion_enabled: bool,
    pub artifact_root: Option<PathBuf>,
    pub embedding_dim: usize,
}

impl Default for EngineSection {
    fn default() -> Self {
        let d = OrchestratorConfig::default();
        Self {
            max_steps: d.max_steps,
            reflexion_enabled: d.reflexion_enabled,
            artifact_root: d.artifact_root,
            embedding_dim: finagent::search::HashEmbedder::DEFAULT_DIM,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WebSearchSection {
    /// JSON file of canned results; no provider when unset.
    pub canned: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptsSection {
    /// Directory with template overrides.
    pub dir: Option<PathBuf>,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn orchestrator(&self) -> OrchestratorConfig {
        OrchestratorConfig {
            max_steps: self.engine.max_steps,
            llm: self.llm.clone(),
            search: self.search.clone(),
            sandbox: self.sandbox.clone(),
            reflexion_enabled: self.engine.reflexion_enabled,
            artifact_root: self.engine.artifact_root.clone(),
        }
    }
}
