use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use depot3d_core::formats::ArchivableWhitelist;
use depot3d_core::identifiers::PidConfig;
use serde::{Deserialize, Serialize};

use crate::auth::TokenEntry;

/// Service configuration, read from TOML:
///
/// ```toml
/// listen = "127.0.0.1:8080"
/// repo_id = "depot3d.example.org"
/// data_dir = "data"
/// oai_page_size = 10
/// whitelist = ["ply", "dae", "txt", "pdf", "png", "tiff"]
///
/// [pid]
/// prefix = "10.34969"
/// namespace = "CND3D"
///
/// [[tokens]]
/// token = "change-me"
/// role = "depositor"
/// user = "alice"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub repo_id: String,
    pub repo_name: String,
    pub admin_email: String,
    /// Public URL of the OAI endpoint; derived from `listen` when empty.
    pub base_url: String,
    pub data_dir: PathBuf,
    pub oai_page_size: usize,
    pub search_page_size: usize,
    pub pid: PidConfig,
    pub whitelist: ArchivableWhitelist,
    pub tokens: Vec<TokenEntry>,
    pub vocab: VocabConfig,
    /// Built web client to serve at `/`, if any.
    pub static_dir: Option<PathBuf>,
    pub preview_target: usize,
}

/// Extra vocabulary fixtures; the bundled samples are always loaded first
/// and a file given here replaces the bundled entries of its scheme.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabConfig {
    pub periodo: Option<PathBuf>,
    pub geonames: Option<PathBuf>,
    pub pactols: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            repo_id: "depot3d.localhost".to_string(),
            repo_name: "depot3d 3D data repository".to_string(),
            admin_email: "admin@localhost".to_string(),
            base_url: String::new(),
            data_dir: PathBuf::from("depot3d-data"),
            oai_page_size: 100,
            search_page_size: 20,
            pid: PidConfig::default(),
            whitelist: ArchivableWhitelist::default(),
            tokens: Vec::new(),
            vocab: VocabConfig::default(),
            static_dir: None,
            preview_target: depot3d_core::formats::PREVIEW_DEFAULT_TARGET,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ServiceConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        // relative paths are relative to the config file
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.data_dir);
        if let Some(p) = cfg.static_dir.as_mut() {
            fix(p);
        }
        for p in [&mut cfg.vocab.periodo, &mut cfg.vocab.geonames, &mut cfg.vocab.pactols]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.oai_page_size == 0 || self.search_page_size == 0 {
            return Err(ConfigError::Invalid("page sizes must be positive".into()));
        }
        if self.repo_id.is_empty() || self.repo_id.contains(char::is_whitespace) {
            return Err(ConfigError::Invalid("repo_id must be a non-empty token".into()));
        }
        depot3d_core::identifiers::PersistentIdentifier::new(
            &self.pid.prefix,
            &self.pid.namespace,
            depot3d_core::identifiers::PidKind::Deposit,
            1,
            2000,
        )
        .map_err(|e| ConfigError::Invalid(format!("pid settings: {e}")))?;
        let mut seen = std::collections::HashSet::new();
        for t in &self.tokens {
            if t.token.len() < 8 {
                return Err(ConfigError::Invalid(format!("token for '{}' is shorter than 8 characters", t.user)));
            }
            if !seen.insert(&t.token) {
                return Err(ConfigError::Invalid("duplicate token".into()));
            }
        }
        if self.preview_target == 0 {
            return Err(ConfigError::Invalid("preview_target must be positive".into()));
        }
        Ok(())
    }

    pub fn oai_base_url(&self) -> String {
        if self.base_url.is_empty() {
            format!("http://{}/oai", self.listen)
        } else {
            self.base_url.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::Role;

    #[test]
    fn parses_documented_example() {
        let cfg = ServiceConfig::from_toml(
            r#"
            listen = "127.0.0.1:9000"
            repo_id = "depot3d.example.org"
            oai_page_size = 10
            whitelist = ["ply", "tif"]
            [pid]
            prefix = "10.34969"
            namespace = "CND3D"
            [[tokens]]
            token = "depositor-token"
            role = "depositor"
            user = "alice"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.oai_page_size, 10);
        assert!(cfg.whitelist.contains("tiff"));
        assert!(!cfg.whitelist.contains("pdf"));
        assert_eq!(cfg.tokens[0].role, Role::Depositor);
        assert_eq!(cfg.oai_base_url(), "http://127.0.0.1:9000/oai");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ServiceConfig::from_toml("oai_page_size = 0").is_err());
        assert!(ServiceConfig::from_toml("unknown_key = 1").is_err());
        assert!(ServiceConfig::from_toml("[pid]\nprefix = \"11.1\"\nnamespace = \"X\"").is_err());
        assert!(ServiceConfig::from_toml("[[tokens]]\ntoken = \"short\"\nrole = \"curator\"\nuser = \"c\"").is_err());
    }
}
