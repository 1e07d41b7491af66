use serde::{Deserialize, Serialize};

/// Ordered: every role can do what the roles below it can.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Public,
    Depositor,
    Curator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caller {
    pub role: Role,
    /// `None` for anonymous callers.
    pub user: Option<String>,
}

impl Caller {
    pub fn anonymous() -> Self {
        Caller {
            role: Role::Public,
            user: None,
        }
    }

    pub fn new(role: Role, user: impl Into<String>) -> Self {
        Caller {
            role,
            user: Some(user.into()),
        }
    }

    pub fn is_curator(&self) -> bool {
        self.role == Role::Curator
    }

    pub fn owns(&self, owner: &str) -> bool {
        self.user.as_deref() == Some(owner)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenEntry {
    pub token: String,
    pub role: Role,
    pub user: String,
}

/// Static bearer tokens from the configuration file.
#[derive(Debug, Clone, Default)]
pub struct TokenTable {
    entries: Vec<TokenEntry>,
}

impl TokenTable {
    pub fn new(entries: Vec<TokenEntry>) -> Self {
        TokenTable { entries }
    }

    /// `None` token means anonymous; an unknown token gives `None`.
    pub fn resolve(&self, token: Option<&str>) -> Option<Caller> {
        let Some(token) = token else {
            return Some(Caller::anonymous());
        };
        self.entries
            .iter()
            .find(|e| constant_time_eq(e.token.as_bytes(), token.as_bytes()))
            .map(|e| Caller::new(e.role, e.user.clone()))
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roles_are_ordered() {
        assert!(Role::Public < Role::Depositor && Role::Depositor < Role::Curator);
    }

    #[test]
    fn token_resolution() {
        let t = TokenTable::new(vec![TokenEntry {
            token: "s3cret".into(),
            role: Role::Depositor,
            user: "alice".into(),
        }]);
        assert_eq!(t.resolve(None).unwrap(), Caller::anonymous());
        assert_eq!(t.resolve(Some("s3cret")).unwrap(), Caller::new(Role::Depositor, "alice"));
        assert!(t.resolve(Some("s3cre")).is_none());
    }
}
