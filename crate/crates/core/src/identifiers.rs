//! DOI-shaped persistent identifiers for deposits and virtual objects.
//!
//! The canonical form is `<prefix>/<namespace>/<local_id>.<kind>.<year>`,
//! e.g. `10.34969/CND3D/257350.d.2015`, where the kind letter is `d` for a
//! deposit and `o` for a virtual object.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const DEFAULT_PREFIX: &str = "10.34969";
pub const DEFAULT_NAMESPACE: &str = "CND3D";
pub const RESOLVER_BASE: &str = "https://doi.org/";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdentifierError {
    #[error("MALFORMED: {0}")]
    Malformed(String),
    #[error("DUPLICATE_ID: {0} was already minted")]
    DuplicateId(String),
    #[error("MALFORMED: local id must be positive")]
    ZeroLocalId,
}

impl IdentifierError {
    pub fn code(&self) -> &'static str {
        match self {
            IdentifierError::Malformed(_) | IdentifierError::ZeroLocalId => "MALFORMED",
            IdentifierError::DuplicateId(_) => "DUPLICATE_ID",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PidKind {
    Deposit,
    Object,
}

impl PidKind {
    pub fn letter(self) -> char {
        match self {
            PidKind::Deposit => 'd',
            PidKind::Object => 'o',
        }
    }

    fn from_letter(s: &str) -> Option<Self> {
        match s {
            "d" | "D" => Some(PidKind::Deposit),
            "o" | "O" => Some(PidKind::Object),
            _ => None,
        }
    }
}

impl fmt::Display for PidKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PidKind::Deposit => "deposit",
            PidKind::Object => "object",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PersistentIdentifier {
    pub prefix: String,
    pub namespace: String,
    pub local_id: u64,
    pub kind: PidKind,
    pub year: u16,
}

impl PersistentIdentifier {
    /// Builds an identifier from already-validated parts.
    pub fn new(
        prefix: impl Into<String>,
        namespace: impl Into<String>,
        kind: PidKind,
        local_id: u64,
        year: u16,
    ) -> Result<Self, IdentifierError> {
        let pid = PersistentIdentifier {
            prefix: prefix.into(),
            namespace: namespace.into(),
            local_id,
            kind,
            year,
        };
        check_prefix(&pid.prefix)?;
        check_namespace(&pid.namespace)?;
        if local_id == 0 {
            return Err(IdentifierError::ZeroLocalId);
        }
        if !(1000..=9999).contains(&year) {
            return Err(IdentifierError::Malformed(format!("year {year} is not 4 digits")));
        }
        Ok(pid)
    }

    pub fn canonical(&self) -> String {
        self.to_string()
    }

    pub fn resolve_url(&self) -> String {
        format!("{RESOLVER_BASE}{self}")
    }

    /// Parses a canonical identifier. A leading `https://doi.org/` or `doi:`
    /// and an uppercase kind letter are accepted and normalized away.
    pub fn parse(input: &str) -> Result<Self, IdentifierError> {
        let s = input.trim();
        let s = s
            .strip_prefix(RESOLVER_BASE)
            .or_else(|| s.strip_prefix("http://doi.org/"))
            .or_else(|| s.strip_prefix("doi:"))
            .unwrap_or(s);

        let segments: Vec<&str> = s.split('/').collect();
        let [prefix, namespace, suffix] = segments[..] else {
            return Err(IdentifierError::Malformed(format!(
                "expected 3 '/'-separated segments, found {}",
                segments.len()
            )));
        };
        check_prefix(prefix)?;
        check_namespace(namespace)?;

        let parts: Vec<&str> = suffix.split('.').collect();
        let [id, kind, year] = parts[..] else {
            return Err(IdentifierError::Malformed(format!(
                "suffix '{suffix}' must be <local_id>.<kind>.<year>"
            )));
        };
        if id.is_empty() || !id.bytes().all(|b| b.is_ascii_digit()) {
            return Err(IdentifierError::Malformed(format!("local id '{id}' is not numeric")));
        }
        if id.len() > 1 && id.starts_with('0') {
            return Err(IdentifierError::Malformed(format!("local id '{id}' has leading zeros")));
        }
        let local_id: u64 = id
            .parse()
            .map_err(|_| IdentifierError::Malformed(format!("local id '{id}' out of range")))?;
        let kind = PidKind::from_letter(kind)
            .ok_or_else(|| IdentifierError::Malformed(format!("unknown kind letter '{kind}'")))?;
        if year.len() != 4 || !year.bytes().all(|b| b.is_ascii_digit()) || year.starts_with('0') {
            return Err(IdentifierError::Malformed(format!("year '{year}' is not 4 digits")));
        }
        let year: u16 = year.parse().expect("4 ascii digits fit u16");
        PersistentIdentifier::new(prefix, namespace, kind, local_id, year)
    }
}

fn check_prefix(prefix: &str) -> Result<(), IdentifierError> {
    let ok = prefix
        .strip_prefix("10.")
        .map(|rest| {
            !rest.is_empty()
                && rest
                    .split('.')
                    .all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()))
        })
        .unwrap_or(false);
    if ok {
        Ok(())
    } else {
        Err(IdentifierError::Malformed(format!("prefix '{prefix}' is not a DOI prefix")))
    }
}

fn check_namespace(ns: &str) -> Result<(), IdentifierError> {
    if !ns.is_empty() && ns.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_') {
        Ok(())
    } else {
        Err(IdentifierError::Malformed(format!("namespace '{ns}' is invalid")))
    }
}

impl fmt::Display for PersistentIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}.{}.{}",
            self.prefix,
            self.namespace,
            self.local_id,
            self.kind.letter(),
            self.year
        )
    }
}

impl FromStr for PersistentIdentifier {
    type Err = IdentifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PersistentIdentifier::parse(s)
    }
}

impl Serialize for PersistentIdentifier {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PersistentIdentifier {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        PersistentIdentifier::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PidConfig {
    pub prefix: String,
    pub namespace: String,
}

impl Default for PidConfig {
    fn default() -> Self {
        PidConfig {
            prefix: DEFAULT_PREFIX.to_string(),
            namespace: DEFAULT_NAMESPACE.to_string(),
        }
    }
}

/// Local record of every identifier minted by this repository.
///
/// A `(kind, local_id)` pair is never minted twice. The registry is a plain
/// value: callers serialize access to it (the service keeps it behind its
/// single catalog writer).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PidRegistry {
    pub config: PidConfig,
    #[serde(with = "minted_list")]
    minted: BTreeMap<(PidKind, u64), PersistentIdentifier>,
}

mod minted_list {
    use super::*;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(PidKind, u64), PersistentIdentifier>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<(PidKind, u64), PersistentIdentifier>, D::Error> {
        let list = Vec::<PersistentIdentifier>::deserialize(d)?;
        let mut map = BTreeMap::new();
        for pid in list {
            if map.insert((pid.kind, pid.local_id), pid.clone()).is_some() {
                return Err(serde::de::Error::custom(format!("duplicate pid {pid}")));
            }
        }
        Ok(map)
    }
}

impl PidRegistry {
    pub fn new(config: PidConfig) -> Self {
        PidRegistry {
            config,
            minted: BTreeMap::new(),
        }
    }

    pub fn mint(
        &mut self,
        kind: PidKind,
        local_id: u64,
        year: u16,
    ) -> Result<PersistentIdentifier, IdentifierError> {
        let pid = PersistentIdentifier::new(
            self.config.prefix.clone(),
            self.config.namespace.clone(),
            kind,
            local_id,
            year,
        )?;
        if let Some(existing) = self.minted.get(&(kind, local_id)) {
            return Err(IdentifierError::DuplicateId(existing.to_string()));
        }
        self.minted.insert((kind, local_id), pid.clone());
        Ok(pid)
    }

    /// Mints with the next local id for `kind`, one above the highest ever
    /// minted, so automatic allocations strictly increase.
    pub fn mint_next(&mut self, kind: PidKind, year: u16) -> Result<PersistentIdentifier, IdentifierError> {
        let next = self.highest(kind).map_or(1, |h| h + 1);
        self.mint(kind, next, year)
    }

    pub fn highest(&self, kind: PidKind) -> Option<u64> {
        self.minted
            .range((kind, 0)..=(kind, u64::MAX))
            .next_back()
            .map(|((_, id), _)| *id)
    }

    pub fn contains(&self, pid: &PersistentIdentifier) -> bool {
        self.minted.get(&(pid.kind, pid.local_id)) == Some(pid)
    }

    pub fn len(&self) -> usize {
        self.minted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minted.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PersistentIdentifier> {
        self.minted.values()
    }
}
