//! Schema-checked edits of single draft fields addressed by path, e.g.
//! `title`, `archaeological_date_range.min`, `objects[0].creators`.

use chrono::NaiveDate;
use serde_json::{Map, Value};
use thiserror::Error;

use super::model::Deposit;
use super::schema::{schema_descriptor, FieldDef, Level, ValueKind};
use crate::identifiers::PersistentIdentifier;
use crate::report::{path_tokens, PathToken};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EditError {
    #[error("UNKNOWN_FIELD: {0}")]
    UnknownField(String),
    #[error("TYPE_MISMATCH: {path}: {reason}")]
    TypeMismatch { path: String, reason: String },
    #[error("NO_SUCH_INDEX: {0}")]
    NoSuchIndex(String),
}

impl EditError {
    pub fn code(&self) -> &'static str {
        match self {
            EditError::UnknownField(_) => "UNKNOWN_FIELD",
            EditError::TypeMismatch { .. } => "TYPE_MISMATCH",
            EditError::NoSuchIndex(_) => "NO_SUCH_INDEX",
        }
    }
}

/// Where a path lands: the schema field, plus an optional sub-key inside
/// composite values (`min`/`max` of a range, `name` of an agent).
struct Target {
    steps: Vec<Step>,
    field: FieldDef,
    sub_key: Option<String>,
}

enum Step {
    Key(String),
    Index(usize),
}

fn resolve_path(path: &str) -> Result<Target, EditError> {
    let schema = schema_descriptor();
    let unknown = || EditError::UnknownField(path.to_string());
    let mut tokens = path_tokens(path).peekable();
    let mut level = Level::Deposit;
    let mut steps = Vec::new();
    loop {
        let Some(PathToken::Key(key)) = tokens.next() else {
            return Err(unknown());
        };
        let field = schema.field(level, key).ok_or_else(unknown)?.clone();
        steps.push(Step::Key(key.to_string()));
        let child_level = match field.kind {
            ValueKind::ObjectList => Some(Level::Object),
            ValueKind::DocumentList => Some(Level::Document),
            _ => None,
        };
        match (child_level, tokens.peek()) {
            (Some(next), Some(PathToken::Index(i))) => {
                steps.push(Step::Index(*i));
                tokens.next();
                level = next;
                continue;
            }
            (_, None) => {
                return Ok(Target {
                    steps,
                    field,
                    sub_key: None,
                })
            }
            (None, Some(PathToken::Key(sub))) => {
                let allowed: &[&str] = match field.kind {
                    ValueKind::YearRange => &["min", "max"],
                    ValueKind::Agent => &["name", "role_note", "org"],
                    _ => &[],
                };
                let sub = sub.to_string();
                tokens.next();
                if !allowed.contains(&sub.as_str()) || tokens.next().is_some() {
                    return Err(unknown());
                }
                return Ok(Target {
                    steps,
                    field,
                    sub_key: Some(sub),
                });
            }
            _ => return Err(unknown()),
        }
    }
}

fn mismatch(path: &str, reason: impl Into<String>) -> EditError {
    EditError::TypeMismatch {
        path: path.to_string(),
        reason: reason.into(),
    }
}

fn parse_json(path: &str, raw: &str) -> Result<Value, EditError> {
    serde_json::from_str(raw).map_err(|e| mismatch(path, format!("expected JSON: {e}")))
}

fn parse_int(path: &str, raw: &str) -> Result<Value, EditError> {
    raw.trim()
        .parse::<i64>()
        .map(Value::from)
        .map_err(|_| mismatch(path, format!("'{raw}' is not an integer")))
}

fn split_list(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(';').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_value(path: &str, target: &Target, raw: &str) -> Result<Value, EditError> {
    let field = &target.field;
    if let Some(sub) = &target.sub_key {
        return match (field.kind, sub.as_str()) {
            (ValueKind::YearRange, _) => parse_int(path, raw),
            (ValueKind::Agent, "name") => Ok(Value::from(raw)),
            (ValueKind::Agent, _) if raw.is_empty() => Ok(Value::Null),
            _ => Ok(Value::from(raw)),
        };
    }
    let value = match field.kind {
        ValueKind::Integer => parse_int(path, raw)?,
        ValueKind::Text | ValueKind::LongText => Value::from(raw),
        ValueKind::Date => {
            if raw.is_empty() {
                Value::Null
            } else {
                NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
                    .map_err(|_| mismatch(path, format!("'{raw}' is not a YYYY-MM-DD date")))?;
                Value::from(raw.trim())
            }
        }
        ValueKind::YearRange => {
            if raw.is_empty() {
                Value::Null
            } else if raw.trim_start().starts_with('{') {
                parse_json(path, raw)?
            } else {
                // "<min>/<max>", either may be negative
                let (min, max) = raw
                    .split_once('/')
                    .ok_or_else(|| mismatch(path, "expected <min>/<max>"))?;
                let mut m = Map::new();
                m.insert("min".into(), parse_int(path, min)?);
                m.insert("max".into(), parse_int(path, max)?);
                Value::Object(m)
            }
        }
        ValueKind::Agent => {
            if raw.trim_start().starts_with('{') {
                parse_json(path, raw)?
            } else if raw.is_empty() {
                Value::Null
            } else {
                serde_json::json!({ "name": raw })
            }
        }
        ValueKind::AgentList => {
            if raw.trim_start().starts_with('[') {
                parse_json(path, raw)?
            } else {
                Value::Array(split_list(raw).map(|n| serde_json::json!({ "name": n })).collect())
            }
        }
        ValueKind::TextList => {
            if raw.trim_start().starts_with('[') {
                parse_json(path, raw)?
            } else {
                Value::Array(split_list(raw).map(Value::from).collect())
            }
        }
        ValueKind::Enum => {
            if let Some(domain) = &field.domain {
                if !domain.iter().any(|v| v == raw) {
                    return Err(mismatch(
                        path,
                        format!("'{raw}' is not one of {}", domain.join(", ")),
                    ));
                }
            }
            Value::from(raw)
        }
        ValueKind::Pid => {
            if raw.is_empty() {
                Value::Null
            } else {
                let pid = PersistentIdentifier::parse(raw).map_err(|e| mismatch(path, e.to_string()))?;
                Value::from(pid.to_string())
            }
        }
        ValueKind::DocumentRef => {
            if raw.is_empty() {
                Value::Null
            } else {
                Value::from(raw)
            }
        }
        ValueKind::VocabList
        | ValueKind::ObjectList
        | ValueKind::DocumentList
        | ValueKind::Storage
        | ValueKind::RelationList => parse_json(path, raw)?,
    };
    Ok(value)
}

/// Sets one field of a draft, checking the value against the schema.
/// Returns the edited copy; the input is untouched on error.
pub fn set_field(deposit: &Deposit, path: &str, raw: &str) -> Result<Deposit, EditError> {
    let target = resolve_path(path)?;
    let new_value = parse_value(path, &target, raw)?;

    let mut root = serde_json::to_value(deposit).expect("deposit serializes");
    let mut slot = &mut root;
    for step in &target.steps {
        slot = match step {
            Step::Key(k) => slot
                .get_mut(k.as_str())
                .ok_or_else(|| EditError::UnknownField(path.to_string()))?,
            Step::Index(i) => slot
                .get_mut(*i)
                .ok_or_else(|| EditError::NoSuchIndex(path.to_string()))?,
        };
    }
    match &target.sub_key {
        None => *slot = new_value,
        Some(sub) => {
            if slot.is_null() {
                // a fresh range starts as a single year; a fresh agent unnamed
                *slot = match target.field.kind {
                    ValueKind::YearRange => serde_json::json!({ "min": new_value, "max": new_value }),
                    _ => serde_json::json!({ "name": "" }),
                };
            }
            slot.as_object_mut()
                .expect("composite field is an object")
                .insert(sub.clone(), new_value);
        }
    }
    serde_json::from_value(root).map_err(|e| mismatch(path, e.to_string()))
}

/// Reads the JSON value at `path`.
pub fn get_field(deposit: &Deposit, path: &str) -> Result<Value, EditError> {
    let target = resolve_path(path)?;
    let root = serde_json::to_value(deposit).expect("deposit serializes");
    let mut slot = &root;
    for step in &target.steps {
        slot = match step {
            Step::Key(k) => slot
                .get(k.as_str())
                .ok_or_else(|| EditError::UnknownField(path.to_string()))?,
            Step::Index(i) => slot
                .get(*i)
                .ok_or_else(|| EditError::NoSuchIndex(path.to_string()))?,
        };
    }
    Ok(match &target.sub_key {
        Some(sub) => slot.get(sub.as_str()).cloned().unwrap_or(Value::Null),
        None => slot.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{validate_deposit, Agent, NatureOfDeposit};

    #[test]
    fn sets_range_bounds_one_at_a_time() {
        let d = Deposit::default();
        let d = set_field(&d, "archaeological_date_range.min", "120").unwrap();
        let d = set_field(&d, "archaeological_date_range.max", "80").unwrap();
        let r = d.archaeological_date_range.unwrap();
        assert_eq!((r.min, r.max), (120, 80));
        assert!(validate_deposit(&d).has_error("RANGE_INVERTED"));
    }

    #[test]
    fn type_errors_and_unknown_fields() {
        let d = Deposit::default();
        assert_eq!(set_field(&d, "local_id", "abc").unwrap_err().code(), "TYPE_MISMATCH");
        assert_eq!(set_field(&d, "local_id", "-3").unwrap_err().code(), "TYPE_MISMATCH");
        assert_eq!(set_field(&d, "deposit_date", "2015-13-01").unwrap_err().code(), "TYPE_MISMATCH");
        assert_eq!(set_field(&d, "nature_of_deposit", "scan").unwrap_err().code(), "TYPE_MISMATCH");
        assert_eq!(set_field(&d, "no_such_field", "x").unwrap_err().code(), "UNKNOWN_FIELD");
        assert_eq!(set_field(&d, "title.min", "x").unwrap_err().code(), "UNKNOWN_FIELD");
        assert_eq!(set_field(&d, "objects[0].title", "x").unwrap_err().code(), "NO_SUCH_INDEX");
    }

    #[test]
    fn sets_scalars_agents_and_nested_object_fields() {
        let mut d = Deposit::default();
        d.objects.push(Default::default());
        let d = set_field(&d, "title", "Les thermes de Chassenon").unwrap();
        let d = set_field(&d, "nature_of_deposit", "digitisation").unwrap();
        let d = set_field(&d, "deposit_creator", "Archeovision").unwrap();
        let d = set_field(&d, "objects[0].creators", "A; B").unwrap();
        let d = set_field(&d, "objects[0].creation_3d_date", "2015-06-01").unwrap();
        assert_eq!(d.title, "Les thermes de Chassenon");
        assert_eq!(d.nature_of_deposit, Some(NatureOfDeposit::Digitisation));
        assert_eq!(d.deposit_creator, Some(Agent::named("Archeovision")));
        assert_eq!(d.objects[0].creators, vec![Agent::named("A"), Agent::named("B")]);
        assert_eq!(get_field(&d, "objects[0].creation_3d_date").unwrap(), Value::from("2015-06-01"));
    }

    #[test]
    fn pid_is_checked() {
        let d = Deposit::default();
        assert_eq!(set_field(&d, "pid", "10.34969/CND3D/1.x.2020").unwrap_err().code(), "TYPE_MISMATCH");
        let d = set_field(&d, "pid", "10.34969/CND3D/1.d.2020").unwrap();
        assert_eq!(d.pid.unwrap().to_string(), "10.34969/CND3D/1.d.2020");
    }
}
