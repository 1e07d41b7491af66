//! Machine-readable description of the three metadata levels. Drives CLI
//! field editing and the web forms.

use serde::{Deserialize, Serialize};

use super::model::{MediaRole, KNOWN_CATEGORIES, KNOWN_NATURES_OF_RESOURCE};
use crate::vocab::Scheme;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Deposit,
    Object,
    Document,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Integer,
    Text,
    LongText,
    Date,
    YearRange,
    Agent,
    AgentList,
    VocabList,
    TextList,
    Enum,
    Pid,
    ObjectList,
    DocumentList,
    Storage,
    RelationList,
    /// Filename of a document of the same object.
    DocumentRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDef {
    pub key: String,
    pub label: String,
    pub kind: ValueKind,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<String>>,
    /// Unknown values outside `domain` are warnings rather than errors.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub open_domain: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSchema {
    pub level: Level,
    pub fields: Vec<FieldDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDescriptor {
    pub version: String,
    pub levels: Vec<LevelSchema>,
}

impl SchemaDescriptor {
    pub fn level(&self, level: Level) -> &LevelSchema {
        self.levels
            .iter()
            .find(|l| l.level == level)
            .expect("descriptor has every level")
    }

    pub fn field(&self, level: Level, key: &str) -> Option<&FieldDef> {
        self.level(level).fields.iter().find(|f| f.key == key)
    }

    pub fn required_keys(&self, level: Level) -> Vec<&str> {
        self.level(level)
            .fields
            .iter()
            .filter(|f| f.required)
            .map(|f| f.key.as_str())
            .collect()
    }
}

struct F(FieldDef);

impl F {
    fn new(key: &str, label: &str, kind: ValueKind) -> Self {
        F(FieldDef {
            key: key.into(),
            label: label.into(),
            kind,
            required: false,
            domain: None,
            open_domain: false,
            scheme: None,
        })
    }

    fn required(mut self) -> Self {
        self.0.required = true;
        self
    }

    fn domain(mut self, values: &[&str], open: bool) -> Self {
        self.0.domain = Some(values.iter().map(|v| v.to_string()).collect());
        self.0.open_domain = open;
        self
    }

    fn scheme(mut self, scheme: Scheme) -> Self {
        self.0.scheme = Some(scheme);
        self
    }
}

pub fn schema_descriptor() -> SchemaDescriptor {
    use ValueKind::*;

    let deposit = vec![
        F::new("local_id", "Identifier", Integer).required(),
        F::new("pid", "DOI", Pid),
        F::new("title", "Title", Text).required(),
        F::new("deposit_creator", "Deposit creator", Agent).required(),
        F::new("silent_partners", "Silent Partner", AgentList),
        F::new("nature_of_resource", "Nature of resource", Text)
            .required()
            .domain(&KNOWN_NATURES_OF_RESOURCE, true),
        F::new("nature_of_deposit", "Nature of the deposit", Enum)
            .required()
            .domain(&["digitisation", "restitution", "mixed"], false),
        F::new("scientific_objectives", "Scientific and technical objectives", LongText).required(),
        F::new("deposit_date", "Date of Deposit", Date).required(),
        F::new("project_date_range", "Project date", YearRange).required(),
        F::new("archaeological_date_range", "Min. / Max. archaeological date", YearRange).required(),
        F::new("period_terms", "Period", VocabList).scheme(Scheme::PeriodO),
        F::new("place_terms", "Place", VocabList).scheme(Scheme::Geonames),
        F::new("subject_terms", "Subjects", VocabList).scheme(Scheme::Pactols),
        F::new("citation", "Citation", LongText).required(),
        F::new("related_publications", "Related publications", TextList),
        F::new("objects", "Content of Deposit", ObjectList),
        F::new("access_policy", "Access", Enum).domain(&["public", "restricted"], false),
        F::new("status", "Status", Enum).domain(&["draft", "published"], false),
    ];

    let object = vec![
        F::new("local_id", "Identifier", Integer).required(),
        F::new("pid", "DOI", Pid),
        F::new("title", "Title", Text).required(),
        F::new("creators", "Creator(s)", AgentList).required(),
        F::new("contributors", "Contributor(s)", AgentList),
        F::new("creation_3d_date", "3D date", Date).required(),
        F::new("archaeological_date", "Archaeological date", YearRange).required(),
        F::new("version", "Version", Text).required(),
        F::new("category", "Category", Text)
            .required()
            .domain(&KNOWN_CATEGORIES, true),
        F::new("documents", "Documents", DocumentList),
        F::new("final_model", "Final model", DocumentRef),
    ];

    let roles: Vec<&str> = MediaRole::ALL.iter().map(|r| r.as_str()).collect();
    let document = vec![
        F::new("filename", "File name", Text).required(),
        F::new("media_role", "Role", Enum).required().domain(&roles, false),
        F::new("byte_size", "Size (bytes)", Integer).required(),
        F::new("checksum", "SHA-256", Text).required(),
        F::new("format_class", "Format class", Enum)
            .required()
            .domain(&["Archivable", "DepositOnly"], false),
        F::new("storage", "Storage", Storage).required(),
        F::new("relations", "Relations", RelationList),
    ];

    let level = |level, fields: Vec<F>| LevelSchema {
        level,
        fields: fields.into_iter().map(|f| f.0).collect(),
    };
    SchemaDescriptor {
        version: SCHEMA_VERSION.to_string(),
        levels: vec![
            level(Level::Deposit, deposit),
            level(Level::Object, object),
            level(Level::Document, document),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Deposit, DocumentRecord, VirtualObject};
    use std::collections::BTreeSet;

    fn keys_of<T: Serialize>(v: &T) -> Vec<String> {
        match serde_json::to_value(v).unwrap() {
            serde_json::Value::Object(m) => m.keys().cloned().collect(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn descriptor_keys_match_serialized_keys() {
        let schema = schema_descriptor();
        for (level, keys) in [
            (Level::Deposit, keys_of(&Deposit::default())),
            (Level::Object, keys_of(&VirtualObject::default())),
            (Level::Document, keys_of(&DocumentRecord::default())),
        ] {
            let described: BTreeSet<String> =
                schema.level(level).fields.iter().map(|f| f.key.clone()).collect();
            let actual: BTreeSet<String> = keys.into_iter().collect();
            assert_eq!(described, actual, "{level:?}");
            assert_eq!(described.len(), schema.level(level).fields.len(), "duplicate key at {level:?}");
        }
    }

    #[test]
    fn carries_deposit_page_labels() {
        let schema = schema_descriptor();
        let labels = |level| -> Vec<&str> {
            schema.level(level).fields.iter().map(|f| f.label.as_str()).collect()
        };
        assert!(labels(Level::Deposit).contains(&"Scientific and technical objectives"));
        assert!(labels(Level::Object).contains(&"3D date"));
    }

    #[test]
    fn serialization_round_trip() {
        let schema = schema_descriptor();
        let json = serde_json::to_string(&schema).unwrap();
        let back: SchemaDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(back, schema);
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }
}
