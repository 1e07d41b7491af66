use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::formats::FormatClass;
use crate::identifiers::PersistentIdentifier;
use crate::vocab::Scheme;

/// Values of "Nature of resource" that validate without a warning.
pub const KNOWN_NATURES_OF_RESOURCE: [&str; 4] = ["3d-model", "point-cloud", "scene", "collection"];
/// Values of an object's "Category" that validate without a warning.
pub const KNOWN_CATEGORIES: [&str; 3] = ["mesh", "point-cloud", "scene"];

/// Root archival unit: project metadata plus an ordered list of virtual
/// objects.
///
/// Every field defaults so that incomplete drafts deserialize; completeness
/// is the job of [`validate_deposit`](super::validate_deposit).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Deposit {
    pub local_id: u64,
    pub pid: Option<PersistentIdentifier>,
    pub title: String,
    pub deposit_creator: Option<Agent>,
    pub silent_partners: Vec<Agent>,
    pub nature_of_resource: String,
    pub nature_of_deposit: Option<NatureOfDeposit>,
    pub scientific_objectives: String,
    pub deposit_date: Option<NaiveDate>,
    pub project_date_range: Option<DateRange>,
    pub archaeological_date_range: Option<ArchaeoDateRange>,
    pub period_terms: Vec<VocabularyRef>,
    pub place_terms: Vec<VocabularyRef>,
    pub subject_terms: Vec<VocabularyRef>,
    pub citation: String,
    pub related_publications: Vec<String>,
    pub objects: Vec<VirtualObject>,
    pub access_policy: AccessPolicy,
    pub status: DepositStatus,
}

impl Deposit {
    pub fn object(&self, local_id: u64) -> Option<&VirtualObject> {
        self.objects.iter().find(|o| o.local_id == local_id)
    }

    pub fn object_mut(&mut self, local_id: u64) -> Option<&mut VirtualObject> {
        self.objects.iter_mut().find(|o| o.local_id == local_id)
    }

    pub fn is_published(&self) -> bool {
        self.status == DepositStatus::Published
    }

    pub fn documents(&self) -> impl Iterator<Item = (&VirtualObject, &DocumentRecord)> {
        self.objects
            .iter()
            .flat_map(|o| o.documents.iter().map(move |d| (o, d)))
    }

    /// Canonical JSON interchange form: pretty-printed, keys in schema order.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("deposit serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// One coherent digitised or restituted entity and its documents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VirtualObject {
    pub local_id: u64,
    pub pid: Option<PersistentIdentifier>,
    pub title: String,
    pub creators: Vec<Agent>,
    pub contributors: Vec<Agent>,
    pub creation_3d_date: Option<NaiveDate>,
    pub archaeological_date: Option<ArchaeoDateRange>,
    pub version: String,
    pub category: String,
    pub documents: Vec<DocumentRecord>,
    /// Filename of the document holding the final model.
    pub final_model: Option<String>,
}

impl VirtualObject {
    pub fn document(&self, filename: &str) -> Option<&DocumentRecord> {
        self.documents.iter().find(|d| d.filename == filename)
    }

    pub fn document_mut(&mut self, filename: &str) -> Option<&mut DocumentRecord> {
        self.documents.iter_mut().find(|d| d.filename == filename)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DocumentRecord {
    pub filename: String,
    pub media_role: Option<MediaRole>,
    pub byte_size: Option<u64>,
    /// Lowercase hex SHA-256 of the file content.
    pub checksum: String,
    pub format_class: Option<FormatClass>,
    pub storage: Option<StorageRef>,
    pub relations: Vec<Relation>,
}

impl DocumentRecord {
    pub fn is_external(&self) -> bool {
        matches!(self.storage, Some(StorageRef::External { .. }))
    }
}

/// Where a document's bytes live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum StorageRef {
    /// Key resolved by whoever holds the bytes: a blob digest in the
    /// service, a path relative to the draft file offline, a
    /// package-relative path inside an archive package.
    Internal { key: String },
    /// Held elsewhere; the repository only keeps the reference.
    External { url: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MediaRole {
    FinalModel,
    SourceScan,
    Texture,
    Image,
    Plan,
    Report,
    Other,
}

impl MediaRole {
    pub const ALL: [MediaRole; 7] = [
        MediaRole::FinalModel,
        MediaRole::SourceScan,
        MediaRole::Texture,
        MediaRole::Image,
        MediaRole::Plan,
        MediaRole::Report,
        MediaRole::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MediaRole::FinalModel => "final-model",
            MediaRole::SourceScan => "source-scan",
            MediaRole::Texture => "texture",
            MediaRole::Image => "image",
            MediaRole::Plan => "plan",
            MediaRole::Report => "report",
            MediaRole::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relation {
    pub relation_kind: RelationKind,
    /// Filename of another document of the same virtual object.
    pub target: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationKind {
    TextureOf,
    DerivedFrom,
    Documents,
    PartOf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Agent {
    pub name: String,
    pub role_note: Option<String>,
    pub org: Option<String>,
}

impl Agent {
    pub fn named(name: impl Into<String>) -> Self {
        Agent {
            name: name.into(),
            ..Agent::default()
        }
    }
}

/// Inclusive range of signed years; negative years are BCE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YearRange {
    pub min: i32,
    pub max: i32,
}

impl YearRange {
    pub fn new(min: i32, max: i32) -> Self {
        YearRange { min, max }
    }

    pub fn is_ordered(&self) -> bool {
        self.min <= self.max
    }
}

pub type DateRange = YearRange;
pub type ArchaeoDateRange = YearRange;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabularyRef {
    pub scheme: Scheme,
    pub uri: String,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NatureOfDeposit {
    Digitisation,
    Restitution,
    Mixed,
}

impl NatureOfDeposit {
    pub fn as_str(self) -> &'static str {
        match self {
            NatureOfDeposit::Digitisation => "digitisation",
            NatureOfDeposit::Restitution => "restitution",
            NatureOfDeposit::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessPolicy {
    #[default]
    Public,
    Restricted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepositStatus {
    #[default]
    Draft,
    Published,
}
