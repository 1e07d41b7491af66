//! Core of the depot3d repository: the deposit catalog, persistent
//! identifiers, 3D format checks, archive packages and controlled
//! vocabularies.

pub mod catalog;
pub mod digest;
pub mod formats;
pub mod identifiers;
pub mod package;
pub mod report;
pub mod sample;
pub mod vocab;
pub mod xml;

pub use catalog::{
    to_dublin_core, validate_deposit, Agent, CatalogError, DcRecord, Deposit, DocumentRecord, MediaRole,
    StorageRef, VirtualObject,
};
pub use formats::{classify, ArchivableWhitelist, FormatClass, FormatVerdict, PlyModel};
pub use identifiers::{PersistentIdentifier, PidKind, PidRegistry};
pub use package::{build_package, load_package, verify_package, ArchivePackage, Manifest, PackageError};
pub use report::{Issue, ValidationReport};
pub use vocab::{Scheme, VocabIndex, VocabularyEntry};
