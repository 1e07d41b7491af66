//! Deposit / virtual object / document model, validation and Dublin Core
//! export.

mod dublin_core;
mod edit;
mod model;
mod schema;
mod validate;

use thiserror::Error;

pub use dublin_core::{to_dublin_core, DcRecord, DCTERMS_NS, DC_NS, OAI_DC_NS, OAI_DC_SCHEMA};
pub use edit::{get_field, set_field, EditError};
pub use model::*;
pub use schema::{schema_descriptor, FieldDef, Level, LevelSchema, SchemaDescriptor, ValueKind, SCHEMA_VERSION};
pub use validate::{is_http_url, is_plain_filename, validate_deposit, validate_deposit_with, validate_for_publication};

use crate::report::ValidationReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("UNPUBLISHED: deposit has no persistent identifier")]
    Unpublished,
    #[error("VALIDATION_FAILED: {} error(s)", .0.errors.len())]
    Invalid(ValidationReport),
    #[error("INVALID_VALUE: publication identifier is empty")]
    EmptyPublicationId,
}

impl CatalogError {
    pub fn code(&self) -> &'static str {
        match self {
            CatalogError::Unpublished => "UNPUBLISHED",
            CatalogError::Invalid(_) => "VALIDATION_FAILED",
            CatalogError::EmptyPublicationId => "INVALID_VALUE",
        }
    }
}

/// Records a related publication (e.g. a HAL id) once.
pub fn link_publication(mut d: Deposit, pub_id: &str) -> Result<Deposit, CatalogError> {
    let id = pub_id.trim();
    if id.is_empty() {
        return Err(CatalogError::EmptyPublicationId);
    }
    if !d.related_publications.iter().any(|p| p == id) {
        d.related_publications.push(id.to_string());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linking_is_idempotent() {
        let d = link_publication(Deposit::default(), "hal-01526713").unwrap();
        let d = link_publication(d, "hal-01526713").unwrap();
        assert_eq!(d.related_publications, ["hal-01526713"]);
    }

    #[test]
    fn linking_into_empty_deposit() {
        let d = link_publication(Deposit::default(), "hal-02195914").unwrap();
        assert_eq!(d.related_publications.len(), 1);
        assert_eq!(link_publication(d, "  ").unwrap_err().code(), "INVALID_VALUE");
    }
}
