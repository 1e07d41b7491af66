//! Dublin Core crosswalk for published deposits.
//!
//! | deposit field                         | element                        |
//! |---------------------------------------|--------------------------------|
//! | title                                 | dc:title                       |
//! | deposit_creator, objects[].creators   | dc:creator (in order, deduped) |
//! | subject_terms                         | dc:subject (term uri)          |
//! | scientific_objectives                 | dc:description                 |
//! | silent_partners, objects[].contributors | dc:contributor (in order, deduped) |
//! | deposit_date                          | dc:date (ISO 8601)             |
//! | nature_of_resource, nature_of_deposit | dc:type                        |
//! | pid                                   | dc:identifier (resolver URL)   |
//! | related_publications                  | dc:relation                    |
//! | period_terms, place_terms             | dc:coverage (term uri)         |
//! | access_policy                         | dc:rights                      |
//! | citation                              | dcterms:bibliographicCitation  |
//! | objects[].pid                         | dcterms:hasPart (resolver URL) |

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::model::{AccessPolicy, Deposit};
use super::validate::validate_deposit;
use super::CatalogError;
use crate::xml::escape;

pub const DC_NS: &str = "http://purl.org/dc/elements/1.1/";
pub const DCTERMS_NS: &str = "http://purl.org/dc/terms/";
pub const OAI_DC_NS: &str = "http://www.openarchives.org/OAI/2.0/oai_dc/";
pub const OAI_DC_SCHEMA: &str = "http://www.openarchives.org/OAI/2.0/oai_dc.xsd";

/// Ordered element/value multimap.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcRecord {
    pub entries: Vec<(String, String)>,
}

impl DcRecord {
    pub fn push(&mut self, element: &str, value: impl Into<String>) {
        let value = value.into();
        if !value.trim().is_empty() {
            self.entries.push((element.to_string(), value));
        }
    }

    pub fn values(&self, element: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(e, _)| e == element)
            .map(|(_, v)| v.as_str())
            .collect()
    }

    pub fn count(&self, element: &str) -> usize {
        self.entries.iter().filter(|(e, _)| e == element).count()
    }

    /// `oai_dc:dc` element with its namespace declarations, suitable as an
    /// OAI-PMH metadata payload or a standalone document.
    pub fn to_oai_dc_xml(&self) -> String {
        let mut out = format!(
            "<oai_dc:dc xmlns:oai_dc=\"{OAI_DC_NS}\" xmlns:dc=\"{DC_NS}\" xmlns:dcterms=\"{DCTERMS_NS}\" \
             xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
             xsi:schemaLocation=\"{OAI_DC_NS} {OAI_DC_SCHEMA}\">"
        );
        for (element, value) in &self.entries {
            out.push_str(&format!("<{element}>{}</{element}>", escape(value)));
        }
        out.push_str("</oai_dc:dc>");
        out
    }
}

pub fn to_dublin_core(d: &Deposit) -> Result<DcRecord, CatalogError> {
    let pid = d.pid.as_ref().ok_or(CatalogError::Unpublished)?;
    let report = validate_deposit(d);
    if !report.is_error_free() {
        return Err(CatalogError::Invalid(report));
    }

    let mut dc = DcRecord::default();
    dc.push("dc:title", d.title.clone());

    let mut creators = Vec::new();
    creators.extend(d.deposit_creator.iter().map(|a| a.name.as_str()));
    creators.extend(d.objects.iter().flat_map(|o| o.creators.iter().map(|a| a.name.as_str())));
    for name in dedup(creators) {
        dc.push("dc:creator", name);
    }
    for term in &d.subject_terms {
        dc.push("dc:subject", term.uri.clone());
    }
    dc.push("dc:description", d.scientific_objectives.clone());

    let mut contributors: Vec<&str> = d.silent_partners.iter().map(|a| a.name.as_str()).collect();
    contributors.extend(d.objects.iter().flat_map(|o| o.contributors.iter().map(|a| a.name.as_str())));
    for name in dedup(contributors) {
        dc.push("dc:contributor", name);
    }
    if let Some(date) = d.deposit_date {
        dc.push("dc:date", date.format("%Y-%m-%d").to_string());
    }
    dc.push("dc:type", d.nature_of_resource.clone());
    if let Some(nature) = d.nature_of_deposit {
        dc.push("dc:type", nature.as_str());
    }
    dc.push("dc:identifier", pid.resolve_url());
    for p in &d.related_publications {
        dc.push("dc:relation", p.clone());
    }
    for term in d.period_terms.iter().chain(&d.place_terms) {
        dc.push("dc:coverage", term.uri.clone());
    }
    dc.push(
        "dc:rights",
        match d.access_policy {
            AccessPolicy::Public => "public",
            AccessPolicy::Restricted => "restricted",
        },
    );
    dc.push("dcterms:bibliographicCitation", d.citation.clone());
    for obj in &d.objects {
        if let Some(p) = &obj.pid {
            dc.push("dcterms:hasPart", p.resolve_url());
        }
    }
    Ok(dc)
}

fn dedup<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    names
        .into_iter()
        .filter(|n| !n.trim().is_empty() && seen.insert(*n))
        .collect()
}
