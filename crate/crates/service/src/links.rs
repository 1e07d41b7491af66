//! Link checking for external-reference documents.

use std::time::Duration;

use depot3d_core::catalog::{Deposit, StorageRef};
use depot3d_core::digest::sha256_hex;
use depot3d_core::report::ValidationReport;

/// Outcome of probing one URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe {
    /// `None` when the host could not be reached at all.
    pub status: Option<u16>,
    /// Content, when the fetcher downloads it.
    pub body: Option<Vec<u8>>,
}

impl Probe {
    pub fn status(code: u16) -> Self {
        Probe {
            status: Some(code),
            body: None,
        }
    }

    pub fn unreachable() -> Self {
        Probe { status: None, body: None }
    }

    pub fn with_body(code: u16, body: impl Into<Vec<u8>>) -> Self {
        Probe {
            status: Some(code),
            body: Some(body.into()),
        }
    }
}

pub trait Fetcher: Send + Sync {
    fn probe(&self, url: &str) -> Probe;
}

impl<F: Fn(&str) -> Probe + Send + Sync> Fetcher for F {
    fn probe(&self, url: &str) -> Probe {
        self(url)
    }
}

/// Real network fetcher. HEAD only, unless `download_limit` is set, in which
/// case bodies up to that many bytes are fetched with GET and digested.
#[derive(Debug, Clone)]
pub struct HttpFetcher {
    pub timeout: Duration,
    pub download_limit: Option<u64>,
}

impl Default for HttpFetcher {
    fn default() -> Self {
        HttpFetcher {
            timeout: Duration::from_secs(10),
            download_limit: None,
        }
    }
}

impl Fetcher for HttpFetcher {
    fn probe(&self, url: &str) -> Probe {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        match self.download_limit {
            None => match agent.head(url).call() {
                Ok(resp) => Probe::status(resp.status().as_u16()),
                Err(e) => {
                    log::debug!("HEAD {url}: {e}");
                    Probe::unreachable()
                }
            },
            Some(limit) => match agent.get(url).call() {
                Ok(mut resp) => {
                    let code = resp.status().as_u16();
                    if code >= 400 {
                        return Probe::status(code);
                    }
                    match resp.body_mut().with_config().limit(limit).read_to_vec() {
                        Ok(bytes) => Probe::with_body(code, bytes),
                        // too large or cut off: reachable, content unknown
                        Err(_) => Probe::status(code),
                    }
                }
                Err(e) => {
                    log::debug!("GET {url}: {e}");
                    Probe::unreachable()
                }
            },
        }
    }
}

/// Probes every external document of `d`.
pub fn check_links(d: &Deposit, fetcher: &dyn Fetcher) -> ValidationReport {
    let mut report = ValidationReport::new();
    for (i, o) in d.objects.iter().enumerate() {
        for (j, doc) in o.documents.iter().enumerate() {
            let Some(StorageRef::External { url }) = &doc.storage else {
                continue;
            };
            let path = format!("objects[{i}].documents[{j}].storage.url");
            let probe = fetcher.probe(url);
            match probe.status {
                None => report.warning(path, "LINK_DEAD", format!("{url} is unreachable")),
                Some(code) if code >= 400 => report.warning(path, "LINK_DEAD", format!("{url} answered {code}")),
                Some(_) => {
                    if let Some(body) = probe.body {
                        let got = sha256_hex(&body);
                        if got != doc.checksum {
                            report.error(
                                path,
                                "LINK_CONTENT_CHANGED",
                                format!("{url} now has digest {got}, recorded {}", doc.checksum),
                            );
                        }
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use depot3d_core::catalog::DocumentRecord;
    use depot3d_core::catalog::VirtualObject;

    fn deposit_with(url: &str, content: &[u8]) -> Deposit {
        Deposit {
            objects: vec![VirtualObject {
                local_id: 1,
                documents: vec![DocumentRecord {
                    filename: "scan.e57".into(),
                    checksum: sha256_hex(content),
                    storage: Some(StorageRef::External { url: url.into() }),
                    ..DocumentRecord::default()
                }],
                ..VirtualObject::default()
            }],
            ..Deposit::default()
        }
    }

    #[test]
    fn stubbed_outcomes() {
        let d = deposit_with("https://example.org/scan.e57", b"scan");
        let ok = check_links(&d, &|_: &str| Probe::with_body(200, b"scan".to_vec()));
        assert_eq!(ok, ValidationReport::new());
        let head_only = check_links(&d, &|_: &str| Probe::status(200));
        assert_eq!(head_only, ValidationReport::new());

        let dead = check_links(&d, &|_: &str| Probe::status(404));
        assert!(dead.is_error_free());
        assert!(dead.has_warning("LINK_DEAD"));
        assert_eq!(dead.warnings[0].path, "objects[0].documents[0].storage.url");
        assert!(check_links(&d, &|_: &str| Probe::unreachable()).has_warning("LINK_DEAD"));

        let changed = check_links(&d, &|_: &str| Probe::with_body(200, b"other".to_vec()));
        assert!(changed.has_error("LINK_CONTENT_CHANGED"));
    }
}
