//! Ready-made configurations and catalogs for tests, benchmarks and demos.

use std::path::Path;
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use depot3d_core::catalog::{AccessPolicy, Deposit, StorageRef};
use depot3d_core::sample::{self, FileMap};

use crate::auth::{Caller, Role, TokenEntry};
use crate::clock::SteppingClock;
use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::repo::Repository;

pub const ALICE_TOKEN: &str = "alice-depositor-token";
pub const BOB_TOKEN: &str = "bob-depositor-token";
pub const CURATOR_TOKEN: &str = "carol-curator-token";

pub fn alice() -> Caller {
    Caller::new(Role::Depositor, "alice")
}

pub fn bob() -> Caller {
    Caller::new(Role::Depositor, "bob")
}

pub fn curator() -> Caller {
    Caller::new(Role::Curator, "carol")
}

/// Two depositors and a curator; OAI pages of 10.
pub fn config(data_dir: &Path) -> ServiceConfig {
    let token = |token: &str, role, user: &str| TokenEntry {
        token: token.to_string(),
        role,
        user: user.to_string(),
    };
    ServiceConfig {
        repo_id: "depot3d.test".to_string(),
        data_dir: data_dir.to_path_buf(),
        oai_page_size: 10,
        tokens: vec![
            token(ALICE_TOKEN, Role::Depositor, "alice"),
            token(BOB_TOKEN, Role::Depositor, "bob"),
            token(CURATOR_TOKEN, Role::Curator, "carol"),
        ],
        preview_target: 1_000,
        ..ServiceConfig::default()
    }
}

/// A repository whose clock starts at 2021-11-16T09:00:00Z and advances one
/// minute per reading, so datestamps are distinct and reproducible.
pub fn open(data_dir: &Path) -> Result<Repository, ServiceError> {
    let start = Utc.with_ymd_and_hms(2021, 11, 16, 9, 0, 0).unwrap();
    Repository::open(config(data_dir), Arc::new(SteppingClock::new(start, 60)))
}

/// Stores `files` as blobs and points the deposit's internal documents at
/// them.
pub fn store_files(repo: &Repository, d: &Deposit, files: &FileMap) -> Result<Deposit, ServiceError> {
    let mut d = d.clone();
    for o in &mut d.objects {
        for doc in &mut o.documents {
            if let Some(StorageRef::Internal { .. }) = doc.storage {
                let bytes = files
                    .get(&doc.filename)
                    .ok_or_else(|| ServiceError::MissingBlob(doc.filename.clone()))?;
                let key = repo.blobs().put(bytes)?;
                doc.storage = Some(StorageRef::Internal { key });
            }
        }
    }
    Ok(d)
}

/// Creates and publishes one deposit, returning its local id.
pub fn publish_deposit(repo: &Repository, owner: &Caller, d: &Deposit, files: &FileMap) -> Result<u64, ServiceError> {
    let stored = store_files(repo, d, files)?;
    let id = repo.create_deposit(owner, stored)?;
    repo.publish(owner, id)?;
    Ok(id)
}

/// Publishes generated deposits `0..n` (alternating owners alice and bob;
/// every fifth one restricted) and returns their ids.
pub fn seed_generated(repo: &Repository, n: u64) -> Result<Vec<u64>, ServiceError> {
    (0..n)
        .map(|i| {
            let (d, files) = sample::generated(i);
            let owner = if i % 2 == 0 { alice() } else { bob() };
            publish_deposit(repo, &owner, &d, &files)
        })
        .collect()
}

/// Ids of the seeded deposits that are public.
pub fn public_ids(repo: &Repository, ids: &[u64]) -> Vec<u64> {
    let snap = repo.snapshot();
    ids.iter()
        .copied()
        .filter(|id| snap.deposits[id].deposit.access_policy == AccessPolicy::Public)
        .collect()
}
