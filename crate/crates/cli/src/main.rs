//! `depot3d`: offline draft editing, packaging, and talking to a repository.
//!
//! Exit status: 0 on success, 1 for validation or usage errors, 2 for I/O or
//! network failures.

mod draft;
mod remote;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chrono::Utc;
use clap::{Parser, Subcommand};
use depot3d_core::catalog::{get_field, set_field, validate_deposit_with, MediaRole};
use depot3d_core::formats::ArchivableWhitelist;
use depot3d_core::package::{build_package_with, verify_package, DirSource, PackageError};
use depot3d_core::ValidationReport;
use depot3d_service::{AppState, Repository, ServiceConfig, SystemClock};
use serde_json::{json, Value};

#[derive(Debug)]
pub struct Failure {
    pub code: String,
    pub message: String,
    pub exit: u8,
    pub report: Option<Value>,
}

impl Failure {
    pub fn user(code: &str, message: impl Into<String>) -> Self {
        Failure {
            code: code.to_string(),
            message: message.into(),
            exit: 1,
            report: None,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            code: "IO_ERROR".to_string(),
            message: message.into(),
            exit: 2,
            report: None,
        }
    }

    fn invalid(report: &ValidationReport) -> Self {
        Failure {
            code: "VALIDATION_FAILED".to_string(),
            message: format!("{} error(s)", report.errors.len()),
            exit: 1,
            report: Some(serde_json::to_value(report).expect("serializes")),
        }
    }
}

#[derive(Parser)]
#[command(name = "depot3d", version, about = "Deposit, validate, package and harvest 3D datasets")]
struct Cli {
    /// Draft file edited by new, attach, meta, validate, package and push.
    #[arg(long, global = true, default_value = "deposit.json")]
    draft: PathBuf,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Repository base URL for push.
    #[arg(long, global = true, env = "DEPOT3D_SERVER", default_value = "http://127.0.0.1:8080")]
    server: String,
    /// Bearer token for push.
    #[arg(long, global = true, env = "DEPOT3D_TOKEN", hide_env_values = true)]
    token: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a draft with every schema field present.
    New {
        #[arg(long)]
        title: Option<String>,
        /// Number of empty virtual objects to start with.
        #[arg(long, default_value_t = 1)]
        objects: u64,
        #[arg(long, default_value_t = 1)]
        local_id: u64,
        /// Overwrite an existing draft.
        #[arg(long)]
        force: bool,
    },
    /// Record a local file as a document of an object (`obj1`, `1`).
    Attach {
        object: String,
        file: PathBuf,
        /// final-model, source-scan, texture, image, plan, report or other.
        #[arg(long)]
        role: Option<String>,
        /// Document filename, if different from the file's name.
        #[arg(long)]
        name: Option<String>,
    },
    /// Read or change one metadata field by path, e.g. `objects[0].title`.
    Meta {
        #[command(subcommand)]
        action: MetaAction,
    },
    /// Check the draft; exits 1 when it has errors.
    Validate,
    /// Build an archive package into OUT, or check one with --verify.
    Package {
        out: PathBuf,
        #[arg(long)]
        verify: bool,
    },
    /// Upload the draft and its files to a repository.
    Push {
        #[arg(long)]
        publish: bool,
        /// Ask for the draft's own local id instead of the next free one.
        #[arg(long)]
        keep_id: bool,
    },
    /// Harvest Dublin Core records from an OAI-PMH endpoint, incrementally.
    Harvest {
        url: String,
        #[arg(long)]
        out: PathBuf,
        /// Ignore the stored cursor and fetch everything.
        #[arg(long)]
        full: bool,
    },
    /// Run the repository service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum MetaAction {
    Set { path: String, value: String },
    Get { path: String },
}

/// What a command reports: JSON for `--json`, text otherwise.
struct Output {
    json: Value,
    text: String,
}

impl Output {
    fn new(json: Value, text: impl Into<String>) -> Self {
        Output { json, text: text.into() }
    }
}

fn report_text(r: &ValidationReport) -> String {
    let mut s = String::new();
    for i in &r.errors {
        s.push_str(&format!("error   {i}\n"));
    }
    for i in &r.warnings {
        s.push_str(&format!("warning {i}\n"));
    }
    s.push_str(&format!("{} error(s), {} warning(s)", r.errors.len(), r.warnings.len()));
    s
}

fn parse_role(s: &str) -> Result<MediaRole, Failure> {
    MediaRole::parse(s).ok_or_else(|| Failure::user("BAD_ROLE", format!("unknown media role '{s}'")))
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    let whitelist = ArchivableWhitelist::default();
    match &cli.command {
        Command::New {
            title,
            objects,
            local_id,
            force,
        } => {
            if cli.draft.exists() && !force {
                return Err(Failure::user(
                    "DRAFT_EXISTS",
                    format!("{} exists; use --force to overwrite", cli.draft.display()),
                ));
            }
            let d = draft::scaffold(title.as_deref(), *local_id, *objects);
            draft::save(&cli.draft, &d)?;
            let v: Value = serde_json::from_str(&d.to_json()).expect("valid json");
            Ok(Output::new(v, format!("wrote {}", cli.draft.display())))
        }
        Command::Attach {
            object,
            file,
            role,
            name,
        } => {
            let oid = draft::parse_object_id(object)
                .ok_or_else(|| Failure::user("BAD_OBJECT", format!("'{object}' is not an object id")))?;
            let role = role.as_deref().map(parse_role).transpose()?;
            let d = draft::load(&cli.draft)?;
            let filename = match name {
                Some(n) => n.clone(),
                None => file
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .ok_or_else(|| Failure::user("BAD_FILENAME", format!("{} has no file name", file.display())))?,
            };
            if !depot3d_core::catalog::is_plain_filename(&filename) {
                return Err(Failure::user("BAD_FILENAME", format!("'{filename}' is not a plain file name")));
            }
            let key = draft::storage_key(&draft::base_dir(&cli.draft), file)?;
            let bytes = std::fs::read(file).map_err(|e| Failure::io(format!("{}: {e}", file.display())))?;
            let (d, record, verdict) = draft::attach(d, oid, &filename, &bytes, key, role);
            draft::save(&cli.draft, &d)?;
            let mut text = format!(
                "object {oid}: {} ({} bytes, {}) format {} {}",
                record.filename,
                bytes.len(),
                record.checksum,
                verdict.detected_format,
                verdict.format_class,
            );
            for i in &verdict.issues {
                text.push_str(&format!("\n  {:?} {} {}", i.severity, i.code, i.message).to_lowercase());
            }
            Ok(Output::new(json!({ "object": oid, "document": record, "verdict": verdict }), text))
        }
        Command::Meta { action } => {
            let d = draft::load(&cli.draft)?;
            match action {
                MetaAction::Get { path } => {
                    let v = get_field(&d, path).map_err(|e| Failure::user(e.code(), e.to_string()))?;
                    let text = match &v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    Ok(Output::new(json!({ "path": path, "value": v }), text))
                }
                MetaAction::Set { path, value } => {
                    let d = set_field(&d, path, value).map_err(|e| Failure::user(e.code(), e.to_string()))?;
                    draft::save(&cli.draft, &d)?;
                    let v = get_field(&d, path).map_err(|e| Failure::user(e.code(), e.to_string()))?;
                    Ok(Output::new(json!({ "path": path, "value": v }), format!("{path} = {v}")))
                }
            }
        }
        Command::Validate => {
            let d = draft::load(&cli.draft)?;
            let report = validate_deposit_with(&d, &whitelist);
            if report.is_error_free() {
                let v = serde_json::to_value(&report).expect("serializes");
                Ok(Output::new(v, report_text(&report)))
            } else {
                Err(Failure::invalid(&report))
            }
        }
        Command::Package { out, verify: true } => {
            let report = verify_package(out).map_err(package_failure)?;
            if report.is_error_free() {
                let v = serde_json::to_value(&report).expect("serializes");
                Ok(Output::new(v, report_text(&report)))
            } else {
                Err(Failure::invalid(&report))
            }
        }
        Command::Package { out, verify: false } => {
            let d = draft::load(&cli.draft)?;
            let source = DirSource {
                root: draft::base_dir(&cli.draft),
            };
            let pkg = build_package_with(&d, &source, out, Utc::now(), &whitelist).map_err(package_failure)?;
            let text = format!(
                "wrote {} ({} payload files, digest {})",
                out.display(),
                pkg.payload_count(),
                pkg.manifest.package_digest
            );
            Ok(Output::new(
                json!({
                    "path": out,
                    "payload_count": pkg.payload_count(),
                    "metadata_count": pkg.metadata_count(),
                    "package_digest": pkg.manifest.package_digest,
                }),
                text,
            ))
        }
        Command::Push { publish, keep_id } => {
            let mut d = draft::load(&cli.draft)?;
            if !keep_id {
                d.local_id = 0;
            }
            let client = remote::Client::new(&cli.server, cli.token.clone());
            let v = remote::push(&client, &d, &draft::base_dir(&cli.draft), *publish)?;
            let mut text = format!("deposit {} at revision {}", v["local_id"], v["revision"]);
            if let Some(p) = v.get("published") {
                text.push_str(&format!("\npublished {}", p["pid"].as_str().unwrap_or_default()));
                for o in p["object_pids"].as_array().into_iter().flatten() {
                    text.push_str(&format!("\n  object {} {}", o["local_id"], o["pid"].as_str().unwrap_or_default()));
                }
            }
            Ok(Output::new(v, text))
        }
        Command::Harvest { url, out, full } => {
            let s = remote::harvest(url, out, *full)?;
            let text = format!(
                "{} record(s): {} new, {} updated, {} unchanged, {} deleted",
                s.records, s.new, s.updated, s.unchanged, s.deleted
            );
            Ok(Output::new(serde_json::to_value(&s).expect("serializes"), text))
        }
        Command::Serve { config } => serve(config),
    }
}

fn package_failure(e: PackageError) -> Failure {
    match e {
        PackageError::ValidationFailed(r) | PackageError::VerifyFailed(r) => Failure::invalid(&r),
        PackageError::Io(_) => Failure::io(e.to_string()),
        other => Failure::user(other.code(), other.to_string()),
    }
}

fn serve(config: &Path) -> Result<Output, Failure> {
    let cfg = ServiceConfig::load(config).map_err(|e| match e {
        depot3d_service::ConfigError::Read { .. } => Failure::io(e.to_string()),
        other => Failure::user("BAD_CONFIG", other.to_string()),
    })?;
    let listen = cfg.listen;
    let repo = Repository::open(cfg, Arc::new(SystemClock)).map_err(|e| Failure::io(e.to_string()))?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::io(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| Failure::io(format!("cannot listen on {listen}: {e}")))?;
        log::info!("listening on http://{listen}");
        eprintln!("listening on http://{listen}");
        depot3d_service::serve(AppState::new(Arc::new(repo)), listener)
            .await
            .map_err(|e| Failure::io(e.to_string()))
    })?;
    Ok(Output::new(json!({ "stopped": true }), "stopped"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("serializes"));
            } else {
                println!("{}", out.text);
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            if cli.json {
                let body = json!({ "error": { "code": f.code, "message": f.message, "report": f.report } });
                println!("{}", serde_json::to_string_pretty(&body).expect("serializes"));
            } else {
                if let Some(r) = f.report.as_ref().and_then(|r| serde_json::from_value::<ValidationReport>(r.clone()).ok()) {
                    println!("{}", report_text(&r));
                }
                eprintln!("depot3d: {} ({})", f.message, f.code);
            }
            ExitCode::from(f.exit)
        }
    }
}
