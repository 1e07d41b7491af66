//! OAI-PMH 2.0 data provider. Pure: every response is a function of the
//! record list, the request arguments and the response time.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use depot3d_core::catalog::{DcRecord, OAI_DC_NS, OAI_DC_SCHEMA};
use depot3d_core::xml::escape;

pub const OAI_NS: &str = "http://www.openarchives.org/OAI/2.0/";
const OAI_SCHEMA: &str = "http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd";
const METADATA_PREFIX: &str = "oai_dc";

#[derive(Debug, Clone, PartialEq)]
pub struct OaiRecord {
    /// `oai:<repo-id>:<pid>`
    pub identifier: String,
    pub datestamp: DateTime<Utc>,
    pub local_id: u64,
    pub dc: DcRecord,
    pub deleted: bool,
}

impl OaiRecord {
    fn key(&self) -> (i64, u64) {
        (self.datestamp.timestamp(), self.local_id)
    }
}

pub fn oai_identifier(repo_id: &str, pid: &str) -> String {
    format!("oai:{repo_id}:{pid}")
}

/// What the data provider needs to answer a request.
#[derive(Debug, Clone)]
pub struct OaiProvider<'a> {
    pub repo_name: &'a str,
    pub base_url: &'a str,
    pub admin_email: &'a str,
    pub page_size: usize,
    /// Sorted by (datestamp, local_id).
    pub records: &'a [OaiRecord],
}

pub fn format_datestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verb {
    Identify,
    ListMetadataFormats,
    ListSets,
    ListIdentifiers,
    ListRecords,
    GetRecord,
}

impl Verb {
    fn parse(s: &str) -> Option<Verb> {
        Some(match s {
            "Identify" => Verb::Identify,
            "ListMetadataFormats" => Verb::ListMetadataFormats,
            "ListSets" => Verb::ListSets,
            "ListIdentifiers" => Verb::ListIdentifiers,
            "ListRecords" => Verb::ListRecords,
            "GetRecord" => Verb::GetRecord,
            _ => return None,
        })
    }

    fn as_str(self) -> &'static str {
        match self {
            Verb::Identify => "Identify",
            Verb::ListMetadataFormats => "ListMetadataFormats",
            Verb::ListSets => "ListSets",
            Verb::ListIdentifiers => "ListIdentifiers",
            Verb::ListRecords => "ListRecords",
            Verb::GetRecord => "GetRecord",
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        match self {
            Verb::Identify => &[],
            Verb::ListMetadataFormats => &["identifier"],
            Verb::ListSets => &["resumptionToken"],
            Verb::ListIdentifiers | Verb::ListRecords => &["metadataPrefix", "from", "until", "set", "resumptionToken"],
            Verb::GetRecord => &["identifier", "metadataPrefix"],
        }
    }
}

struct OaiError {
    code: &'static str,
    message: String,
}

fn err(code: &'static str, message: impl Into<String>) -> OaiError {
    OaiError {
        code,
        message: message.into(),
    }
}

/// Harvest window and position. Encoded into resumption tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Cursor {
    from: Option<i64>,
    until: Option<i64>,
    after: Option<(i64, u64)>,
    offset: usize,
}

impl Cursor {
    fn encode(&self) -> String {
        let opt = |v: Option<i64>| v.map_or(String::new(), |x| x.to_string());
        let (ts, id) = self.after.expect("token cursors have a position");
        URL_SAFE_NO_PAD.encode(format!(
            "v1|{}|{}|{ts}|{id}|{}",
            opt(self.from),
            opt(self.until),
            self.offset
        ))
    }

    fn decode(token: &str) -> Option<Cursor> {
        let raw = String::from_utf8(URL_SAFE_NO_PAD.decode(token).ok()?).ok()?;
        let parts: Vec<&str> = raw.split('|').collect();
        let [version, from, until, ts, id, offset] = parts.as_slice() else {
            return None;
        };
        if *version != "v1" {
            return None;
        }
        let opt = |s: &str| -> Option<Option<i64>> {
            if s.is_empty() {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        };
        Some(Cursor {
            from: opt(from)?,
            until: opt(until)?,
            after: Some((ts.parse().ok()?, id.parse().ok()?)),
            offset: offset.parse().ok()?,
        })
    }

    fn admits(&self, r: &OaiRecord) -> bool {
        let t = r.datestamp.timestamp();
        self.from.is_none_or(|f| t >= f) && self.until.is_none_or(|u| t <= u)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Granularity {
    Day,
    Second,
}

fn parse_oai_date(s: &str, end_of_day: bool) -> Option<(i64, Granularity)> {
    if s.len() == 10 {
        let d = NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
        let t = if end_of_day {
            d.and_hms_opt(23, 59, 59)?
        } else {
            d.and_hms_opt(0, 0, 0)?
        };
        return Some((t.and_utc().timestamp(), Granularity::Day));
    }
    if s.len() == 20 {
        let t = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%SZ").ok()?;
        return Some((t.and_utc().timestamp(), Granularity::Second));
    }
    None
}

/// Answers one request given as raw query pairs (repeated keys preserved).
pub fn oai_handle(p: &OaiProvider<'_>, args: &[(String, String)], now: DateTime<Utc>) -> String {
    let verbs: Vec<&str> = args.iter().filter(|(k, _)| k == "verb").map(|(_, v)| v.as_str()).collect();
    let verb = match verbs.as_slice() {
        [v] => Verb::parse(v),
        _ => None,
    };
    let Some(verb) = verb else {
        let msg = match verbs.len() {
            0 => "missing verb".to_string(),
            1 => format!("illegal verb '{}'", verbs[0]),
            _ => "verb is repeated".to_string(),
        };
        return envelope(p, now, None, Err(err("badVerb", msg)));
    };
    let rest: Vec<(&str, &str)> = args
        .iter()
        .filter(|(k, _)| k != "verb")
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect();
    if let Err(e) = check_arguments(verb, &rest) {
        return envelope(p, now, None, Err(e));
    }
    let arg = |name: &str| rest.iter().find(|(k, _)| *k == name).map(|(_, v)| *v);
    let body = match verb {
        Verb::Identify => Ok(identify(p)),
        Verb::ListMetadataFormats => list_metadata_formats(p, arg("identifier")),
        Verb::ListSets => Err(err("noSetHierarchy", "this repository does not support sets")),
        Verb::GetRecord => get_record(p, arg("identifier").unwrap_or(""), arg("metadataPrefix").unwrap_or("")),
        Verb::ListIdentifiers | Verb::ListRecords => list(p, verb, &arg),
    };
    envelope(p, now, Some((verb, &rest)), body)
}

fn check_arguments(verb: Verb, rest: &[(&str, &str)]) -> Result<(), OaiError> {
    let allowed = verb.allowed();
    for (i, (k, _)) in rest.iter().enumerate() {
        if !allowed.contains(k) {
            return Err(err("badArgument", format!("illegal argument '{k}' for {}", verb.as_str())));
        }
        if rest[..i].iter().any(|(k2, _)| k2 == k) {
            return Err(err("badArgument", format!("argument '{k}' is repeated")));
        }
    }
    let has = |name: &str| rest.iter().any(|(k, _)| *k == name);
    match verb {
        Verb::GetRecord if !(has("identifier") && has("metadataPrefix")) => {
            Err(err("badArgument", "GetRecord requires identifier and metadataPrefix"))
        }
        Verb::ListIdentifiers | Verb::ListRecords => {
            if has("resumptionToken") {
                if rest.len() != 1 {
                    return Err(err("badArgument", "resumptionToken is an exclusive argument"));
                }
            } else if !has("metadataPrefix") {
                return Err(err("badArgument", "metadataPrefix is required"));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn envelope(
    p: &OaiProvider<'_>,
    now: DateTime<Utc>,
    request: Option<(Verb, &[(&str, &str)])>,
    body: Result<String, OaiError>,
) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<OAI-PMH xmlns=\"{OAI_NS}\" xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
         xsi:schemaLocation=\"{OAI_NS} {OAI_SCHEMA}\">\n"
    ));
    out.push_str(&format!("<responseDate>{}</responseDate>\n", format_datestamp(now)));
    // attributes are echoed only for requests free of badVerb/badArgument
    let echo = match (&request, &body) {
        (_, Err(e)) if e.code == "badArgument" || e.code == "badVerb" => None,
        (Some(r), _) => Some(r),
        (None, _) => None,
    };
    match echo {
        Some((verb, rest)) => {
            out.push_str(&format!("<request verb=\"{}\"", verb.as_str()));
            for (k, v) in rest.iter() {
                out.push_str(&format!(" {k}=\"{}\"", escape(v)));
            }
            out.push_str(&format!(">{}</request>\n", escape(p.base_url)));
        }
        None => out.push_str(&format!("<request>{}</request>\n", escape(p.base_url))),
    }
    match body {
        Ok(xml) => out.push_str(&xml),
        Err(e) => out.push_str(&format!("<error code=\"{}\">{}</error>\n", e.code, escape(&e.message))),
    }
    out.push_str("</OAI-PMH>\n");
    out
}

fn identify(p: &OaiProvider<'_>) -> String {
    let earliest = p
        .records
        .iter()
        .map(|r| r.datestamp)
        .min()
        .unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
    format!(
        "<Identify>\n<repositoryName>{}</repositoryName>\n<baseURL>{}</baseURL>\n\
         <protocolVersion>2.0</protocolVersion>\n<adminEmail>{}</adminEmail>\n\
         <earliestDatestamp>{}</earliestDatestamp>\n<deletedRecord>no</deletedRecord>\n\
         <granularity>YYYY-MM-DDThh:mm:ssZ</granularity>\n</Identify>\n",
        escape(p.repo_name),
        escape(p.base_url),
        escape(p.admin_email),
        format_datestamp(earliest)
    )
}

fn find<'a>(p: &OaiProvider<'a>, identifier: &str) -> Option<&'a OaiRecord> {
    p.records.iter().find(|r| r.identifier == identifier)
}

fn list_metadata_formats(p: &OaiProvider<'_>, identifier: Option<&str>) -> Result<String, OaiError> {
    if let Some(id) = identifier {
        if find(p, id).is_none() {
            return Err(err("idDoesNotExist", format!("unknown identifier {id}")));
        }
    }
    Ok(format!(
        "<ListMetadataFormats>\n<metadataFormat>\n<metadataPrefix>{METADATA_PREFIX}</metadataPrefix>\n\
         <schema>{OAI_DC_SCHEMA}</schema>\n<metadataNamespace>{OAI_DC_NS}</metadataNamespace>\n\
         </metadataFormat>\n</ListMetadataFormats>\n"
    ))
}

fn header(r: &OaiRecord) -> String {
    let status = if r.deleted { " status=\"deleted\"" } else { "" };
    format!(
        "<header{status}>\n<identifier>{}</identifier>\n<datestamp>{}</datestamp>\n</header>\n",
        escape(&r.identifier),
        format_datestamp(r.datestamp)
    )
}

fn record(r: &OaiRecord) -> String {
    let mut out = String::from("<record>\n");
    out.push_str(&header(r));
    if !r.deleted {
        out.push_str("<metadata>\n");
        out.push_str(&r.dc.to_oai_dc_xml());
        out.push_str("\n</metadata>\n");
    }
    out.push_str("</record>\n");
    out
}

fn check_prefix(prefix: &str) -> Result<(), OaiError> {
    if prefix == METADATA_PREFIX {
        Ok(())
    } else {
        Err(err(
            "cannotDisseminateFormat",
            format!("metadata format '{prefix}' is not supported; use oai_dc"),
        ))
    }
}

fn get_record(p: &OaiProvider<'_>, identifier: &str, prefix: &str) -> Result<String, OaiError> {
    let r = find(p, identifier).ok_or_else(|| err("idDoesNotExist", format!("unknown identifier {identifier}")))?;
    check_prefix(prefix)?;
    Ok(format!("<GetRecord>\n{}</GetRecord>\n", record(r)))
}

fn list<'a>(p: &OaiProvider<'_>, verb: Verb, arg: &dyn Fn(&str) -> Option<&'a str>) -> Result<String, OaiError> {
    let cursor = match arg("resumptionToken") {
        Some(token) => Cursor::decode(token).ok_or_else(|| err("badResumptionToken", "invalid or expired token"))?,
        None => {
            check_prefix(arg("metadataPrefix").unwrap_or(""))?;
            if arg("set").is_some() {
                return Err(err("noSetHierarchy", "this repository does not support sets"));
            }
            let parse = |name: &str, end: bool| -> Result<Option<(i64, Granularity)>, OaiError> {
                arg(name)
                    .map(|s| parse_oai_date(s, end).ok_or_else(|| err("badArgument", format!("bad {name} date '{s}'"))))
                    .transpose()
            };
            let from = parse("from", false)?;
            let until = parse("until", true)?;
            if let (Some((f, gf)), Some((u, gu))) = (from, until) {
                if gf != gu {
                    return Err(err("badArgument", "from and until have different granularities"));
                }
                if f > u {
                    return Err(err("badArgument", "from is later than until"));
                }
            }
            Cursor {
                from: from.map(|x| x.0),
                until: until.map(|x| x.0),
                after: None,
                offset: 0,
            }
        }
    };

    let matching: Vec<&OaiRecord> = p.records.iter().filter(|r| cursor.admits(r)).collect();
    let remaining: Vec<&OaiRecord> = matching
        .iter()
        .copied()
        .filter(|r| cursor.after.is_none_or(|a| r.key() > a))
        .collect();
    if matching.is_empty() && cursor.after.is_none() {
        return Err(err("noRecordsMatch", "no records match the request"));
    }
    let page: Vec<&OaiRecord> = remaining.iter().copied().take(p.page_size).collect();
    let tag = verb.as_str();
    let mut out = format!("<{tag}>\n");
    for r in &page {
        if verb == Verb::ListRecords {
            out.push_str(&record(r));
        } else {
            out.push_str(&header(r));
        }
    }
    let total = matching.len();
    let shown = cursor.offset + page.len();
    if cursor.after.is_some() || remaining.len() > page.len() {
        let token = if remaining.len() > page.len() {
            Cursor {
                after: page.last().map(|r| r.key()),
                offset: shown,
                ..cursor.clone()
            }
            .encode()
        } else {
            String::new()
        };
        out.push_str(&format!(
            "<resumptionToken completeListSize=\"{total}\" cursor=\"{}\">{token}</resumptionToken>\n",
            cursor.offset
        ));
    }
    out.push_str(&format!("</{tag}>\n"));
    Ok(out)
}
