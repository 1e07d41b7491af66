//! PLY polygon files: ASCII, binary little endian and binary big endian.
//!
//! The header grammar accepted here:
//!
//! ```text
//! ply
//! format (ascii|binary_little_endian|binary_big_endian) 1.0
//! { comment <text> | obj_info <text> }
//! { element <name> <count>
//!   { property <type> <name> | property list <count-type> <item-type> <name> } }
//! end_header
//! ```
//!
//! Both the sized type names (`float32`, `uint8`, ...) and the historical
//! aliases (`float`, `uchar`, ...) are accepted; the writer always emits the
//! sized names.
//!
//! Parsing is total: any input yields either a model or a [`PlyError`].
//! Declared counts are never trusted for allocation beyond what the
//! remaining input could actually hold.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::FormatIssue;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlyError {
    #[error("PLY_BAD_MAGIC: input does not start with a 'ply' line")]
    BadMagic,
    #[error("PLY_BAD_HEADER: line {line}: {reason}")]
    BadHeader { line: usize, reason: String },
    #[error("PLY_TRUNCATED: element '{element}' ends at row {row}")]
    Truncated { element: String, row: usize },
    #[error("PLY_TYPE_UNKNOWN: line {line}: unknown type '{name}'")]
    TypeUnknown { line: usize, name: String },
    #[error("PLY_BAD_VALUE: element '{element}' row {row}: {reason}")]
    BadValue { element: String, row: usize, reason: String },
    #[error("PLY_INVALID_MODEL: {0}")]
    InvalidModel(String),
}

impl PlyError {
    pub fn code(&self) -> &'static str {
        match self {
            PlyError::BadMagic => "PLY_BAD_MAGIC",
            PlyError::BadHeader { .. } => "PLY_BAD_HEADER",
            PlyError::Truncated { .. } => "PLY_TRUNCATED",
            PlyError::TypeUnknown { .. } => "PLY_TYPE_UNKNOWN",
            PlyError::BadValue { .. } => "PLY_BAD_VALUE",
            PlyError::InvalidModel(_) => "PLY_INVALID_MODEL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
}

impl PlyEncoding {
    pub const ALL: [PlyEncoding; 3] = [
        PlyEncoding::Ascii,
        PlyEncoding::BinaryLittleEndian,
        PlyEncoding::BinaryBigEndian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlyEncoding::Ascii => "ascii",
            PlyEncoding::BinaryLittleEndian => "binary_little_endian",
            PlyEncoding::BinaryBigEndian => "binary_big_endian",
        }
    }
}

impl fmt::Display for PlyEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlyEncoding {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        PlyEncoding::ALL.into_iter().find(|e| e.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarType {
    Int8,
    Uint8,
    Int16,
    Uint16,
    Int32,
    Uint32,
    Float32,
    Float64,
}

impl ScalarType {
    pub const ALL: [ScalarType; 8] = [
        ScalarType::Int8,
        ScalarType::Uint8,
        ScalarType::Int16,
        ScalarType::Uint16,
        ScalarType::Int32,
        ScalarType::Uint32,
        ScalarType::Float32,
        ScalarType::Float64,
    ];

    pub fn size(self) -> usize {
        match self {
            ScalarType::Int8 | ScalarType::Uint8 => 1,
            ScalarType::Int16 | ScalarType::Uint16 => 2,
            ScalarType::Int32 | ScalarType::Uint32 | ScalarType::Float32 => 4,
            ScalarType::Float64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarType::Int8 => "int8",
            ScalarType::Uint8 => "uint8",
            ScalarType::Int16 => "int16",
            ScalarType::Uint16 => "uint16",
            ScalarType::Int32 => "int32",
            ScalarType::Uint32 => "uint32",
            ScalarType::Float32 => "float32",
            ScalarType::Float64 => "float64",
        }
    }

    pub fn is_integer(self) -> bool {
        !matches!(self, ScalarType::Float32 | ScalarType::Float64)
    }

    /// Accepts sized names and the classic aliases.
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "int8" | "char" => ScalarType::Int8,
            "uint8" | "uchar" => ScalarType::Uint8,
            "int16" | "short" => ScalarType::Int16,
            "uint16" | "ushort" => ScalarType::Uint16,
            "int32" | "int" => ScalarType::Int32,
            "uint32" | "uint" => ScalarType::Uint32,
            "float32" | "float" => ScalarType::Float32,
            "float64" | "double" => ScalarType::Float64,
            _ => return None,
        })
    }

    fn max_count(self) -> u64 {
        match self {
            ScalarType::Int8 => i8::MAX as u64,
            ScalarType::Uint8 => u8::MAX as u64,
            ScalarType::Int16 => i16::MAX as u64,
            ScalarType::Uint16 => u16::MAX as u64,
            ScalarType::Int32 => i32::MAX as u64,
            ScalarType::Uint32 => u32::MAX as u64,
            ScalarType::Float32 | ScalarType::Float64 => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropertyType {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlyProperty {
    pub name: String,
    pub ty: PropertyType,
}

impl PlyProperty {
    pub fn scalar(name: impl Into<String>, ty: ScalarType) -> Self {
        PlyProperty {
            name: name.into(),
            ty: PropertyType::Scalar(ty),
        }
    }

    pub fn list(name: impl Into<String>, count: ScalarType, item: ScalarType) -> Self {
        PlyProperty {
            name: name.into(),
            ty: PropertyType::List { count, item },
        }
    }
}

/// A single scalar. Equality compares floats bit for bit, so NaNs with the
/// same payload are equal and `0.0 != -0.0`.
#[derive(Debug, Clone, Copy)]
pub enum Scalar {
    I8(i8),
    U8(u8),
    I16(i16),
    U16(u16),
    I32(i32),
    U32(u32),
    F32(f32),
    F64(f64),
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        use Scalar::*;
        match (self, other) {
            (I8(a), I8(b)) => a == b,
            (U8(a), U8(b)) => a == b,
            (I16(a), I16(b)) => a == b,
            (U16(a), U16(b)) => a == b,
            (I32(a), I32(b)) => a == b,
            (U32(a), U32(b)) => a == b,
            (F32(a), F32(b)) => a.to_bits() == b.to_bits(),
            (F64(a), F64(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Scalar {}

impl std::hash::Hash for Scalar {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match *self {
            Scalar::I8(v) => v.hash(state),
            Scalar::U8(v) => v.hash(state),
            Scalar::I16(v) => v.hash(state),
            Scalar::U16(v) => v.hash(state),
            Scalar::I32(v) => v.hash(state),
            Scalar::U32(v) => v.hash(state),
            Scalar::F32(v) => v.to_bits().hash(state),
            Scalar::F64(v) => v.to_bits().hash(state),
        }
    }
}

impl Scalar {
    pub fn ty(&self) -> ScalarType {
        match self {
            Scalar::I8(_) => ScalarType::Int8,
            Scalar::U8(_) => ScalarType::Uint8,
            Scalar::I16(_) => ScalarType::Int16,
            Scalar::U16(_) => ScalarType::Uint16,
            Scalar::I32(_) => ScalarType::Int32,
            Scalar::U32(_) => ScalarType::Uint32,
            Scalar::F32(_) => ScalarType::Float32,
            Scalar::F64(_) => ScalarType::Float64,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Scalar::I8(v) => v.into(),
            Scalar::U8(v) => v.into(),
            Scalar::I16(v) => v.into(),
            Scalar::U16(v) => v.into(),
            Scalar::I32(v) => v.into(),
            Scalar::U32(v) => v.into(),
            Scalar::F32(v) => v.into(),
            Scalar::F64(v) => v,
        }
    }

    pub fn as_i64(&self) -> i64 {
        match *self {
            Scalar::I8(v) => v.into(),
            Scalar::U8(v) => v.into(),
            Scalar::I16(v) => v.into(),
            Scalar::U16(v) => v.into(),
            Scalar::I32(v) => v.into(),
            Scalar::U32(v) => v.into(),
            Scalar::F32(v) => v as i64,
            Scalar::F64(v) => v as i64,
        }
    }

    /// Converts to `ty`, saturating out-of-range values.
    pub fn cast(self, ty: ScalarType) -> Scalar {
        if self.ty() == ty {
            return self;
        }
        let i = self.as_i64();
        match ty {
            ScalarType::Int8 => Scalar::I8(i.clamp(i8::MIN.into(), i8::MAX.into()) as i8),
            ScalarType::Uint8 => Scalar::U8(i.clamp(0, u8::MAX.into()) as u8),
            ScalarType::Int16 => Scalar::I16(i.clamp(i16::MIN.into(), i16::MAX.into()) as i16),
            ScalarType::Uint16 => Scalar::U16(i.clamp(0, u16::MAX.into()) as u16),
            ScalarType::Int32 => Scalar::I32(i.clamp(i32::MIN.into(), i32::MAX.into()) as i32),
            ScalarType::Uint32 => Scalar::U32(i.clamp(0, u32::MAX.into()) as u32),
            ScalarType::Float32 => Scalar::F32(self.as_f64() as f32),
            ScalarType::Float64 => Scalar::F64(self.as_f64()),
        }
    }

    fn write_ascii(&self, out: &mut String) {
        use std::fmt::Write;
        let _ = match *self {
            Scalar::I8(v) => write!(out, "{v}"),
            Scalar::U8(v) => write!(out, "{v}"),
            Scalar::I16(v) => write!(out, "{v}"),
            Scalar::U16(v) => write!(out, "{v}"),
            Scalar::I32(v) => write!(out, "{v}"),
            Scalar::U32(v) => write!(out, "{v}"),
            // Display is the shortest form that parses back to the same bits
            Scalar::F32(v) => write!(out, "{v}"),
            Scalar::F64(v) => write!(out, "{v}"),
        };
    }

    fn write_binary(&self, big_endian: bool, out: &mut Vec<u8>) {
        macro_rules! put {
            ($v:expr) => {
                if big_endian {
                    out.extend_from_slice(&$v.to_be_bytes())
                } else {
                    out.extend_from_slice(&$v.to_le_bytes())
                }
            };
        }
        match *self {
            Scalar::I8(v) => put!(v),
            Scalar::U8(v) => put!(v),
            Scalar::I16(v) => put!(v),
            Scalar::U16(v) => put!(v),
            Scalar::I32(v) => put!(v),
            Scalar::U32(v) => put!(v),
            Scalar::F32(v) => put!(v),
            Scalar::F64(v) => put!(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PlyValue {
    Scalar(Scalar),
    List(Vec<Scalar>),
}

impl PlyValue {
    pub fn as_scalar(&self) -> Option<Scalar> {
        match self {
            PlyValue::Scalar(s) => Some(*s),
            PlyValue::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Scalar]> {
        match self {
            PlyValue::List(l) => Some(l),
            PlyValue::Scalar(_) => None,
        }
    }
}

pub type PlyRow = Vec<PlyValue>;

/// An element declaration together with its rows. The declared count
/// written to a header is always `rows.len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlyElement {
    pub name: String,
    pub properties: Vec<PlyProperty>,
    pub rows: Vec<PlyRow>,
}

impl PlyElement {
    pub fn new(name: impl Into<String>, properties: Vec<PlyProperty>) -> Self {
        PlyElement {
            name: name.into(),
            properties,
            rows: Vec::new(),
        }
    }

    pub fn declared_count(&self) -> usize {
        self.rows.len()
    }

    pub fn property_index(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlyModel {
    pub encoding: PlyEncoding,
    pub version: String,
    pub comments: Vec<String>,
    pub obj_info: Vec<String>,
    pub elements: Vec<PlyElement>,
}

impl PlyModel {
    pub fn new(encoding: PlyEncoding) -> Self {
        PlyModel {
            encoding,
            version: "1.0".to_string(),
            comments: Vec::new(),
            obj_info: Vec::new(),
            elements: Vec::new(),
        }
    }

    pub fn element(&self, name: &str) -> Option<&PlyElement> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn element_count(&self, name: &str) -> usize {
        self.element(name).map_or(0, PlyElement::declared_count)
    }

    /// Equality ignoring the encoding the model was read from.
    pub fn same_content(&self, other: &PlyModel) -> bool {
        self.version == other.version
            && self.comments == other.comments
            && self.obj_info == other.obj_info
            && self.elements == other.elements
    }

    /// `x`, `y`, `z` of every vertex, if the vertex element has them.
    pub fn positions(&self) -> Option<Vec<[f64; 3]>> {
        let vertex = self.element("vertex")?;
        let idx = ["x", "y", "z"].map(|n| vertex.property_index(n));
        let [Some(x), Some(y), Some(z)] = idx else {
            return None;
        };
        vertex
            .rows
            .iter()
            .map(|row| {
                Some([
                    row[x].as_scalar()?.as_f64(),
                    row[y].as_scalar()?.as_f64(),
                    row[z].as_scalar()?.as_f64(),
                ])
            })
            .collect()
    }

    /// Checks the structural invariants the writer relies on.
    pub fn check(&self) -> Result<(), PlyError> {
        let bad = |m: String| Err(PlyError::InvalidModel(m));
        if self.version != "1.0" {
            return bad(format!("unsupported version {}", self.version));
        }
        for text in self.comments.iter().chain(&self.obj_info) {
            if text.contains(['\n', '\r']) {
                return bad("comment spans several lines".into());
            }
        }
        let mut names = std::collections::HashSet::new();
        for el in &self.elements {
            if !is_word(&el.name) || !names.insert(el.name.as_str()) {
                return bad(format!("bad or duplicate element name '{}'", el.name));
            }
            if el.properties.is_empty() && !el.rows.is_empty() {
                return bad(format!("element '{}' has rows but no properties", el.name));
            }
            let mut props = std::collections::HashSet::new();
            for p in &el.properties {
                if !is_word(&p.name) || !props.insert(p.name.as_str()) {
                    return bad(format!("bad or duplicate property '{}' in '{}'", p.name, el.name));
                }
                if let PropertyType::List { count, .. } = p.ty {
                    if !count.is_integer() {
                        return bad(format!("list '{}' has a non-integer count type", p.name));
                    }
                }
            }
            for (r, row) in el.rows.iter().enumerate() {
                if row.len() != el.properties.len() {
                    return bad(format!("{}[{r}] has {} values", el.name, row.len()));
                }
                for (p, v) in el.properties.iter().zip(row) {
                    let ok = match (p.ty, v) {
                        (PropertyType::Scalar(t), PlyValue::Scalar(s)) => s.ty() == t,
                        (PropertyType::List { count, item }, PlyValue::List(items)) => {
                            items.len() as u64 <= count.max_count() && items.iter().all(|s| s.ty() == item)
                        }
                        _ => false,
                    };
                    if !ok {
                        return bad(format!("{}[{r}].{} does not match its type", el.name, p.name));
                    }
                }
            }
        }
        Ok(())
    }
}

fn is_word(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_graphic())
}

/// Header plus the offset at which the body starts.
struct Header {
    model: PlyModel,
    counts: Vec<u64>,
    body_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let next_line = |pos: &mut usize| -> Option<&[u8]> {
        if *pos >= bytes.len() {
            return None;
        }
        let rest = &bytes[*pos..];
        let (line, advance) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], i + 1),
            None => (rest, rest.len()),
        };
        *pos += advance;
        Some(line.strip_suffix(b"\r").unwrap_or(line))
    };

    match next_line(&mut pos) {
        Some(b"ply") => line_no += 1,
        _ => return Err(PlyError::BadMagic),
    }

    let mut model = PlyModel::new(PlyEncoding::Ascii);
    let mut counts: Vec<u64> = Vec::new();
    let mut have_format = false;
    loop {
        let Some(raw) = next_line(&mut pos) else {
            return Err(PlyError::BadHeader {
                line: line_no + 1,
                reason: "missing end_header".into(),
            });
        };
        line_no += 1;
        let bad = |reason: String| PlyError::BadHeader { line: line_no, reason };
        let line = std::str::from_utf8(raw)
            .ok()
            .filter(|l| l.is_ascii())
            .ok_or_else(|| bad("header line is not ASCII".into()))?;
        let mut words = line.split_ascii_whitespace();
        let keyword = words.next().unwrap_or("");
        match keyword {
            "comment" | "obj_info" => {
                let text = line.trim_start()[keyword.len()..]
                    .strip_prefix(' ')
                    .unwrap_or(&line.trim_start()[keyword.len()..]);
                if keyword == "comment" {
                    model.comments.push(text.to_string());
                } else {
                    model.obj_info.push(text.to_string());
                }
            }
            "format" => {
                if have_format {
                    return Err(bad("duplicate format line".into()));
                }
                let (Some(enc), Some(version), None) = (words.next(), words.next(), words.next()) else {
                    return Err(bad("expected 'format <encoding> 1.0'".into()));
                };
                model.encoding = enc
                    .parse()
                    .map_err(|_| bad(format!("unknown encoding '{enc}'")))?;
                if version != "1.0" {
                    return Err(bad(format!("unsupported version '{version}'")));
                }
                have_format = true;
            }
            "element" => {
                if !have_format {
                    return Err(bad("element before format line".into()));
                }
                let (Some(name), Some(count), None) = (words.next(), words.next(), words.next()) else {
                    return Err(bad("expected 'element <name> <count>'".into()));
                };
                let count: u64 = count
                    .parse()
                    .map_err(|_| bad(format!("element count '{count}' is not a non-negative integer")))?;
                if model.element(name).is_some() {
                    return Err(bad(format!("duplicate element '{name}'")));
                }
                model.elements.push(PlyElement::new(name, Vec::new()));
                counts.push(count);
            }
            "property" => {
                let Some(element) = model.elements.last_mut() else {
                    return Err(bad("property before any element".into()));
                };
                let tokens: Vec<&str> = words.collect();
                let type_of = |name: &str| {
                    ScalarType::parse(name).ok_or_else(|| PlyError::TypeUnknown {
                        line: line_no,
                        name: name.to_string(),
                    })
                };
                let property = match tokens[..] {
                    ["list", count, item, name] => {
                        let count = type_of(count)?;
                        let item = type_of(item)?;
                        if !count.is_integer() {
                            return Err(bad(format!("list count type {} is not an integer", count.name())));
                        }
                        PlyProperty::list(name, count, item)
                    }
                    [ty, name] if ty != "list" => PlyProperty::scalar(name, type_of(ty)?),
                    _ => return Err(bad("malformed property line".into())),
                };
                if element.property_index(&property.name).is_some() {
                    return Err(bad(format!(
                        "duplicate property '{}' in element '{}'",
                        property.name, element.name
                    )));
                }
                element.properties.push(property);
            }
            "end_header" => {
                if words.next().is_some() {
                    return Err(bad("trailing text after end_header".into()));
                }
                break;
            }
            "" => return Err(bad("empty header line".into())),
            other => return Err(bad(format!("unexpected keyword '{other}'"))),
        }
    }
    if !have_format {
        return Err(PlyError::BadHeader {
            line: line_no,
            reason: "missing format line".into(),
        });
    }
    for (el, &count) in model.elements.iter().zip(&counts) {
        if el.properties.is_empty() && count > 0 {
            return Err(PlyError::BadHeader {
                line: line_no,
                reason: format!("element '{}' declares rows but no properties", el.name),
            });
        }
    }
    Ok(Header {
        model,
        counts,
        body_start: pos,
    })
}

/// Parses a PLY file.
pub fn parse_ply(bytes: &[u8]) -> Result<PlyModel, PlyError> {
    parse_ply_with_issues(bytes).map(|(m, _)| m)
}

/// Parses a PLY file and reports non-fatal problems (trailing data).
pub fn parse_ply_with_issues(bytes: &[u8]) -> Result<(PlyModel, Vec<FormatIssue>), PlyError> {
    let Header {
        mut model,
        counts,
        body_start,
    } = parse_header(bytes)?;
    let body = &bytes[body_start..];
    let mut issues = Vec::new();
    let trailing = match model.encoding {
        PlyEncoding::Ascii => AsciiReader::new(body).read(&mut model, &counts)?,
        PlyEncoding::BinaryLittleEndian => BinaryReader::new(body, false).read(&mut model, &counts)?,
        PlyEncoding::BinaryBigEndian => BinaryReader::new(body, true).read(&mut model, &counts)?,
    };
    if trailing > 0 {
        issues.push(FormatIssue::warning(
            "PLY_TRAILING_BYTES",
            format!("{trailing} byte(s) after the last element"),
        ));
    }
    Ok((model, issues))
}

fn capacity_hint(declared: u64, remaining: usize, min_row: usize) -> usize {
    let fit = remaining / min_row.max(1);
    (declared.min(fit as u64)) as usize
}

struct AsciiReader<'a> {
    body: &'a [u8],
    pos: usize,
}

impl<'a> AsciiReader<'a> {
    fn new(body: &'a [u8]) -> Self {
        AsciiReader { body, pos: 0 }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        while self.pos < self.body.len() && self.body[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= self.body.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.body.len() && !self.body[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some(&self.body[start..self.pos])
    }

    fn read(mut self, model: &mut PlyModel, counts: &[u64]) -> Result<usize, PlyError> {
        for (el, &count) in model.elements.iter_mut().zip(counts) {
            // every value needs at least one character and one separator
            let min_row = el.properties.len() * 2;
            el.rows = Vec::with_capacity(capacity_hint(count, self.body.len() - self.pos, min_row));
            for row_idx in 0..count {
                let row_idx = row_idx as usize;
                let truncated = || PlyError::Truncated {
                    element: el.name.clone(),
                    row: row_idx,
                };
                let mut row = Vec::with_capacity(el.properties.len());
                for prop in &el.properties {
                    let value = match prop.ty {
                        PropertyType::Scalar(t) => {
                            let tok = self.token().ok_or_else(truncated)?;
                            PlyValue::Scalar(parse_ascii_scalar(tok, t).map_err(|r| PlyError::BadValue {
                                element: el.name.clone(),
                                row: row_idx,
                                reason: r,
                            })?)
                        }
                        PropertyType::List { count: ct, item } => {
                            let tok = self.token().ok_or_else(truncated)?;
                            let n = parse_list_len(parse_ascii_scalar(tok, ct), ct).map_err(|r| {
                                PlyError::BadValue {
                                    element: el.name.clone(),
                                    row: row_idx,
                                    reason: r,
                                }
                            })?;
                            let mut items = Vec::with_capacity(n.min((self.body.len() - self.pos) / 2));
                            for _ in 0..n {
                                let tok = self.token().ok_or_else(truncated)?;
                                items.push(parse_ascii_scalar(tok, item).map_err(|r| PlyError::BadValue {
                                    element: el.name.clone(),
                                    row: row_idx,
                                    reason: r,
                                })?);
                            }
                            PlyValue::List(items)
                        }
                    };
                    row.push(value);
                }
                el.rows.push(row);
            }
        }
        let rest = &self.body[self.pos..];
        Ok(match rest.iter().position(|b| !b.is_ascii_whitespace()) {
            Some(i) => rest.len() - i,
            None => 0,
        })
    }
}

fn parse_list_len(count: Result<Scalar, String>, ty: ScalarType) -> Result<usize, String> {
    let count = count?;
    let n = count.as_i64();
    if n < 0 {
        return Err(format!("negative list length {n} ({})", ty.name()));
    }
    Ok(n as usize)
}

fn parse_ascii_scalar(tok: &[u8], ty: ScalarType) -> Result<Scalar, String> {
    let s = std::str::from_utf8(tok).map_err(|_| "value is not ASCII".to_string())?;
    let err = || format!("'{}' is not a valid {}", s.chars().take(40).collect::<String>(), ty.name());
    Ok(match ty {
        ScalarType::Int8 => Scalar::I8(s.parse().map_err(|_| err())?),
        ScalarType::Uint8 => Scalar::U8(s.parse().map_err(|_| err())?),
        ScalarType::Int16 => Scalar::I16(s.parse().map_err(|_| err())?),
        ScalarType::Uint16 => Scalar::U16(s.parse().map_err(|_| err())?),
        ScalarType::Int32 => Scalar::I32(s.parse().map_err(|_| err())?),
        ScalarType::Uint32 => Scalar::U32(s.parse().map_err(|_| err())?),
        ScalarType::Float32 => Scalar::F32(s.parse().map_err(|_| err())?),
        ScalarType::Float64 => Scalar::F64(s.parse().map_err(|_| err())?),
    })
}

struct BinaryReader<'a> {
    body: &'a [u8],
    pos: usize,
    big_endian: bool,
}

impl<'a> BinaryReader<'a> {
    fn new(body: &'a [u8], big_endian: bool) -> Self {
        BinaryReader { body, pos: 0, big_endian }
    }

    fn remaining(&self) -> usize {
        self.body.len() - self.pos
    }

    fn take<const N: usize>(&mut self) -> Option<[u8; N]> {
        let bytes = self.body.get(self.pos..self.pos + N)?;
        self.pos += N;
        Some(bytes.try_into().expect("slice of length N"))
    }

    fn scalar(&mut self, ty: ScalarType) -> Option<Scalar> {
        macro_rules! get {
            ($t:ty, $n:literal) => {{
                let b = self.take::<$n>()?;
                if self.big_endian {
                    <$t>::from_be_bytes(b)
                } else {
                    <$t>::from_le_bytes(b)
                }
            }};
        }
        Some(match ty {
            ScalarType::Int8 => Scalar::I8(get!(i8, 1)),
            ScalarType::Uint8 => Scalar::U8(get!(u8, 1)),
            ScalarType::Int16 => Scalar::I16(get!(i16, 2)),
            ScalarType::Uint16 => Scalar::U16(get!(u16, 2)),
            ScalarType::Int32 => Scalar::I32(get!(i32, 4)),
            ScalarType::Uint32 => Scalar::U32(get!(u32, 4)),
            ScalarType::Float32 => Scalar::F32(get!(f32, 4)),
            ScalarType::Float64 => Scalar::F64(get!(f64, 8)),
        })
    }

    fn read(mut self, model: &mut PlyModel, counts: &[u64]) -> Result<usize, PlyError> {
        for (el, &count) in model.elements.iter_mut().zip(counts) {
            let min_row: usize = el
                .properties
                .iter()
                .map(|p| match p.ty {
                    PropertyType::Scalar(t) => t.size(),
                    PropertyType::List { count, .. } => count.size(),
                })
                .sum();
            el.rows = Vec::with_capacity(capacity_hint(count, self.remaining(), min_row));
            for row_idx in 0..count {
                let row_idx = row_idx as usize;
                let truncated = || PlyError::Truncated {
                    element: el.name.clone(),
                    row: row_idx,
                };
                let mut row = Vec::with_capacity(el.properties.len());
                for prop in &el.properties {
                    let value = match prop.ty {
                        PropertyType::Scalar(t) => PlyValue::Scalar(self.scalar(t).ok_or_else(truncated)?),
                        PropertyType::List { count: ct, item } => {
                            let n = self.scalar(ct).ok_or_else(truncated)?;
                            let n = parse_list_len(Ok(n), ct).map_err(|reason| PlyError::BadValue {
                                element: el.name.clone(),
                                row: row_idx,
                                reason,
                            })?;
                            if n.saturating_mul(item.size()) > self.remaining() {
                                return Err(truncated());
                            }
                            let mut items = Vec::with_capacity(n);
                            for _ in 0..n {
                                items.push(self.scalar(item).ok_or_else(truncated)?);
                            }
                            PlyValue::List(items)
                        }
                    };
                    row.push(value);
                }
                el.rows.push(row);
            }
        }
        Ok(self.remaining())
    }
}

/// Serializes a model. The model is expected to satisfy [`PlyModel::check`];
/// values whose type differs from the declared one are converted.
pub fn write_ply(model: &PlyModel, encoding: PlyEncoding) -> Vec<u8> {
    let mut header = String::new();
    header.push_str("ply\n");
    header.push_str(&format!("format {} {}\n", encoding.as_str(), model.version));
    for c in &model.comments {
        header.push_str(&format!("comment {c}\n"));
    }
    for o in &model.obj_info {
        header.push_str(&format!("obj_info {o}\n"));
    }
    for el in &model.elements {
        header.push_str(&format!("element {} {}\n", el.name, el.declared_count()));
        for p in &el.properties {
            match p.ty {
                PropertyType::Scalar(t) => header.push_str(&format!("property {} {}\n", t.name(), p.name)),
                PropertyType::List { count, item } => header.push_str(&format!(
                    "property list {} {} {}\n",
                    count.name(),
                    item.name(),
                    p.name
                )),
            }
        }
    }
    header.push_str("end_header\n");

    match encoding {
        PlyEncoding::Ascii => {
            let mut body = header;
            for el in &model.elements {
                for row in &el.rows {
                    for (i, (p, v)) in el.properties.iter().zip(row).enumerate() {
                        if i > 0 {
                            body.push(' ');
                        }
                        match (p.ty, v) {
                            (PropertyType::Scalar(t), PlyValue::Scalar(s)) => s.cast(t).write_ascii(&mut body),
                            (PropertyType::List { item, .. }, PlyValue::List(items)) => {
                                body.push_str(&items.len().to_string());
                                for s in items {
                                    body.push(' ');
                                    s.cast(item).write_ascii(&mut body);
                                }
                            }
                            (PropertyType::Scalar(_), PlyValue::List(_)) => body.push('0'),
                            (PropertyType::List { .. }, PlyValue::Scalar(_)) => body.push('0'),
                        }
                    }
                    body.push('\n');
                }
            }
            body.into_bytes()
        }
        PlyEncoding::BinaryLittleEndian | PlyEncoding::BinaryBigEndian => {
            let big = encoding == PlyEncoding::BinaryBigEndian;
            let mut out = header.into_bytes();
            for el in &model.elements {
                for row in &el.rows {
                    for (p, v) in el.properties.iter().zip(row) {
                        match (p.ty, v) {
                            (PropertyType::Scalar(t), PlyValue::Scalar(s)) => s.cast(t).write_binary(big, &mut out),
                            (PropertyType::List { count, item }, PlyValue::List(items)) => {
                                Scalar::U32(items.len() as u32).cast(count).write_binary(big, &mut out);
                                for s in items {
                                    s.cast(item).write_binary(big, &mut out);
                                }
                            }
                            (PropertyType::Scalar(t), PlyValue::List(_)) => {
                                Scalar::U8(0).cast(t).write_binary(big, &mut out)
                            }
                            (PropertyType::List { count, .. }, PlyValue::Scalar(_)) => {
                                Scalar::U8(0).cast(count).write_binary(big, &mut out)
                            }
                        }
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE_ASCII: &[u8] = include_bytes!("../../fixtures/ply/cube_ascii.ply");
    const CUBE_BLE: &[u8] = include_bytes!("../../fixtures/ply/cube_binary_le.ply");

    #[test]
    fn empty_payload_file() {
        let m = parse_ply(b"ply\nformat ascii 1.0\nelement vertex 0\nproperty float32 x\nend_header\n").unwrap();
        assert_eq!(m.elements.len(), 1);
        assert_eq!(m.element_count("vertex"), 0);
    }

    #[test]
    fn cube_counts_and_encodings_agree() {
        let a = parse_ply(CUBE_ASCII).unwrap();
        let b = parse_ply(CUBE_BLE).unwrap();
        assert_eq!((a.element_count("vertex"), a.element_count("face")), (8, 12));
        assert_eq!(a.encoding, PlyEncoding::Ascii);
        assert_eq!(b.encoding, PlyEncoding::BinaryLittleEndian);
        assert!(a.same_content(&b));
    }

    #[test]
    fn truncated_payload_names_element_and_row() {
        let mut text = String::from("ply\nformat ascii 1.0\nelement vertex 10\nproperty float x\nproperty float y\nend_header\n");
        for i in 0..9 {
            text.push_str(&format!("{i} {i}\n"));
        }
        assert_eq!(
            parse_ply(text.as_bytes()).unwrap_err(),
            PlyError::Truncated {
                element: "vertex".into(),
                row: 9
            }
        );

        let mut bin = b"ply\nformat binary_little_endian 1.0\nelement vertex 10\nproperty float x\nend_header\n".to_vec();
        for i in 0..9 {
            bin.extend_from_slice(&(i as f32).to_le_bytes());
        }
        assert_eq!(
            parse_ply(&bin).unwrap_err(),
            PlyError::Truncated {
                element: "vertex".into(),
                row: 9
            }
        );
    }

    #[test]
    fn header_errors() {
        assert_eq!(parse_ply(b"").unwrap_err(), PlyError::BadMagic);
        assert_eq!(parse_ply(b"plyx\n").unwrap_err(), PlyError::BadMagic);
        let cases: [(&[u8], &str); 7] = [
            (b"ply\nformat ascii 2.0\nend_header\n", "PLY_BAD_HEADER"),
            (b"ply\nformat ascii 1.0\nproperty float x\nend_header\n", "PLY_BAD_HEADER"),
            (b"ply\nformat ascii 1.0\nelement v 1\nproperty quad x\nend_header\n", "PLY_TYPE_UNKNOWN"),
            (b"ply\nformat ascii 1.0\nelement v 1\nproperty float x\nproperty float x\nend_header\n", "PLY_BAD_HEADER"),
            (b"ply\nformat ascii 1.0\nelement v 1\nproperty list float int i\nend_header\n", "PLY_BAD_HEADER"),
            (b"ply\nformat ascii 1.0\nelement v 1\nproperty float x\n", "PLY_BAD_HEADER"),
            (b"ply\nelement v 1\nproperty float x\nend_header\n", "PLY_BAD_HEADER"),
        ];
        for (input, code) in cases {
            assert_eq!(parse_ply(input).unwrap_err().code(), code, "{}", String::from_utf8_lossy(input));
        }
    }

    #[test]
    fn bad_header_reports_line() {
        let err = parse_ply(b"ply\nformat ascii 1.0\ncomment ok\nbogus line\nend_header\n").unwrap_err();
        assert!(matches!(err, PlyError::BadHeader { line: 4, .. }), "{err:?}");
    }

    #[test]
    fn aliases_are_normalized_on_output() {
        let m = parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty uchar red\nend_header\n1.5 200\n").unwrap();
        let out = String::from_utf8(write_ply(&m, PlyEncoding::Ascii)).unwrap();
        assert!(out.contains("property float32 x\n"));
        assert!(out.contains("property uint8 red\n"));
    }

    #[test]
    fn trailing_bytes_are_reported() {
        let (_, issues) = parse_ply_with_issues(b"ply\nformat ascii 1.0\nelement v 1\nproperty int8 a\nend_header\n1\n2 3\n").unwrap();
        assert_eq!(issues[0].code, "PLY_TRAILING_BYTES");
        let (_, issues) = parse_ply_with_issues(b"ply\nformat ascii 1.0\nelement v 1\nproperty int8 a\nend_header\n1\n\n").unwrap();
        assert!(issues.is_empty());
    }

    #[test]
    fn huge_declared_counts_do_not_allocate() {
        let err = parse_ply(b"ply\nformat binary_big_endian 1.0\nelement v 18446744073709551615\nproperty list uint32 float64 a\nend_header\n\xff\xff\xff\xff").unwrap_err();
        assert_eq!(err.code(), "PLY_TRUNCATED");
        let err = parse_ply(b"ply\nformat ascii 1.0\nelement v 99999999999999\nproperty int8 a\nend_header\n1 2").unwrap_err();
        assert_eq!(err, PlyError::Truncated { element: "v".into(), row: 2 });
    }

    #[test]
    fn out_of_range_ascii_values() {
        let err = parse_ply(b"ply\nformat ascii 1.0\nelement v 1\nproperty uint8 a\nend_header\n300\n").unwrap_err();
        assert_eq!(err.code(), "PLY_BAD_VALUE");
        let err = parse_ply(b"ply\nformat ascii 1.0\nelement v 1\nproperty list int8 int8 a\nend_header\n-1\n").unwrap_err();
        assert_eq!(err.code(), "PLY_BAD_VALUE");
    }

    #[test]
    fn cube_round_trips_through_every_encoding() {
        let cube = parse_ply(CUBE_ASCII).unwrap();
        for enc in PlyEncoding::ALL {
            let back = parse_ply(&write_ply(&cube, enc)).unwrap();
            assert_eq!(back.encoding, enc);
            assert!(back.same_content(&cube), "{enc}");
        }
    }
}
