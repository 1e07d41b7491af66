//! Validation reports shared by catalog validation, package verification and
//! link checking.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub path: String,
    pub code: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}] {}", self.path, self.code, self.message)
    }
}

/// Errors and warnings keyed by the path of the offending field.
///
/// Entries are kept sorted by path (array indices compare numerically), then
/// code, then message, so two reports over the same input are identical.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_error_free(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn error(&mut self, path: impl Into<String>, code: &str, message: impl Into<String>) {
        insert_sorted(
            &mut self.errors,
            Issue {
                path: path.into(),
                code: code.to_string(),
                message: message.into(),
            },
        );
    }

    pub fn warning(&mut self, path: impl Into<String>, code: &str, message: impl Into<String>) {
        insert_sorted(
            &mut self.warnings,
            Issue {
                path: path.into(),
                code: code.to_string(),
                message: message.into(),
            },
        );
    }

    pub fn merge(&mut self, other: ValidationReport) {
        for issue in other.errors {
            insert_sorted(&mut self.errors, issue);
        }
        for issue in other.warnings {
            insert_sorted(&mut self.warnings, issue);
        }
    }

    pub fn has_error(&self, code: &str) -> bool {
        self.errors.iter().any(|i| i.code == code)
    }

    pub fn has_warning(&self, code: &str) -> bool {
        self.warnings.iter().any(|i| i.code == code)
    }

    pub fn errors_with_code<'a>(&'a self, code: &'a str) -> impl Iterator<Item = &'a Issue> + 'a {
        self.errors.iter().filter(move |i| i.code == code)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

fn insert_sorted(list: &mut Vec<Issue>, issue: Issue) {
    let pos = list
        .binary_search_by(|probe| compare_issues(probe, &issue))
        .unwrap_or_else(|p| p);
    list.insert(pos, issue);
}

fn compare_issues(a: &Issue, b: &Issue) -> Ordering {
    compare_paths(&a.path, &b.path)
        .then_with(|| a.code.cmp(&b.code))
        .then_with(|| a.message.cmp(&b.message))
}

/// Orders `objects[2].title` before `objects[10].title`.
pub fn compare_paths(a: &str, b: &str) -> Ordering {
    let mut left = PathTokens(a);
    let mut right = PathTokens(b);
    loop {
        match (left.next(), right.next()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) => {
                let ord = match (x, y) {
                    (PathToken::Index(i), PathToken::Index(j)) => i.cmp(&j),
                    (PathToken::Key(k), PathToken::Key(l)) => k.cmp(l),
                    (PathToken::Key(_), PathToken::Index(_)) => Ordering::Less,
                    (PathToken::Index(_), PathToken::Key(_)) => Ordering::Greater,
                };
                if ord != Ordering::Equal {
                    return ord;
                }
            }
        }
    }
}

/// One step of a report path such as `objects[0].documents[3].checksum`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathToken<'a> {
    Key(&'a str),
    Index(usize),
}

/// Splits a report path into keys and array indices.
pub fn path_tokens(path: &str) -> impl Iterator<Item = PathToken<'_>> {
    PathTokens(path)
}

struct PathTokens<'a>(&'a str);

impl<'a> Iterator for PathTokens<'a> {
    type Item = PathToken<'a>;

    fn next(&mut self) -> Option<PathToken<'a>> {
        let s = self.0.strip_prefix('.').unwrap_or(self.0);
        if s.is_empty() {
            self.0 = s;
            return None;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let end = rest.find(']').unwrap_or(rest.len());
            let digits = &rest[..end];
            self.0 = rest.get(end + 1..).unwrap_or("");
            return Some(match digits.parse() {
                Ok(i) => PathToken::Index(i),
                Err(_) => PathToken::Key(digits),
            });
        }
        let end = s.find(['.', '[']).unwrap_or(s.len());
        self.0 = &s[end..];
        Some(PathToken::Key(&s[..end]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_sort_with_numeric_indices() {
        let mut r = ValidationReport::new();
        r.error("objects[10].title", "MISSING", "x");
        r.error("objects[2].title", "MISSING", "x");
        r.error("citation", "MISSING", "x");
        let paths: Vec<_> = r.errors.iter().map(|i| i.path.as_str()).collect();
        assert_eq!(paths, ["citation", "objects[2].title", "objects[10].title"]);
    }

    #[test]
    fn tokenizes_nested_paths() {
        let toks: Vec<_> = path_tokens("objects[0].documents[12].checksum").collect();
        assert_eq!(
            toks,
            [
                PathToken::Key("objects"),
                PathToken::Index(0),
                PathToken::Key("documents"),
                PathToken::Index(12),
                PathToken::Key("checksum"),
            ]
        );
    }
}
