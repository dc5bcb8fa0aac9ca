//! Line-oriented request protocol.
//!
//! Each request is one line; each response is a block of body lines followed
//! by a trailer, `#mac=<hex>` in keyed mode and `#end` otherwise. In keyed
//! mode a request carries ` #mac=<hex>` after its text and the response tag
//! covers the body bytes, newlines included.

use std::fmt;

use crate::digest::Digest;
use crate::trust::{tag_message, verify_message, MacKey};

pub const MAC_MARKER: &str = " #mac=";
pub const END_TRAILER: &str = "#end";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Request {
    Ask {
        pid: String,
        prop: String,
    },
    Status {
        pid: Option<String>,
    },
    History {
        pid: String,
        range: Option<(u64, u64)>,
    },
    Reports {
        pid: Option<String>,
    },
    Trust {
        pid: Option<String>,
    },
    Attest,
    Kill {
        pid: String,
        confirm: Option<String>,
    },
    List,
}

/// Wire error codes, rendered as `err <code>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCode {
    UnknownCommand,
    UnknownPid,
    BadProp,
    BadArgs,
    ConfirmationRequired,
    IntegrityFailure,
    EmptyRange,
    NotRunning,
    Refused,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::UnknownCommand => "unknown-command",
            ErrorCode::UnknownPid => "unknown-pid",
            ErrorCode::BadProp => "bad-prop",
            ErrorCode::BadArgs => "bad-args",
            ErrorCode::ConfirmationRequired => "confirmation-required",
            ErrorCode::IntegrityFailure => "integrity-failure",
            ErrorCode::EmptyRange => "empty-range",
            ErrorCode::NotRunning => "not-running",
            ErrorCode::Refused => "process-refused",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Request {
    pub fn parse(line: &str) -> Result<Request, ErrorCode> {
        let line = line.trim();
        let (verb, rest) = match line.split_once(char::is_whitespace) {
            Some((v, r)) => (v, r.trim()),
            None => (line, ""),
        };
        let args: Vec<&str> = rest.split_whitespace().collect();
        let optional_pid = |args: &[&str]| match args {
            [] => Ok(None),
            [p] => Ok(Some(p.to_string())),
            _ => Err(ErrorCode::BadArgs),
        };
        match verb.to_ascii_uppercase().as_str() {
            "ASK" => {
                let (pid, prop) = rest
                    .split_once(char::is_whitespace)
                    .ok_or(ErrorCode::BadArgs)?;
                let prop = prop.trim();
                if prop.is_empty() {
                    return Err(ErrorCode::BadArgs);
                }
                Ok(Request::Ask {
                    pid: pid.to_string(),
                    prop: prop.to_string(),
                })
            }
            "STATUS" => Ok(Request::Status {
                pid: optional_pid(&args)?,
            }),
            "REPORTS" => Ok(Request::Reports {
                pid: optional_pid(&args)?,
            }),
            "TRUST" => Ok(Request::Trust {
                pid: optional_pid(&args)?,
            }),
            "HISTORY" => match args[..] {
                [pid] => Ok(Request::History {
                    pid: pid.to_string(),
                    range: None,
                }),
                [pid, from, to] => {
                    let from = from.parse().map_err(|_| ErrorCode::BadArgs)?;
                    let to = to.parse().map_err(|_| ErrorCode::BadArgs)?;
                    Ok(Request::History {
                        pid: pid.to_string(),
                        range: Some((from, to)),
                    })
                }
                _ => Err(ErrorCode::BadArgs),
            },
            "KILL" => match args[..] {
                [pid] => Ok(Request::Kill {
                    pid: pid.to_string(),
                    confirm: None,
                }),
                [pid, confirm] => {
                    let token = confirm.strip_prefix("confirm=").ok_or(ErrorCode::BadArgs)?;
                    Ok(Request::Kill {
                        pid: pid.to_string(),
                        confirm: Some(token.to_string()),
                    })
                }
                _ => Err(ErrorCode::BadArgs),
            },
            "ATTEST" if args.is_empty() => Ok(Request::Attest),
            "LIST" if args.is_empty() => Ok(Request::List),
            "ATTEST" | "LIST" => Err(ErrorCode::BadArgs),
            _ => Err(ErrorCode::UnknownCommand),
        }
    }

    /// The pid a request is about, if any.
    pub fn pid(&self) -> Option<&str> {
        match self {
            Request::Ask { pid, .. } | Request::History { pid, .. } | Request::Kill { pid, .. } => {
                Some(pid)
            }
            Request::Status { pid } | Request::Reports { pid } | Request::Trust { pid } => {
                pid.as_deref()
            }
            Request::Attest | Request::List => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Response {
    pub lines: Vec<String>,
}

impl Response {
    pub fn ok(lines: Vec<String>) -> Response {
        Response { lines }
    }

    pub fn line(line: impl Into<String>) -> Response {
        Response {
            lines: vec![line.into()],
        }
    }

    pub fn err(code: ErrorCode) -> Response {
        Response::line(format!("err {code}"))
    }

    pub fn is_err(&self) -> bool {
        self.lines.first().is_some_and(|l| l.starts_with("err "))
    }

    pub fn body(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }

    /// Body plus trailer line.
    pub fn render(&self, key: Option<&MacKey>) -> String {
        let body = self.body();
        let trailer = match key {
            Some(k) => format!("#mac={}", tag_message(k, body.as_bytes())),
            None => END_TRAILER.to_string(),
        };
        format!("{body}{trailer}\n")
    }
}

/// Tags on the wire are exactly 64 lowercase hex digits.
fn parse_tag(text: &str) -> Option<Digest> {
    let canonical =
        text.len() == 64 && text.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
    canonical.then(|| Digest::from_hex(text).ok()).flatten()
}

/// Appends ` #mac=<hex>` to a request line.
pub fn sign_request(key: &MacKey, request: &str) -> String {
    format!(
        "{request}{MAC_MARKER}{}",
        tag_message(key, request.as_bytes())
    )
}

/// Splits off and checks the request tag. Without a key the line is returned
/// unchanged.
pub fn authenticate<'a>(key: Option<&MacKey>, line: &'a str) -> Result<&'a str, ErrorCode> {
    let Some(key) = key else {
        return Ok(line);
    };
    let (text, tag) = line
        .rsplit_once(MAC_MARKER)
        .ok_or(ErrorCode::IntegrityFailure)?;
    let tag = parse_tag(tag).ok_or(ErrorCode::IntegrityFailure)?;
    if verify_message(key, text.as_bytes(), &tag) {
        Ok(text)
    } else {
        Err(ErrorCode::IntegrityFailure)
    }
}

/// Checks a rendered response block against `key`; returns the body lines.
pub fn verify_response(key: &MacKey, block: &str) -> Option<Vec<String>> {
    let trimmed = block.strip_suffix('\n')?;
    let (body, trailer) = match trimmed.rfind('\n') {
        Some(i) => (&block[..=i], &trimmed[i + 1..]),
        None => ("", trimmed),
    };
    let tag = parse_tag(trailer.strip_prefix("#mac=")?)?;
    verify_message(key, body.as_bytes(), &tag).then(|| body.lines().map(str::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_verbs() {
        assert_eq!(
            Request::parse("ASK p1 (reg(0) = 0)"),
            Ok(Request::Ask {
                pid: "p1".into(),
                prop: "(reg(0) = 0)".into()
            })
        );
        assert_eq!(Request::parse("LIST"), Ok(Request::List));
        assert_eq!(Request::parse("status"), Ok(Request::Status { pid: None }));
        assert_eq!(
            Request::parse("HISTORY p1 3 9"),
            Ok(Request::History {
                pid: "p1".into(),
                range: Some((3, 9))
            })
        );
        assert_eq!(
            Request::parse("KILL p1 confirm=abcd1234"),
            Ok(Request::Kill {
                pid: "p1".into(),
                confirm: Some("abcd1234".into())
            })
        );
        assert_eq!(Request::parse("FROBNICATE"), Err(ErrorCode::UnknownCommand));
        assert_eq!(Request::parse(""), Err(ErrorCode::UnknownCommand));
        assert_eq!(Request::parse("ASK p1"), Err(ErrorCode::BadArgs));
        assert_eq!(Request::parse("HISTORY p1 x 2"), Err(ErrorCode::BadArgs));
        assert_eq!(Request::parse("KILL p1 now"), Err(ErrorCode::BadArgs));
    }

    #[test]
    fn unkeyed_framing() {
        let r = Response::line("yes id=1");
        assert_eq!(r.render(None), "yes id=1\n#end\n");
        assert_eq!(authenticate(None, "LIST"), Ok("LIST"));
    }

    #[test]
    fn keyed_round_trip() {
        let key = MacKey::new([7; 32]);
        let signed = sign_request(&key, "LIST");
        assert_eq!(authenticate(Some(&key), &signed), Ok("LIST"));
        assert_eq!(
            authenticate(Some(&key), "LIST"),
            Err(ErrorCode::IntegrityFailure)
        );
        let forged = signed.replace("LIST", "KILL");
        assert_eq!(
            authenticate(Some(&key), &forged),
            Err(ErrorCode::IntegrityFailure)
        );

        let resp = Response::ok(vec!["a".into(), "b".into()]);
        let block = resp.render(Some(&key));
        assert_eq!(
            verify_response(&key, &block),
            Some(vec!["a".into(), "b".into()])
        );
        let tampered = block.replacen('a', "c", 1);
        assert_eq!(verify_response(&key, &tampered), None);
        assert_eq!(verify_response(&MacKey::new([8; 32]), &block), None);
        assert_eq!(
            verify_response(&key, &block.to_uppercase().replace("#MAC=", "#mac=")),
            None
        );
    }
}
