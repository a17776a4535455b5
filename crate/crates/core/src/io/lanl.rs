//! LANL authentication logs, reduced to NTLM computer-to-computer events.
//!
//! Two row layouts are accepted, without a header:
//! - the full auth layout `time,src_user,dst_user,src_computer,dst_computer,auth_type,...`
//!   (9 fields), kept when `auth_type` is `NTLM`;
//! - the short layout `NTLM,src,dst,time` (4 fields).
//!
//! Red-team rows `time,user,src_computer,dst_computer` label matching events malicious.

use std::collections::BTreeSet;
use std::path::Path;

use super::edges::EdgeList;
use crate::error::{Error, Result};
use crate::graph::{Label, LogEvent};

pub const NTLM: &str = "NTLM";

/// `(time, src_computer, dst_computer)` of every red-team event.
pub type RedTeam = BTreeSet<(u64, String, String)>;

fn reader<R: std::io::Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn parse_time(s: &str, line: usize) -> Result<u64> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("time `{s}` is not a non-negative integer"),
    })
}

fn row_error(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

pub fn read_redteam<R: std::io::Read>(r: R) -> Result<RedTeam> {
    let mut out = RedTeam::new();
    for rec in reader(r).records() {
        let rec = rec.map_err(row_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("red-team row has {} fields, expected 4", rec.len()),
            });
        }
        out.insert((parse_time(&rec[0], line)?, rec[2].to_string(), rec[3].to_string()));
    }
    Ok(out)
}

pub fn read_lanl_auth<R: std::io::Read>(r: R, redteam: &RedTeam) -> Result<EdgeList> {
    let mut out = EdgeList::default();
    for rec in reader(r).records() {
        let rec = rec.map_err(row_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let (time, src, dst) = match rec.len() {
            9 if &rec[5] == NTLM => (&rec[0], &rec[3], &rec[4]),
            4 if &rec[0] == NTLM => (&rec[3], &rec[1], &rec[2]),
            9 | 4 => continue,
            n => {
                return Err(Error::Parse {
                    line,
                    message: format!("auth row has {n} fields, expected 9 or 4"),
                })
            }
        };
        let t = parse_time(time, line)?;
        let label = if redteam.contains(&(t, src.to_string(), dst.to_string())) {
            Label::Malicious
        } else {
            Label::Benign
        };
        let (s, d) = (out.ids.intern(src), out.ids.intern(dst));
        out.events.push(LogEvent::new(s, d, t, label));
    }
    Ok(out)
}

pub fn load_lanl(auth: &Path, redteam: Option<&Path>) -> Result<EdgeList> {
    let rt = match redteam {
        Some(p) => read_redteam(std::fs::File::open(p)?)?,
        None => RedTeam::new(),
    };
    read_lanl_auth(std::fs::File::open(auth)?, &rt)
}
