//! Edge-list CSV with header `src,dst,timestamp,label`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Label, LogEvent, NodeId};

pub const EDGE_HEADER: [&str; 4] = ["src", "dst", "timestamp", "label"];

/// Dense node ids assigned in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    names: Vec<String>,
    index: BTreeMap<String, NodeId>,
}

impl IdMap {
    pub fn intern(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as NodeId;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    /// The name, or the decimal id when the node was never interned.
    pub fn display(&self, id: NodeId) -> String {
        self.name(id).map_or_else(|| id.to_string(), str::to_string)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["node_id", "name"])?;
        for (i, n) in self.names.iter().enumerate() {
            w.write_record([i.to_string().as_str(), n])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut map = IdMap::default();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(i + 2, |p| p.line() as usize);
            let id: usize = rec
                .get(0)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: "node_id is not an integer".into(),
                })?;
            let name = rec.get(1).ok_or_else(|| Error::Parse {
                line,
                message: "missing name".into(),
            })?;
            if id != map.len() || map.intern(name) as usize != id {
                return Err(Error::Parse {
                    line,
                    message: format!("id map is not dense at node {id}"),
                });
            }
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeList {
    pub events: Vec<LogEvent>,
    pub ids: IdMap,
}

pub fn load_edge_csv(path: &Path) -> Result<EdgeList> {
    let file = std::fs::File::open(path)?;
    read_edges(file)
}

/// Parse from any reader; row errors carry the 1-based line number.
pub fn read_edges<R: std::io::Read>(reader: R) -> Result<EdgeList> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = r.headers()?.clone();
    let mut col = [0usize; 4];
    for (slot, name) in col.iter_mut().zip(EDGE_HEADER) {
        *slot = header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })?;
    }
    let mut out = EdgeList::default();
    let mut record = csv::StringRecord::new();
    loop {
        let more = r.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(col[i]).unwrap_or("");
        let (src, dst) = (field(0), field(1));
        if src.is_empty() || dst.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty node name".into(),
            });
        }
        let timestamp: u64 = field(2).parse().map_err(|_| Error::Parse {
            line,
            message: format!("timestamp `{}` is not a non-negative integer", field(2)),
        })?;
        let label = field(3)
            .parse::<u8>()
            .ok()
            .and_then(Label::from_u8)
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("label `{}` is not 0 or 1", field(3)),
            })?;
        let src = out.ids.intern(src);
        let dst = out.ids.intern(dst);
        out.events.push(LogEvent::new(src, dst, timestamp, label));
    }
    Ok(out)
}

pub fn write_edge_csv(path: &Path, events: &[LogEvent], ids: &IdMap) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_edges(file, events, ids)
}

pub fn write_edges<W: std::io::Write>(writer: W, events: &[LogEvent], ids: &IdMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EDGE_HEADER)?;
    for e in events {
        w.write_record([
            ids.display(e.src),
            ids.display(e.dst),
            e.timestamp.to_string(),
            e.label.as_u8().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
