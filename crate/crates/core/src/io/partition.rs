//! Partition CSV with header `node_id,client_id`; node ids are written by name.

use std::collections::BTreeMap;
use std::path::Path;

use super::edges::IdMap;
use crate::error::{Error, Result};
use crate::graph::{NodeId, PartitionMap};

pub fn write_partition_csv(path: &Path, pm: &PartitionMap, ids: &IdMap) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["node_id", "client_id"])?;
    for (&node, &k) in pm.assignment() {
        w.write_record([ids.display(node), k.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a partition written by [`write_partition_csv`]; names must be known to `ids`.
pub fn read_partition_csv(path: &Path, ids: &IdMap, clients: usize) -> Result<PartitionMap> {
    let mut r = csv::Reader::from_path(path)?;
    let mut assignment: BTreeMap<NodeId, usize> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let name = rec.get(0).unwrap_or("");
        let node = ids.id(name).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown node `{name}`"),
        })?;
        let k: usize = rec
            .get(1)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line,
                message: "client_id is not an integer".into(),
            })?;
        if assignment.insert(node, k).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("node `{name}` assigned twice"),
            });
        }
    }
    PartitionMap::new(assignment, clients)
}
