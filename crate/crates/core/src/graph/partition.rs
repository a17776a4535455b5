//! Node-to-client assignment.
//!
//! Three deterministic partitioners stand in for an external clustering tool.
//! All of them guarantee that every client owns at least one node.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::temporal::{NodeId, TemporalGraph};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStrategy {
    Hash,
    DegreeBalanced,
    #[default]
    Community,
}

/// Total function from node to client index in `1..=clients`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    assignment: BTreeMap<NodeId, usize>,
    clients: usize,
}

impl PartitionMap {
    pub fn new(assignment: BTreeMap<NodeId, usize>, clients: usize) -> Result<Self> {
        let mut sizes = vec![0usize; clients];
        for (&n, &k) in &assignment {
            if k == 0 || k > clients {
                return Err(Error::InvalidArgument(format!(
                    "node {n} assigned to client {k}, expected 1..={clients}"
                )));
            }
            sizes[k - 1] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!(
                "client {} owns no nodes",
                empty + 1
            )));
        }
        Ok(Self {
            assignment,
            clients,
        })
    }

    pub fn clients(&self) -> usize {
        self.clients
    }

    pub fn client_of(&self, node: NodeId) -> Option<usize> {
        self.assignment.get(&node).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<NodeId, usize> {
        &self.assignment
    }

    pub fn members(&self, k: usize) -> BTreeSet<NodeId> {
        self.assignment
            .iter()
            .filter(|&(_, &c)| c == k)
            .map(|(&n, _)| n)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.clients];
        for &k in self.assignment.values() {
            sizes[k - 1] += 1;
        }
        sizes
    }
}

pub fn stable_hash(id: NodeId, seed: u64) -> u64 {
    let mut bytes = [0u8; 16];
    bytes[..8].copy_from_slice(&id.to_le_bytes());
    bytes[8..].copy_from_slice(&seed.to_le_bytes());
    seed::fnv1a64(&bytes)
}

pub fn partition_nodes(
    graph: &TemporalGraph,
    clients: usize,
    strategy: PartitionStrategy,
    seed: u64,
) -> Result<PartitionMap> {
    let n = graph.nodes.len();
    if clients < 2 {
        return Err(Error::InvalidArgument("need at least 2 clients".into()));
    }
    if clients > n {
        return Err(Error::TooManyClients { clients, nodes: n });
    }
    let mut assignment = match strategy {
        PartitionStrategy::Hash => graph
            .nodes
            .iter()
            .map(|&id| (id, (stable_hash(id, seed) % clients as u64) as usize + 1))
            .collect(),
        PartitionStrategy::DegreeBalanced => degree_balanced(graph, clients, seed),
        PartitionStrategy::Community => community(graph, clients, seed),
    };
    fill_empty_clients(&mut assignment, clients);
    PartitionMap::new(assignment, clients)
}

/// Move nodes from the largest client into empty ones until none is empty.
fn fill_empty_clients(assignment: &mut BTreeMap<NodeId, usize>, clients: usize) {
    loop {
        let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); clients];
        for (&n, &k) in assignment.iter() {
            members[k - 1].push(n);
        }
        let Some(empty) = members.iter().position(Vec::is_empty) else {
            return;
        };
        let donor = (0..clients)
            .max_by_key(|&k| (members[k].len(), std::cmp::Reverse(k)))
            .expect("clients > 0");
        let node = *members[donor].last().expect("donor is non-empty");
        assignment.insert(node, empty + 1);
    }
}

fn degree_balanced(graph: &TemporalGraph, clients: usize, seed: u64) -> BTreeMap<NodeId, usize> {
    let adj = graph.undirected_adjacency();
    let mut order: Vec<(usize, u64, NodeId)> = adj
        .iter()
        .map(|(&n, nb)| (nb.len(), stable_hash(n, seed), n))
        .collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut load = vec![(0usize, 0usize); clients];
    let mut out = BTreeMap::new();
    for (deg, _, n) in order {
        let k = (0..clients)
            .min_by_key(|&k| (load[k].0, load[k].1, k))
            .expect("clients > 0");
        load[k].0 += deg;
        load[k].1 += 1;
        out.insert(n, k + 1);
    }
    out
}

const MAX_SWEEPS: usize = 100;

/// Seeded asynchronous label propagation over event-count weights, then merge or
/// split communities until exactly `clients` remain.
fn community(graph: &TemporalGraph, clients: usize, seed: u64) -> BTreeMap<NodeId, usize> {
    let mut neighbours: BTreeMap<NodeId, Vec<(NodeId, f64)>> =
        graph.nodes.iter().map(|&n| (n, Vec::new())).collect();
    for (&(a, b), &w) in &graph.weighted_edges() {
        neighbours.entry(a).or_default().push((b, w));
        neighbours.entry(b).or_default().push((a, w));
    }

    let mut label: BTreeMap<NodeId, NodeId> = graph.nodes.iter().map(|&n| (n, n)).collect();
    let mut order: Vec<NodeId> = graph.nodes.iter().copied().collect();
    for sweep in 0..MAX_SWEEPS {
        let mut rng = seed::rng(seed::derive(seed, "label-propagation", sweep as u64));
        order.shuffle(&mut rng);
        let mut changed = false;
        for &n in &order {
            let mut score: BTreeMap<NodeId, f64> = BTreeMap::new();
            for &(m, w) in &neighbours[&n] {
                *score.entry(label[&m]).or_insert(0.0) += w;
            }
            let Some(best) = score.values().copied().fold(None, |acc: Option<f64>, s| {
                Some(acc.map_or(s, |a| a.max(s)))
            }) else {
                continue;
            };
            let current = label[&n];
            if score.get(&current) == Some(&best) {
                continue;
            }
            let winner = score
                .iter()
                .find(|&(_, &s)| s == best)
                .map(|(&l, _)| l)
                .expect("non-empty score map");
            label.insert(n, winner);
            changed = true;
        }
        if !changed {
            break;
        }
    }

    let mut groups: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for (&n, &l) in &label {
        groups.entry(l).or_default().insert(n);
    }
    let mut groups: Vec<BTreeSet<NodeId>> = groups.into_values().collect();

    while groups.len() > clients {
        let smallest = (0..groups.len())
            .min_by_key(|&i| (groups[i].len(), *groups[i].first().unwrap()))
            .unwrap();
        let mut link = vec![0.0; groups.len()];
        let owner: BTreeMap<NodeId, usize> = groups
            .iter()
            .enumerate()
            .flat_map(|(i, g)| g.iter().map(move |&n| (n, i)))
            .collect();
        for &n in &groups[smallest] {
            for &(m, w) in &neighbours[&n] {
                link[owner[&m]] += w;
            }
        }
        link[smallest] = 0.0;
        let target = (0..groups.len())
            .filter(|&i| i != smallest)
            .max_by(|&a, &b| {
                link[a]
                    .total_cmp(&link[b])
                    .then(groups[b].len().cmp(&groups[a].len()))
                    .then(b.cmp(&a))
            })
            .unwrap();
        let moved = std::mem::take(&mut groups[smallest]);
        groups[target].extend(moved);
        groups.remove(smallest);
    }

    while groups.len() < clients {
        let largest = (0..groups.len())
            .max_by_key(|&i| (groups[i].len(), std::cmp::Reverse(i)))
            .unwrap();
        let members = &groups[largest];
        // BFS inside the community keeps each half as connected as possible.
        let mut seen = BTreeSet::new();
        let mut bfs = Vec::new();
        for &start in members {
            if !seen.insert(start) {
                continue;
            }
            let mut queue = VecDeque::from([start]);
            while let Some(n) = queue.pop_front() {
                bfs.push(n);
                for &(m, _) in &neighbours[&n] {
                    if members.contains(&m) && seen.insert(m) {
                        queue.push_back(m);
                    }
                }
            }
        }
        let half: BTreeSet<NodeId> = bfs[bfs.len() / 2..].iter().copied().collect();
        groups[largest].retain(|n| !half.contains(n));
        groups.push(half);
    }

    groups.sort_by_key(|g| *g.first().unwrap());
    groups
        .iter()
        .enumerate()
        .flat_map(|(i, g)| g.iter().map(move |&n| (n, i + 1)))
        .collect()
}
