use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::config::{DataFormat, ExperimentConfig, FeatureKind};
use crate::adversary::{poison_client_data, AttackConfig};
use crate::error::{Error, Result};
use crate::fed::{run_federation, ClientSetup, FederationOutcome, IterationRecord, Scheme};
use crate::graph::{
    augment_one_hop, build_graph, extract_client_graph, internal_only, partition_nodes,
    snapshot_count, snapshot_range, wl_histogram_temporal, Edge, FeatureMode, NodeId,
    PartitionMap, Snapshot, TemporalGraph,
};
use crate::io::{load_edge_csv, load_lanl, read_partition_csv, synth_dataset, EdgeList, IdMap};
use crate::metrics::{attack_success_rate, pr_curve, MetricsReport, PrPoint, ScoredEdges};
use crate::nn::{
    embeddings, init_params, sample_from_snapshot, ModelDims, ModelParams, SnapshotTensors,
    TrainBatch,
};
use crate::scalar::{sigmoid, Scalar};
use crate::seed;

/// Window index ranges, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl Split {
    pub fn of(windows: usize, train: f64, validation: f64) -> Result<Self> {
        let n_train = (train * windows as f64).round() as usize;
        let n_val = (validation * windows as f64).round() as usize;
        if n_train == 0 || n_val == 0 || n_train + n_val >= windows {
            return Err(Error::Config(format!(
                "{windows} windows cannot be split {train} / {validation} with a non-empty test part"
            )));
        }
        Ok(Self {
            train: 0..n_train,
            validation: n_train..n_train + n_val,
            test: n_train + n_val..windows,
        })
    }
}

/// One client's view of the data.
#[derive(Debug, Clone)]
pub struct ClientView {
    /// 1-based.
    pub k: usize,
    pub graph: TemporalGraph,
    /// Row order of every tensor built for this client.
    pub order: Vec<NodeId>,
    /// All windows on the shared time axis.
    pub snapshots: Vec<Snapshot>,
    pub owned: BTreeSet<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub ids: IdMap,
    pub graph: TemporalGraph,
    pub windows: usize,
    pub origin: u64,
    pub split: Split,
    pub partition: PartitionMap,
    pub clients: Vec<ClientView>,
    pub dims: ModelDims,
}

/// Events and id map from the configured source.
pub fn load_events(cfg: &ExperimentConfig) -> Result<EdgeList> {
    if let Some(path) = &cfg.data.csv {
        return match cfg.data.format {
            DataFormat::Edges => load_edge_csv(path),
            DataFormat::LanlAuth => load_lanl(path, cfg.data.redteam.as_deref()),
        };
    }
    let spec = cfg
        .data
        .synth
        .clone()
        .ok_or_else(|| Error::Config("no data source".into()))?;
    let data = synth_dataset(&crate::io::SynthSpec {
        seed: cfg.seed_for("data"),
        ..spec
    })?;
    Ok(EdgeList {
        events: data.events,
        ids: data.ids,
    })
}

pub fn build_global_graph(cfg: &ExperimentConfig, events: &EdgeList) -> Result<TemporalGraph> {
    let mode = match cfg.data.features {
        FeatureKind::NodeIndex => FeatureMode::NodeIndex,
        FeatureKind::Degree => FeatureMode::Degree,
    };
    build_graph(&events.events, &mode)
}

pub fn partition(cfg: &ExperimentConfig, graph: &TemporalGraph, ids: &IdMap) -> Result<PartitionMap> {
    let clients = cfg.federation.clients;
    let pm = match &cfg.partition.file {
        Some(path) => read_partition_csv(path, ids, clients)?,
        None => partition_nodes(graph, clients, cfg.partition.strategy, cfg.seed_for("partition"))?,
    };
    if let Some(n) = graph.nodes.iter().find(|&&n| pm.client_of(n).is_none()) {
        return Err(Error::Config(format!("node `{}` has no client", ids.display(*n))));
    }
    Ok(pm)
}

/// Load, snapshot, split and partition; one view per client.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let events = load_events(cfg)?;
    let graph = build_global_graph(cfg, &events)?;
    let (first, last) = graph.time_span().ok_or(Error::EmptyEvents)?;
    let windows = snapshot_count(first, last, cfg.data.window);
    let split = Split::of(windows, cfg.split.train, cfg.split.validation)?;
    let pm = partition(cfg, &graph, &events.ids)?;
    let clients = (1..=pm.clients())
        .map(|k| {
            let extracted = extract_client_graph(&graph, &pm, k);
            let view = if cfg.partition.augment {
                augment_one_hop(&extracted, &pm, k)
            } else {
                internal_only(&extracted, &pm, k)
            };
            let snapshots = snapshot_range(&view, cfg.data.window, first, windows);
            ClientView {
                k,
                order: view.nodes.iter().copied().collect(),
                owned: pm.members(k),
                graph: view,
                snapshots,
            }
        })
        .collect();
    let dims = ModelDims::new(graph.feature_dim(), cfg.model.d_h, cfg.model.d_z)?;
    Ok(Prepared {
        ids: events.ids,
        graph,
        windows,
        origin: first,
        split,
        partition: pm,
        clients,
        dims,
    })
}

/// The snapshot without its label-1 edges; nodes only seen in those edges drop out.
pub fn strip_malicious(snap: &Snapshot) -> Snapshot {
    if snap.malicious.is_empty() {
        return snap.clone();
    }
    let mut out = Snapshot::empty(snap.index, snap.window);
    for (&(a, b), &w) in &snap.edges {
        if snap.malicious.contains(&(a, b)) {
            continue;
        }
        out.nodes.insert(a);
        out.nodes.insert(b);
        out.edges.insert((a, b), w);
    }
    out
}

/// Label-1 edges of the test windows, as seen by this client.
pub fn visible_attack_edges(view: &ClientView, split: &Split) -> Vec<Edge> {
    let set: BTreeSet<Edge> = view.snapshots[split.test.clone()]
        .iter()
        .flat_map(|s| s.malicious.iter().copied())
        .collect();
    set.into_iter().collect()
}

fn tensors<T: Scalar>(view: &ClientView, snaps: &[Snapshot], d_x: usize) -> Result<Vec<SnapshotTensors<T>>> {
    snaps
        .iter()
        .map(|s| SnapshotTensors::build(s, &view.order, d_x, |n| view.graph.feature(n)))
        .collect()
}

fn training_windows(cfg: &ExperimentConfig, prep: &Prepared, view: &ClientView) -> Vec<Snapshot> {
    view.snapshots[prep.split.train.clone()]
        .iter()
        .map(|s| {
            if cfg.split.clean_training {
                strip_malicious(s)
            } else {
                s.clone()
            }
        })
        .collect()
}

/// Client graph restricted to the training windows, for the sketch.
fn training_graph(view: &ClientView, windows: &[Snapshot]) -> TemporalGraph {
    let mut g = view.graph.clone();
    let (Some(first), Some(last)) = (windows.first(), windows.last()) else {
        g.events.clear();
        g.nodes.clear();
        return g;
    };
    let (start, end) = (first.window.0, last.window.1);
    g.events.retain(|e| {
        e.timestamp >= start
            && e.timestamp < end
            && windows[((e.timestamp - start) / (first.window.1 - start)) as usize]
                .edges
                .contains_key(&(e.src, e.dst))
    });
    g.nodes = windows.iter().flat_map(|s| s.nodes.iter().copied()).collect();
    g
}

#[derive(Debug, Clone)]
pub struct Setups<T> {
    pub clients: Vec<ClientSetup<T>>,
    /// Mean injected edges per malicious edge over attacking clients.
    pub epm: Option<f64>,
}

/// Training batches, validation batches and sketches of every client.
pub fn client_setups<T: Scalar>(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    attack: Option<&AttackConfig>,
) -> Result<Setups<T>> {
    let fed = cfg.federation();
    let sampling = cfg.seed_for("sampling");
    let attack_seed = cfg.seed_for("attack");
    let d_x = prep.dims.d_x;
    let mut epms = Vec::new();
    let mut out = Vec::with_capacity(prep.clients.len());
    for view in &prep.clients {
        let mut train = training_windows(cfg, prep, view);
        let sketch = wl_histogram_temporal(&training_graph(view, &train), fed.wl_iters);
        let mut gamma = None;
        if let Some(a) = attack.filter(|a| a.controls(view.k)) {
            let em = visible_attack_edges(view, &prep.split);
            let (poisoned, epm) =
                poison_client_data(&train, &em, a.p, seed::derive(attack_seed, "client", view.k as u64));
            train = poisoned;
            epms.push(epm);
            gamma = Some(a.gamma);
        }
        let batch = TrainBatch::new(tensors::<T>(view, &train, d_x)?, cfg.model.offset)?
            .with_negatives(fed.negative_ratio, seed::derive(sampling, "train", view.k as u64))?;

        // validation: run through the training windows, score only the validation ones
        let mut warm = training_windows(cfg, prep, view);
        let n_warm = warm.len();
        warm.extend(view.snapshots[prep.split.validation.clone()].iter().cloned());
        let mut val = TrainBatch::new(tensors::<T>(view, &warm, d_x)?, cfg.model.offset)?
            .with_negatives(fed.negative_ratio, seed::derive(sampling, "validation", view.k as u64))?;
        for t in 0..n_warm {
            val.snapshots[t].positives.clear();
            val.negatives[t].clear();
        }
        out.push(ClientSetup {
            batch,
            validation: Some(val),
            nodes: view.owned.len(),
            sketch,
            gamma,
        });
    }
    let epm = (!epms.is_empty()).then(|| epms.iter().sum::<f64>() / epms.len() as f64);
    Ok(Setups { clients: out, epm })
}

/// Deterministic summary written next to every trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct History {
    pub scheme: Scheme,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<String>,
    pub iterations: usize,
    pub stopped_early: bool,
    pub s_jac: Vec<f64>,
    pub client_nodes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epm: Option<f64>,
    /// Informational privacy-loss estimate of `entente_dp` runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp_epsilon: Option<f64>,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Training hit non-finite parameters.
    Nan,
}

pub struct Trained<T> {
    pub history: History,
    /// `None` after divergence.
    pub outcome: Option<FederationOutcome<T>>,
}

/// Federated training on prepared data; divergence is reported in the history, not
/// as an error.
pub fn train<T: Scalar>(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Trained<T>> {
    let fed = cfg.federation();
    let setups = client_setups::<T>(cfg, prep, cfg.attack.as_ref())?;
    let init: ModelParams<T> = init_params(prep.dims, cfg.seed_for("init"));
    let client_nodes: Vec<usize> = prep.clients.iter().map(|c| c.owned.len()).collect();
    let dp_epsilon = (fed.scheme == Scheme::EntenteDp).then(|| fed.epsilon_estimate());
    match run_federation(&fed, &setups.clients, init, prep.graph.nodes.len()) {
        Ok(outcome) => {
            let s_jac = outcome
                .weight_log
                .iter()
                .filter(|r| r.iteration == 0)
                .map(|r| r.s_jac)
                .collect();
            Ok(Trained {
                history: History {
                    scheme: fed.scheme,
                    seed: cfg.seed,
                    status: RunStatus::Completed,
                    diagnosis: None,
                    iterations: outcome.state.iteration,
                    stopped_early: outcome.state.stopped_early,
                    s_jac,
                    client_nodes,
                    epm: setups.epm,
                    dp_epsilon,
                    records: outcome.state.history.clone(),
                },
                outcome: Some(outcome),
            })
        }
        Err(Error::Diverged { iteration, detail }) => {
            let e = Error::Diverged { iteration, detail };
            let iterations = iteration;
            Ok(Trained {
                history: History {
                    scheme: fed.scheme,
                    seed: cfg.seed,
                    status: RunStatus::Nan,
                    diagnosis: Some(e.to_string()),
                    iterations,
                    stopped_early: false,
                    s_jac: Vec::new(),
                    client_nodes,
                    epm: setups.epm,
                    dp_epsilon,
                    records: Vec::new(),
                },
                outcome: None,
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub curve: Vec<PrPoint>,
    pub test: ScoredEdges,
    pub validation: ScoredEdges,
}

/// Anomaly score `1 - sigmoid(z_u . z_v)` of each pair.
fn anomaly_scores<T: Scalar>(z: ndarray::ArrayView2<'_, T>, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(u, v)| 1.0 - sigmoid(z.row(u).dot(&z.row(v))).to_f64_lossy())
        .collect()
}

/// Score every client's test edges with the global model.
///
/// Each edge is scored once, by the client owning its source. Validation scores pair the
/// real validation edges (label 0) with sampled non-edges (label 1) to learn the threshold.
pub fn evaluate<T: Scalar>(cfg: &ExperimentConfig, prep: &Prepared, params: &ModelParams<T>) -> Result<Evaluation> {
    let offset = cfg.model.offset;
    let sampling = cfg.seed_for("sampling");
    let mut test = ScoredEdges::default();
    let mut validation = ScoredEdges::default();
    for view in &prep.clients {
        let row: std::collections::BTreeMap<NodeId, usize> =
            view.order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut windows = training_windows(cfg, prep, view);
        windows.extend(view.snapshots[prep.split.train.end..].iter().cloned());
        let z = embeddings(params, &tensors::<T>(view, &windows, prep.dims.d_x)?);
        let owned_src = |s: &Snapshot| -> Vec<Edge> {
            s.edges
                .keys()
                .filter(|(a, _)| view.owned.contains(a))
                .copied()
                .collect()
        };
        for t in prep.split.validation.clone() {
            let s = &windows[t];
            let Some(zt) = t.checked_sub(offset).map(|i| z[i].view()) else {
                continue;
            };
            let real = owned_src(s);
            let fake = sample_from_snapshot(
                s,
                crate::nn::negative_count(cfg.eval.validation_negative_ratio, real.len()),
                seed::derive(sampling, "eval", (view.k * prep.windows + t) as u64),
            )?;
            let to_rows = |edges: &[Edge]| -> Vec<(usize, usize)> {
                edges.iter().map(|(a, b)| (row[a], row[b])).collect()
            };
            for (sc, e) in anomaly_scores(zt, &to_rows(&real)).into_iter().zip(&real) {
                validation.push(sc, s.malicious.contains(e));
            }
            for sc in anomaly_scores(zt, &to_rows(&fake)) {
                validation.push(sc, true);
            }
        }
        for t in prep.split.test.clone() {
            let s = &windows[t];
            let Some(zt) = t.checked_sub(offset).map(|i| z[i].view()) else {
                continue;
            };
            let edges = owned_src(s);
            let pairs: Vec<(usize, usize)> = edges.iter().map(|(a, b)| (row[a], row[b])).collect();
            for (sc, e) in anomaly_scores(zt, &pairs).into_iter().zip(&edges) {
                test.push(sc, s.malicious.contains(e));
            }
        }
    }
    let count = test.scores.iter().chain(&validation.scores).filter(|x| !x.is_finite()).count();
    if count > 0 {
        return Err(Error::NonFiniteScores { count });
    }
    let mut report = MetricsReport::evaluate(&test, &validation, cfg.eval.objective)?;
    let malicious: Vec<f64> = test
        .scores
        .iter()
        .zip(&test.labels)
        .filter(|(_, &l)| l)
        .map(|(&s, _)| s)
        .collect();
    report.sr = attack_success_rate(&malicious, report.tau).ok();
    let curve = pr_curve(&test)?;
    Ok(Evaluation {
        report,
        curve,
        test,
        validation,
    })
}
