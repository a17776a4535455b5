use serde::{Deserialize, Serialize};

use super::acs::{l2, ClientWeights};
use super::aggregate::{aggregate, ClientMeta};
use super::bootstrap::bootstrap;
use super::config::{EarlyStopConfig, FederationConfig, Scheme};
use crate::adversary::scale_update;
use crate::error::{Error, Result};
use crate::graph::WlHistogram;
use crate::nn::{local_train, loss_and_grad, LocalConfig, ModelParams, TrainBatch};
use crate::scalar::Scalar;
use crate::seed;

/// Everything one client brings to the federation.
#[derive(Debug, Clone)]
pub struct ClientSetup<T> {
    pub batch: TrainBatch<T>,
    /// Scored with the global model after every aggregation, when present.
    pub validation: Option<TrainBatch<T>>,
    /// Nodes the client owns.
    pub nodes: usize,
    pub sketch: WlHistogram,
    /// Set on attacker-controlled clients: submissions are multiplied by it.
    pub gamma: Option<f64>,
}

/// Summary of one server iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    /// Mean client loss of the broadcast model on its first local epoch.
    pub train_loss: f64,
    /// Summed client validation loss of the new global model.
    pub val_loss: Option<f64>,
    /// `||w_{i+1} - w_i||`.
    pub update_norm: f64,
    /// `update_norm / ||w_i||`.
    pub rel_change: f64,
}

/// One row of the weight trajectory; iteration 0 holds the bootstrap weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub iteration: usize,
    /// 1-based.
    pub client: usize,
    pub r: f64,
    pub s_jac: f64,
    pub s: f64,
    pub d: f64,
}

#[derive(Debug, Clone)]
pub struct FederationState<T> {
    pub global: ModelParams<T>,
    /// Completed iterations.
    pub iteration: usize,
    pub weights: Vec<ClientWeights>,
    pub history: Vec<IterationRecord>,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct FederationOutcome<T> {
    pub state: FederationState<T>,
    pub weight_log: Vec<WeightRow>,
}

impl<T> FederationOutcome<T> {
    pub fn params(&self) -> &ModelParams<T> {
        &self.state.global
    }
}

/// Stop once the relative parameter change stayed below `tol` for the last `patience`
/// iterations, or the best validation loss is `patience` iterations old.
pub fn early_stop(history: &[IterationRecord], tol: f64, patience: usize) -> bool {
    if patience == 0 || history.len() < patience {
        return false;
    }
    let recent = &history[history.len() - patience..];
    if recent.iter().all(|r| r.rel_change < tol) {
        return true;
    }
    let vals: Vec<f64> = history.iter().filter_map(|r| r.val_loss).collect();
    if vals.len() != history.len() {
        return false;
    }
    let best = vals
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v < vals[b] { i } else { b });
    vals.len() - 1 - best >= patience
}

fn should_stop(cfg: &EarlyStopConfig, history: &[IterationRecord]) -> bool {
    cfg.enabled && early_stop(history, cfg.tol, cfg.patience)
}

fn diverged(iteration: usize, client: usize, e: Error) -> Error {
    match e {
        Error::NumericOverflow => Error::Diverged {
            iteration,
            detail: format!("client {client} local training overflowed"),
        },
        other => other,
    }
}

/// Bootstrap, then up to `rounds` iterations of broadcast, parallel local training,
/// aggregation and the early-stopping check.
///
/// Client jobs run on a dedicated pool of `cfg.workers` threads; their results are
/// collected in client order before any server arithmetic, so the outcome does not
/// depend on the pool size.
pub fn run_federation<T: Scalar>(
    cfg: &FederationConfig,
    clients: &[ClientSetup<T>],
    init: ModelParams<T>,
    total_nodes: usize,
) -> Result<FederationOutcome<T>> {
    cfg.validate()?;
    if clients.len() != cfg.clients {
        return Err(Error::Config(format!(
            "config expects {} clients, got {}",
            cfg.clients,
            clients.len()
        )));
    }
    let sketches: Vec<WlHistogram> = clients.iter().map(|c| c.sketch.clone()).collect();
    let s_jac = bootstrap(cfg, total_nodes, &sketches)?;
    let meta: Vec<ClientMeta> = clients
        .iter()
        .zip(&s_jac)
        .map(|(c, &s)| ClientMeta { s_jac: s, nodes: c.nodes })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let local = LocalConfig {
        epochs: cfg.epochs,
        lr: cfg.lr,
        resample_ratio: Some(cfg.negative_ratio),
    };
    let mu = T::of(cfg.mu);

    let initial: Vec<ClientWeights> = s_jac
        .iter()
        .map(|&s| ClientWeights {
            s_jac: s,
            s: 0.0,
            d: 0.0,
            r: s,
        })
        .collect();
    let mut weight_log: Vec<WeightRow> = initial
        .iter()
        .enumerate()
        .map(|(k, w)| row(0, k, w))
        .collect();
    let mut state = FederationState {
        global: init,
        iteration: 0,
        weights: initial,
        history: Vec::new(),
        stopped_early: false,
    };
    if !state.global.is_finite() {
        return Err(Error::Diverged {
            iteration: 0,
            detail: "initial parameters are non-finite".into(),
        });
    }

    for i in 1..=cfg.rounds {
        let global = &state.global;
        let round_seed = seed::derive(cfg.seed, "local", i as u64);
        let results: Vec<Result<(ModelParams<T>, T)>> = pool.install(|| {
            use rayon::prelude::*;
            clients
                .par_iter()
                .enumerate()
                .map(|(k, c)| {
                    let prox = (cfg.scheme == Scheme::FedProx).then_some((mu, global));
                    let out = local_train(global, &c.batch, &local, prox, seed::derive(round_seed, "client", k as u64))
                        .map_err(|e| diverged(i, k + 1, e))?;
                    let submitted = match c.gamma {
                        Some(g) => scale_update(&out.params, g),
                        None => out.params,
                    };
                    Ok((submitted, out.loss_before))
                })
                .collect()
        });
        let mut submissions = Vec::with_capacity(clients.len());
        let mut train_loss = 0.0;
        for r in results {
            let (w, loss) = r?;
            train_loss += loss.to_f64_lossy();
            submissions.push(w);
        }
        train_loss /= clients.len() as f64;

        let agg = aggregate(cfg, global, &submissions, &meta, i)?;
        let delta: Vec<T> = agg
            .params
            .flat
            .iter()
            .zip(&global.flat)
            .map(|(&a, &b)| a - b)
            .collect();
        let update_norm = l2(&delta);
        let base = l2(&global.flat);
        let rel_change = if update_norm == 0.0 {
            0.0
        } else if base == 0.0 {
            f64::INFINITY
        } else {
            update_norm / base
        };

        let new_global = agg.params;
        let val_loss = validation_loss(&pool, clients, &new_global, i)?;

        weight_log.extend(agg.weights.iter().enumerate().map(|(k, w)| row(i, k, w)));
        state.weights = agg.weights;
        state.global = new_global;
        state.iteration = i;
        state.history.push(IterationRecord {
            iteration: i,
            train_loss,
            val_loss,
            update_norm,
            rel_change,
        });
        if should_stop(&cfg.early_stop, &state.history) {
            state.stopped_early = i < cfg.rounds;
            break;
        }
    }
    Ok(FederationOutcome { state, weight_log })
}

fn row(iteration: usize, k: usize, w: &ClientWeights) -> WeightRow {
    WeightRow {
        iteration,
        client: k + 1,
        r: w.r,
        s_jac: w.s_jac,
        s: w.s,
        d: w.d,
    }
}

fn validation_loss<T: Scalar>(
    pool: &rayon::ThreadPool,
    clients: &[ClientSetup<T>],
    global: &ModelParams<T>,
    iteration: usize,
) -> Result<Option<f64>> {
    if clients.iter().all(|c| c.validation.is_none()) {
        return Ok(None);
    }
    let losses: Vec<Result<f64>> = pool.install(|| {
        use rayon::prelude::*;
        clients
            .par_iter()
            .enumerate()
            .map(|(k, c)| match &c.validation {
                Some(b) => loss_and_grad(global, b, None)
                    .map(|(l, _)| l.to_f64_lossy())
                    .map_err(|e| diverged(iteration, k + 1, e)),
                None => Ok(0.0),
            })
            .collect()
    });
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(Some(total))
}
