//! Two-layer GCN encoder, per-node GRU over time, inner-product decoder, and the
//! hand-written backward pass through all three.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::batch::{SnapshotTensors, TrainBatch};
use super::params::{Gate, ModelParams, Offsets};
use crate::error::{Error, Result};
use crate::graph::{NodeId, Snapshot};
use crate::scalar::{sigmoid, Scalar};

/// Decoder probabilities are clamped to `[EPS, 1 - EPS]` before the log.
pub const PROB_EPS: f64 = 1e-7;

/// `D^{-1/2} (A + I) D^{-1/2}` with `A` the symmetrised event-count matrix.
///
/// Self-loop events do not enter `A`; the identity already provides the self term.
pub fn normalize_adjacency<T: Scalar>(snap: &Snapshot, node_order: &[NodeId]) -> Result<Array2<T>> {
    let index: BTreeMap<NodeId, usize> =
        node_order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let n = node_order.len();
    let mut a = Array2::<f64>::eye(n);
    for (&(src, dst), &w) in &snap.edges {
        let (Some(&i), Some(&j)) = (index.get(&src), index.get(&dst)) else {
            return Err(Error::Shape(format!(
                "edge ({src}, {dst}) references a node outside the node order"
            )));
        };
        if i == j {
            continue;
        }
        a[[i, j]] += w;
        a[[j, i]] += w;
    }
    for node in &snap.nodes {
        if !index.contains_key(node) {
            return Err(Error::Shape(format!("node {node} missing from node order")));
        }
    }
    let inv_sqrt: Vec<f64> = a.sum_axis(Axis(1)).iter().map(|d| 1.0 / d.sqrt()).collect();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        T::of(a[[i, j]] * inv_sqrt[i] * inv_sqrt[j])
    }))
}

fn relu<T: Scalar>(m: &Array2<T>) -> Array2<T> {
    m.mapv(|x| if x > T::zero() { x } else { T::zero() })
}

/// `Â · ReLU(Â · X · W1) · W2`.
pub fn encode<T: Scalar>(
    params: &ModelParams<T>,
    x: ArrayView2<'_, T>,
    adj: ArrayView2<'_, T>,
) -> Result<Array2<T>> {
    let dims = params.dims;
    if x.ncols() != dims.d_x {
        return Err(Error::Shape(format!(
            "features have {} columns, model expects {}",
            x.ncols(),
            dims.d_x
        )));
    }
    if adj.nrows() != adj.ncols() || adj.nrows() != x.nrows() {
        return Err(Error::Shape(format!(
            "adjacency {:?} does not match {} feature rows",
            adj.dim(),
            x.nrows()
        )));
    }
    let propagated = adj.dot(&x);
    Ok(gcn_forward(params, &propagated, &adj.to_owned()).zp)
}

struct GcnCache<T> {
    h1: Array2<T>,
    q: Array2<T>,
    zp: Array2<T>,
}

fn gcn_forward<T: Scalar>(
    params: &ModelParams<T>,
    propagated: &Array2<T>,
    adj: &Array2<T>,
) -> GcnCache<T> {
    let h1 = propagated.dot(&params.w1());
    let q = adj.dot(&relu(&h1));
    let zp = q.dot(&params.w2());
    GcnCache { h1, q, zp }
}

struct GruCache<T> {
    x: Array2<T>,
    h_prev: Array2<T>,
    z: Array2<T>,
    r: Array2<T>,
    c: Array2<T>,
    h: Array2<T>,
}

/// `h = z ⊙ h_prev + (1 - z) ⊙ tanh(x Wn + (r ⊙ h_prev) Un + bn)`.
fn gru_step<T: Scalar>(params: &ModelParams<T>, x: Array2<T>, h_prev: Array2<T>) -> GruCache<T> {
    let pre = |g: Gate, h: &Array2<T>| {
        let (w, u, b) = params.gate(g);
        x.dot(&w) + h.dot(&u) + b
    };
    let z = pre(Gate::Update, &h_prev).mapv(sigmoid);
    let r = pre(Gate::Reset, &h_prev).mapv(sigmoid);
    let c = pre(Gate::Candidate, &(&r * &h_prev)).mapv(|v| v.tanh());
    let h = &z * &h_prev + &(z.mapv(|v| T::one() - v) * &c);
    GruCache {
        x,
        h_prev,
        z,
        r,
        c,
        h,
    }
}

/// Per-node GRU over the encoded sequence with a zero initial state.
pub fn temporal<T: Scalar>(params: &ModelParams<T>, inputs: &[Array2<T>]) -> Result<Vec<Array2<T>>> {
    let dz = params.dims.d_z;
    let Some(first) = inputs.first() else {
        return Ok(Vec::new());
    };
    let n = first.nrows();
    let mut h = Array2::<T>::zeros((n, dz));
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs {
        if x.dim() != (n, dz) {
            return Err(Error::Shape(format!(
                "temporal input {:?}, expected ({n}, {dz})",
                x.dim()
            )));
        }
        h = gru_step(params, x.clone(), h).h;
        out.push(h.clone());
    }
    Ok(out)
}

/// `sigmoid(<z_u, z_v>)` for each pair.
pub fn decode<T: Scalar>(z: ArrayView2<'_, T>, edges: &[(usize, usize)]) -> Vec<T> {
    edges
        .iter()
        .map(|&(u, v)| sigmoid(z.row(u).dot(&z.row(v))))
        .collect()
}

/// Embeddings `Z_1..Z_T` of a snapshot sequence.
pub fn embeddings<T: Scalar>(params: &ModelParams<T>, snaps: &[SnapshotTensors<T>]) -> Vec<Array2<T>> {
    let dz = params.dims.d_z;
    let n = snaps.first().map_or(0, SnapshotTensors::nodes);
    let mut h = Array2::<T>::zeros((n, dz));
    snaps
        .iter()
        .map(|s| {
            let zp = gcn_forward(params, &s.propagated, &s.adj).zp;
            h = gru_step(params, zp, h.clone()).h;
            h.clone()
        })
        .collect()
}

/// FedProx proximal term `mu/2 · ||w - anchor||²`.
#[derive(Debug, Clone, Copy)]
pub struct Prox<'a, T> {
    pub mu: T,
    pub anchor: &'a ModelParams<T>,
}

/// Binary cross-entropy of one pair, from its logit. Gradient is zero where clamped.
fn bce<T: Scalar>(logit: T, target: bool) -> (T, T) {
    let eps = T::of(PROB_EPS);
    let p = sigmoid(logit);
    let pc = p.max(eps).min(T::one() - eps);
    let clamped = pc != p;
    let y = if target { T::one() } else { T::zero() };
    let loss = if target { -pc.ln() } else { -(T::one() - pc).ln() };
    let grad = if clamped { T::zero() } else { p - y };
    (loss, grad)
}

/// Loss on the snapshot sequence and its exact gradient w.r.t. the flat parameters.
///
/// Per snapshot the loss is the mean BCE over its positive (target 1) and negative
/// (target 0) pairs; snapshot losses are summed.
pub fn loss_and_grad<T: Scalar>(
    params: &ModelParams<T>,
    batch: &TrainBatch<T>,
    prox: Option<Prox<'_, T>>,
) -> Result<(T, Vec<T>)> {
    loss_and_grad_with(params, batch, &batch.negatives, prox)
}

pub(crate) fn loss_and_grad_with<T: Scalar>(
    params: &ModelParams<T>,
    batch: &TrainBatch<T>,
    negatives: &[Vec<(usize, usize)>],
    prox: Option<Prox<'_, T>>,
) -> Result<(T, Vec<T>)> {
    let dims = params.dims;
    let dz = dims.d_z;
    let steps = batch.snapshots.len();
    let n = batch.nodes();
    for s in &batch.snapshots {
        if s.nodes() != n || s.propagated.ncols() != dims.d_x {
            return Err(Error::Shape(format!(
                "snapshot tensors {:?}/{:?} do not match {n} nodes and d_x = {}",
                s.adj.dim(),
                s.propagated.dim(),
                dims.d_x
            )));
        }
    }

    // forward
    let mut gcn = Vec::with_capacity(steps);
    let mut gru: Vec<GruCache<T>> = Vec::with_capacity(steps);
    let mut h = Array2::<T>::zeros((n, dz));
    for s in &batch.snapshots {
        let g = gcn_forward(params, &s.propagated, &s.adj);
        let step = gru_step(params, g.zp.clone(), h);
        h = step.h.clone();
        gcn.push(g);
        gru.push(step);
    }

    // decoder loss, and its gradient w.r.t. every Z_t
    let mut loss = T::zero();
    let mut dh_out: Vec<Array2<T>> = (0..steps).map(|_| Array2::zeros((n, dz))).collect();
    for t in 0..steps {
        let target = t + batch.offset;
        if target >= steps {
            break;
        }
        let pos = &batch.snapshots[target].positives;
        let neg = negatives.get(target).map(Vec::as_slice).unwrap_or(&[]);
        let count = pos.len() + neg.len();
        if count == 0 {
            continue;
        }
        let scale = T::one() / T::of(count as f64);
        let z = &gru[t].h;
        let dz_t = &mut dh_out[t];
        let terms = pos.iter().map(|&e| (e, true)).chain(neg.iter().map(|&e| (e, false)));
        for ((u, v), y) in terms {
            let logit = z.row(u).dot(&z.row(v));
            let (l, g) = bce(logit, y);
            loss += l * scale;
            let g = g * scale;
            if g != T::zero() {
                let zu = z.row(u).to_owned();
                let zv = z.row(v).to_owned();
                dz_t.row_mut(u).scaled_add(g, &zv);
                dz_t.row_mut(v).scaled_add(g, &zu);
            }
        }
    }

    let mut grad = vec![T::zero(); params.len()];
    let off = Offsets::of(&dims);

    // backward through time
    let mut dh_next = Array2::<T>::zeros((n, dz));
    for t in (0..steps).rev() {
        let dh = &dh_out[t] + &dh_next;
        let c = &gru[t];
        let one = T::one();

        let dc = &dh * &c.z.mapv(|v| one - v);
        let dzg = &dh * &(&c.h_prev - &c.c);
        let mut dh_prev = &dh * &c.z;

        let dgn = &dc * &c.c.mapv(|v| one - v * v);
        let (wn, un, _) = params.gate(Gate::Candidate);
        let rh = &c.r * &c.h_prev;
        let (o_w, o_u, o_b) = off.gate(&dims, Gate::Candidate);
        add_into(&mut grad[o_w..], &c.x.t().dot(&dgn));
        add_into(&mut grad[o_u..], &rh.t().dot(&dgn));
        add_vec_into(&mut grad[o_b..], &dgn.sum_axis(Axis(0)));
        let drh = dgn.dot(&un.t());
        let mut dx = dgn.dot(&wn.t());
        let dr = &drh * &c.h_prev;
        dh_prev = dh_prev + &drh * &c.r;

        for (gate, dact, act) in [(Gate::Reset, dr, &c.r), (Gate::Update, dzg, &c.z)] {
            let dpre = &dact * &act.mapv(|v| v * (one - v));
            let (w, u, _) = params.gate(gate);
            let (o_w, o_u, o_b) = off.gate(&dims, gate);
            add_into(&mut grad[o_w..], &c.x.t().dot(&dpre));
            add_into(&mut grad[o_u..], &c.h_prev.t().dot(&dpre));
            add_vec_into(&mut grad[o_b..], &dpre.sum_axis(Axis(0)));
            dx = dx + dpre.dot(&w.t());
            dh_prev = dh_prev + dpre.dot(&u.t());
        }

        // GCN
        let g = &gcn[t];
        let s = &batch.snapshots[t];
        add_into(&mut grad[off.w2..], &g.q.t().dot(&dx));
        let dq = dx.dot(&params.w2().t());
        let mut dh1 = s.adj.t().dot(&dq);
        Zip::from(&mut dh1).and(&g.h1).for_each(|d, &pre| {
            if pre <= T::zero() {
                *d = T::zero();
            }
        });
        add_into(&mut grad[off.w1..], &s.propagated.t().dot(&dh1));

        dh_next = dh_prev;
    }

    if let Some(p) = prox {
        params.same_layout(p.anchor)?;
        let half = T::of(0.5);
        for ((g, &w), &a) in grad.iter_mut().zip(&params.flat).zip(&p.anchor.flat) {
            let d = w - a;
            loss += half * p.mu * d * d;
            *g += p.mu * d;
        }
    }

    if !loss.is_finite() {
        return Err(Error::NumericOverflow);
    }
    Ok((loss, grad))
}

fn add_into<T: Scalar>(dst: &mut [T], m: &Array2<T>) {
    for (d, &v) in dst.iter_mut().zip(m.iter()) {
        *d += v;
    }
}

fn add_vec_into<T: Scalar>(dst: &mut [T], v: &Array1<T>) {
    for (d, &x) in dst.iter_mut().zip(v.iter()) {
        *d += x;
    }
}
