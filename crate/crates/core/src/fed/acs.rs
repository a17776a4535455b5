//! Contribution scaling and norm bounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ModelParams;
use crate::scalar::Scalar;

/// Per-client, per-iteration aggregation weight and its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientWeights {
    /// Sketch similarity to the reference graph, fixed for the run.
    pub s_jac: f64,
    /// Absolute cosine similarity to the broadcast global model.
    pub s: f64,
    /// L2 distance to the broadcast global model, capped at omega.
    pub d: f64,
    /// Weight applied by the scheme.
    pub r: f64,
}

impl ClientWeights {
    /// `r = c1 * s_jac + c2 * s * d`.
    pub fn scaled(s_jac: f64, s: f64, d: f64, c1: f64, c2: f64) -> Self {
        Self {
            s_jac,
            s,
            d,
            r: c1 * s_jac + c2 * s * d,
        }
    }
}

/// `(S, D)` of a client model against the model it was trained from.
///
/// `S` is 0 when either vector is zero; both are computed in double precision.
pub fn acs<T: Scalar>(w_prev: &ModelParams<T>, w_k: &ModelParams<T>, omega: f64) -> Result<(f64, f64)> {
    w_prev.same_layout(w_k)?;
    let (na, nb) = (l2(&w_prev.flat), l2(&w_k.flat));
    let s = if na > 0.0 && nb > 0.0 {
        w_prev
            .flat
            .iter()
            .zip(&w_k.flat)
            .map(|(x, y)| (x.to_f64_lossy() / na) * (y.to_f64_lossy() / nb))
            .sum::<f64>()
            .abs()
            .clamp(0.0, 1.0)
    } else {
        0.0
    };
    let diff: Vec<f64> = w_prev
        .flat
        .iter()
        .zip(&w_k.flat)
        .map(|(x, y)| y.to_f64_lossy() - x.to_f64_lossy())
        .collect();
    let d = l2(&diff).min(omega);
    if !(s.is_finite() && d.is_finite()) {
        return Err(Error::InvalidArgument(
            "contribution scaling of non-finite parameters".into(),
        ));
    }
    Ok((s, d))
}

/// `delta / max(1, ||delta|| / bound)`. Non-finite input is returned unchanged.
pub fn norm_bound<T: Scalar>(delta: &[T], bound: f64) -> Vec<T> {
    let norm = l2(delta);
    if norm <= bound || !norm.is_finite() {
        return delta.to_vec();
    }
    let step = 1.0 - 4.0 * f64::EPSILON.max(T::epsilon().to_f64_lossy());
    let mut scale = bound / norm;
    loop {
        let out: Vec<T> = delta.iter().map(|&x| x * T::of(scale)).collect();
        // rounding may leave the result a few ulps above the bound
        if l2(&out) <= bound {
            return out;
        }
        scale *= step;
    }
}

/// L2 norm in double precision, rescaled so huge finite entries do not overflow.
pub(crate) fn l2<T: Scalar>(v: &[T]) -> f64 {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.to_f64_lossy().abs()));
    if max == 0.0 || !max.is_finite() {
        return max;
    }
    let sum: f64 = v
        .iter()
        .map(|x| {
            let y = x.to_f64_lossy() / max;
            y * y
        })
        .sum();
    max * sum.sqrt()
}
