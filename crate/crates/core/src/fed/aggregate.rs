use rand_distr::{Distribution, Normal};

use super::acs::{acs, norm_bound, ClientWeights};
use super::config::{FederationConfig, Scheme};
use crate::error::{Error, Result};
use crate::nn::ModelParams;
use crate::scalar::Scalar;
use crate::seed;

/// What the server knows about a client besides its submission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientMeta {
    pub s_jac: f64,
    /// Nodes the client owns.
    pub nodes: usize,
}

#[derive(Debug, Clone)]
pub struct Aggregated<T> {
    pub params: ModelParams<T>,
    /// One entry per client, in client order.
    pub weights: Vec<ClientWeights>,
}

/// Combine the `K` submissions of one iteration into the next global model.
///
/// Works on the flat vector: the per-client weights are shared by all segments and
/// clipping is applied to the whole delta, so segment-wise and flat aggregation coincide
/// for every scheme except the bound itself.
pub fn aggregate<T: Scalar>(
    cfg: &FederationConfig,
    global: &ModelParams<T>,
    submissions: &[ModelParams<T>],
    meta: &[ClientMeta],
    iteration: usize,
) -> Result<Aggregated<T>> {
    let k = submissions.len();
    if k == 0 || meta.len() != k {
        return Err(Error::InvalidArgument(format!(
            "{k} submissions with {} client records",
            meta.len()
        )));
    }
    for (i, w) in submissions.iter().enumerate() {
        global.same_layout(w)?;
        if !w.is_finite() {
            return Err(Error::Diverged {
                iteration,
                detail: format!("client {} submitted non-finite parameters", i + 1),
            });
        }
    }

    let mut weights = Vec::with_capacity(k);
    for (w, m) in submissions.iter().zip(meta) {
        let (s, d) = acs(global, w, cfg.omega).map_err(|e| Error::Diverged {
            iteration,
            detail: e.to_string(),
        })?;
        let mut cw = ClientWeights::scaled(m.s_jac, s, d, cfg.c1, cfg.c2);
        if !cfg.scheme.uses_acs() {
            cw.r = plain_weight(cfg.scheme, m, meta);
        }
        weights.push(cw);
    }

    let inv_k = T::of(1.0 / k as f64);
    let mut next = global.clone();
    match cfg.scheme {
        Scheme::FedAvg | Scheme::FedAvgN | Scheme::FedProx => {
            next.flat.iter_mut().for_each(|x| *x = T::zero());
            for (w, cw) in submissions.iter().zip(&weights) {
                let r = T::of(cw.r);
                for (acc, &x) in next.flat.iter_mut().zip(&w.flat) {
                    *acc += r * x;
                }
            }
        }
        Scheme::EntenteUb => {
            next.flat.iter_mut().for_each(|x| *x = T::zero());
            for (w, cw) in submissions.iter().zip(&weights) {
                let r = T::of(cw.r) * inv_k;
                for (acc, &x) in next.flat.iter_mut().zip(&w.flat) {
                    *acc += r * x;
                }
            }
        }
        Scheme::Entente | Scheme::EntenteDp => {
            for (w, cw) in submissions.iter().zip(&weights) {
                let delta: Vec<T> = w.flat.iter().zip(&global.flat).map(|(&a, &b)| a - b).collect();
                let clipped = norm_bound(&delta, cfg.bound);
                let r = T::of(cw.r) * inv_k;
                for (acc, x) in next.flat.iter_mut().zip(clipped) {
                    *acc += r * x;
                }
            }
            if cfg.scheme == Scheme::EntenteDp {
                add_noise(&mut next.flat, cfg.noise_std(), cfg.seed, iteration)?;
            }
        }
    }
    if !next.is_finite() {
        return Err(Error::Diverged {
            iteration,
            detail: "aggregated global model is non-finite".into(),
        });
    }
    Ok(Aggregated {
        params: next,
        weights,
    })
}

fn plain_weight(scheme: Scheme, m: &ClientMeta, all: &[ClientMeta]) -> f64 {
    match scheme {
        Scheme::FedAvgN => {
            let total: usize = all.iter().map(|c| c.nodes).sum();
            if total == 0 {
                1.0 / all.len() as f64
            } else {
                m.nodes as f64 / total as f64
            }
        }
        _ => 1.0 / all.len() as f64,
    }
}

fn add_noise<T: Scalar>(flat: &mut [T], std: f64, base: u64, iteration: usize) -> Result<()> {
    if std == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, std)
        .map_err(|e| Error::InvalidArgument(format!("noise std {std}: {e}")))?;
    let mut rng = seed::rng(seed::derive(base, "dp_noise", iteration as u64));
    for x in flat.iter_mut() {
        *x += T::of(normal.sample(&mut rng));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, ModelDims};

    fn dims() -> ModelDims {
        ModelDims::new(2, 3, 2).unwrap()
    }

    fn cfg(scheme: Scheme) -> FederationConfig {
        FederationConfig {
            scheme,
            ..Default::default()
        }
    }

    fn meta(s_jac: f64, nodes: usize) -> ClientMeta {
        ClientMeta { s_jac, nodes }
    }

    #[test]
    fn single_client_ub_scales_by_c1() {
        let w: ModelParams<f64> = init_params(dims(), 1);
        let out = aggregate(&cfg(Scheme::EntenteUb), &w, std::slice::from_ref(&w), &[meta(1.0, 5)], 1).unwrap();
        assert_eq!(out.weights[0].r, 0.8);
        for (a, b) in out.params.flat.iter().zip(&w.flat) {
            assert!((a - 0.8 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn fedavg_of_identical_clients_is_identity() {
        let w: ModelParams<f64> = init_params(dims(), 2);
        let g: ModelParams<f64> = init_params(dims(), 3);
        let subs = vec![w.clone(), w.clone(), w.clone()];
        let metas = vec![meta(0.1, 1), meta(0.2, 2), meta(0.3, 3)];
        let out = aggregate(&cfg(Scheme::FedAvg), &g, &subs, &metas, 1).unwrap();
        for (a, b) in out.params.flat.iter().zip(&w.flat) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn fedavg_n_weights_by_nodes() {
        let g = ModelParams::<f64>::zeros(dims());
        let mut a = g.clone();
        a.flat.fill(1.0);
        let out = aggregate(
            &cfg(Scheme::FedAvgN),
            &g,
            &[a, g.clone()],
            &[meta(0.5, 3), meta(0.5, 1)],
            1,
        )
        .unwrap();
        assert!(out.params.flat.iter().all(|&x| (x - 0.75).abs() < 1e-15));
        assert_eq!(out.weights[1].r, 0.25);
    }

    #[test]
    fn entente_identity_region_is_weighted_mean_of_deltas() {
        let g: ModelParams<f64> = init_params(dims(), 4);
        let mut subs = Vec::new();
        for i in 0..3 {
            let mut w = g.clone();
            w.flat.iter_mut().enumerate().for_each(|(j, x)| *x += 0.01 * (i + j) as f64);
            subs.push(w);
        }
        let metas = vec![meta(0.3, 1), meta(0.6, 1), meta(0.9, 1)];
        let out = aggregate(&cfg(Scheme::Entente), &g, &subs, &metas, 1).unwrap();
        for j in 0..g.len() {
            let expect: f64 = g.flat[j]
                + subs
                    .iter()
                    .zip(&out.weights)
                    .map(|(w, cw)| cw.r * (w.flat[j] - g.flat[j]))
                    .sum::<f64>()
                    / 3.0;
            assert!((out.params.flat[j] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn scaled_attacker_is_clipped() {
        let c = cfg(Scheme::Entente);
        let g: ModelParams<f64> = init_params(dims(), 5);
        let honest = g.clone();
        let mut evil = g.clone();
        evil.flat.iter_mut().for_each(|x| *x *= 100.0);
        let out = aggregate(&c, &g, &[honest, evil], &[meta(0.5, 1), meta(1.0, 1)], 1).unwrap();
        let shift: f64 = out
            .params
            .flat
            .iter()
            .zip(&g.flat)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(shift <= c.weight_cap() * c.bound / 2.0 + 1e-12);
    }

    #[test]
    fn non_finite_submission_diverges() {
        let g = ModelParams::<f64>::zeros(dims());
        let mut bad = g.clone();
        bad.flat[0] = f64::NAN;
        let err = aggregate(&cfg(Scheme::EntenteUb), &g, &[bad], &[meta(1.0, 1)], 7).unwrap_err();
        assert!(err.to_string().contains("NaN"));
        assert!(matches!(err, Error::Diverged { iteration: 7, .. }));
    }

    #[test]
    fn dp_noise_is_seeded() {
        let c = FederationConfig {
            scheme: Scheme::EntenteDp,
            seed: 3,
            ..Default::default()
        };
        let g = ModelParams::<f64>::zeros(dims());
        let a = aggregate(&c, &g, std::slice::from_ref(&g), &[meta(1.0, 1)], 1).unwrap();
        let b = aggregate(&c, &g, std::slice::from_ref(&g), &[meta(1.0, 1)], 1).unwrap();
        let d = aggregate(&c, &g, std::slice::from_ref(&g), &[meta(1.0, 1)], 2).unwrap();
        assert_eq!(a.params, b.params);
        assert_ne!(a.params, d.params);
    }
}
