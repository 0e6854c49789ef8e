use serde::{Deserialize, Serialize};

use crate::gnn::GnnParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First and second moments, flat in parameter visiting order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// One AdamW update with decoupled weight decay:
///
/// ```text
/// m <- b1 m + (1 - b1) g          v <- b2 v + (1 - b2) g^2
/// w <- w - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps) - lr * wd * w
/// ```
///
/// The decay term uses the weight before the update.
pub fn adamw_step(p: &mut GnnParams, grads: &GnnParams, state: &mut AdamState, cfg: &AdamWConfig) {
    let g = grads.flat();
    let n = p.num_entries();
    assert_eq!(g.len(), n, "gradient shape differs from parameters");
    if state.m.is_empty() {
        state.m = vec![0.0; n];
        state.v = vec![0.0; n];
    }
    assert_eq!(state.m.len(), n, "optimizer state shape differs from parameters");
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let mut i = 0;
    p.for_each_mut(|_, w| {
        for x in w.iter_mut() {
            let gi = g[i];
            let m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * gi;
            let v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * gi * gi;
            state.m[i] = m;
            state.v[i] = v;
            let update = (m / c1) / ((v / c2).sqrt() + cfg.eps);
            *x -= cfg.lr * update + cfg.lr * cfg.weight_decay * *x;
            i += 1;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::GnnDims;
    use crate::graph::FeatureSpec;

    fn params() -> GnnParams {
        GnnParams::init(
            &FeatureSpec::default(),
            GnnDims {
                h1: 3,
                h2: 3,
                embed: 2,
            },
            4,
        )
    }

    fn grads(p: &GnnParams) -> GnnParams {
        let mut g = p.zeros_like();
        let mut k = 0.0;
        g.for_each_mut(|_, t| {
            for x in t.iter_mut() {
                k += 1.0;
                *x = (k * 0.37f64).sin() * 1e-2;
            }
        });
        g
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = params();
        let before = p.clone();
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        adamw_step(&mut p, &before.zeros_like(), &mut AdamState::default(), &cfg);
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = params();
        let w0 = p.flat();
        let g = grads(&p);
        let cfg = AdamWConfig {
            lr: 1e-3,
            weight_decay: 0.05,
            ..Default::default()
        };
        adamw_step(&mut p, &g, &mut AdamState::default(), &cfg);
        // Bias-corrected moments after one step are g and g^2.
        for ((w, w1), gi) in w0.iter().zip(p.flat()).zip(g.flat()) {
            let want = w - cfg.lr * gi / ((gi * gi).sqrt() + cfg.eps) - cfg.lr * cfg.weight_decay * w;
            assert!((w1 - want).abs() <= 1e-15 * w.abs().max(1.0), "{w1} vs {want}");
        }
    }

    #[test]
    fn trajectories_are_reproducible() {
        let run = || {
            let mut p = params();
            let mut s = AdamState::default();
            let g = grads(&p);
            for _ in 0..5 {
                adamw_step(&mut p, &g, &mut s, &AdamWConfig::default());
            }
            (p, s)
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(
            a.flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(sa, sb);
        assert_eq!(sa.step, 5);
    }
}
