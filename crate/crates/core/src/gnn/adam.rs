use crate::gnn::params::{GcnParams, Grads};

/// Moment estimates for [`adam_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Grads,
    v: Grads,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Apply weight decay directly to the weights (AdamW) instead of folding
    /// `2λW` into the gradient.
    pub decoupled: bool,
}

impl AdamState {
    pub fn new(params: &GcnParams) -> Self {
        Self {
            m: params.zero_grads(),
            v: params.zero_grads(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            decoupled: false,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut GcnParams, grads: &Grads, state: &mut AdamState, lr: f64, weight_decay: f64) {
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - libm::pow(b1, t as f64);
    let c2 = 1.0 - libm::pow(b2, t as f64);
    let decoupled = state.decoupled;
    let mats = params
        .matrices_mut()
        .zip(grads.matrices())
        .zip(state.m.matrices_mut().zip(state.v.matrices_mut()));
    for ((w, g), (m, v)) in mats {
        let w = w.as_mut_slice();
        for (i, &gi) in g.as_slice().iter().enumerate() {
            let gi = if decoupled {
                gi
            } else {
                gi + 2.0 * weight_decay * w[i]
            };
            let mi = &mut m.as_mut_slice()[i];
            *mi = b1 * *mi + (1.0 - b1) * gi;
            let vi = &mut v.as_mut_slice()[i];
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let update = (*mi / c1) / (libm::sqrt(*vi / c2) + eps);
            if decoupled {
                w[i] -= lr * weight_decay * w[i];
            }
            w[i] -= lr * update;
        }
    }
}
