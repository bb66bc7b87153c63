//! Adam optimizer over per-layer parameter arrays.

use ndarray::Array2;

use crate::phase::wrap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam state with bias correction. One moment pair per parameter array.
#[derive(Debug, Clone)]
pub struct Adam {
    pub params: AdamParams,
    pub step: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(params: AdamParams, shapes: &[(usize, usize)]) -> Self {
        Self {
            params,
            step: 0,
            m: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            v: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
        }
    }

    /// One update step. With `wrap_phases`, weights are re-wrapped to
    /// (-pi, pi] afterwards.
    pub fn step(&mut self, weights: &mut [Array2<f64>], grads: &[Array2<f64>], wrap_phases: bool) {
        assert_eq!(weights.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let p = self.params;
        let bc1 = 1.0 - p.beta1.powi(self.step as i32);
        let bc2 = 1.0 - p.beta2.powi(self.step as i32);
        for ((w, g), (m, v)) in weights
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(w.dim(), g.dim());
            ndarray::Zip::from(w)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = p.beta1 * *m + (1.0 - p.beta1) * g;
                    *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= p.lr * m_hat / (v_hat.sqrt() + p.eps);
                    if wrap_phases {
                        *w = wrap(*w);
                    }
                });
        }
    }
}
