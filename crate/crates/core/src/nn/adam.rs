//! Adaptive-moment optimizer over a list of parameter tensors.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lens: &[usize], lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: lens.iter().map(|&n| alloc::vec![0.0; n]).collect(),
            v: lens.iter().map(|&n| alloc::vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.m.len(), "tensor count mismatch");
        assert_eq!(grads.len(), self.m.len(), "tensor count mismatch");
        self.t += 1;
        let c1 = 1.0 - math::powi(self.beta1, self.t as i32);
        let c2 = 1.0 - math::powi(self.beta2, self.t as i32);
        let (b1, b2) = (self.beta1, self.beta2);
        for (k, p) in params.iter_mut().enumerate() {
            let g = grads[k];
            let m = &mut self.m[k];
            let v = &mut self.v[k];
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= self.lr * mh / (math::sqrt(vh) + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut a = Adam::new(&[3], 1e-4);
        let mut p = [1.0, -2.0, 3.0];
        let before = p;
        a.step(&mut [&mut p[..]], &[&[0.0; 3][..]]);
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut a = Adam::new(&[3], 1e-4);
        let mut p = [0.0; 3];
        a.step(&mut [&mut p[..]], &[&[2.5, -0.3, 7.0][..]]);
        for (x, s) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((x - s * 1e-4).abs() < 1e-10);
        }
    }
}
