use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, cfg: AdamConfig) -> Adam {
        Adam {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), grads.len());
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

/// Learning rate halved at every multiple of `milestone`.
pub fn scheduled_lr(lr0: f64, milestone: usize, epoch: usize) -> f64 {
    if milestone == 0 {
        return lr0;
    }
    lr0 * 0.5f64.powi((epoch / milestone) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut a = Adam::new(3, AdamConfig::default());
        let mut p = vec![1.0, -2.0, 0.5];
        for _ in 0..10 {
            a.step(&mut p, &[0.0; 3], 0.1);
        }
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn constant_gradient_moves_by_lr() {
        let mut a = Adam::new(2, AdamConfig::default());
        let mut p = vec![0.0, 0.0];
        let mut prev = p.clone();
        for _ in 0..200 {
            prev.copy_from_slice(&p);
            a.step(&mut p, &[3.0, -0.01], 0.01);
        }
        assert!(((prev[0] - p[0]) - 0.01).abs() < 1e-6);
        assert!(((p[1] - prev[1]) - 0.01).abs() < 1e-6);
    }

    #[test]
    fn milestones_halve() {
        assert_eq!(scheduled_lr(0.004, 200, 0), 0.004);
        assert_eq!(scheduled_lr(0.004, 200, 199), 0.004);
        assert_eq!(scheduled_lr(0.004, 200, 200), 0.002);
        assert_eq!(scheduled_lr(0.004, 200, 999), 0.004 / 16.0);
    }
}
