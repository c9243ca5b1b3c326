use super::network::NetworkParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learn_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learn_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: NetworkParams,
    v: NetworkParams,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &NetworkParams) -> Self {
        Self { config, m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut NetworkParams, grad: &NetworkParams) {
        self.t += 1;
        let AdamConfig { learn_rate, beta1, beta2, epsilon } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        let tensors = params.tensors_mut().into_iter().zip(grad.tensors());
        for (((p, g), m), v) in tensors.zip(self.m.tensors_mut()).zip(self.v.tensors_mut()) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                p[i] -= learn_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + epsilon);
            }
        }
    }
}
