use crate::error::Result;
use crate::param::ParamStore;

/// Adam without weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(lr: f32) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated grads; entries without a
    /// grad are treated as having a zero gradient. Clears every grad.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if self.m.is_empty() {
            for p in store.iter() {
                self.m.push(vec![0.0; p.tensor.numel()]);
                self.v.push(vec![0.0; p.tensor.numel()]);
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = store.ids().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let entry = store.entry(id);
            if !entry.trainable {
                continue;
            }
            let grad = entry
                .tensor
                .grad()
                .unwrap_or_else(|| vec![0.0; entry.tensor.numel()]);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let mut data = entry.tensor.to_vec();
            for j in 0..data.len() {
                let g = grad[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                data[j] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
            store.set_data(id, data)?;
        }
        Ok(())
    }
}
