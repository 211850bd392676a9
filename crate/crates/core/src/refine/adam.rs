//! Adam state for one parameter group.

/// First/second moment estimates over a flat parameter array. When
/// densification changes the Gaussian count, state rows are remapped
/// alongside surviving Gaussians and zero-initialized for new ones; the step
/// counter carries over.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    dims: usize,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-15;

impl Adam {
    pub fn new(count: usize, dims: usize) -> Self {
        Self {
            m: vec![0.0; count * dims],
            v: vec![0.0; count * dims],
            step: 0,
            dims,
        }
    }

    /// One update over the flattened parameters.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }

    /// Rebuilds state rows after densification/pruning. `keep[j]` names the
    /// old row feeding new row `j`, or `None` for a fresh Gaussian.
    pub fn remap(&mut self, keep: &[Option<usize>]) {
        let dims = self.dims;
        let mut m = vec![0.0; keep.len() * dims];
        let mut v = vec![0.0; keep.len() * dims];
        for (j, src) in keep.iter().enumerate() {
            if let Some(old) = src {
                m[j * dims..(j + 1) * dims].copy_from_slice(&self.m[old * dims..(old + 1) * dims]);
                v[j * dims..(j + 1) * dims].copy_from_slice(&self.v[old * dims..(old + 1) * dims]);
            }
        }
        self.m = m;
        self.v = v;
    }
}
