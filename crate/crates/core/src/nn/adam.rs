use super::Scalar;

pub const DEFAULT_LR: f64 = 3e-4;

/// Bias-corrected Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<T>,
    v: Vec<T>,
    step: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(param_count: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![T::zero(); param_count],
            v: vec![T::zero(); param_count],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[T] {
        &self.m
    }

    pub fn second_moment(&self) -> &[T] {
        &self.v
    }

    /// One update with step size `lr`.
    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (c1, c2) = (T::one() - b1, T::one() - b2);
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let step_size = T::of(lr / bias1);
        let inv_sqrt_bias2 = T::of(1.0 / bias2.sqrt());
        let eps = T::of(self.eps);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + c1 * g;
            *v = b2 * *v + c2 * g * g;
            *p -= step_size * *m / (v.sqrt() * inv_sqrt_bias2 + eps);
        }
    }
}

/// Cosine annealing from `lr0` at step 0 to 0 at `total_steps`; later steps stay at 0.
pub fn cosine_lr(step: usize, total_steps: usize, lr0: f64) -> f64 {
    if total_steps == 0 {
        return lr0;
    }
    if step >= total_steps {
        return 0.0;
    }
    let frac = step as f64 / total_steps as f64;
    lr0 * (1.0 + (std::f64::consts::PI * frac).cos()) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut opt = Adam::<f64>::new(4);
        let mut p = vec![1.0, 1.0, 1.0, 1.0];
        opt.step(&mut p, &[0.5, -3.0, 1e-3, -200.0], 1e-3);
        let delta: Vec<f64> = p.iter().map(|x| x - 1.0).collect();
        for (d, sign) in delta.iter().zip([-1.0, 1.0, -1.0, 1.0]) {
            assert!((d - sign * 1e-3).abs() < 1e-7, "{d}");
        }
        assert!(opt.second_moment().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_gradient_is_stationary() {
        let mut opt = Adam::<f32>::new(3);
        let mut p = vec![0.1, -2.0, 7.5];
        for _ in 0..100 {
            opt.step(&mut p, &[0.0; 3], 1e-2);
        }
        assert_eq!(p, vec![0.1, -2.0, 7.5]);
        assert_eq!(opt.steps(), 100);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut opt = Adam::<f32>::new(2);
            let mut p = vec![0.3f32, -0.4];
            for i in 0..50 {
                let g = [p[0] * 2.0 + i as f32 * 0.01, (p[1] - 1.0).sin()];
                opt.step(&mut p, &g, 1e-2);
            }
            p.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn cosine_schedule_points() {
        assert_eq!(cosine_lr(0, 100, 3e-4), 3e-4);
        assert!((cosine_lr(50, 100, 3e-4) - 1.5e-4).abs() < 1e-15);
        assert_eq!(cosine_lr(100, 100, 3e-4), 0.0);
        assert_eq!(cosine_lr(250, 100, 3e-4), 0.0);
        let mut prev = f64::INFINITY;
        for s in 0..=100 {
            let lr = cosine_lr(s, 100, 1.0);
            assert!(lr <= prev);
            prev = lr;
        }
    }
}
