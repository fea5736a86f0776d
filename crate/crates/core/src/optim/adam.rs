use crate::scalar::Scalar;

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(dim: usize, beta1: T, beta2: T, eps: T) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            m: vec![T::zero(); dim],
            v: vec![T::zero(); dim],
            t: 0,
        }
    }

    pub fn with_defaults(dim: usize) -> Self {
        Self::new(dim, T::of(0.9), T::of(0.999), T::of(1e-8))
    }

    /// Number of steps taken since construction or the last reset.
    pub fn steps(&self) -> i32 {
        self.t
    }

    /// Clears both moment estimates and the step counter.
    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = T::zero());
        self.v.iter_mut().for_each(|x| *x = T::zero());
        self.t = 0;
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: T) {
        assert_eq!(params.len(), self.m.len(), "parameter dimension mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient dimension mismatch");
        self.t += 1;
        let one = T::one();
        let bc1 = one - self.beta1.powi(self.t);
        let bc2 = one - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = Adam::<f64>::with_defaults(3);
        let mut x = vec![1.0, -2.0, 0.5];
        adam.step(&mut x, &[0.3, -7.0, 1e-3], 0.025);
        let expected = [1.0 - 0.025, -2.0 + 0.025, 0.5 - 0.025];
        for i in 0..3 {
            assert!((x[i] - expected[i]).abs() < 1e-6, "{i}: {}", x[i]);
        }
    }

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut adam = Adam::<f64>::with_defaults(2);
        let mut x = vec![0.25, -4.0];
        for _ in 0..5 {
            adam.step(&mut x, &[0.0, 0.0], 0.1);
        }
        assert_eq!(x, vec![0.25, -4.0]);
    }

    #[test]
    fn deterministic() {
        let mut a = Adam::<f64>::with_defaults(2);
        let mut b = a.clone();
        let mut xa = vec![1.0, 2.0];
        let mut xb = xa.clone();
        for k in 0..4 {
            let g = [k as f64 - 1.5, 0.1 * k as f64];
            a.step(&mut xa, &g, 0.01);
            b.step(&mut xb, &g, 0.01);
        }
        assert_eq!(xa, xb);
        assert_eq!(a, b);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut adam = Adam::<f64>::with_defaults(2);
        let mut x = vec![3.0, -1.0];
        for _ in 0..2000 {
            let g = [2.0 * x[0], 20.0 * x[1]];
            adam.step(&mut x, &g, 0.01);
        }
        assert!(x[0].abs() < 1e-2 && x[1].abs() < 1e-2, "{x:?}");
    }
}
