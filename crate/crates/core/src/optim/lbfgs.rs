use std::collections::VecDeque;

use super::dot;
use crate::scalar::Scalar;

/// Backtracking line-search settings (Armijo sufficient decrease).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub c1: f64,
    pub shrink: f64,
    pub max_trials: usize,
    /// When set, quasi-Newton steps start from the unit step and the first
    /// (steepest-descent) step has Euclidean length `lr`. Otherwise every
    /// search starts at `lr`.
    pub unit_step: bool,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            shrink: 0.5,
            max_trials: 20,
            unit_step: true,
        }
    }
}

/// Outcome of one L-BFGS iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsStep<T> {
    /// Step length accepted by the line search (zero on a stall).
    pub step_length: T,
    /// `gᵀd` of the search direction; negative for every direction tried.
    pub slope: T,
    pub loss: T,
    pub grad: Vec<T>,
    pub trials: usize,
    /// The line search exhausted its trials and no step was taken.
    pub stalled: bool,
    /// The curvature pair from this step was rejected (`sᵀy ≤ 0`).
    pub pair_rejected: bool,
}

/// Limited-memory BFGS with two-loop recursion.
#[derive(Debug, Clone)]
pub struct Lbfgs<T> {
    memory: usize,
    line_search: LineSearch,
    // (s, y, 1/(sᵀy)), oldest first.
    pairs: VecDeque<(Vec<T>, Vec<T>, T)>,
}

impl<T: Scalar> Lbfgs<T> {
    pub fn new(memory: usize, line_search: LineSearch) -> Self {
        Self {
            memory: memory.max(1),
            line_search,
            pairs: VecDeque::new(),
        }
    }

    pub fn history_len(&self) -> usize {
        self.pairs.len()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Search direction `d = −H·g`, with `H₀ = (sᵀy / yᵀy)·I` from the newest
    /// pair. Without stored pairs this is `−g`.
    pub fn direction(&self, grad: &[T]) -> Vec<T> {
        let mut q = grad.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = *rho * dot(s, &q);
            for (qi, &yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = *rho * dot(y, &q);
            for (qi, &si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        q.iter_mut().for_each(|qi| *qi = -*qi);
        q
    }

    /// One iteration from `x` with known `loss` and `grad`.
    ///
    /// The line search starts at the step chosen by [`LineSearch::unit_step`]
    /// and halves until the Armijo condition holds; `loss_fn` may return a
    /// large sentinel for infeasible points.
    /// On success `x` is updated and `grad_fn` is evaluated once at the new
    /// point to form the curvature pair.
    pub fn step<F, G>(
        &mut self,
        x: &mut [T],
        loss: T,
        grad: &[T],
        lr: T,
        mut loss_fn: F,
        mut grad_fn: G,
    ) -> LbfgsStep<T>
    where
        F: FnMut(&[T]) -> T,
        G: FnMut(&[T]) -> Vec<T>,
    {
        let mut alpha = lr;
        let mut d = self.direction(grad);
        let mut slope = dot(grad, &d);
        if !(slope < T::zero()) {
            // Stale curvature; restart from steepest descent.
            self.pairs.clear();
            d = grad.iter().map(|&g| -g).collect();
            slope = dot(grad, &d);
        }
        if self.pairs.is_empty() {
            // No curvature yet: a steepest-descent step of length `lr`.
            if self.line_search.unit_step {
                alpha = lr / dot(grad, grad).sqrt();
            }
        } else if self.line_search.unit_step {
            alpha = T::one();
        }
        if !(slope < T::zero()) {
            // Zero gradient: already stationary.
            return LbfgsStep {
                step_length: T::zero(),
                slope,
                loss,
                grad: grad.to_vec(),
                trials: 0,
                stalled: true,
                pair_rejected: false,
            };
        }

        let c1 = T::of(self.line_search.c1);
        let shrink = T::of(self.line_search.shrink);
        let mut trial = vec![T::zero(); x.len()];
        for trials in 1..=self.line_search.max_trials {
            for i in 0..x.len() {
                trial[i] = x[i] + alpha * d[i];
            }
            let f = loss_fn(&trial);
            if f.is_finite() && f <= loss + c1 * alpha * slope {
                let new_grad = grad_fn(&trial);
                let s: Vec<T> = trial.iter().zip(x.iter()).map(|(&a, &b)| a - b).collect();
                let y: Vec<T> = new_grad.iter().zip(grad).map(|(&a, &b)| a - b).collect();
                let sy = dot(&s, &y);
                let pair_rejected = !(sy > T::zero() && sy.is_finite());
                if !pair_rejected {
                    if self.pairs.len() == self.memory {
                        self.pairs.pop_front();
                    }
                    self.pairs.push_back((s, y, T::one() / sy));
                }
                x.copy_from_slice(&trial);
                return LbfgsStep {
                    step_length: alpha,
                    slope,
                    loss: f,
                    grad: new_grad,
                    trials,
                    stalled: false,
                    pair_rejected,
                };
            }
            alpha *= shrink;
        }
        LbfgsStep {
            step_length: T::zero(),
            slope,
            loss,
            grad: grad.to_vec(),
            trials: self.line_search.max_trials,
            stalled: true,
            pair_rejected: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_quadratic(diag: &[f64], x0: Vec<f64>, lr: f64, iters: usize) -> (Vec<f64>, usize) {
        let f = |x: &[f64]| 0.5 * x.iter().zip(diag).map(|(xi, d)| d * xi * xi).sum::<f64>();
        let g = |x: &[f64]| x.iter().zip(diag).map(|(xi, d)| d * xi).collect::<Vec<_>>();
        let mut opt = Lbfgs::new(10, LineSearch::default());
        let mut x = x0;
        let mut loss = f(&x);
        let mut grad = g(&x);
        for k in 0..iters {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                return (x, k);
            }
            let out = opt.step(&mut x, loss, &grad, lr, f, g);
            assert!(out.slope < 0.0);
            loss = out.loss;
            grad = out.grad;
        }
        (x, iters)
    }

    #[test]
    fn first_direction_is_negative_gradient() {
        let opt = Lbfgs::<f64>::new(5, LineSearch::default());
        assert_eq!(opt.direction(&[1.0, -2.0]), vec![-1.0, 2.0]);
    }

    #[test]
    fn unit_bowl_in_one_iteration() {
        let (x, iters) = run_quadratic(&[1.0, 1.0], vec![1.0, 1.0], 1.0, 5);
        assert!(iters <= 5);
        assert!(x.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let (x, iters) = run_quadratic(&[1.0, 10.0, 100.0], vec![1.0, 1.0, 1.0], 1.0, 50);
        assert!(iters < 50, "{x:?}");
    }

    #[test]
    fn line_search_failure_stalls() {
        let mut opt = Lbfgs::<f64>::new(3, LineSearch::default());
        let mut x = vec![1.0];
        // Objective that rejects every trial point.
        let out = opt.step(&mut x, 0.5, &[1.0], 1.0, |_| 1e9, |_| vec![0.0]);
        assert!(out.stalled);
        assert_eq!(out.step_length, 0.0);
        assert_eq!(x, vec![1.0]);
        assert_eq!(out.trials, 20);
    }

    #[test]
    fn nonpositive_curvature_pair_discarded() {
        let mut opt = Lbfgs::<f64>::new(3, LineSearch::default());
        let mut x = vec![0.0];
        // Concave: f = -x², grad = -2x; start slightly off zero.
        x[0] = 0.1;
        let out = opt.step(&mut x, -0.01, &[-0.2], 0.1, |v| -v[0] * v[0], |v| vec![-2.0 * v[0]]);
        assert!(out.pair_rejected);
        assert_eq!(opt.history_len(), 0);
    }
}
