use crate::Scalar;

/// ADAM hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.02, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates for one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(dim: usize) -> Self {
        Self { first_moment: vec![T::zero(); dim], second_moment: vec![T::zero(); dim], step_count: 0 }
    }

    /// One bias-corrected update of `x` against gradient `g`.
    pub fn step(&mut self, cfg: &AdamConfig, x: &mut [T], g: &[T]) {
        debug_assert_eq!(x.len(), g.len());
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
        let bias1 = T::one() - b1.powi(t);
        let bias2_sqrt = (T::one() - b2.powi(t)).sqrt();
        let step = T::lit(cfg.learning_rate) / bias1;
        let eps = T::lit(cfg.eps);
        for (((xi, &gi), m), v) in x.iter_mut().zip(g).zip(&mut self.first_moment).zip(&mut self.second_moment) {
            *m = b1 * *m + (T::one() - b1) * gi;
            *v = b2 * *v + (T::one() - b2) * gi * gi;
            *xi = *xi - step * *m / (v.sqrt() / bias2_sqrt + eps);
        }
    }
}
