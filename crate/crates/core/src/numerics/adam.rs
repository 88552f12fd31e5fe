//! Adam with bias correction, operating over a fixed-order parameter list.

use crate::error::{Error, Result};

use super::{numel, Scalar};

/// A named weight array with optional accumulated gradient.
#[derive(Debug, Clone)]
pub struct ParamTensor<E: Scalar> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<E>,
    pub grad: Option<Vec<E>>,
}

impl<E: Scalar> ParamTensor<E> {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<E>) -> Self {
        debug_assert_eq!(values.len(), numel(&shape));
        ParamTensor {
            name: name.into(),
            shape,
            values,
            grad: None,
        }
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    /// Ensure a zeroed gradient buffer exists.
    pub fn zero_grad(&mut self) {
        match self.grad.as_mut() {
            Some(g) => g.iter_mut().for_each(|x| *x = E::zero()),
            None => self.grad = Some(vec![E::zero(); self.values.len()]),
        }
    }

    /// Add a gradient contribution (one tape's leaf gradient).
    pub fn accumulate_grad(&mut self, contribution: &[E]) -> Result<()> {
        if contribution.len() != self.values.len() {
            return Err(Error::Dimension {
                op: "accumulate_grad",
                left: self.shape.clone(),
                right: vec![contribution.len()],
            });
        }
        self.zero_grad();
        let g = self.grad.as_mut().unwrap();
        for (gi, &c) in g.iter_mut().zip(contribution) {
            *gi += c;
        }
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state. The parameter list must be passed in the same order on
/// every step; moments are matched positionally.
pub struct Adam<E: Scalar> {
    config: AdamConfig,
    step: u64,
    moments: Option<Vec<(Vec<E>, Vec<E>)>>,
}

impl<E: Scalar> Adam<E> {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            moments: None,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over all parameters. Requires every gradient to be
    /// populated; clears them afterwards. Fails if any updated value is
    /// non-finite.
    pub fn step(&mut self, params: &mut [&mut ParamTensor<E>], lr: f64) -> Result<()> {
        for p in params.iter() {
            if p.grad.is_none() {
                return Err(Error::Usage(format!(
                    "adam step with missing gradient for parameter '{}'",
                    p.name
                )));
            }
        }
        let moments = self.moments.get_or_insert_with(|| {
            params
                .iter()
                .map(|p| (vec![E::zero(); p.numel()], vec![E::zero(); p.numel()]))
                .collect()
        });
        if moments.len() != params.len() {
            return Err(Error::Usage(format!(
                "adam step with {} parameters, expected {}",
                params.len(),
                moments.len()
            )));
        }

        self.step += 1;
        let t = self.step as i32;
        let b1 = E::from_f64(self.config.beta1);
        let b2 = E::from_f64(self.config.beta2);
        let one_minus_b1 = E::from_f64(1.0 - self.config.beta1);
        let one_minus_b2 = E::from_f64(1.0 - self.config.beta2);
        let c1 = E::from_f64(1.0 / (1.0 - self.config.beta1.powi(t)));
        let c2 = E::from_f64(1.0 / (1.0 - self.config.beta2.powi(t)));
        let eps = E::from_f64(self.config.epsilon);
        let lr_e = E::from_f64(lr);

        for (p, (m, v)) in params.iter_mut().zip(moments.iter_mut()) {
            let grad = p.grad.take().unwrap();
            for (((value, g), mi), vi) in
                p.values.iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut())
            {
                *mi = b1 * *mi + one_minus_b1 * *g;
                *vi = b2 * *vi + one_minus_b2 * *g * *g;
                let m_hat = *mi * c1;
                let v_hat = *vi * c2;
                *value = *value - lr_e * m_hat / (v_hat.sqrt() + eps);
            }
            if let Some(bad) = p.values.iter().find(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite value {bad} in parameter '{}' after update {t}",
                    p.name
                )));
            }
        }
        Ok(())
    }
}
