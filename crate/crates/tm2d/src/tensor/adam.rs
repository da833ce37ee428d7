//! Bias-corrected Adam.

use super::store::ParamStore;
use super::Tensor;
use crate::error::{Error, Result};

/// Adam optimizer state aligned to a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step_count: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first_moment: store.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
            second_moment: store.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update. `grads` aligns to the store order; `None` entries (params
    /// the loss did not touch) decay their moments and receive no update
    /// beyond that.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<&Tensor>]) -> Result<()> {
        if grads.len() != self.first_moment.len() {
            return Err(Error::dimension(format!(
                "adam got {} grads for {} parameters",
                grads.len(),
                self.first_moment.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = store.ids().collect();
        for (idx, id) in ids.into_iter().enumerate() {
            let m = &mut self.first_moment[idx];
            let v = &mut self.second_moment[idx];
            let zero_grad;
            let g = match grads[idx] {
                Some(g) => {
                    if g.shape() != m.shape() {
                        return Err(Error::dimension(format!(
                            "adam grad shape {:?} != param shape {:?}",
                            g.shape(),
                            m.shape()
                        )));
                    }
                    g
                }
                None => {
                    zero_grad = Tensor::zeros(m.shape());
                    &zero_grad
                }
            };
            let param = store.get_mut(id);
            for (((p, md), vd), &gd) in param
                .data_mut()
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
                .zip(g.data())
            {
                *md = self.beta1 * *md + (1.0 - self.beta1) * gd;
                *vd = self.beta2 * *vd + (1.0 - self.beta2) * gd * gd;
                let m_hat = *md / bc1;
                let v_hat = *vd / bc2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }

    /// Flatten moments for checkpointing: (first, second) per parameter.
    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.first_moment, &self.second_moment)
    }

    /// Restore moments and step counter from a checkpoint.
    pub fn restore(&mut self, step_count: u64, first: Vec<Tensor>, second: Vec<Tensor>) -> Result<()> {
        if first.len() != self.first_moment.len() || second.len() != self.second_moment.len() {
            return Err(Error::Version("adam moment count mismatch".into()));
        }
        for (new, old) in first.iter().zip(&self.first_moment) {
            if new.shape() != old.shape() {
                return Err(Error::Version("adam moment shape mismatch".into()));
            }
        }
        self.step_count = step_count;
        self.first_moment = first;
        self.second_moment = second;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: Vec<f64>) -> ParamStore {
        let mut s = ParamStore::new();
        let n = values.len();
        s.add("p", Tensor::new(vec![n], values).unwrap());
        s
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut store = store_with(vec![1.0, -2.0, 3.0]);
        let before = store.get(store.by_name("p").unwrap()).clone();
        let mut adam = Adam::new(&store, 0.01);
        let zero = Tensor::zeros(&[3]);
        for _ in 0..10 {
            adam.step(&mut store, &[Some(&zero)]).unwrap();
        }
        assert_eq!(store.get(store.by_name("p").unwrap()), &before);
        // moments decay toward zero (they started at zero and stay there)
        assert!(adam.moments().0[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_step_magnitude_is_lr_regardless_of_gradient_scale() {
        // Bias correction makes the first update ≈ ±lr for any constant
        // gradient well above eps.
        for &scale in &[1e-4, 1.0, 1e6] {
            let mut store = store_with(vec![0.5, 0.5]);
            let mut adam = Adam::new(&store, 1e-3);
            let g = Tensor::full(&[2], scale);
            adam.step(&mut store, &[Some(&g)]).unwrap();
            let p = store.get(store.by_name("p").unwrap());
            for &v in p.data() {
                let delta = (0.5 - v).abs();
                assert!(
                    (delta / 1e-3 - 1.0).abs() < 0.01,
                    "scale {scale}: step magnitude {delta}"
                );
            }
        }
    }

    #[test]
    fn step_count_increments_by_one() {
        let mut store = store_with(vec![0.0]);
        let mut adam = Adam::new(&store, 0.1);
        let g = Tensor::full(&[1], 1.0);
        for expected in 1..=5 {
            adam.step(&mut store, &[Some(&g)]).unwrap();
            assert_eq!(adam.step_count(), expected);
        }
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut store = store_with(vec![0.3, -0.8]);
            let mut adam = Adam::new(&store, 0.05);
            for i in 0..50 {
                let g = Tensor::new(vec![2], vec![(i as f64).sin(), (i as f64).cos()]).unwrap();
                adam.step(&mut store, &[Some(&g)]).unwrap();
            }
            store.get(store.by_name("p").unwrap()).data().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn grad_shape_mismatch_is_an_error() {
        let mut store = store_with(vec![0.0, 0.0]);
        let mut adam = Adam::new(&store, 0.1);
        let g = Tensor::zeros(&[3]);
        assert!(adam.step(&mut store, &[Some(&g)]).is_err());
    }
}
