//! Stochastic gradient descent with heavy-ball momentum.

use candle_core::{backprop::GradStore, DType, Tensor, Var};

use crate::error::{Error, Result};

/// One update: `v' = momentum·v + g`, `θ' = θ − lr·v'`.
pub fn sgd_step(
    name: &str,
    theta: &Tensor,
    grad: &Tensor,
    lr: f64,
    momentum: f64,
    velocity: &Tensor,
) -> Result<(Tensor, Tensor)> {
    if theta.dims() != grad.dims() || theta.dims() != velocity.dims() {
        return Err(Error::Shape(format!(
            "`{name}`: parameter {:?}, gradient {:?}, velocity {:?}",
            theta.dims(),
            grad.dims(),
            velocity.dims()
        )));
    }
    check_finite(name, grad)?;
    let v = ((velocity * momentum)? + grad)?;
    let theta = (theta - (&v * lr)?)?;
    Ok((theta, v))
}

fn check_finite(name: &str, t: &Tensor) -> Result<()> {
    let values = t.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteGradient { param: name.to_string() })
    }
}

/// Momentum SGD over a fixed, named parameter list.
pub struct Sgd {
    params: Vec<(String, Var)>,
    velocity: Vec<Tensor>,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Sgd {
    pub fn new(params: Vec<(String, Var)>, lr: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        let velocity = params
            .iter()
            .map(|(_, v)| v.zeros_like())
            .collect::<candle_core::Result<Vec<_>>>()?;
        Ok(Self {
            params,
            velocity,
            lr,
            momentum,
            weight_decay,
        })
    }

    pub fn params(&self) -> &[(String, Var)] {
        &self.params
    }

    /// Applies one update from a gradient store. Parameters the loss does
    /// not reach get a zero gradient.
    pub fn step(&mut self, grads: &GradStore) -> Result<()> {
        for ((name, var), vel) in self.params.iter().zip(self.velocity.iter_mut()) {
            let mut g = match grads.get(var.as_tensor()) {
                Some(g) => g.clone(),
                None => var.zeros_like()?,
            };
            if self.weight_decay != 0.0 {
                g = (g + (var.as_tensor() * self.weight_decay)?)?;
            }
            let (theta, v) = sgd_step(name, var.as_tensor(), &g, self.lr, self.momentum, vel)?;
            var.set(&theta)?;
            *vel = v;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn scalar(v: f64) -> Tensor {
        Tensor::new(&[v], &Device::Cpu).unwrap()
    }

    fn value(t: &Tensor) -> f64 {
        t.to_vec1::<f64>().unwrap()[0]
    }

    #[test]
    fn vanilla_step() {
        let (theta, _) = sgd_step("w", &scalar(1.0), &scalar(2.0), 0.1, 0.0, &scalar(0.0)).unwrap();
        assert!((value(&theta) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_decays_velocity() {
        let (theta, v) = sgd_step("w", &scalar(3.0), &scalar(0.0), 0.1, 0.9, &scalar(0.0)).unwrap();
        assert_eq!(value(&theta), 3.0);
        assert_eq!(value(&v), 0.0);
        let (_, v) = sgd_step("w", &scalar(3.0), &scalar(0.0), 0.1, 0.9, &scalar(2.0)).unwrap();
        assert!((value(&v) - 1.8).abs() < 1e-15);
    }

    #[test]
    fn two_momentum_steps() {
        let (t1, v1) = sgd_step("w", &scalar(0.0), &scalar(1.0), 0.1, 0.9, &scalar(0.0)).unwrap();
        let (t2, _) = sgd_step("w", &t1, &scalar(1.0), 0.1, 0.9, &v1).unwrap();
        assert!((value(&t2) + 0.29).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let err = sgd_step("head.dense.weight", &scalar(0.0), &scalar(f64::NAN), 0.1, 0.9, &scalar(0.0)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref param } if param == "head.dense.weight"));
    }
}
