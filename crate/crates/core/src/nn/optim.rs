use serde::{Deserialize, Serialize};

use super::params::Params;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Step decay: `base_lr * 0.9^floor(epoch / 2)`.
///
/// The product is formed in decimal from the shortest representation of
/// `base_lr` and rounded once, so `0.01` decays to exactly `0.009`,
/// `0.0081`, ... rather than accumulating binary rounding error. Beyond the
/// range of exact integer arithmetic it falls back to floating point.
pub fn lr_schedule(base_lr: f64, epoch: usize) -> f64 {
    let k = (epoch / 2) as u32;
    decimal_decay(base_lr, k).unwrap_or_else(|| base_lr * 0.9f64.powi(k as i32))
}

fn decimal_decay(base: f64, k: u32) -> Option<f64> {
    let repr = format!("{base:e}");
    let (mantissa, exp) = repr.split_once('e')?;
    let exp: i64 = exp.parse().ok()?;
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: i128 = format!("{int}{frac}").parse().ok()?;
    let scaled = digits.checked_mul(9i128.checked_pow(k)?)?;
    format!("{scaled}e{}", exp - frac.len() as i64 - k as i64).parse().ok()
}

/// A first-order update rule. `lr` is supplied per step so the schedule
/// stays outside the optimizer.
pub trait Optimizer {
    fn step(&mut self, params: &mut Params, grads: &Params, lr: f64) -> Result<()>;
}

fn check_aligned(params: &Params, grads: &Params) -> Result<()> {
    for (name, p) in params.iter() {
        let g = grads.get(name).map_err(|_| Error::MissingGradient(name.to_string()))?;
        if g.shape() != p.shape() {
            return Err(Error::shape(
                format!("gradient `{name}`"),
                format!("{:?} vs parameter {:?}", g.shape(), p.shape()),
            ));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub momentum: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { momentum: 0.0 }
    }
}

/// Plain SGD with optional heavy-ball momentum.
#[derive(Clone, Debug)]
pub struct Sgd {
    config: SgdConfig,
    velocity: Params,
}

impl Sgd {
    pub fn new(config: SgdConfig) -> Self {
        Self {
            config,
            velocity: Params::new(),
        }
    }
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut Params, grads: &Params, lr: f64) -> Result<()> {
        check_aligned(params, grads)?;
        for (name, p) in params.iter_mut() {
            let g = grads.get(name)?;
            if self.config.momentum == 0.0 {
                p.add_scaled(g, -lr)?;
                continue;
            }
            if !self.velocity.contains(name) {
                self.velocity.insert(name, Tensor::zeros(p.shape()));
            }
            let v = self.velocity.get_mut(name)?;
            v.scale(self.config.momentum);
            v.add_scaled(g, 1.0)?;
            p.add_scaled(v, -lr)?;
        }
        Ok(())
    }
}

/// One SGD update: `θ ← θ − lr·g`.
pub fn sgd_update(params: &mut Params, grads: &Params, lr: f64) -> Result<()> {
    Sgd::new(SgdConfig::default()).step(params, grads, lr)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    step_count: u64,
    m: Params,
    v: Params,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step_count: 0,
            m: Params::new(),
            v: Params::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

impl Optimizer for Adam {
    fn step(&mut self, params: &mut Params, grads: &Params, lr: f64) -> Result<()> {
        check_aligned(params, grads)?;
        self.step_count += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (name, p) in params.iter_mut() {
            let g = grads.get(name)?;
            if !self.m.contains(name) {
                self.m.insert(name, Tensor::zeros(p.shape()));
                self.v.insert(name, Tensor::zeros(p.shape()));
            }
            let m = self.m.get_mut(name)?.data_mut();
            let v = self.v.get_mut(name)?.data_mut();
            for (k, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * gv;
                v[k] = beta2 * v[k] + (1.0 - beta2) * gv * gv;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f64) -> Params {
        let mut p = Params::new();
        p.insert("w", Tensor::scalar(v));
        p
    }

    #[test]
    fn schedule_values() {
        assert_eq!(lr_schedule(0.01, 0), 0.01);
        assert_eq!(lr_schedule(0.01, 1), 0.01);
        assert_eq!(lr_schedule(0.01, 2), 0.009);
        assert_eq!(lr_schedule(0.01, 5), 0.0081);
        assert_eq!(lr_schedule(-2.5, 3), -2.25);
        assert_eq!(lr_schedule(0.0, 7), 0.0);
        assert!((lr_schedule(0.01, 200) - 0.01 * 0.9f64.powi(100)).abs() < 1e-18);
        for e in 0..60 {
            assert!(lr_schedule(0.01, e + 1) <= lr_schedule(0.01, e));
        }
    }

    #[test]
    fn sgd_arithmetic() {
        let mut p = single(1.0);
        sgd_update(&mut p, &single(2.0), 0.1).unwrap();
        assert!((p.get("w").unwrap().data()[0] - 0.8).abs() < 1e-15);
        let mut q = single(1.0);
        sgd_update(&mut q, &single(123.0), 0.0).unwrap();
        assert_eq!(q, single(1.0));
    }

    #[test]
    fn adam_first_step_has_magnitude_lr() {
        for g in [1e-4, 1.0, 1e4] {
            let mut p = single(0.0);
            let mut adam = Adam::new(AdamConfig::default());
            adam.step(&mut p, &single(g), 0.01).unwrap();
            let moved = p.get("w").unwrap().data()[0];
            assert!((moved + 0.01).abs() < 1e-6, "g={g}: {moved}");
        }
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut p = single(1.0);
        p.insert("b", Tensor::scalar(0.0));
        let err = sgd_update(&mut p, &single(1.0), 0.1).unwrap_err();
        assert!(matches!(err, Error::MissingGradient(ref n) if n == "b"));
        let err = Adam::new(AdamConfig::default())
            .step(&mut p, &single(1.0), 0.1)
            .unwrap_err();
        assert!(matches!(err, Error::MissingGradient(_)));
    }
}
