use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Probability floor applied before taking the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Negative log-likelihood of `label` under `probabilities`.
pub fn cross_entropy(probabilities: &Tensor, label: usize) -> Result<f64> {
    let p = probabilities.data();
    if label >= p.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: p.len(),
        });
    }
    Ok(-p[label].max(PROB_FLOOR).ln())
}

/// Gradient of [`cross_entropy`] with respect to the probabilities.
///
/// Zero when the true-class probability sits below the floor, since the
/// clamped loss is locally constant there.
pub fn cross_entropy_grad(probabilities: &Tensor, label: usize) -> Result<Tensor> {
    let p = probabilities.data();
    if label >= p.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: p.len(),
        });
    }
    let mut g = Tensor::zeros(probabilities.shape());
    if p[label] > PROB_FLOOR {
        g.data_mut()[label] = -1.0 / p[label];
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_losses() {
        let perfect = Tensor::vector(vec![1.0, 0.0]);
        assert_eq!(cross_entropy(&perfect, 0).unwrap(), 0.0);
        let uniform = Tensor::vector(vec![0.5, 0.5]);
        assert!((cross_entropy(&uniform, 1).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let skewed = Tensor::vector(vec![0.9, 0.1]);
        assert!((cross_entropy(&skewed, 1).unwrap() - std::f64::consts::LN_10).abs() < 1e-9);
    }

    #[test]
    fn clamp_floor_bounds_loss() {
        let p = Tensor::vector(vec![1.0, 0.0]);
        let l = cross_entropy(&p, 1).unwrap();
        assert!((l - (-PROB_FLOOR.ln())).abs() < 1e-12);
        assert_eq!(cross_entropy_grad(&p, 1).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn label_out_of_range() {
        let p = Tensor::vector(vec![0.5, 0.5]);
        assert!(matches!(
            cross_entropy(&p, 2),
            Err(Error::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }
}
