use crate::model::{Scalar, Tensor};
use crate::{Error, Result};

/// Mean squared error and its gradient `2 (pred - target) / N`.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::invalid(format!(
            "loss shapes differ: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.data().len() as f64;
    let scale = T::lit(2.0 / n);
    let mut sum = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d.to_f64_lossy() * d.to_f64_lossy();
            scale * d
        })
        .collect();
    let (h, w, c) = pred.shape();
    Ok((sum / n, Tensor::new(h, w, c, grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_tensors_have_zero_loss() {
        let t = Tensor::<f64>::from_fn(4, 4, 1, |y, x, _| (y + x) as f64 / 8.0);
        let (loss, grad) = mse_loss(&t, &t).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn constant_offset() {
        let t = Tensor::<f64>::from_fn(4, 4, 1, |y, x, _| (y * x) as f64 / 16.0);
        let p = Tensor::<f64>::from_fn(4, 4, 1, |y, x, _| (y * x) as f64 / 16.0 + 0.1);
        let (loss, _) = mse_loss(&p, &t).unwrap();
        assert!((loss - 0.01).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = Tensor::<f64>::from_fn(8, 8, 1, |_, _, _| rng.random());
        let t = Tensor::<f64>::from_fn(8, 8, 1, |_, _, _| rng.random());
        let (_, grad) = mse_loss(&p, &t).unwrap();
        let h = 1e-5;
        for i in 0..64 {
            let mut plus = p.clone();
            plus.data_mut()[i] += h;
            let mut minus = p.clone();
            minus.data_mut()[i] -= h;
            let fd = (mse_loss(&plus, &t).unwrap().0 - mse_loss(&minus, &t).unwrap().0) / (2.0 * h);
            let a = grad.data()[i];
            assert!((a - fd).abs() <= 1e-7 * a.abs().max(1e-6), "{a} vs {fd}");
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = Tensor::<f64>::zeros(2, 2, 1);
        let b = Tensor::<f64>::zeros(2, 3, 1);
        assert!(matches!(mse_loss(&a, &b), Err(Error::InvalidArgument(_))));
    }
}
