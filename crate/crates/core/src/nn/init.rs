use rand::Rng;

use crate::autodiff::Tensor;
use crate::error::{Result, ViganError};

/// `[fan_in × fan_out]` weights drawn uniformly from ±√(6/(fan_in+fan_out)).
pub fn xavier_uniform<R: Rng + ?Sized>(
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Result<Tensor> {
    if fan_in == 0 || fan_out == 0 {
        return Err(ViganError::invalid(format!(
            "cannot initialise a {fan_in}x{fan_out} weight matrix"
        )));
    }
    let bound = xavier_bound(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::matrix(fan_in, fan_out, data)
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn zero_bias(width: usize) -> Result<Tensor> {
    if width == 0 {
        return Err(ViganError::invalid("cannot initialise a zero-width bias"));
    }
    Tensor::zeros(vec![width])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn draws_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let bound = (6.0f64 / 8.0).sqrt();
        assert!((xavier_bound(4, 4) - 0.8660254037844386).abs() < 1e-15);
        for _ in 0..100 {
            let w = xavier_uniform(4, 4, &mut rng).unwrap();
            assert!(w.data().iter().all(|v| v.abs() <= bound));
        }
    }

    #[test]
    fn bias_is_zero_and_seed_deterministic() {
        assert!(zero_bias(5).unwrap().data().iter().all(|&v| v == 0.0));
        let a = xavier_uniform(3, 7, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = xavier_uniform(3, 7, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_dims_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(xavier_uniform(0, 3, &mut rng).is_err());
        assert!(zero_bias(0).is_err());
    }
}
