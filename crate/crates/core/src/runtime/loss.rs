use super::RuntimeError;

/// Probabilities below this are clipped before taking the log.
pub const CLIP_PROBABILITY: f64 = 1e-12;
/// How far a distribution may sum from 1 before it is rejected.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// `-ln p[gold]`, with `p[gold]` clipped at [`CLIP_PROBABILITY`].
pub fn cross_entropy(p: &[f64], gold: usize) -> Result<f64, RuntimeError> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(RuntimeError::NotNormalized { sum });
    }
    Ok(-p[gold].max(CLIP_PROBABILITY).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((cross_entropy(&[0.25; 4], 2).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(cross_entropy(&[0.0, 1.0], 1).unwrap(), 0.0);
        assert_eq!(cross_entropy(&[0.0, 1.0], 0).unwrap(), -(1e-12f64).ln());
        assert!(matches!(
            cross_entropy(&[0.5, 0.6], 0),
            Err(RuntimeError::NotNormalized { .. })
        ));
    }
}
