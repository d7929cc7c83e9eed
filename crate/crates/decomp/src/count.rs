//! Coefficient accounting for factored weight representations.

/// CP coefficient count: `R * (1 + sum_k I_k)` (weights plus factors).
pub fn cp_param_count(shape: &[usize], rank: usize) -> usize {
    rank * (1 + shape.iter().sum::<usize>())
}

/// Tucker coefficient count: `prod_k R_k + sum_k I_k * R_k` (core plus factors).
pub fn tucker_param_count(shape: &[usize], ranks: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), ranks.len());
    let core: usize = ranks.iter().product();
    let factors: usize = shape.iter().zip(ranks).map(|(i, r)| i * r).sum();
    core + factors
}

/// Dense coefficient count for the same shape, for compression ratios.
pub fn dense_count(shape: &[usize]) -> usize {
    shape.iter().product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tucker_formula() {
        // shape (4,4), ranks (2,2): 4 + 8 + 8 = 20
        assert_eq!(tucker_param_count(&[4, 4], &[2, 2]), 20);
    }

    #[test]
    fn cp_formula() {
        // shape (4,4,4), R=3: 3 * (1 + 12) = 39
        assert_eq!(cp_param_count(&[4, 4, 4], 3), 39);
    }

    #[test]
    fn dense_reference() {
        assert_eq!(dense_count(&[4, 4]), 16);
    }
}
