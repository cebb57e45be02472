//! Dense real polynomials in one variable, coefficients in ascending powers.

pub(crate) fn eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

pub(crate) fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &a)| i as f64 * a)
        .collect()
}

pub(crate) fn add_scaled(a: &[f64], b: &[f64], beta: f64) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + beta * b.get(i).copied().unwrap_or(0.0))
        .collect()
}

pub(crate) fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients of `p(x − c)`.
pub(crate) fn shift(c: &[f64], by: f64) -> Vec<f64> {
    // Horner in the polynomial ring: p(y) with y = x − by.
    let lin = [-by, 1.0];
    c.iter()
        .rev()
        .fold(Vec::new(), |acc, &a| add_scaled(&mul(&acc, &lin), &[a], 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_and_derivative() {
        // (x − 1)^2 = x^2 − 2x + 1
        let p = shift(&[0.0, 0.0, 1.0], 1.0);
        assert_eq!(p, vec![1.0, -2.0, 1.0]);
        assert_eq!(derivative(&p), vec![-2.0, 2.0]);
        assert_eq!(eval(&p, 3.0), 4.0);
        assert!(derivative(&[5.0]).is_empty());
        assert_eq!(eval(&[], 2.0), 0.0);
    }
}
