//! Asymptotic expansions in `1/k` of normalized pairings
//! `a_k = (π/k) ⟨𝒯_{m,k}, χ⟩` and of the global analogue.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::assemble;
use crate::cp1::{Level, ModelPoint};
use crate::error::{Error, Result};
use crate::measures::{eigh, global_measure, local_measure, pair, SpectralData};
use crate::observables::{Observable, SymbolClass, TestFunction};
use crate::quadrature::integrate_sphere;

/// Complex dimension of the model manifold; the pairings are normalized by
/// `(π/k)^d`.
pub const MODEL_DIMENSION: i32 = 1;

/// Largest acceptable condition number of the fit system.
pub const MAX_CONDITION: f64 = 1e12;

/// Strictly increasing positive levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KGrid(Vec<u32>);

impl KGrid {
    pub fn new(ks: Vec<u32>) -> Result<Self> {
        if ks.is_empty() {
            return Err(Error::Grid("empty grid".into()));
        }
        if ks[0] == 0 {
            return Err(Error::Grid("levels must be positive".into()));
        }
        if ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Grid("levels must be strictly increasing".into()));
        }
        Ok(KGrid(ks))
    }

    /// `{32, 48, 64, 96, 128, 192, 256}`.
    pub fn default_fit() -> Self {
        KGrid(vec![32, 48, 64, 96, 128, 192, 256])
    }

    /// `k₀, 2k₀, …, 2^{n−1} k₀`.
    pub fn doubling(k0: u32, n: usize) -> Result<Self> {
        KGrid::new((0..n).map(|i| k0 << i).collect())
    }

    pub fn levels(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn validate_for_order(&self, order: usize) -> Result<()> {
        if self.0.len() < order + 2 {
            return Err(Error::Grid(format!(
                "fit order {order} needs at least {} levels, got {}",
                order + 2,
                self.0.len()
            )));
        }
        let ratio = f64::from(*self.0.last().unwrap()) / f64::from(self.0[0]);
        if ratio < 4.0 {
            return Err(Error::Grid(format!(
                "max/min level ratio {ratio} is below 4"
            )));
        }
        Ok(())
    }
}

/// `(π/k)^d`.
pub fn normalization(k: u32) -> f64 {
    (PI / f64::from(k)).powi(MODEL_DIMENSION)
}

/// Spectral data of the quantized symbol on every level of the grid,
/// computed in parallel.
pub fn spectra(f: &Observable, grid: &KGrid) -> Result<Vec<SpectralData>> {
    grid.levels()
        .par_iter()
        .map(|&k| {
            assemble(Level(k), f)
                .and_then(|t| eigh(&t))
                .map_err(|e| e.at_level(k))
        })
        .collect()
}

/// `a_k = (π/k) ⟨𝒯_{m,k}, χ⟩` from precomputed spectra.
pub fn normalized_pairings(spectra: &[SpectralData], m: &ModelPoint, chi: &TestFunction) -> Vec<f64> {
    spectra
        .iter()
        .map(|s| normalization(s.level().k()) * pair(&local_measure(s, m), chi))
        .collect()
}

pub fn normalized_pairing_sequence(
    f: &Observable,
    chi: &TestFunction,
    m: &ModelPoint,
    grid: &KGrid,
) -> Result<Vec<f64>> {
    Ok(normalized_pairings(&spectra(f, grid)?, m, chi))
}

/// Least-squares fit of `a_k ≈ Σ_{j ≤ J} c_j k^{−j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionFit {
    pub coefficients: Vec<f64>,
    pub grid: Vec<u32>,
    /// `max_k |a_k − Σ c_j k^{−j}|`.
    pub residual: f64,
    /// Condition number of the column-scaled fit matrix (powers of `k_min/k`).
    pub condition: f64,
}

impl ExpansionFit {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, k: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc / k + c)
    }

    /// Residual no larger than ten times the trailing term at `k_min`
    /// (with a round-off floor).
    pub fn is_self_consistent(&self) -> bool {
        let kmin = f64::from(self.grid[0]);
        let trailing = self.coefficients.last().unwrap().abs() * kmin.powi(-(self.order() as i32));
        let floor = 1e-13 * self.coefficients[0].abs().max(1.0);
        self.residual <= 10.0 * trailing + floor
    }
}

pub fn fit_expansion(a: &[f64], grid: &KGrid, order: usize) -> Result<ExpansionFit> {
    grid.validate_for_order(order)?;
    if a.len() != grid.len() {
        return Err(Error::Grid(format!(
            "{} values for {} levels",
            a.len(),
            grid.len()
        )));
    }
    let kmin = f64::from(grid.levels()[0]);
    let rows = grid.len();
    let design = DMatrix::from_fn(rows, order + 1, |r, c| {
        (kmin / f64::from(grid.levels()[r])).powi(c as i32)
    });
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let rhs = DVector::from_column_slice(a);
    let scaled = svd
        .solve(&rhs, 0.0)
        .map_err(|_| Error::IllConditioned { condition })?;
    let coefficients: Vec<f64> = scaled
        .iter()
        .enumerate()
        .map(|(j, d)| d * kmin.powi(j as i32))
        .collect();
    let mut fit = ExpansionFit {
        coefficients,
        grid: grid.levels().to_vec(),
        residual: 0.0,
        condition,
    };
    fit.residual = grid
        .levels()
        .iter()
        .zip(a)
        .map(|(&k, &ak)| (ak - fit.eval(f64::from(k))).abs())
        .fold(0.0, f64::max);
    Ok(fit)
}

/// Value at `h = 0` of the polynomial interpolating `(h_i, y_i)` (Neville).
/// With `h = 1/k` this is Richardson extrapolation on an arbitrary grid.
pub fn extrapolate_to_zero(h: &[f64], y: &[f64]) -> f64 {
    assert_eq!(h.len(), y.len());
    assert!(!h.is_empty());
    let mut p = y.to_vec();
    let n = h.len();
    for level in 1..n {
        for i in 0..n - level {
            let (hi, hj) = (h[i], h[i + level]);
            p[i] = (hj * p[i] - hi * p[i + 1]) / (hj - hi);
        }
    }
    p[0]
}

/// Richardson estimates of `c₀` and `c₁` from `a_k` on the grid.
pub fn richardson_coefficients(a: &[f64], grid: &KGrid) -> (f64, f64) {
    let h: Vec<f64> = grid.levels().iter().map(|&k| 1.0 / f64::from(k)).collect();
    let c0 = extrapolate_to_zero(&h, a);
    // b_k = k (a_k − c₀) → c₁; the first node is dropped to keep the degree
    // matched to the information left after removing c₀.
    let b: Vec<f64> = grid
        .levels()
        .iter()
        .zip(a)
        .map(|(&k, &ak)| f64::from(k) * (ak - c0))
        .collect();
    let c1 = extrapolate_to_zero(&h[1..], &b[1..]);
    (c0, c1)
}

/// `(1 + 1/k) Σ_j C(k,j) p^j (1−p)^{k−j} χ((2j − k)/(k + 2))`: the
/// normalized local pairing of `T_{u₃}` at a point with `|z|²/(1+|z|²) = p`,
/// evaluated straight from the binomial distribution.
pub fn binomial_oracle(k: u32, p: f64, chi: &TestFunction) -> Result<f64> {
    if k == 0 {
        return Err(Error::Grid("binomial oracle needs k ≥ 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Grid(format!("p = {p} is not a probability")));
    }
    let kf = f64::from(k);
    let atom = |j: u32| (2.0 * f64::from(j) - kf) / (kf + 2.0);
    let weights = binomial_pmf(k, p);
    let sum: f64 = weights
        .iter()
        .enumerate()
        .map(|(j, w)| w * chi.value(atom(j as u32)))
        .sum();
    Ok((1.0 + 1.0 / kf) * sum)
}

/// Binomial probabilities, started at the mode in log space and extended
/// outward by the ratio recurrence.
fn binomial_pmf(k: u32, p: f64) -> Vec<f64> {
    let n = k as usize;
    let mut w = vec![0.0; n + 1];
    if p == 0.0 {
        w[0] = 1.0;
        return w;
    }
    if p == 1.0 {
        w[n] = 1.0;
        return w;
    }
    let q = 1.0 - p;
    let mode = (((f64::from(k) + 1.0) * p).floor() as usize).min(n);
    let small = mode.min(n - mode);
    let ln_c: f64 = (1..=small)
        .map(|i| ((n - small + i) as f64 / i as f64).ln())
        .sum();
    w[mode] = (ln_c + mode as f64 * p.ln() + (n - mode) as f64 * q.ln()).exp();
    let odds = p / q;
    for j in mode..n {
        w[j + 1] = w[j] * ((n - j) as f64 / (j + 1) as f64) * odds;
    }
    for j in (0..mode).rev() {
        w[j] = w[j + 1] * ((j + 1) as f64 / (n - j) as f64) / odds;
    }
    w
}

/// First-order coefficient predicted for the `u₃` binomial model:
/// `χ(f) − 2 f χ′(f) + (1 − f²)/2 · χ″(f)`.
///
/// The mean of the atom `(2J − k)/(k + 2)`, `J ~ Bin(k, p)`, is
/// `f (1 − 2/k) + O(k⁻²)` with `f = 2p − 1`, its variance is `(1 − f²)/k +
/// O(k⁻²)`, and the normalization contributes `χ(f)/k`.
pub fn edgeworth_c1(chi: &TestFunction, fval: f64) -> Result<f64> {
    Ok(chi.eval(fval, 0)? - 2.0 * fval * chi.eval(fval, 1)?
        + 0.5 * (1.0 - fval * fval) * chi.eval(fval, 2)?)
}

/// Global normalized pairings and their limit `∫_M χ(f) dμ_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SzegoCheck {
    pub grid: Vec<u32>,
    pub values: Vec<f64>,
    pub target: f64,
}

impl SzegoCheck {
    pub fn errors(&self) -> Vec<f64> {
        self.values.iter().map(|v| (v - self.target).abs()).collect()
    }

    /// `error(k_{i+1}) / error(k_i)` for consecutive levels.
    pub fn ratios(&self) -> Vec<f64> {
        self.errors().windows(2).map(|e| e[1] / e[0]).collect()
    }
}

/// `∫_M χ(f) dμ_M`. Symbols depending on `u₃` alone reduce to
/// `(π/2) ∫_{−1}^{1} χ(g(s)) ds`; everything else uses the sphere rule.
pub fn szego_target(f: &Observable, chi: &TestFunction) -> f64 {
    const ORDER: usize = 200;
    if let SymbolClass::LinearU { a, b } = f.class() {
        // a·u is distributed like ‖a‖ u₃ under the rotation-invariant measure.
        let norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        let (x, w) = crate::quadrature::gauss_legendre(ORDER);
        return 0.5 * PI
            * x.iter()
                .zip(&w)
                .map(|(&s, &ws)| ws * chi.value(b + norm * s))
                .sum::<f64>();
    }
    integrate_sphere(ORDER, 2 * ORDER, |m| chi.value(f.eval(m)))
}

pub fn szego_limit_check(f: &Observable, chi: &TestFunction, grid: &KGrid) -> Result<SzegoCheck> {
    let spectra = spectra(f, grid)?;
    Ok(szego_from_spectra(f, chi, &spectra))
}

pub fn szego_from_spectra(f: &Observable, chi: &TestFunction, spectra: &[SpectralData]) -> SzegoCheck {
    let values = spectra
        .iter()
        .map(|s| normalization(s.level().k()) * pair(&global_measure(s), chi))
        .collect();
    SzegoCheck {
        grid: spectra.iter().map(|s| s.level().k()).collect(),
        values,
        target: szego_target(f, chi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn grid_validation() {
        assert!(KGrid::new(vec![]).is_err());
        assert!(KGrid::new(vec![0, 4]).is_err());
        assert!(KGrid::new(vec![4, 4]).is_err());
        let g = KGrid::new(vec![10, 20, 30]).unwrap();
        assert!(matches!(fit_expansion(&[1.0; 3], &g, 2), Err(Error::Grid(_))));
        assert!(matches!(fit_expansion(&[1.0; 3], &g, 1), Err(Error::Grid(_))));
        assert_eq!(KGrid::doubling(128, 3).unwrap().levels(), &[128, 256, 512]);
    }

    #[test]
    fn exact_model_is_recovered() {
        let g = KGrid::default_fit();
        let a: Vec<f64> = g.levels().iter().map(|&k| 2.0 + 3.0 / f64::from(k)).collect();
        let fit = fit_expansion(&a, &g, 2).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-10);
        assert!(fit.residual < 1e-13);
        assert!(fit.is_self_consistent());
        let (c0, c1) = richardson_coefficients(&a, &g);
        assert!((c0 - 2.0).abs() < 1e-10 && (c1 - 3.0).abs() < 1e-8);
    }

    #[test]
    fn extrapolation_kills_polynomial_terms() {
        let h = [0.5, 0.25, 0.125, 0.0625];
        let y: Vec<f64> = h.iter().map(|x| 1.0 - 2.0 * x + 5.0 * x * x * x).collect();
        assert!((extrapolate_to_zero(&h, &y) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_symbol_sequence_is_exact() {
        let g = KGrid::new(vec![4, 8, 16, 32]).unwrap();
        let chi = TestFunction::gaussian(0.0, 1.0);
        let a = normalized_pairing_sequence(
            &Observable::constant(0.4),
            &chi,
            &ModelPoint::south(Complex64::new(0.3, 0.9)),
            &g,
        )
        .unwrap();
        for (ak, &k) in a.iter().zip(g.levels()) {
            let exact = (1.0 + 1.0 / f64::from(k)) * chi.value(0.4);
            assert!((ak - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn u3_south_pole_sequence() {
        let g = KGrid::new(vec![3, 9, 27]).unwrap();
        let chi = TestFunction::gaussian(0.2, 0.5);
        let a = normalized_pairing_sequence(&Observable::u3(), &chi, &ModelPoint::south_pole(), &g)
            .unwrap();
        for (ak, &k) in a.iter().zip(g.levels()) {
            let kf = f64::from(k);
            let exact = (1.0 + 1.0 / kf) * chi.value(-kf / (kf + 2.0));
            assert!((ak - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn odd_test_function_on_the_equator() {
        let g = KGrid::new(vec![5, 10, 20]).unwrap();
        let chi = TestFunction::gaussian_hermite(0.0, 1.0, vec![0.0, 1.0]);
        let m = ModelPoint::south(Complex64::new(0.6, 0.8));
        let a = normalized_pairing_sequence(&Observable::u3(), &chi, &m, &g).unwrap();
        assert!(a.iter().all(|x| x.abs() < 1e-14));
        assert!(binomial_oracle(9, 0.5, &chi).unwrap().abs() < 1e-15);
    }

    #[test]
    fn binomial_oracle_examples() {
        let chi = TestFunction::gaussian(0.3, 0.4);
        assert_eq!(binomial_oracle(2, 0.0, &chi).unwrap(), 1.5 * chi.value(-0.5));
        assert!(binomial_oracle(0, 0.5, &chi).is_err());
        let pmf = binomial_pmf(10, 0.3);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let direct = 120.0 * 0.3f64.powi(3) * 0.7f64.powi(7);
        assert!((pmf[3] - direct).abs() < 1e-14 * direct);
    }

    #[test]
    fn oracle_matches_pipeline() {
        let chi = TestFunction::gaussian(0.5, 0.7);
        let g = KGrid::new(vec![2, 7, 33]).unwrap();
        for m in [
            ModelPoint::south(Complex64::new(0.2, -0.1)),
            ModelPoint::north(Complex64::new(0.5, 0.5)),
        ] {
            let a = normalized_pairing_sequence(&Observable::u3(), &chi, &m, &g).unwrap();
            for (ak, &k) in a.iter().zip(g.levels()) {
                let o = binomial_oracle(k, m.binomial_p().0, &chi).unwrap();
                assert!((ak - o).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn edgeworth_examples() {
        let g = TestFunction::gaussian(0.0, 1.0);
        assert!((edgeworth_c1(&g, 0.0).unwrap() - 0.5).abs() < 1e-15);
        let id = TestFunction::polynomial(vec![0.0, 1.0]);
        assert!((edgeworth_c1(&id, 0.37).unwrap() + 0.37).abs() < 1e-15);
        // At f = ±1 the second-derivative term drops out.
        let chi = TestFunction::gaussian(0.2, 0.6);
        let at_one = chi.value(1.0) - 2.0 * chi.eval(1.0, 1).unwrap();
        assert!((edgeworth_c1(&chi, 1.0).unwrap() - at_one).abs() < 1e-15);
    }

    #[test]
    fn szego_target_examples() {
        let chi = TestFunction::gaussian(0.0, 1.0 / 2f64.sqrt());
        let t = szego_target(&Observable::u3(), &chi);
        assert!((t - 2.34622).abs() < 1e-5, "{t}");
        let c = TestFunction::gaussian(0.1, 0.3);
        let t = szego_target(&Observable::constant(0.25), &c);
        assert!((t - PI * c.value(0.25)).abs() < 1e-13);
        // The sphere rule agrees with the reduced integral.
        let general = Observable::general("u3", |m| m.sphere_coords()[2]);
        assert!((szego_target(&general, &chi) - szego_target(&Observable::u3(), &chi)).abs() < 1e-12);
    }

    #[test]
    fn szego_constant_rate() {
        let c = TestFunction::gaussian(0.0, 1.0);
        let g = KGrid::new(vec![8, 16, 32]).unwrap();
        let s = szego_limit_check(&Observable::constant(0.5), &c, &g).unwrap();
        for (v, &k) in s.values.iter().zip(&s.grid) {
            let kf = f64::from(k);
            assert!((v - PI / kf * (kf + 1.0) * c.value(0.5)).abs() < 1e-13);
        }
        for r in s.ratios() {
            assert!((r - 0.5).abs() < 1e-10);
        }
    }
}
