//! Spectral data of Toeplitz matrices and the atomic measures built from it:
//! the local measure `Σ_j |e_{kj}(m)|² δ_{λ_kj}` and the global measure
//! `Σ_j δ_{λ_kj}`.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::assembly::{shift_operator, HermitianMatrix};
use crate::cp1::{BasisTable, Level, ModelPoint};
use crate::eigen::{self, hermitian_eigen};
use crate::error::{Error, Result};
use crate::observables::TestFunction;

/// Eigenvalues (ascending) and eigenvector coordinates in the orthonormal
/// monomial basis at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    level: Level,
    values: Vec<f64>,
    vectors: DMatrix<Complex64>,
}

impl SpectralData {
    pub fn from_parts(level: Level, values: Vec<f64>, vectors: DMatrix<Complex64>) -> Self {
        assert_eq!(values.len(), level.dim());
        assert_eq!(vectors.nrows(), level.dim());
        assert_eq!(vectors.ncols(), level.dim());
        SpectralData {
            level,
            values,
            vectors,
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    /// `max_j ‖T v_j − λ_j v_j‖₂` against the matrix the data came from.
    pub fn residual(&self, t: &HermitianMatrix) -> f64 {
        eigen::residual(
            t.entries(),
            &eigen::Eigen {
                values: self.values.clone(),
                vectors: self.vectors.clone(),
            },
        )
    }

    pub fn orthonormality_defect(&self) -> f64 {
        eigen::orthonormality_defect(&self.vectors)
    }

    /// Index ranges of clusters of eigenvalues closer than `tol`.
    pub fn degenerate_blocks(&self, tol: f64) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.values.len() {
            if i == self.values.len() || self.values[i] - self.values[i - 1] > tol {
                if i - start > 1 {
                    out.push(start..i);
                }
                start = i;
            }
        }
        out
    }

    /// Replaces the eigenvectors in `block` by `V_block · U` for a unitary `U`.
    pub fn rotated(&self, block: Range<usize>, u: &DMatrix<Complex64>) -> SpectralData {
        assert_eq!(u.nrows(), block.len());
        let cols = self.vectors.columns(block.start, block.len()) * u;
        let mut vectors = self.vectors.clone();
        vectors
            .columns_mut(block.start, block.len())
            .copy_from(&cols);
        SpectralData {
            level: self.level,
            values: self.values.clone(),
            vectors,
        }
    }
}

/// Hermitian eigendecomposition of a Toeplitz matrix.
pub fn eigh(t: &HermitianMatrix) -> Result<SpectralData> {
    let e = hermitian_eigen(t.entries())?;
    Ok(SpectralData {
        level: t.level(),
        values: e.values,
        vectors: e.vectors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureKind {
    Local(ModelPoint),
    Global,
}

/// Finite atomic measure on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMeasure {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: MeasureKind,
}

impl PointMeasure {
    pub fn empty(kind: MeasureKind) -> Self {
        PointMeasure {
            atoms: Vec::new(),
            weights: Vec::new(),
            kind,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Weights `|Σ_i V_ij ŝ_{k,i}(m)|²` of the eigenfunctions at `m`.
pub fn local_weights(s: &SpectralData, basis: &BasisTable, m: &ModelPoint) -> Vec<f64> {
    let sv = basis.section_values(m);
    let n = sv.len();
    (0..n)
        .map(|j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, x) in sv.iter().enumerate() {
                acc += s.vectors[(i, j)] * x;
            }
            acc.norm_sqr()
        })
        .collect()
}

pub fn local_measure(s: &SpectralData, m: &ModelPoint) -> PointMeasure {
    let basis = BasisTable::new(s.level);
    PointMeasure {
        atoms: s.values.clone(),
        weights: local_weights(s, &basis, m),
        kind: MeasureKind::Local(*m),
    }
}

pub fn global_measure(s: &SpectralData) -> PointMeasure {
    PointMeasure {
        atoms: s.values.clone(),
        weights: vec![1.0; s.values.len()],
        kind: MeasureKind::Global,
    }
}

/// `⟨μ, χ⟩ = Σ_j w_j χ(a_j)`.
pub fn pair(mu: &PointMeasure, chi: &TestFunction) -> f64 {
    mu.atoms
        .iter()
        .zip(&mu.weights)
        .map(|(&a, &w)| w * chi.value(a))
        .sum()
}

/// Pairings on both sides of the shift identity
/// `⟨𝒯_{m,k}(T), χ⟩ = ⟨𝒯_{m,k}(T + c), χ(· − c)⟩`.
/// Returns `(shifted side, original side)`.
pub fn pair_shifted(
    t: &HermitianMatrix,
    c: f64,
    m: &ModelPoint,
    chi: &TestFunction,
) -> Result<(f64, f64)> {
    let shifted = eigh(&shift_operator(t, c))?;
    let original = eigh(t)?;
    Ok((
        pair(&local_measure(&shifted, m), &chi.shifted(c)),
        pair(&local_measure(&original, m), chi),
    ))
}

/// Trapezoid grid for the Fourier pairing, sized from the Gaussian
/// envelope of `χ̂` and the spread of the atoms. Returns `(step, half-width)`
/// in the unscaled frequency variable.
fn fourier_grid(chi: &TestFunction, atoms: &[f64]) -> (f64, f64) {
    let lo = atoms.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = atoms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Smallest ρ ≥ 1 with envelope(ρ) below the floor.
    let reach = |envelope: &dyn Fn(f64) -> f64, floor: f64| {
        let mut rho = 1.0;
        while envelope(rho) >= floor {
            rho += 0.25;
        }
        rho
    };
    let mut period: f64 = 0.0;
    let mut window: f64 = 0.0;
    for (center, width, poly) in chi.gaussian_parts() {
        // |χ(a + σρ)| ≤ Σ|c_n| (σρ)^n e^{−ρ²/2}
        let space = |rho: f64| {
            poly.iter()
                .enumerate()
                .map(|(n, c)| c * (width * rho).powi(n as i32))
                .sum::<f64>()
                * (-0.5 * rho * rho).exp()
        };
        // |χ̂(y/σ)| ≤ Σ|c_n| σ^{n+1} (|y| + n)^n e^{−y²/2}
        let freq = |y: f64| {
            poly.iter()
                .enumerate()
                .map(|(n, c)| c * width.powi(n as i32 + 1) * (y + n as f64).powi(n as i32))
                .sum::<f64>()
                * (-0.5 * y * y).exp()
        };
        let spread = (hi - center).abs().max((lo - center).abs());
        // Aliased copies of the atoms sit 2π/h apart; χ must be negligible
        // there.
        period = period.max(spread + width * reach(&space, 1e-17));
        window = window.max(reach(&freq, 1e-16) / width);
    }
    (2.0 * PI / period, window)
}

/// The local pairing computed through the wave group:
/// `(2π)^{−1/2} ∫ Σ_j w_j e^{ikλ_j τ} χ̂_k(τ) dτ` with `χ_k(s) = χ(s/k)`,
/// on a trapezoid grid fixed in advance from the Gaussian envelope.
pub fn pair_via_fourier(s: &SpectralData, m: &ModelPoint, chi: &TestFunction) -> Result<f64> {
    if !chi.has_fourier() {
        return Err(Error::NoFourierTransform);
    }
    let mu = local_measure(s, m);
    fourier_pairing(&mu, s.level.k().max(1) as f64, chi)
}

/// Fourier-side pairing of an arbitrary atomic measure at frequency
/// scale `k`.
pub fn fourier_pairing(mu: &PointMeasure, k: f64, chi: &TestFunction) -> Result<f64> {
    if mu.atoms.is_empty() {
        return Ok(0.0);
    }
    let (h, window) = fourier_grid(chi, &mu.atoms);
    // scaled variable τ_k = τ/k, χ̂_k(τ_k) = k χ̂(k τ_k)
    let hk = h / k;
    let nodes = (window / h).ceil() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for n in -nodes..=nodes {
        let tau = n as f64 * hk;
        let chat = chi.fourier(k * tau)? * k;
        let wave: Complex64 = mu
            .atoms
            .iter()
            .zip(&mu.weights)
            .map(|(&a, &w)| Complex64::from_polar(w, k * a * tau))
            .sum();
        acc += wave * chat;
    }
    Ok((acc * hk / (2.0 * PI).sqrt()).re)
}

/// Spectrum of `T′`, whose eigenvalues are `k λ_kj` with the same
/// eigenvectors.
pub fn scale_to_prime(s: &SpectralData) -> SpectralData {
    let k = f64::from(s.level.k());
    SpectralData {
        level: s.level,
        values: s.values.iter().map(|v| v * k).collect(),
        vectors: s.vectors.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_closed;
    use crate::observables::Observable;
    use crate::quadrature::integrate_sphere;
    use approx::assert_relative_eq;

    fn spec(f: &Observable, k: u32) -> (HermitianMatrix, SpectralData) {
        let t = assemble_closed(Level(k), f).unwrap();
        let s = eigh(&t).unwrap();
        (t, s)
    }

    #[test]
    fn eigh_examples() {
        let (t, s) = spec(&Observable::u3(), 2);
        assert_eq!(s.values(), &[-0.5, 0.0, 0.5]);
        assert!(s.residual(&t) < 1e-15);
        let (_, s) = spec(&Observable::constant(0.25), 6);
        assert_eq!(s.values(), &[0.25; 7]);
        let (t, s) = spec(&Observable::u1(), 2);
        for (v, e) in s.values().iter().zip([-0.5, 0.0, 0.5]) {
            assert!((v - e).abs() < 1e-15);
        }
        assert!(s.residual(&t) < 1e-14);
        assert!(s.orthonormality_defect() < 1e-14);
    }

    #[test]
    fn local_measure_examples() {
        let (_, s) = spec(&Observable::u3(), 2);
        let mu = local_measure(&s, &ModelPoint::south_pole());
        assert_eq!(mu.atoms, vec![-0.5, 0.0, 0.5]);
        assert_relative_eq!(mu.weights[0], 3.0 / PI, epsilon = 1e-15);
        assert_eq!(&mu.weights[1..], &[0.0, 0.0]);

        let m = ModelPoint::south(Complex64::new(0.7, 0.2));
        let (_, s) = spec(&Observable::constant(-0.4), 9);
        let mu = local_measure(&s, &m);
        assert!(mu.atoms.iter().all(|&a| a == -0.4));
        assert_relative_eq!(mu.total_mass(), 10.0 / PI, epsilon = 1e-13);
    }

    #[test]
    fn local_mass_is_bergman_density() {
        let f = Observable::linear([0.5, 0.1, -0.2], 0.3);
        for k in [1u32, 12, 50] {
            let (_, s) = spec(&f, k);
            for m in [
                ModelPoint::south(Complex64::new(0.1, 0.9)),
                ModelPoint::north(Complex64::new(-0.3, 0.3)),
                ModelPoint::north_pole(),
            ] {
                let mass = local_measure(&s, &m).total_mass();
                let b = crate::cp1::bergman_diagonal(Level(k), &m);
                assert!((mass - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn global_measure_examples() {
        let (_, s) = spec(&Observable::u3(), 2);
        let mu = global_measure(&s);
        assert_eq!(mu.atoms, vec![-0.5, 0.0, 0.5]);
        assert_eq!(mu.weights, vec![1.0; 3]);
        let (_, s) = spec(&Observable::u1(), 17);
        assert_eq!(global_measure(&s).total_mass(), 18.0);
    }

    #[test]
    fn integrating_local_measures_gives_global() {
        let (_, s) = spec(&Observable::linear([0.5, 0.0, -0.2], 0.3), 10);
        let basis = BasisTable::new(Level(10));
        let n = s.values().len();
        let mut masses = vec![0.0; n];
        for (j, mass) in masses.iter_mut().enumerate() {
            *mass = integrate_sphere(24, 32, |m| local_weights(&s, &basis, m)[j]);
        }
        for mass in masses {
            assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        }
    }

    #[test]
    fn pair_examples() {
        let chi = TestFunction::gaussian(0.0, 1.0);
        assert_eq!(pair(&PointMeasure::empty(MeasureKind::Global), &chi), 0.0);
        let (_, s) = spec(&Observable::u3(), 2);
        let mu = local_measure(&s, &ModelPoint::south_pole());
        assert_relative_eq!(pair(&mu, &chi), 3.0 / PI * (-0.125f64).exp(), epsilon = 1e-15);
        let id = TestFunction::polynomial(vec![0.0, 1.0]);
        assert_eq!(pair(&global_measure(&s), &id), 0.0);
    }

    #[test]
    fn pair_shifted_examples() {
        let t = assemble_closed(Level(4), &Observable::u3()).unwrap();
        let m = ModelPoint::south(Complex64::new(0.4, 0.4));
        let chi = TestFunction::gaussian(0.1, 0.8);
        let (a, b) = pair_shifted(&t, 2.0, &m, &chi).unwrap();
        assert!((a - b).abs() < 1e-12);
        let (a, b) = pair_shifted(&t, 0.0, &m, &chi).unwrap();
        assert_eq!(a, b);
        // Shifting by c then by −c is the identity.
        let back = shift_operator(&shift_operator(&t, 0.7), -0.7);
        let p1 = pair(&local_measure(&eigh(&back).unwrap(), &m), &chi);
        let p0 = pair(&local_measure(&eigh(&t).unwrap(), &m), &chi);
        assert!((p1 - p0).abs() < 1e-14);
        let twice = chi.shifted(0.7).shifted(-0.7);
        assert!((twice.value(0.3) - chi.value(0.3)).abs() < 1e-15);
    }

    #[test]
    fn fourier_single_atom() {
        for chi in [
            TestFunction::gaussian(0.0, 1.0),
            TestFunction::gaussian(0.5, 0.7),
            TestFunction::gaussian_hermite(-0.2, 1.5, vec![1.0, 0.0, -0.4]),
        ] {
            for (lambda, w, k) in [(0.3, 2.0, 1.0), (-0.9, 0.5, 16.0), (0.0, 1.0, 40.0)] {
                let mu = PointMeasure {
                    atoms: vec![lambda],
                    weights: vec![w],
                    kind: MeasureKind::Global,
                };
                let v = fourier_pairing(&mu, k, &chi).unwrap();
                assert!((v - w * chi.value(lambda)).abs() < 1e-10, "{v}");
            }
        }
    }

    #[test]
    fn fourier_route_matches_direct_pairing() {
        let (_, s) = spec(&Observable::u3(), 8);
        let m = ModelPoint::south_pole();
        for width in [1.0, 2.0] {
            let chi = TestFunction::gaussian(0.0, width);
            let direct = pair(&local_measure(&s, &m), &chi);
            let fourier = pair_via_fourier(&s, &m, &chi).unwrap();
            assert!((direct - fourier).abs() < 1e-6);
        }
        assert_eq!(
            pair_via_fourier(&s, &m, &TestFunction::bump(-1.0, 1.0)),
            Err(Error::NoFourierTransform)
        );
    }

    #[test]
    fn scale_to_prime_examples() {
        let (_, s) = spec(&Observable::u3(), 2);
        assert_eq!(scale_to_prime(&s).values(), &[-1.0, 0.0, 1.0]);
        let (_, s) = spec(&Observable::u1(), 0);
        assert_eq!(scale_to_prime(&s).values(), &[0.0]);

        // ⟨𝒯′, χ⟩ = ⟨𝒯, χ(k ·)⟩
        let (_, s) = spec(&Observable::linear([0.3, 0.2, 0.5], 0.0), 7);
        let m = ModelPoint::south(Complex64::new(0.2, -0.5));
        let chi = TestFunction::gaussian(1.0, 2.0);
        let chi_k = TestFunction::gaussian(1.0 / 7.0, 2.0 / 7.0);
        let lhs = pair(&local_measure(&scale_to_prime(&s), &m), &chi);
        let rhs = pair(&local_measure(&s, &m), &chi_k);
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn degenerate_blocks_and_rotation() {
        let f: Observable = "poly:1@0,0,2".parse().unwrap();
        let (_, s) = spec(&f, 6);
        let blocks = s.degenerate_blocks(1e-10);
        // u₃² pairs j with k − j.
        assert_eq!(blocks.len(), 3);
        let b = blocks[0].clone();
        let c = (0.3f64).cos();
        let sn = Complex64::from_polar((0.3f64).sin(), 0.8);
        let u = DMatrix::from_row_slice(2, 2, &[Complex64::new(c, 0.0), -sn.conj(), sn, Complex64::new(c, 0.0)]);
        let r = s.rotated(b, &u);
        assert!(r.orthonormality_defect() < 1e-14);
    }
}
