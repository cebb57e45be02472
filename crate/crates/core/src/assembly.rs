//! Level-k Berezin–Toeplitz matrices `(T_k)_{ij} = ⟨f ŝ_j, ŝ_i⟩` in the
//! orthonormal monomial basis.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::cp1::{binomial, Level, ModelPoint};
use crate::error::{Error, Result};
use crate::observables::{Monomial, Observable, SymbolClass};
use crate::quadrature::{ln_factorials, QuadratureScheme, DEFAULT_BANDWIDTH};

/// How a matrix was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    ClosedForm,
    Quadrature {
        radial: usize,
        angular: usize,
        /// Largest `|H_ij − conj(H_ji)|` before Hermitization.
        asymmetry: f64,
        /// Set when the scheme is not known to be exact for the symbol.
        warning: Option<String>,
    },
}

impl Provenance {
    /// Short tag used in reports and cache keys.
    pub fn tag(&self) -> String {
        match self {
            Provenance::ClosedForm => "closed-form".to_string(),
            Provenance::Quadrature {
                radial, angular, ..
            } => format!("quadrature(radial={radial},angular={angular})"),
        }
    }
}

/// A Hermitian `(k+1) × (k+1)` matrix at level `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    level: Level,
    entries: DMatrix<Complex64>,
    provenance: Provenance,
}

impl HermitianMatrix {
    /// Wraps `entries`, Hermitizing them.
    pub fn new(level: Level, entries: DMatrix<Complex64>, provenance: Provenance) -> Self {
        assert_eq!(entries.nrows(), level.dim());
        assert_eq!(entries.ncols(), level.dim());
        let entries = (&entries + entries.adjoint()) * Complex64::new(0.5, 0.0);
        HermitianMatrix {
            level,
            entries,
            provenance,
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise distance to another matrix of the same size.
    pub fn max_diff(&self, other: &HermitianMatrix) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `α A + β B`.
    pub fn combine(alpha: f64, a: &HermitianMatrix, beta: f64, b: &HermitianMatrix) -> Self {
        let e = a.entries.map(|z| z * alpha) + b.entries.map(|z| z * beta);
        HermitianMatrix {
            level: a.level,
            entries: e,
            provenance: a.provenance.clone(),
        }
    }

    /// Ordinary matrix product, Hermitized.
    pub fn product(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix::new(
            self.level,
            &self.entries * &other.entries,
            self.provenance.clone(),
        )
    }
}

fn check_finite(k: u32, m: &DMatrix<Complex64>) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Assembly {
            k,
            reason: "non-finite entry".into(),
        })
    }
}

/// Exact Toeplitz matrix for linear and polynomial symbols.
pub fn assemble_closed(k: Level, f: &Observable) -> Result<HermitianMatrix> {
    let entries = match f.class() {
        SymbolClass::LinearU { a, b } => linear_band(k, *a, *b),
        SymbolClass::PolynomialU(terms) => polynomial_entries(k, terms),
        SymbolClass::General(_) => return Err(Error::UnsupportedClass(f.label().to_string())),
    };
    check_finite(k.k(), &entries)?;
    Ok(HermitianMatrix::new(k, entries, Provenance::ClosedForm))
}

/// `a·u + b`: `u₃` is diagonal with entries `(2j − k)/(k + 2)`; `u₁ ∓ i u₂`
/// raise/lower `j` with amplitude `√((j+1)(k−j))/(k+2)`.
fn linear_band(k: Level, a: [f64; 3], b: f64) -> DMatrix<Complex64> {
    let n = k.dim();
    let kf = f64::from(k.k());
    let d = kf + 2.0;
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for j in 0..n {
        m[(j, j)] = Complex64::new(a[2] * (2.0 * j as f64 - kf) / d + b, 0.0);
        if j + 1 < n {
            let s = ((j as f64 + 1.0) * (kf - j as f64)).sqrt() / d;
            let lower = Complex64::new(a[0], -a[1]) * s;
            m[(j + 1, j)] = lower;
            m[(j, j + 1)] = lower.conj();
        }
    }
    m
}

/// Expansion of `u₁^a u₂^b u₃^c (1+t)^{a+b+c}` as `Σ coef z^p z̄^q t^r`.
fn monomial_terms(m: &Monomial) -> Vec<(Complex64, u32, u32, u32)> {
    let [a, b, c] = m.powers;
    // (−i)^b
    let ib = match b % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    };
    let mut out = Vec::new();
    for alpha in 0..=a {
        for beta in 0..=b {
            let sign_b = if (b - beta) % 2 == 0 { 1.0 } else { -1.0 };
            let zc = binomial(a, alpha) * binomial(b, beta) * sign_b;
            let p = alpha + beta;
            let q = a + b - p;
            for r in 0..=c {
                let sign_c = if (c - r) % 2 == 0 { 1.0 } else { -1.0 };
                let coef = ib * (m.coef * zc * binomial(c, r) * sign_c);
                out.push((coef, p, q, r));
            }
        }
    }
    out
}

fn polynomial_entries(k: Level, terms: &[Monomial]) -> DMatrix<Complex64> {
    let n = k.dim();
    let kk = k.k() as usize;
    let max_deg = terms.iter().map(|t| t.degree() as usize).max().unwrap_or(0);
    let lnf = ln_factorials(kk + max_deg + 2);
    let expanded: Vec<(usize, Vec<(Complex64, u32, u32, u32)>)> = terms
        .iter()
        .map(|t| (t.degree() as usize, monomial_terms(t)))
        .collect();
    let half_norm = |i: usize| 0.5 * (lnf[i] + lnf[kk - i]);
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (deg, parts) in &expanded {
                for &(coef, p, q, r) in parts {
                    // z^{p+j} z̄^{q+i} integrates to zero unless the powers match.
                    if p as usize + j != q as usize + i {
                        continue;
                    }
                    let s = p as usize + j + r as usize;
                    // π (s)!(k+deg−s)!/(k+1+deg)! divided by √(n_i n_j)
                    let ln = lnf[s] + lnf[kk + deg - s] - lnf[kk + 1 + deg] + lnf[kk + 1]
                        - half_norm(i)
                        - half_norm(j);
                    acc += coef * ln.exp();
                }
            }
            m[(i, j)] = acc;
        }
    }
    m
}

/// Toeplitz matrix by quadrature: the azimuthal integral isolates the
/// `j − i` Fourier mode of `f`, then the radial integral runs over
/// `u = t/(1+t)`.
pub fn assemble_quadrature(
    k: Level,
    f: &Observable,
    q: &QuadratureScheme,
) -> Result<HermitianMatrix> {
    let n = k.dim();
    let kk = k.k() as usize;
    let angular = q.angular_nodes();
    let warning = match (f.bandwidth(), f.monomials()) {
        (Some(bw), Some(terms)) => {
            let deg = terms.iter().map(|t| t.degree()).max().unwrap_or(0);
            (!q.is_exact_for(k.k(), deg, bw)).then(|| {
                format!(
                    "scheme (radial {}, angular {angular}) not exact for degree {deg}, bandwidth {bw}",
                    q.radial_order()
                )
            })
        }
        _ => Some("symbol has no known bandwidth; quadrature is approximate".to_string()),
    };

    let radial: Vec<(f64, f64)> = q.radial().collect();
    let dphi = 2.0 * PI / angular as f64;
    let twiddle: Vec<Complex64> = (0..angular)
        .map(|a| Complex64::from_polar(1.0, a as f64 * dphi))
        .collect();
    // modes[r][d + k] = (1/M) Σ_a f(ρ_r e^{iφ_a}) e^{i d φ_a}, d ∈ [−k, k]
    let modes: Vec<Vec<Complex64>> = radial
        .par_iter()
        .map(|&(u, _)| {
            let rho = (u / (1.0 - u)).sqrt();
            let values: Vec<f64> = twiddle
                .iter()
                .map(|e| f.eval(&ModelPoint::south(*e * rho)))
                .collect();
            (0..2 * n - 1)
                .map(|dd| {
                    let d = dd as i64 - kk as i64;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (a, v) in values.iter().enumerate() {
                        let idx = (d * a as i64).rem_euclid(angular as i64) as usize;
                        acc += twiddle[idx] * *v;
                    }
                    acc / angular as f64
                })
                .collect()
        })
        .collect();

    let lnf = ln_factorials(kk + 1);
    let logs: Vec<(f64, f64)> = radial.iter().map(|&(u, _)| (u.ln(), (-u).ln_1p())).collect();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let half = 0.5 * (i + j) as f64;
                    let norm = lnf[kk + 1] - 0.5 * (lnf[i] + lnf[kk - i] + lnf[j] + lnf[kk - j]);
                    let d = j + kk - i;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (r, &(_, w)) in radial.iter().enumerate() {
                        let (lu, l1u) = logs[r];
                        let radial_factor = (half * lu + (kk as f64 - half) * l1u + norm).exp();
                        acc += modes[r][d] * (w * radial_factor);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let raw = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    check_finite(k.k(), &raw)?;
    let asymmetry = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (raw[(i, j)] - raw[(j, i)].conj()).norm())
        .fold(0.0, f64::max);
    Ok(HermitianMatrix::new(
        k,
        raw,
        Provenance::Quadrature {
            radial: q.radial_order(),
            angular,
            asymmetry,
            warning,
        },
    ))
}

/// Closed form when the symbol class allows it, default quadrature otherwise.
pub fn assemble(k: Level, f: &Observable) -> Result<HermitianMatrix> {
    match f.class() {
        SymbolClass::General(_) => assemble_quadrature(
            k,
            f,
            &QuadratureScheme::for_level(k.k(), f.bandwidth().unwrap_or(DEFAULT_BANDWIDTH)),
        ),
        _ => assemble_closed(k, f),
    }
}

/// `T + c·I`.
pub fn shift_operator(t: &HermitianMatrix, c: f64) -> HermitianMatrix {
    let mut e = t.entries.clone();
    for i in 0..e.nrows() {
        e[(i, i)] += c;
    }
    HermitianMatrix {
        level: t.level,
        entries: e,
        provenance: t.provenance.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(m: &HermitianMatrix) -> Vec<f64> {
        (0..m.dim()).map(|i| m.entries()[(i, i)].re).collect()
    }

    #[test]
    fn closed_u3_is_diagonal() {
        let t = assemble_closed(Level(2), &Observable::u3()).unwrap();
        assert_eq!(diag(&t), vec![-0.5, 0.0, 0.5]);
        assert_eq!(t.entries()[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn closed_u1_is_tridiagonal() {
        let t = assemble_closed(Level(2), &Observable::u1()).unwrap();
        let e = t.entries();
        let s = 2f64.sqrt() / 4.0;
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert_relative_eq!(e[(i, j)].re, s, epsilon = 1e-16);
            assert_eq!(e[(i, j)].im, 0.0);
        }
        assert_eq!(e[(0, 2)].norm(), 0.0);
        assert_eq!(diag(&t), vec![0.0; 3]);
    }

    #[test]
    fn closed_u2_band_is_imaginary() {
        let t = assemble_closed(Level(3), &Observable::u2()).unwrap();
        let e = t.entries();
        let s = (3.0f64).sqrt() / 5.0;
        assert_relative_eq!(e[(1, 0)].im, -s, epsilon = 1e-16);
        assert_relative_eq!(e[(0, 1)].im, s, epsilon = 1e-16);
        assert_eq!(e[(1, 0)].re, 0.0);
    }

    #[test]
    fn closed_constant_is_scaled_identity() {
        let t = assemble_closed(Level(7), &Observable::constant(1.5)).unwrap();
        let id = DMatrix::<Complex64>::identity(8, 8) * Complex64::new(1.5, 0.0);
        assert_eq!(t.entries(), &id);
    }

    #[test]
    fn closed_u3_squared() {
        let f: Observable = "poly:1@0,0,2".parse().unwrap();
        let t = assemble_closed(Level(2), &f).unwrap();
        let d = diag(&t);
        assert_relative_eq!(d[1], 0.2, epsilon = 1e-15);
        // ((j+1)(j+2) − 2(j+1)(k+1−j) + (k+1−j)(k+2−j))/((k+2)(k+3))
        for k in [2u32, 5, 16] {
            let t = assemble_closed(Level(k), &f).unwrap();
            for (j, v) in diag(&t).iter().enumerate() {
                let (jf, kf) = (j as f64, f64::from(k));
                let exact = ((jf + 1.0) * (jf + 2.0) - 2.0 * (jf + 1.0) * (kf + 1.0 - jf)
                    + (kf + 1.0 - jf) * (kf + 2.0 - jf))
                    / ((kf + 2.0) * (kf + 3.0));
                assert_relative_eq!(*v, exact, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn polynomial_path_matches_band_for_linear_symbols() {
        let lin = Observable::linear([0.5, -0.3, -0.2], 0.3);
        let poly = Observable::polynomial(lin.monomials().unwrap());
        for k in [0u32, 1, 6, 40] {
            let a = assemble_closed(Level(k), &lin).unwrap();
            let b = assemble_closed(Level(k), &poly).unwrap();
            assert!(a.max_diff(&b) < 1e-13, "k {k}: {}", a.max_diff(&b));
        }
    }

    #[test]
    fn general_class_has_no_closed_form() {
        let f = Observable::general("g", |_| 1.0);
        assert!(matches!(
            assemble_closed(Level(3), &f),
            Err(Error::UnsupportedClass(_))
        ));
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let k = Level(8);
        for f in [
            Observable::u1(),
            Observable::u2(),
            Observable::u3(),
            Observable::linear([0.5, 0.0, -0.2], 0.3),
            "poly:1@0,0,2".parse().unwrap(),
            "poly:1@1,1,0;-2@0,2,1".parse().unwrap(),
        ] {
            let q = QuadratureScheme::for_level(k.k(), f.bandwidth().unwrap());
            let a = assemble_quadrature(k, &f, &q).unwrap();
            let b = assemble_closed(k, &f).unwrap();
            assert!(a.max_diff(&b) < 1e-10, "{}: {}", f.label(), a.max_diff(&b));
            match a.provenance() {
                Provenance::Quadrature { warning, asymmetry, .. } => {
                    assert!(warning.is_none());
                    assert!(*asymmetry < 1e-12);
                }
                _ => panic!("wrong provenance"),
            }
        }
        let one = assemble_quadrature(k, &Observable::constant(1.0), &QuadratureScheme::for_level(8, 0))
            .unwrap();
        let id = HermitianMatrix::new(k, DMatrix::identity(9, 9), Provenance::ClosedForm);
        assert!(one.max_diff(&id) < 1e-12);
    }

    #[test]
    fn coarse_scheme_records_warning() {
        let q = QuadratureScheme::new(3, 5);
        let t = assemble_quadrature(Level(10), &Observable::u1(), &q).unwrap();
        assert!(matches!(
            t.provenance(),
            Provenance::Quadrature { warning: Some(_), .. }
        ));
    }

    #[test]
    fn non_finite_symbol_is_an_assembly_error() {
        let f = Observable::general("nan", |_| f64::NAN);
        assert!(matches!(
            assemble_quadrature(Level(2), &f, &QuadratureScheme::for_level(2, 1)),
            Err(Error::Assembly { k: 2, .. })
        ));
    }

    #[test]
    fn shift_examples() {
        let t = assemble_closed(Level(2), &Observable::u3()).unwrap();
        assert_eq!(diag(&shift_operator(&t, 1.0)), vec![0.5, 1.0, 1.5]);
        assert_eq!(shift_operator(&t, 0.0), t);
    }

    #[test]
    fn quantization_is_not_multiplicative() {
        let t = assemble_closed(Level(2), &Observable::u3()).unwrap();
        let sq = assemble_closed(Level(2), &"poly:1@0,0,2".parse().unwrap()).unwrap();
        let prod = t.product(&t);
        assert_relative_eq!(sq.entries()[(1, 1)].re, 0.2, epsilon = 1e-15);
        assert_eq!(prod.entries()[(1, 1)].re, 0.0);
    }

    #[test]
    fn linearity_of_assembly() {
        let f = Observable::linear([0.2, -0.4, 0.9], 0.1);
        let g = Observable::linear([-1.0, 0.3, 0.0], -0.5);
        let (alpha, beta) = (0.7, -1.3);
        for k in [3u32, 17, 64] {
            let lhs = assemble_closed(Level(k), &Observable::combine(alpha, &f, beta, &g).unwrap())
                .unwrap();
            let rhs = HermitianMatrix::combine(
                alpha,
                &assemble_closed(Level(k), &f).unwrap(),
                beta,
                &assemble_closed(Level(k), &g).unwrap(),
            );
            assert!(lhs.max_diff(&rhs) < 1e-11);
        }
    }
}
