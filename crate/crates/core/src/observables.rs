//! Classical symbols on the sphere and test functions on the real line.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::cp1::ModelPoint;
use crate::error::{Error, Result};
use crate::poly;

/// `coef · u₁^p₁ u₂^p₂ u₃^p₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub powers: [u32; 3],
}

impl Monomial {
    pub fn new(coef: f64, powers: [u32; 3]) -> Self {
        Monomial { coef, powers }
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    fn eval(&self, u: &[f64; 3]) -> f64 {
        self.coef
            * u[0].powi(self.powers[0] as i32)
            * u[1].powi(self.powers[1] as i32)
            * u[2].powi(self.powers[2] as i32)
    }
}

pub type SymbolFn = Arc<dyn Fn(&ModelPoint) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum SymbolClass {
    /// `a·u + b`.
    LinearU { a: [f64; 3], b: f64 },
    /// Finite sum of monomials in the sphere coordinates.
    PolynomialU(Vec<Monomial>),
    /// Arbitrary bounded real function; no closed-form quantization.
    General(SymbolFn),
}

impl fmt::Debug for SymbolClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymbolClass::LinearU { a, b } => f
                .debug_struct("LinearU")
                .field("a", a)
                .field("b", b)
                .finish(),
            SymbolClass::PolynomialU(t) => f.debug_tuple("PolynomialU").field(t).finish(),
            SymbolClass::General(_) => f.write_str("General(..)"),
        }
    }
}

/// A real classical symbol `f` on `CP¹`.
#[derive(Debug, Clone)]
pub struct Observable {
    class: SymbolClass,
    label: String,
}

impl Observable {
    pub fn linear(a: [f64; 3], b: f64) -> Self {
        Observable {
            class: SymbolClass::LinearU { a, b },
            label: format!("linear:{},{},{},{}", a[0], a[1], a[2], b),
        }
    }

    pub fn u1() -> Self {
        Observable::linear([1.0, 0.0, 0.0], 0.0).with_label("u1")
    }

    pub fn u2() -> Self {
        Observable::linear([0.0, 1.0, 0.0], 0.0).with_label("u2")
    }

    pub fn u3() -> Self {
        Observable::linear([0.0, 0.0, 1.0], 0.0).with_label("u3")
    }

    pub fn constant(c: f64) -> Self {
        Observable::linear([0.0; 3], c).with_label(&format!("const:{c}"))
    }

    pub fn polynomial(terms: Vec<Monomial>) -> Self {
        let label = format!(
            "poly:{}",
            terms
                .iter()
                .map(|t| format!("{}@{},{},{}", t.coef, t.powers[0], t.powers[1], t.powers[2]))
                .collect::<Vec<_>>()
                .join(";")
        );
        Observable {
            class: SymbolClass::PolynomialU(terms),
            label,
        }
    }

    pub fn general(label: &str, f: impl Fn(&ModelPoint) -> f64 + Send + Sync + 'static) -> Self {
        Observable {
            class: SymbolClass::General(Arc::new(f)),
            label: label.to_string(),
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn class(&self) -> &SymbolClass {
        &self.class
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Canonical text form, usable as a cache key. `None` for general
    /// callables, whose behaviour is not captured by their label.
    pub fn descriptor(&self) -> Option<String> {
        match self.class {
            SymbolClass::General(_) => None,
            _ => Some(self.label.clone()),
        }
    }

    pub fn eval(&self, m: &ModelPoint) -> f64 {
        match &self.class {
            SymbolClass::LinearU { a, b } => {
                let u = m.sphere_coords();
                a[0] * u[0] + a[1] * u[1] + a[2] * u[2] + b
            }
            SymbolClass::PolynomialU(terms) => {
                let u = m.sphere_coords();
                terms.iter().map(|t| t.eval(&u)).sum()
            }
            SymbolClass::General(f) => f(m),
        }
    }

    /// Monomial expansion for the exactly integrable classes.
    pub fn monomials(&self) -> Option<Vec<Monomial>> {
        match &self.class {
            SymbolClass::LinearU { a, b } => {
                let mut v = vec![Monomial::new(*b, [0, 0, 0])];
                for (i, &ai) in a.iter().enumerate() {
                    let mut p = [0; 3];
                    p[i] = 1;
                    v.push(Monomial::new(ai, p));
                }
                Some(v)
            }
            SymbolClass::PolynomialU(t) => Some(t.clone()),
            SymbolClass::General(_) => None,
        }
    }

    /// Highest azimuthal Fourier mode of the symbol, when known.
    pub fn bandwidth(&self) -> Option<u32> {
        match &self.class {
            SymbolClass::LinearU { a, .. } => Some(u32::from(a[0] != 0.0 || a[1] != 0.0)),
            SymbolClass::PolynomialU(t) => t
                .iter()
                .filter(|m| m.coef != 0.0)
                .map(|m| m.powers[0] + m.powers[1])
                .max()
                .or(Some(0)),
            SymbolClass::General(_) => None,
        }
    }

    /// `f + c`.
    pub fn shifted(&self, c: f64) -> Observable {
        match &self.class {
            SymbolClass::LinearU { a, b } => Observable::linear(*a, b + c),
            SymbolClass::PolynomialU(t) => {
                let mut t = t.clone();
                t.push(Monomial::new(c, [0, 0, 0]));
                Observable::polynomial(t)
            }
            SymbolClass::General(f) => {
                let f = Arc::clone(f);
                Observable::general(&format!("{}+{}", self.label, c), move |m| f(m) + c)
            }
        }
    }

    /// `α f + β g` for exactly integrable symbols.
    pub fn combine(alpha: f64, f: &Observable, beta: f64, g: &Observable) -> Option<Observable> {
        if let (SymbolClass::LinearU { a: a1, b: b1 }, SymbolClass::LinearU { a: a2, b: b2 }) =
            (&f.class, &g.class)
        {
            let a = [0, 1, 2].map(|i| alpha * a1[i] + beta * a2[i]);
            return Some(Observable::linear(a, alpha * b1 + beta * b2));
        }
        let mut terms: Vec<Monomial> = f.monomials()?;
        terms.iter_mut().for_each(|t| t.coef *= alpha);
        terms.extend(g.monomials()?.into_iter().map(|mut t| {
            t.coef *= beta;
            t
        }));
        Some(Observable::polynomial(terms))
    }
}

impl FromStr for Observable {
    type Err = String;

    /// Accepted forms: `u1`, `u2`, `u3`, `const:c`, `linear:a1,a2,a3,b`,
    /// `poly:coef@p1,p2,p3;coef@p1,p2,p3;...`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "u1" | "u2" | "u3" if args.is_empty() => Ok(match kind {
                "u1" => Observable::u1(),
                "u2" => Observable::u2(),
                _ => Observable::u3(),
            }),
            "const" => Ok(Observable::constant(parse_f64(args)?)),
            "linear" => {
                let v = parse_list(args)?;
                if v.len() != 4 {
                    return Err(format!("linear observable needs 4 numbers, got {}", v.len()));
                }
                Ok(Observable::linear([v[0], v[1], v[2]], v[3]))
            }
            "poly" => {
                let mut terms = Vec::new();
                for t in args.split(';').filter(|t| !t.trim().is_empty()) {
                    let (c, p) = t
                        .split_once('@')
                        .ok_or_else(|| format!("monomial `{t}` must be coef@p1,p2,p3"))?;
                    let p: Vec<u32> = p
                        .split(',')
                        .map(|x| x.trim().parse::<u32>().map_err(|e| format!("`{x}`: {e}")))
                        .collect::<std::result::Result<_, _>>()?;
                    if p.len() != 3 {
                        return Err(format!("monomial `{t}` needs three exponents"));
                    }
                    terms.push(Monomial::new(parse_f64(c)?, [p[0], p[1], p[2]]));
                }
                if terms.is_empty() {
                    return Err("polynomial observable has no terms".into());
                }
                Ok(Observable::polynomial(terms))
            }
            _ => Err(format!("unknown observable `{s}`")),
        }
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    s.parse::<f64>()
        .map_err(|_| format!("`{s}` is not a number"))
        .and_then(|x| {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(format!("`{s}` is not finite"))
            }
        })
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(parse_f64).collect()
}

/// Reduced symbol of the Berezin–Toeplitz operator `T_f`, which is `f`.
pub fn reduced_symbol(f: &Observable, m: &ModelPoint) -> f64 {
    f.eval(m)
}

/// Quasi-uniform Fibonacci lattice on the unit sphere, plus both poles.
pub fn sphere_sample(n: usize) -> Vec<ModelPoint> {
    let golden = PI * (3.0 - 5.0f64.sqrt());
    let mut pts: Vec<ModelPoint> = (0..n)
        .map(|i| {
            let u3 = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - u3 * u3).sqrt();
            let phi = golden * i as f64;
            ModelPoint::from_sphere([r * phi.cos(), r * phi.sin(), u3])
        })
        .collect();
    pts.push(ModelPoint::south_pole());
    pts.push(ModelPoint::north_pole());
    pts
}

const RANGE_SAMPLES: usize = 10_000;
const RANGE_WIDEN: f64 = 1e-6;

/// Interval containing the values of `f`: exact for linear symbols,
/// sampled and widened by `1e-6` otherwise.
pub fn symbol_range(f: &Observable) -> (f64, f64) {
    if let SymbolClass::LinearU { a, b } = f.class() {
        let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        return (b - n, b + n);
    }
    let (lo, hi) = sphere_sample(RANGE_SAMPLES)
        .iter()
        .map(|m| f.eval(m))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    (lo - RANGE_WIDEN, hi + RANGE_WIDEN)
}

/// Shape of a test function.
#[derive(Debug, Clone, PartialEq)]
pub enum TestKind {
    /// `P(s − a) · exp(−(s − a)² / 2σ²)`, `P` in ascending powers of `s − a`.
    GaussianHermite {
        center: f64,
        width: f64,
        poly: Vec<f64>,
    },
    /// `exp(−1/(1 − y²))` on `y ∈ (−1, 1)`, `y` the affine image of `(lo, hi)`.
    Bump { lo: f64, hi: f64 },
    /// Plain polynomial in `s`. Not a Schwartz function; only meaningful
    /// against finite measures, where pairings are finite sums.
    Polynomial(Vec<f64>),
    /// Finite linear combination.
    Combination(Vec<(f64, TestFunction)>),
}

/// A test function `χ` with derivatives up to order four.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    kind: TestKind,
    // Polynomial factors of the derivatives, orders 0..=4. Their meaning
    // depends on the kind.
    derivs: Vec<Vec<f64>>,
}

pub const MAX_DERIVATIVE: u8 = 4;

impl TestFunction {
    pub fn new(kind: TestKind) -> Self {
        let derivs = match &kind {
            TestKind::GaussianHermite { width, poly, .. } => {
                // d/dx [P e^{−x²/2σ²}] = (P′ − x P/σ²) e^{−x²/2σ²}
                let s2 = width * width;
                successive(poly.clone(), |p| {
                    poly::add_scaled(&poly::derivative(p), &poly::mul(&[0.0, 1.0], p), -1.0 / s2)
                })
            }
            TestKind::Bump { .. } => {
                // g^{(n)}(y) = g(y) R_n(y) / (1 − y²)^{2n}
                let mut n = 0usize;
                successive(vec![1.0], |r| {
                    let one_minus = [1.0, 0.0, -1.0];
                    let a = poly::mul(&[0.0, -2.0], r);
                    let b = poly::mul(&poly::mul(&one_minus, &one_minus), &poly::derivative(r));
                    let c = poly::mul(&poly::mul(&[0.0, 4.0 * n as f64], &one_minus), r);
                    n += 1;
                    poly::add_scaled(&poly::add_scaled(&a, &b, 1.0), &c, 1.0)
                })
            }
            TestKind::Polynomial(p) => successive(p.clone(), |p| poly::derivative(p)),
            TestKind::Combination(_) => Vec::new(),
        };
        TestFunction { kind, derivs }
    }

    /// `exp(−(s − a)²/2σ²)`.
    pub fn gaussian(center: f64, width: f64) -> Self {
        TestFunction::gaussian_hermite(center, width, vec![1.0])
    }

    pub fn gaussian_hermite(center: f64, width: f64, poly: Vec<f64>) -> Self {
        assert!(width > 0.0, "gaussian width must be positive");
        TestFunction::new(TestKind::GaussianHermite {
            center,
            width,
            poly,
        })
    }

    pub fn bump(lo: f64, hi: f64) -> Self {
        assert!(hi > lo, "bump support must be a nonempty interval");
        TestFunction::new(TestKind::Bump { lo, hi })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        TestFunction::new(TestKind::Polynomial(coeffs))
    }

    pub fn combination(terms: Vec<(f64, TestFunction)>) -> Self {
        TestFunction::new(TestKind::Combination(terms))
    }

    pub fn kind(&self) -> &TestKind {
        &self.kind
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval_unchecked(s, 0)
    }

    /// `d^order χ / ds^order` at `s`.
    pub fn eval(&self, s: f64, order: u8) -> Result<f64> {
        if order > MAX_DERIVATIVE {
            return Err(Error::UnsupportedOrder(order));
        }
        Ok(self.eval_unchecked(s, order))
    }

    fn eval_unchecked(&self, s: f64, order: u8) -> f64 {
        let n = order as usize;
        match &self.kind {
            TestKind::GaussianHermite { center, width, .. } => {
                let x = s - center;
                poly::eval(&self.derivs[n], x) * (-0.5 * x * x / (width * width)).exp()
            }
            TestKind::Bump { lo, hi } => {
                let y = (2.0 * s - lo - hi) / (hi - lo);
                let d = 1.0 - y * y;
                if d <= 0.0 {
                    return 0.0;
                }
                let g = (-1.0 / d).exp();
                g * poly::eval(&self.derivs[n], y) / d.powi(2 * order as i32)
                    * (2.0 / (hi - lo)).powi(order as i32)
            }
            TestKind::Polynomial(_) => poly::eval(&self.derivs[n], s),
            TestKind::Combination(terms) => terms
                .iter()
                .map(|(c, t)| c * t.eval_unchecked(s, order))
                .sum(),
        }
    }

    /// `χ(· − c)`.
    pub fn shifted(&self, c: f64) -> TestFunction {
        let kind = match &self.kind {
            TestKind::GaussianHermite {
                center,
                width,
                poly,
            } => TestKind::GaussianHermite {
                center: center + c,
                width: *width,
                poly: poly.clone(),
            },
            TestKind::Bump { lo, hi } => TestKind::Bump {
                lo: lo + c,
                hi: hi + c,
            },
            TestKind::Polynomial(p) => TestKind::Polynomial(poly::shift(p, c)),
            TestKind::Combination(terms) => TestKind::Combination(
                terms.iter().map(|(w, t)| (*w, t.shifted(c))).collect(),
            ),
        };
        TestFunction::new(kind)
    }

    /// Whether a closed-form Fourier transform is available.
    pub fn has_fourier(&self) -> bool {
        match &self.kind {
            TestKind::GaussianHermite { .. } => true,
            TestKind::Combination(t) => t.iter().all(|(_, f)| f.has_fourier()),
            _ => false,
        }
    }

    /// `χ̂(τ) = (2π)^{−1/2} ∫ χ(s) e^{−isτ} ds`.
    pub fn fourier(&self, tau: f64) -> Result<Complex64> {
        match &self.kind {
            TestKind::GaussianHermite {
                center,
                width,
                poly,
            } => {
                // (s − a)^n e^{−(s−a)²/2σ²} ↦ e^{−iaτ} (−i)^n σ^{n+1} He_n(στ) e^{−σ²τ²/2}
                let y = width * tau;
                let mut he_prev = 0.0;
                let mut he = 1.0;
                let mut acc = Complex64::new(0.0, 0.0);
                let mut phase = Complex64::new(1.0, 0.0);
                let mut sigma_pow = *width;
                for (n, &c) in poly.iter().enumerate() {
                    acc += phase * (c * sigma_pow * he);
                    let next = y * he - n as f64 * he_prev;
                    he_prev = he;
                    he = next;
                    phase *= Complex64::new(0.0, -1.0);
                    sigma_pow *= width;
                }
                Ok(acc * (-0.5 * y * y).exp() * Complex64::from_polar(1.0, -center * tau))
            }
            TestKind::Combination(terms) => terms.iter().try_fold(
                Complex64::new(0.0, 0.0),
                |acc, (c, t)| Ok(acc + t.fourier(tau)? * *c),
            ),
            _ => Err(Error::NoFourierTransform),
        }
    }

    /// Gaussian components `(center, width, |poly|)` of a transformable
    /// test function, used to size Fourier quadratures.
    pub(crate) fn gaussian_parts(&self) -> Vec<(f64, f64, Vec<f64>)> {
        match &self.kind {
            TestKind::GaussianHermite {
                center,
                width,
                poly,
            } => vec![(*center, *width, poly.iter().map(|c| c.abs()).collect())],
            TestKind::Combination(t) => t
                .iter()
                .flat_map(|(w, f)| {
                    f.gaussian_parts()
                        .into_iter()
                        .map(move |(a, s, p)| (a, s, p.iter().map(|c| c * w.abs()).collect()))
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

fn successive(first: Vec<f64>, mut step: impl FnMut(&Vec<f64>) -> Vec<f64>) -> Vec<Vec<f64>> {
    let mut out = vec![first];
    for _ in 0..MAX_DERIVATIVE {
        let next = step(out.last().unwrap());
        out.push(next);
    }
    out
}

impl FromStr for TestFunction {
    type Err = String;

    /// Accepted forms: `gaussian:a,σ`, `hermite:a,σ,c0,c1,...`,
    /// `bump:lo,hi`, `poly:c0,c1,...`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| format!("test function `{s}` must be kind:params"))?;
        let v = parse_list(args)?;
        match kind {
            "gaussian" if v.len() == 2 && v[1] > 0.0 => Ok(TestFunction::gaussian(v[0], v[1])),
            "hermite" if v.len() >= 3 && v[1] > 0.0 => {
                Ok(TestFunction::gaussian_hermite(v[0], v[1], v[2..].to_vec()))
            }
            "bump" if v.len() == 2 && v[1] > v[0] => Ok(TestFunction::bump(v[0], v[1])),
            "poly" if !v.is_empty() => Ok(TestFunction::polynomial(v)),
            _ => Err(format!("invalid test function `{s}`")),
        }
    }
}
