//! Gauss–Legendre rules and the product scheme used to assemble Toeplitz
//! matrices on the sphere.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `(0, 1)`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|&xi| 0.5 * (1.0 + xi)).collect(),
        w.iter().map(|&wi| 0.5 * wi).collect(),
    )
}

/// Product rule for integrals over the sphere in the south chart: the
/// radial variable `t = |z|²` is mapped to `u = t/(1+t) ∈ (0, 1)` and
/// integrated by Gauss–Legendre, the angle by the uniform trapezoid rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureScheme {
    radial_nodes: Vec<f64>,
    radial_weights: Vec<f64>,
    angular: usize,
}

/// Extra radial order on top of the level.
pub const RADIAL_MARGIN: usize = 24;
/// Bandwidth assumed for symbols whose azimuthal bandwidth is unknown.
pub const DEFAULT_BANDWIDTH: u32 = 16;

impl QuadratureScheme {
    pub fn new(radial_order: usize, angular_nodes: usize) -> Self {
        let (radial_nodes, radial_weights) = gauss_legendre_unit(radial_order);
        QuadratureScheme {
            radial_nodes,
            radial_weights,
            angular: angular_nodes,
        }
    }

    /// Radial order `k + 24` and `2(k + bandwidth) + 1` angular nodes.
    pub fn for_level(k: u32, bandwidth: u32) -> Self {
        QuadratureScheme::new(
            k as usize + RADIAL_MARGIN,
            2 * (k + bandwidth) as usize + 1,
        )
    }

    pub fn radial_order(&self) -> usize {
        self.radial_nodes.len()
    }

    pub fn angular_nodes(&self) -> usize {
        self.angular
    }

    pub fn radial(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.radial_nodes
            .iter()
            .copied()
            .zip(self.radial_weights.iter().copied())
    }

    /// Highest polynomial degree in `u` integrated exactly by the radial rule.
    pub fn exactness_degree(&self) -> usize {
        (2 * self.radial_order()).saturating_sub(1)
    }

    /// Whether the scheme is exact for the Toeplitz entries of a symbol
    /// that is polynomial of the given degree and azimuthal bandwidth.
    pub fn is_exact_for(&self, k: u32, degree: u32, bandwidth: u32) -> bool {
        self.exactness_degree() >= (k + degree) as usize && self.angular > (k + bandwidth) as usize
    }

    /// Largest relative error over `0 ≤ j ≤ k` of the rule applied to
    /// `∫₀^∞ t^j (1+t)^{−(k+2)} dt = B(j+1, k+1−j)`.
    pub fn beta_error(&self, k: u32) -> f64 {
        let lnf = ln_factorials(k as usize + 1);
        (0..=k as usize)
            .map(|j| {
                let exact = (lnf[j] + lnf[k as usize - j] - lnf[k as usize + 1]).exp();
                // t^j (1+t)^{−(k+2)} dt = u^j (1−u)^{k−j} du
                let approx: f64 = self
                    .radial()
                    .map(|(u, w)| {
                        w * (j as f64 * u.ln() + (k as usize - j) as f64 * (-u).ln_1p()).exp()
                    })
                    .sum();
                ((approx - exact) / exact).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `ln(i!)` for `i = 0..=n`.
pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// `∫_M g dμ_M` over the sphere with `vol(M) = π`, using Gauss–Legendre in
/// `u₃` and the trapezoid rule in azimuth.
pub fn integrate_sphere(
    order: usize,
    azimuthal: usize,
    mut g: impl FnMut(&crate::cp1::ModelPoint) -> f64,
) -> f64 {
    let (x, w) = gauss_legendre(order);
    let dphi = 2.0 * PI / azimuthal as f64;
    let mut acc = 0.0;
    for (&u3, &wu) in x.iter().zip(&w) {
        let r = (1.0 - u3 * u3).sqrt();
        let mut ring = 0.0;
        for a in 0..azimuthal {
            let phi = a as f64 * dphi;
            let m = crate::cp1::ModelPoint::from_sphere([r * phi.cos(), r * phi.sin(), u3]);
            ring += g(&m);
        }
        acc += wu * ring * dphi;
    }
    // dμ_M is a quarter of the round area element du₃ dφ.
    0.25 * acc
}
