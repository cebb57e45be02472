//! Geometry of the Riemann sphere `CP¹` with the Fubini–Study area form
//! normalized to total volume π, and the level-k space of holomorphic
//! sections spanned by the monomials `z^j`, `0 ≤ j ≤ k`.
//!
//! In the south chart the area form is `dx dy / (1 + |z|²)²` and the
//! section `z^j` has squared norm
//! `∫ |z|^{2j} / (1 + |z|²)^{k+2} dA = π j!(k−j)!/(k+1)!`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Above this level binomial coefficients and section weights are carried in
/// log space.
const DIRECT_LEVEL_MAX: u32 = 512;

/// Tensor power `k` of the hyperplane bundle; the section space has
/// dimension `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(pub u32);

impl Level {
    pub fn k(self) -> u32 {
        self.0
    }

    /// `N_k = k + 1`.
    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }
}

impl From<u32> for Level {
    fn from(k: u32) -> Self {
        Level(k)
    }
}

/// Which stereographic chart a point is stored in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chart {
    /// Coordinate `z`, with `z = 0` the south pole `u = (0, 0, −1)`.
    South,
    /// Coordinate `w = 1/z`, with `w = 0` the north pole.
    North,
}

/// A point of `CP¹`, stored in the chart where its coordinate has modulus at
/// most one. Points on the unit circle are stored in the south chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPoint {
    chart: Chart,
    coord: Complex64,
}

impl ModelPoint {
    pub fn south(z: Complex64) -> Self {
        if z.norm() > 1.0 {
            ModelPoint {
                chart: Chart::North,
                coord: z.inv(),
            }
        } else {
            ModelPoint {
                chart: Chart::South,
                coord: z,
            }
        }
    }

    pub fn north(w: Complex64) -> Self {
        if w.norm() >= 1.0 {
            ModelPoint {
                chart: Chart::South,
                coord: w.inv(),
            }
        } else {
            ModelPoint {
                chart: Chart::North,
                coord: w,
            }
        }
    }

    pub fn south_pole() -> Self {
        ModelPoint::south(Complex64::new(0.0, 0.0))
    }

    pub fn north_pole() -> Self {
        ModelPoint::north(Complex64::new(0.0, 0.0))
    }

    /// Inverse stereographic projection from a point of the unit sphere.
    /// The input is normalized first.
    pub fn from_sphere(u: [f64; 3]) -> Self {
        let r = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        let (u1, u2, u3) = (u[0] / r, u[1] / r, u[2] / r);
        if u3 <= 0.0 {
            ModelPoint::south(Complex64::new(u1, u2) / (1.0 - u3))
        } else {
            ModelPoint::north(Complex64::new(u1, -u2) / (1.0 + u3))
        }
    }

    /// Point with polar angle `theta` measured from the south pole and
    /// azimuth `phi`, so that `|z| = tan(theta/2)`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        ModelPoint::from_sphere([st * phi.cos(), st * phi.sin(), -ct])
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// Coordinate in the stored chart.
    pub fn coordinate(&self) -> Complex64 {
        self.coord
    }

    /// The south-chart coordinate `z`, or `None` at the north pole.
    pub fn z(&self) -> Option<Complex64> {
        match self.chart {
            Chart::South => Some(self.coord),
            Chart::North if self.coord.norm_sqr() == 0.0 => None,
            Chart::North => Some(self.coord.inv()),
        }
    }

    /// Unit-sphere coordinates `(u₁, u₂, u₃)`.
    pub fn sphere_coords(&self) -> [f64; 3] {
        let c = self.coord;
        let s = c.norm_sqr();
        let d = 1.0 + s;
        match self.chart {
            Chart::South => [2.0 * c.re / d, 2.0 * c.im / d, (s - 1.0) / d],
            Chart::North => [2.0 * c.re / d, -2.0 * c.im / d, (1.0 - s) / d],
        }
    }

    /// `(p, 1 − p)` with `p = |z|²/(1 + |z|²)`. The two values sum to one
    /// exactly in floating point: the larger one is computed first and the
    /// smaller one is its exact complement.
    pub fn binomial_p(&self) -> (f64, f64) {
        let s = self.coord.norm_sqr();
        match self.chart {
            Chart::South => {
                let q = 1.0 / (1.0 + s);
                (1.0 - q, q)
            }
            Chart::North => {
                let p = 1.0 / (1.0 + s);
                (p, 1.0 - p)
            }
        }
    }
}

/// Binomial coefficient as a float, by the multiplicative formula.
pub fn binomial(k: u32, j: u32) -> f64 {
    if j > k {
        return 0.0;
    }
    let m = j.min(k - j);
    let mut c = 1.0f64;
    for i in 1..=m {
        c = c * f64::from(k - m + i) / f64::from(i);
    }
    c
}

/// Natural logarithm of the binomial coefficient.
pub fn ln_binomial(k: u32, j: u32) -> f64 {
    assert!(j <= k, "ln_binomial: j > k");
    let m = j.min(k - j);
    (1..=m)
        .map(|i| (f64::from(k - m + i) / f64::from(i)).ln())
        .sum()
}

/// Unevaluated sum `hi + lo` of two doubles, with error-free products.
#[derive(Debug, Clone, Copy, PartialEq)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    fn renormalize(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        DoubleDouble {
            hi: s,
            lo: lo - (s - hi),
        }
    }

    fn mul_f64(self, b: f64) -> Self {
        let p = self.hi * b;
        let e = self.hi.mul_add(b, -p) + self.lo * b;
        Self::renormalize(p, e)
    }

    fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p) + (self.hi * o.lo + self.lo * o.hi);
        Self::renormalize(p, e)
    }

    fn div_f64(self, b: f64) -> Self {
        let q = self.hi / b;
        let p = q * b;
        let e = q.mul_add(b, -p);
        let r = (self.hi - p - e + self.lo) / b;
        Self::renormalize(q, r)
    }

    fn add(self, o: Self) -> Self {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let e = (self.hi - (s - bb)) + (o.hi - bb) + self.lo + o.lo;
        Self::renormalize(s, e)
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Binomial probabilities `C(k,j) p^j q^{k−j}` in double-double precision.
fn binomial_terms(binom: &[DoubleDouble], p: f64, q: f64) -> Vec<DoubleDouble> {
    let k = binom.len() - 1;
    let mut qpow = vec![DoubleDouble::ONE; k + 1];
    for i in 1..=k {
        qpow[i] = qpow[i - 1].mul_f64(q);
    }
    let mut ppow = DoubleDouble::ONE;
    (0..=k)
        .map(|j| {
            let t = binom[j].mul(ppow).mul(qpow[k - j]);
            ppow = ppow.mul_f64(p);
            t
        })
        .collect()
}

/// `(k+1)/π` in double-double precision.
fn bergman_density(k: u32) -> DoubleDouble {
    // π = PI + PI_LO to about 32 digits
    const PI_LO: f64 = 1.224_646_799_147_353_2e-16;
    let kp1 = f64::from(k) + 1.0;
    let q = kp1 / PI;
    // kp1 − q·π, evaluated exactly up to the lo part of π
    let r = (-q).mul_add(PI, kp1) - q * PI_LO;
    DoubleDouble::renormalize(q, r / PI)
}

/// Squared Fubini–Study norms of the monomial sections at one level.
#[derive(Debug, Clone)]
pub struct BasisTable {
    level: Level,
    norms: Vec<f64>,
    // C(k, j) for direct levels, ln C(k, j) above DIRECT_LEVEL_MAX.
    binom: Vec<f64>,
    // C(k, j) in double-double for direct levels.
    binom_dd: Vec<DoubleDouble>,
}

impl BasisTable {
    pub fn new(level: Level) -> Self {
        let k = level.k();
        let direct = k <= DIRECT_LEVEL_MAX;
        let binom_dd: Vec<DoubleDouble> = if direct {
            let mut c = DoubleDouble::ONE;
            let mut v = Vec::with_capacity(k as usize + 1);
            v.push(c);
            for j in 0..k {
                c = c.mul_f64(f64::from(k - j)).div_f64(f64::from(j + 1));
                v.push(c);
            }
            v
        } else {
            Vec::new()
        };
        let binom: Vec<f64> = if direct {
            binom_dd.iter().map(|c| c.value()).collect()
        } else {
            (0..=k).map(|j| ln_binomial(k, j)).collect()
        };
        let kp1 = f64::from(k) + 1.0;
        let norms = binom
            .iter()
            .map(|&b| {
                if direct {
                    PI / (kp1 * b)
                } else {
                    (PI.ln() - kp1.ln() - b).exp()
                }
            })
            .collect();
        BasisTable {
            level,
            norms,
            binom,
            binom_dd,
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn norm(&self, j: u32) -> Result<f64> {
        self.norms
            .get(j as usize)
            .copied()
            .ok_or(Error::Index { k: self.level.k(), j })
    }

    /// `|ŝ_{k,j}(m)|²` for all `j`. These are `(k+1)/π` times the binomial
    /// probabilities `C(k,j) p^j (1−p)^{k−j}`.
    pub fn section_weights(&self, m: &ModelPoint) -> Vec<f64> {
        let k = self.level.k();
        let scale = (f64::from(k) + 1.0) / PI;
        let (p, q) = m.binomial_p();
        if k <= DIRECT_LEVEL_MAX {
            let density = bergman_density(k);
            binomial_terms(&self.binom_dd, p, q)
                .into_iter()
                .map(|t| t.mul(density).value())
                .collect()
        } else {
            let (lp, lq) = (p.ln(), q.ln());
            (0..=k)
                .map(|j| {
                    let mut e = self.binom[j as usize];
                    if j > 0 {
                        e += f64::from(j) * lp;
                    }
                    if j < k {
                        e += f64::from(k - j) * lq;
                    }
                    scale * e.exp()
                })
                .collect()
        }
    }

    /// Orthonormal section values `ŝ_{k,j}(m)` in the stored chart
    /// trivialization. In the north chart the roles of `j` and `k − j` are
    /// exchanged; the two trivializations differ by a unimodular factor
    /// common to all `j`, so `|ŝ|` is chart independent.
    pub fn section_values(&self, m: &ModelPoint) -> Vec<Complex64> {
        let k = self.level.k();
        let arg = m.coordinate().arg();
        self.section_weights(m)
            .into_iter()
            .enumerate()
            .map(|(j, w)| {
                let power = match m.chart() {
                    Chart::South => j as f64,
                    Chart::North => f64::from(k) - j as f64,
                };
                Complex64::from_polar(w.sqrt(), power * arg)
            })
            .collect()
    }
}

/// Squared norm of the monomial section `z^j` at level `k`.
pub fn basis_norm(k: Level, j: u32) -> Result<f64> {
    if j > k.k() {
        return Err(Error::Index { k: k.k(), j });
    }
    if k.k() <= DIRECT_LEVEL_MAX {
        Ok(PI / ((f64::from(k.k()) + 1.0) * binomial(k.k(), j)))
    } else {
        Ok((PI.ln() - (f64::from(k.k()) + 1.0).ln() - ln_binomial(k.k(), j)).exp())
    }
}

/// Value of the orthonormalized section `ŝ_{k,j}` at `m`.
pub fn section_value(k: Level, j: u32, m: &ModelPoint) -> Result<Complex64> {
    if j > k.k() {
        return Err(Error::Index { k: k.k(), j });
    }
    Ok(BasisTable::new(k).section_values(m)[j as usize])
}

/// Diagonal of the level-k Szegő projector, `Σ_j |ŝ_{k,j}(m)|²`.
pub fn bergman_diagonal(k: Level, m: &ModelPoint) -> f64 {
    let table = BasisTable::new(k);
    if k.k() > DIRECT_LEVEL_MAX {
        return table.section_weights(m).iter().sum();
    }
    let (p, q) = m.binomial_p();
    binomial_terms(&table.binom_dd, p, q)
        .into_iter()
        .fold(DoubleDouble { hi: 0.0, lo: 0.0 }, DoubleDouble::add)
        .mul(bergman_density(k.k()))
        .value()
}

pub fn sphere_coords(m: &ModelPoint) -> [f64; 3] {
    m.sphere_coords()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn basis_norm_examples() {
        assert_relative_eq!(basis_norm(Level(0), 0).unwrap(), PI, max_relative = 1e-15);
        assert_relative_eq!(
            basis_norm(Level(2), 1).unwrap(),
            PI / 6.0,
            max_relative = 1e-15
        );
        assert_eq!(
            basis_norm(Level(5), 2).unwrap(),
            basis_norm(Level(5), 3).unwrap()
        );
        assert_eq!(
            basis_norm(Level(3), 4),
            Err(Error::Index { k: 3, j: 4 })
        );
    }

    #[test]
    fn basis_norm_log_branch_matches_factorial_form() {
        // k = 600 goes through the log branch; compare with a product of
        // ratios j!(k−j)!/(k+1)! evaluated term by term.
        let k = 600u32;
        for j in [0u32, 1, 17, 300, 599, 600] {
            let mut ratio = 1.0 / (f64::from(k) + 1.0);
            let m = j.min(k - j);
            for i in 1..=m {
                ratio *= f64::from(i) / f64::from(k - m + i);
            }
            assert_relative_eq!(
                basis_norm(Level(k), j).unwrap(),
                PI * ratio,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn section_value_examples() {
        for k in [0u32, 1, 7, 40] {
            let v = section_value(Level(k), 0, &ModelPoint::south_pole()).unwrap();
            assert_relative_eq!(v.re, ((f64::from(k) + 1.0) / PI).sqrt(), max_relative = 1e-14);
            assert_eq!(v.im, 0.0);
            if k >= 1 {
                let v = section_value(Level(k), 1, &ModelPoint::south_pole()).unwrap();
                assert_eq!(v.norm(), 0.0);
            }
        }
        let v = section_value(Level(2), 1, &ModelPoint::south(c(1.0, 0.0))).unwrap();
        assert_relative_eq!(v.re, 0.5 * (6.0 / PI).sqrt(), max_relative = 1e-14);
        assert!(section_value(Level(2), 3, &ModelPoint::south_pole()).is_err());
    }

    #[test]
    fn section_value_phase_follows_monomial() {
        let z = c(0.3, 0.4);
        let m = ModelPoint::south(z);
        let t = BasisTable::new(Level(6));
        let vals = t.section_values(&m);
        for (j, v) in vals.iter().enumerate() {
            let expect = z.powi(j as i32) / (t.norms()[j].sqrt() * (1.0 + z.norm_sqr()).powi(3));
            assert_relative_eq!(v.re, expect.re, epsilon = 1e-14);
            assert_relative_eq!(v.im, expect.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn bergman_diagonal_examples() {
        for m in [
            ModelPoint::south_pole(),
            ModelPoint::north_pole(),
            ModelPoint::south(c(0.2, -0.7)),
            ModelPoint::south(c(3.0, 1.0)),
        ] {
            assert!((bergman_diagonal(Level(5), &m) - 6.0 / PI).abs() < 1e-13);
            assert!((bergman_diagonal(Level(0), &m) - 1.0 / PI).abs() < 1e-15);
        }
    }

    #[test]
    fn chart_images_agree() {
        let z = c(0.6, -0.3);
        let a = ModelPoint::south(z);
        // Force the north-chart representation of the same point.
        let b = ModelPoint {
            chart: Chart::North,
            coord: z.inv(),
        };
        let (ua, ub) = (a.sphere_coords(), b.sphere_coords());
        for i in 0..3 {
            assert!((ua[i] - ub[i]).abs() < 1e-15);
        }
        for k in [3u32, 30, 300] {
            let da = bergman_diagonal(Level(k), &a);
            let db = bergman_diagonal(Level(k), &b);
            assert!((da - db).abs() < 1e-13 * da.max(1.0) + 1e-13);
            let ta = BasisTable::new(Level(k));
            let (wa, wb) = (ta.section_values(&a), ta.section_values(&b));
            for (x, y) in wa.iter().zip(&wb) {
                assert!((x.norm() - y.norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_coords_examples() {
        assert_eq!(ModelPoint::south_pole().sphere_coords(), [0.0, 0.0, -1.0]);
        assert_eq!(ModelPoint::south(c(1.0, 0.0)).sphere_coords(), [1.0, 0.0, 0.0]);
        assert_eq!(ModelPoint::north_pole().sphere_coords(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn canonical_chart_storage() {
        let m = ModelPoint::south(c(2.0, 0.0));
        assert_eq!(m.chart(), Chart::North);
        assert!((m.coordinate() - c(0.5, 0.0)).norm() < 1e-16);
        let m = ModelPoint::north(c(0.0, 1.0));
        assert_eq!(m.chart(), Chart::South);
        let u = ModelPoint::from_sphere([0.0, 0.6, 0.8]).sphere_coords();
        assert!((u[1] - 0.6).abs() < 1e-15 && (u[2] - 0.8).abs() < 1e-15);
        let u = ModelPoint::from_angles(PI / 2.0, 0.0).sphere_coords();
        assert!((u[0] - 1.0).abs() < 1e-15 && u[2].abs() < 1e-15);
    }

    #[test]
    fn double_double_binomials_are_exact() {
        let mut row: Vec<u128> = vec![1];
        for k in 1..=100u32 {
            let mut next = vec![1u128; k as usize + 1];
            for j in 1..k as usize {
                next[j] = row[j - 1] + row[j];
            }
            row = next;
            let table = BasisTable::new(Level(k));
            for (j, &exact) in row.iter().enumerate() {
                let c = table.binom_dd[j];
                let hi = c.hi as u128;
                assert_eq!(c.hi, exact as f64, "k {k} j {j}");
                let rest = exact as i128 - hi as i128;
                assert!((rest as f64 - c.lo).abs() <= 1e-3 * c.lo.abs().max(1.0), "k {k} j {j}");
            }
        }
    }

    #[test]
    fn density_is_correctly_rounded() {
        // (k+1)/π for k = 0 and k = 255, from 40-digit references
        assert_eq!(bergman_density(0).value(), 0.318_309_886_183_790_7);
        assert_eq!(bergman_density(255).value(), 81.487_330_863_050_42);
    }

    #[test]
    fn binomial_p_sums_to_one() {
        for z in [c(0.0, 0.0), c(0.1, 0.9), c(5.0, -2.0), c(1e-9, 0.0)] {
            let (p, q) = ModelPoint::south(z).binomial_p();
            assert_eq!(p + q, 1.0);
            let s = z.norm_sqr();
            assert!((p - s / (1.0 + s)).abs() < 1e-15);
        }
    }
}
