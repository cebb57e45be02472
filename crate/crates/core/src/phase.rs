//! The inner oscillatory phase
//!
//! `Ψ(t, θ, ϑ, λ, τ, r) = −r ω₀ θ + τ r q + c₂ τ² r − λ τ + i t (1 − e^{i(θ+ϑ)}) − ϑ`
//!
//! of the local trace integral, its stationary point and Hessian.
//! `c₂ τ² r` stands in for the unspecified `O(τ²)` remainder.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

/// Variable order used for gradients and Hessians.
pub const VARIABLES: [&str; 6] = ["t", "theta", "vartheta", "lambda", "tau", "r"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    pub omega0: f64,
    pub qval: f64,
    pub c2: f64,
}

impl PhaseParams {
    pub fn new(omega0: f64, qval: f64, c2: f64) -> Self {
        assert!(omega0 > 0.0, "omega0 must be positive");
        PhaseParams { omega0, qval, c2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub t: f64,
    pub theta: f64,
    pub vartheta: f64,
    pub lambda: f64,
    pub tau: f64,
    pub r: f64,
}

impl PhasePoint {
    pub fn to_array(self) -> [f64; 6] {
        [self.t, self.theta, self.vartheta, self.lambda, self.tau, self.r]
    }

    pub fn from_array(x: [f64; 6]) -> Self {
        PhasePoint {
            t: x[0],
            theta: x[1],
            vartheta: x[2],
            lambda: x[3],
            tau: x[4],
            r: x[5],
        }
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn phase_eval(p: &PhaseParams, x: &PhasePoint) -> Complex64 {
    let e = Complex64::from_polar(1.0, x.theta + x.vartheta);
    re(-x.r * p.omega0 * x.theta + x.tau * x.r * p.qval + p.c2 * x.tau * x.tau * x.r
        - x.lambda * x.tau
        - x.vartheta)
        + I * x.t * (re(1.0) - e)
}

/// `(∂_t, ∂_θ, ∂_ϑ, ∂_λ, ∂_τ, ∂_r) Ψ`.
pub fn phase_gradient(p: &PhaseParams, x: &PhasePoint) -> [Complex64; 6] {
    let e = Complex64::from_polar(1.0, x.theta + x.vartheta);
    [
        I * (re(1.0) - e),
        re(-x.r * p.omega0) + e * x.t,
        e * x.t - re(1.0),
        re(-x.tau),
        re(x.r * p.qval + 2.0 * p.c2 * x.tau * x.r - x.lambda),
        re(-p.omega0 * x.theta + x.tau * p.qval + p.c2 * x.tau * x.tau),
    ]
}

/// Complex modulus of the gradient, `(Σ |∂Ψ|²)^{1/2}`.
pub fn gradient_norm(p: &PhaseParams, x: &PhasePoint) -> f64 {
    phase_gradient(p, x)
        .iter()
        .map(|g| g.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Analytic Hessian in the order of [`VARIABLES`].
pub fn phase_hessian(p: &PhaseParams, x: &PhasePoint) -> DMatrix<Complex64> {
    let e = Complex64::from_polar(1.0, x.theta + x.vartheta);
    let ie_t = I * e * x.t;
    let z = re(0.0);
    #[rustfmt::skip]
    let h = [
        // t     θ              ϑ     λ          τ                                  r
        [z,      e,             e,    z,         z,                                 z],
        [e,      ie_t,          ie_t, z,         z,                                 re(-p.omega0)],
        [e,      ie_t,          ie_t, z,         z,                                 z],
        [z,      z,             z,    z,         re(-1.0),                          z],
        [z,      z,             z,    re(-1.0),  re(2.0 * p.c2 * x.r),              re(p.qval + 2.0 * p.c2 * x.tau)],
        [z,      re(-p.omega0), z,    z,         re(p.qval + 2.0 * p.c2 * x.tau),   z],
    ];
    DMatrix::from_fn(6, 6, |i, j| h[i][j])
}

/// `(1, 0, 0, q/ω₀, 0, 1/ω₀)`.
pub fn critical_point(p: &PhaseParams) -> PhasePoint {
    PhasePoint {
        t: 1.0,
        theta: 0.0,
        vartheta: 0.0,
        lambda: p.qval / p.omega0,
        tau: 0.0,
        r: 1.0 / p.omega0,
    }
}

/// Determinant of the Hessian at the critical point, by LU in the variable
/// order of [`VARIABLES`]. A simultaneous permutation of rows and columns
/// leaves it unchanged.
pub fn hessian_det(p: &PhaseParams) -> Complex64 {
    phase_hessian(p, &critical_point(p)).determinant()
}

/// Axis-aligned search box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanBox {
    pub lo: [f64; 6],
    pub hi: [f64; 6],
}

impl ScanBox {
    /// Box of half-widths `(0.5, 0.5, 0.5, 1, 0.5, r₀/2)` around the
    /// critical point.
    pub fn around_critical(p: &PhaseParams) -> Self {
        let c = critical_point(p).to_array();
        let half = [0.5, 0.5, 0.5, 1.0, 0.5, 0.5 * c[5]];
        ScanBox {
            lo: [0, 1, 2, 3, 4, 5].map(|i| c[i] - half[i]),
            hi: [0, 1, 2, 3, 4, 5].map(|i| c[i] + half[i]),
        }
    }

    pub fn contains(&self, x: &PhasePoint) -> bool {
        x.to_array()
            .iter()
            .enumerate()
            .all(|(i, &v)| self.lo[i] <= v && v <= self.hi[i])
    }

    fn node(&self, idx: &[usize; 6], resolution: usize) -> PhasePoint {
        let mut x = [0.0; 6];
        for d in 0..6 {
            let frac = idx[d] as f64 / (resolution - 1) as f64;
            x[d] = self.lo[d] + frac * (self.hi[d] - self.lo[d]);
        }
        PhasePoint::from_array(x)
    }
}

/// A stationary point located by [`scan_stationary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// Grid node where the discrete minimum of `‖∇Ψ‖` sits.
    pub grid_point: PhasePoint,
    pub grid_gradient: f64,
    /// The node refined by Gauss–Newton on `∇Ψ = 0`.
    pub refined: PhasePoint,
    pub refined_gradient: f64,
}

pub const STATIONARY_THRESHOLD: f64 = 1e-3;

fn unravel(mut flat: usize, res: usize) -> [usize; 6] {
    let mut idx = [0; 6];
    for d in (0..6).rev() {
        idx[d] = flat % res;
        flat /= res;
    }
    idx
}

fn ravel(idx: &[usize; 6], res: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * res + i)
}

/// `‖∇Ψ‖` at every node of a `resolution^6` grid.
fn gradient_grid(p: &PhaseParams, b: &ScanBox, resolution: usize) -> Vec<f64> {
    assert!(resolution >= 2, "resolution must be at least 2");
    let total = resolution.pow(6);
    (0..total)
        .into_par_iter()
        .map(|flat| gradient_norm(p, &b.node(&unravel(flat, resolution), resolution)))
        .collect()
}

/// Smallest `‖∇Ψ‖` over the grid nodes.
pub fn grid_min_gradient(p: &PhaseParams, b: &ScanBox, resolution: usize) -> f64 {
    gradient_grid(p, b, resolution)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Smallest `‖∇Ψ‖` over the grid nodes farther than `radius` from the
/// closed-form critical point.
pub fn min_gradient_away_from_critical(p: &PhaseParams, b: &ScanBox, resolution: usize, radius: f64) -> f64 {
    let c = critical_point(p);
    gradient_grid(p, b, resolution)
        .into_iter()
        .enumerate()
        .filter(|&(flat, _)| b.node(&unravel(flat, resolution), resolution).distance(&c) > radius)
        .map(|(_, g)| g)
        .fold(f64::INFINITY, f64::min)
}

/// Gauss–Newton on the twelve real equations `Re ∇Ψ = Im ∇Ψ = 0` in the six
/// real unknowns.
pub fn refine_stationary(p: &PhaseParams, start: &PhasePoint, iterations: usize) -> PhasePoint {
    let mut x = *start;
    for _ in 0..iterations {
        let g = phase_gradient(p, &x);
        let h = phase_hessian(p, &x);
        let jac = DMatrix::from_fn(12, 6, |r, c| if r < 6 { h[(r, c)].re } else { h[(r - 6, c)].im });
        let rhs = DVector::from_fn(12, |r, _| if r < 6 { -g[r].re } else { -g[r - 6].im });
        let Some(step) = jac.svd(true, true).solve(&rhs, 1e-14).ok() else {
            break;
        };
        let mut a = x.to_array();
        for (ai, si) in a.iter_mut().zip(step.iter()) {
            *ai += si;
        }
        x = PhasePoint::from_array(a);
        if step.norm() < 1e-15 {
            break;
        }
    }
    x
}

/// Grid scan for stationary points: discrete local minima of `‖∇Ψ‖` among
/// axis neighbours are refined by Gauss–Newton and kept when the refined
/// point stays in the box with `‖∇Ψ‖ < 1e-3`. Duplicates within `1e-6` are
/// merged.
pub fn scan_stationary(p: &PhaseParams, b: &ScanBox, resolution: usize) -> Vec<Candidate> {
    let grid = gradient_grid(p, b, resolution);
    let minima: Vec<usize> = (0..grid.len())
        .into_par_iter()
        .filter(|&flat| {
            let idx = unravel(flat, resolution);
            let v = grid[flat];
            (0..6).all(|d| {
                let mut ok = true;
                for delta in [-1i64, 1] {
                    let n = idx[d] as i64 + delta;
                    if n < 0 || n >= resolution as i64 {
                        continue;
                    }
                    let mut nb = idx;
                    nb[d] = n as usize;
                    // ties broken by flat index
                    let w = grid[ravel(&nb, resolution)];
                    let nf = ravel(&nb, resolution);
                    if w < v || (w == v && nf < flat) {
                        ok = false;
                    }
                }
                ok
            })
        })
        .collect();

    let mut out: Vec<Candidate> = Vec::new();
    for flat in minima {
        let gp = b.node(&unravel(flat, resolution), resolution);
        let refined = refine_stationary(p, &gp, 50);
        let rg = gradient_norm(p, &refined);
        if rg >= STATIONARY_THRESHOLD || !b.contains(&refined) {
            continue;
        }
        let cand = Candidate {
            grid_point: gp,
            grid_gradient: grid[flat],
            refined,
            refined_gradient: rg,
        };
        match out.iter_mut().find(|c| c.refined.distance(&refined) < 1e-6) {
            Some(existing) if existing.grid_gradient > cand.grid_gradient => *existing = cand,
            Some(_) => {}
            None => out.push(cand),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn phase_eval_examples() {
        let p = PhaseParams::new(1.0, 2.0, 0.0);
        assert!(phase_eval(&p, &critical_point(&p)).norm() < 1e-15);
        let x = PhasePoint::from_array([1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(phase_eval(&p, &x), re(0.0));
        let x = PhasePoint::from_array([1.0, std::f64::consts::PI, 0.0, 0.0, 0.0, 0.0]);
        let v = phase_eval(&PhaseParams::new(1.0, 0.0, 0.0), &x);
        assert!((v - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        // θ + ϑ = π split across both angles, with r = 1: the θ term enters
        let x = PhasePoint::from_array([1.0, 0.0, std::f64::consts::PI, 0.0, 0.0, 1.0]);
        let v = phase_eval(&PhaseParams::new(1.0, 0.0, 0.0), &x);
        assert!((v - Complex64::new(-std::f64::consts::PI, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let p = PhaseParams::new(0.7, 1.3, 0.4);
        let g = phase_gradient(&p, &critical_point(&p));
        assert!(g.iter().all(|x| x.norm() < 1e-15));
        let x = PhasePoint::from_array([0.8, 0.3, -0.2, 1.1, 0.25, 1.7]);
        let g = phase_gradient(&p, &x);
        assert_eq!(g[3], re(-0.25));
        let theta = re(-1.7 * 0.7) + Complex64::from_polar(0.8, 0.1);
        assert!((g[1] - theta).norm() < 1e-15);
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..100 {
            let p = PhaseParams::new(rng.gen_range(0.3..1.0), rng.gen_range(0.2..2.0), rng.gen_range(-2.0..2.0));
            let x: [f64; 6] = [
                rng.gen_range(0.3..2.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.3..2.0),
            ];
            let g = phase_gradient(&p, &PhasePoint::from_array(x));
            let hess = phase_hessian(&p, &PhasePoint::from_array(x));
            for d in 0..6 {
                let (mut xp, mut xm) = (x, x);
                xp[d] += h;
                xm[d] -= h;
                let fd = (phase_eval(&p, &PhasePoint::from_array(xp))
                    - phase_eval(&p, &PhasePoint::from_array(xm)))
                    / (2.0 * h);
                assert!((fd - g[d]).norm() < 1e-8, "d {d}: {fd} vs {}", g[d]);
                let gp = phase_gradient(&p, &PhasePoint::from_array(xp));
                let gm = phase_gradient(&p, &PhasePoint::from_array(xm));
                for r in 0..6 {
                    let fd = (gp[r] - gm[r]) / (2.0 * h);
                    assert!((fd - hess[(r, d)]).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn critical_point_examples() {
        let c = critical_point(&PhaseParams::new(1.0, 2.0, 0.0));
        assert_eq!(c.to_array(), [1.0, 0.0, 0.0, 2.0, 0.0, 1.0]);
        let c = critical_point(&PhaseParams::new(0.5, 1.0, 0.0));
        assert_eq!(c.to_array(), [1.0, 0.0, 0.0, 2.0, 0.0, 2.0]);
        let p = PhaseParams::new(0.5, 1.0, 0.7);
        assert_eq!(critical_point(&p), c);
        assert!(gradient_norm(&p, &c) < 1e-15);
    }

    #[test]
    fn hessian_determinant_examples() {
        assert!((hessian_det(&PhaseParams::new(1.0, 2.0, 0.0)) + 1.0).norm() < 1e-12);
        assert!((hessian_det(&PhaseParams::new(0.6, 2.0, 0.0)) + 0.36).norm() < 1e-12);
        for c2 in [0.0, 1.0, -3.0] {
            let d = hessian_det(&PhaseParams::new(0.8, 0.5, c2));
            assert!((d + 0.64).norm() < 1e-12, "c2 {c2}: {d}");
        }
    }

    #[test]
    fn scan_finds_exactly_the_closed_form() {
        let p = PhaseParams::new(0.8, 1.0, 0.5);
        let b = ScanBox::around_critical(&p);
        let found = scan_stationary(&p, &b, 7);
        assert_eq!(found.len(), 1);
        assert!(found[0].refined.distance(&critical_point(&p)) < 1e-6);
    }

    #[test]
    fn box_without_the_critical_point() {
        let p = PhaseParams::new(1.0, 2.0, 0.0);
        let c = critical_point(&p).to_array();
        let mut b = ScanBox::around_critical(&p);
        b.lo[0] = c[0] + 0.2;
        b.hi[0] = c[0] + 0.8;
        assert!(scan_stationary(&p, &b, 6).is_empty());
        assert!(grid_min_gradient(&p, &b, 6) > 0.01);
    }

    #[test]
    fn gradient_is_bounded_below_away_from_the_critical_point() {
        let p = PhaseParams::new(0.5, 0.5, 1.0);
        let b = ScanBox::around_critical(&p);
        let near = grid_min_gradient(&p, &b, 7);
        assert!(near < 1e-12, "near {near}");
        let away = min_gradient_away_from_critical(&p, &b, 7, 0.1);
        assert!(away > 0.01, "away {away}");
    }
}
