//! Least-squares instances with a prescribed singular structure.
//!
//! `A = U diag(sigma) V^T` is assembled from seeded orthonormal factors, so
//! the right-singular vectors `v_l` used to measure eigencomponents are known
//! exactly instead of being recovered by an SVD.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{mix_seed, stream};

/// Relative tolerance of the construction-time invariant checks.
pub const CONSTRUCTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub rows: usize,
    pub cols: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    #[serde(default)]
    pub spacing: Spacing,
    pub seed: u64,
}

impl SpectrumSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cols == 0 {
            return Err(Error::InvalidSpec("cols must be at least 1".into()));
        }
        if self.rows < self.cols {
            return Err(Error::InvalidSpec(format!(
                "rows ({}) must be >= cols ({})",
                self.rows, self.cols
            )));
        }
        if !(self.sigma_min.is_finite() && self.sigma_min > 0.0) {
            return Err(Error::InvalidSpec("sigma_min must be positive".into()));
        }
        if !(self.sigma_max.is_finite() && self.sigma_max >= self.sigma_min) {
            return Err(Error::InvalidSpec("sigma_max must be >= sigma_min".into()));
        }
        if self.cols == 1 && self.sigma_min != self.sigma_max {
            return Err(Error::InvalidSpec(
                "a single column needs sigma_min == sigma_max".into(),
            ));
        }
        Ok(())
    }

    /// Descending singular values, `sigma_max` first and `sigma_min` last.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n = self.cols;
        if n == 1 {
            return Ok(vec![self.sigma_max]);
        }
        let last = (n - 1) as f64;
        let mut s: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.sigma_max + (self.sigma_min - self.sigma_max) * t,
                    Spacing::Geometric => {
                        self.sigma_max * (self.sigma_min / self.sigma_max).powf(t)
                    }
                }
            })
            .collect();
        s[0] = self.sigma_max;
        s[n - 1] = self.sigma_min;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Consistency {
    Consistent,
    Inconsistent { noise_level: f64 },
}

/// Orthonormal `dim x cols` matrix from the QR factorization of a seeded
/// Gaussian matrix, with columns signed so that `diag(R) >= 0`.
pub fn random_orthonormal(dim: usize, cols: usize, seed: u64) -> Result<DMatrix<f64>> {
    if dim == 0 || cols == 0 {
        return Err(Error::Dimension("orthonormal factor needs dim, cols >= 1".into()));
    }
    if cols > dim {
        return Err(Error::Dimension(format!(
            "cannot fit {cols} orthonormal columns in dimension {dim}"
        )));
    }
    let mut rng = stream(seed);
    let g = DMatrix::from_fn(dim, cols, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Immutable least-squares instance with its exact SVD factors.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    a: DMatrix<f64>,
    /// Row-major copy of `a` for the per-row solvers.
    a_rows: Vec<f64>,
    b: DVector<f64>,
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
    x_star: DVector<f64>,
    f_star: f64,
    consistent: bool,
}

impl SyntheticProblem {
    /// Consistent instance: `b = A x_true` and `x_star = x_true`.
    pub fn consistent(
        u: DMatrix<f64>,
        sigma: DVector<f64>,
        v: DMatrix<f64>,
        x_true: DVector<f64>,
    ) -> Result<Self> {
        let (a, a_rows) = assemble(&u, &sigma, &v)?;
        if x_true.len() != v.nrows() {
            return Err(Error::Dimension("x_true length must equal cols".into()));
        }
        let m = a.nrows();
        let n = a.ncols();
        let b = DVector::from_fn(m, |i, _| dot(&a_rows[i * n..(i + 1) * n], x_true.as_slice()));
        let mut p = SyntheticProblem {
            a,
            a_rows,
            b,
            u,
            sigma,
            v,
            x_star: x_true,
            f_star: 0.0,
            consistent: true,
        };
        p.f_star = 0.5 * p.residual(&p.x_star).norm_squared();
        p.check_invariants()?;
        Ok(p)
    }

    /// General instance with an arbitrary right-hand side; the minimizer is
    /// `V diag(1/sigma) U^T b`.
    pub fn with_rhs(
        u: DMatrix<f64>,
        sigma: DVector<f64>,
        v: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self> {
        let (a, a_rows) = assemble(&u, &sigma, &v)?;
        if b.len() != a.nrows() {
            return Err(Error::Dimension("b length must equal rows".into()));
        }
        let coeffs = u.tr_mul(&b).component_div(&sigma);
        let x_star = &v * coeffs;
        let mut p = SyntheticProblem {
            a,
            a_rows,
            b,
            u,
            sigma,
            v,
            x_star,
            f_star: 0.0,
            consistent: false,
        };
        let r = p.residual(&p.x_star);
        p.f_star = 0.5 * r.norm_squared();
        p.consistent = r.norm() <= CONSTRUCTION_TOL * p.b.norm();
        p.check_invariants()?;
        Ok(p)
    }

    fn check_invariants(&self) -> Result<()> {
        let n = self.cols();
        let orth = |q: &DMatrix<f64>, name: &str| -> Result<()> {
            let dev = (q.tr_mul(q) - DMatrix::<f64>::identity(n, n)).amax();
            if dev > CONSTRUCTION_TOL {
                return Err(Error::Construction(format!(
                    "{name} is not orthonormal (max |Q^T Q - I| = {dev:e})"
                )));
            }
            Ok(())
        };
        orth(&self.u, "U")?;
        orth(&self.v, "V")?;

        let av = &self.a * &self.v;
        let us = &self.u * DMatrix::from_diagonal(&self.sigma);
        let scale = self.a.norm();
        if (av - us).norm() > CONSTRUCTION_TOL * scale {
            return Err(Error::Construction("A v_l != sigma_l u_l".into()));
        }

        let atb = self.a.tr_mul(&self.b);
        let grad = self.a.tr_mul(&(&self.a * &self.x_star)) - &atb;
        if grad.norm() > CONSTRUCTION_TOL * atb.norm() {
            return Err(Error::Construction(format!(
                "normal equations residual {:e} too large",
                grad.norm()
            )));
        }
        if self.consistent && self.f_star > CONSTRUCTION_TOL * self.b.norm_squared() {
            return Err(Error::Construction("consistent problem with F_* > 0".into()));
        }
        if !self.consistent && self.f_star <= 0.0 {
            return Err(Error::Construction("inconsistent problem with F_* = 0".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Thin left factor (`rows x cols`).
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.x_star
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn is_consistent(&self) -> bool {
        self.consistent
    }

    /// Row `i` (0-based) of `A`.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.cols();
        &self.a_rows[i * n..(i + 1) * n]
    }

    /// Right-singular vector `v_l` for 1-based `l`.
    pub fn right_singular(&self, l: usize) -> Result<&[f64]> {
        self.check_index(l)?;
        let n = self.cols();
        Ok(&self.v.as_slice()[(l - 1) * n..l * n])
    }

    /// `sigma_l^2` for 1-based `l`.
    pub fn sigma_sq(&self, l: usize) -> Result<f64> {
        self.check_index(l)?;
        Ok(self.sigma[l - 1] * self.sigma[l - 1])
    }

    pub(crate) fn check_index(&self, l: usize) -> Result<()> {
        if l == 0 || l > self.cols() {
            return Err(Error::IndexOutOfRange {
                index: l,
                max: self.cols(),
            });
        }
        Ok(())
    }

    /// `A x - b`.
    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.rows(), |i, _| dot(self.row(i), x.as_slice()) - self.b[i])
    }

    /// All eigencomponents `V^T (x - x_star)`.
    pub fn components(&self, x: &DVector<f64>) -> DVector<f64> {
        self.v.tr_mul(&(x - &self.x_star))
    }

    /// Short hex digest of `(A, b)` for provenance headers.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.rows() as u64).to_le_bytes());
        h.update((self.cols() as u64).to_le_bytes());
        for x in self.a_rows.iter().chain(self.b.iter()) {
            h.update(x.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

fn assemble(
    u: &DMatrix<f64>,
    sigma: &DVector<f64>,
    v: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = sigma.len();
    if n == 0 || v.nrows() != n || v.ncols() != n || u.ncols() != n || u.nrows() < n {
        return Err(Error::Dimension(format!(
            "inconsistent factor shapes: U {}x{}, sigma {}, V {}x{}",
            u.nrows(),
            u.ncols(),
            n,
            v.nrows(),
            v.ncols()
        )));
    }
    if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidSpec("singular values must be positive".into()));
    }
    if sigma.as_slice().windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidSpec("singular values must be descending".into()));
    }
    let a = u * DMatrix::from_diagonal(sigma) * v.transpose();
    let a_rows = a.transpose().as_slice().to_vec();
    Ok((a, a_rows))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Build an instance from a spectrum spec.
///
/// `spec.seed` drives the orthonormal factors; `seed` drives `x_true` and,
/// for inconsistent problems, the Gaussian perturbation. For an inconsistent
/// problem the whole perturbation `r` is scaled so that its component
/// orthogonal to `range(A)` has norm `noise_level * ||A x_true||`.
pub fn build_problem(
    spec: &SpectrumSpec,
    consistency: Consistency,
    seed: u64,
) -> Result<SyntheticProblem> {
    let sigma = DVector::from_vec(spec.singular_values()?);
    let u = random_orthonormal(spec.rows, spec.cols, mix_seed(spec.seed, 1))?;
    let v = random_orthonormal(spec.cols, spec.cols, mix_seed(spec.seed, 2))?;

    let mut rng = stream(mix_seed(seed, 1));
    let x_true = DVector::from_fn(spec.cols, |_, _| StandardNormal.sample(&mut rng));

    match consistency {
        Consistency::Consistent => SyntheticProblem::consistent(u, sigma, v, x_true),
        Consistency::Inconsistent { noise_level } => {
            if !(noise_level.is_finite() && noise_level > 0.0) {
                return Err(Error::InvalidSpec("noise_level must be positive".into()));
            }
            if spec.rows == spec.cols {
                return Err(Error::InvalidSpec(
                    "an inconsistent problem needs rows > cols".into(),
                ));
            }
            let mut rng = stream(mix_seed(seed, 2));
            let r = DVector::from_fn(spec.rows, |_, _| StandardNormal.sample(&mut rng));
            let r_perp = &r - &u * u.tr_mul(&r);
            let ax = (&u * DMatrix::from_diagonal(&sigma)) * v.tr_mul(&x_true);
            let scale = noise_level * ax.norm() / r_perp.norm();
            let b = ax + r * scale;
            SyntheticProblem::with_rhs(u, sigma, v, b)
        }
    }
}

/// Scalar constants that enter the second-moment bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemConstants {
    /// Number of rows `M`.
    pub rows: usize,
    /// `max_i ||a_i||^2`.
    pub l_tilde: f64,
    /// `sigma_max^2 / sigma_min^2`.
    pub c_a: f64,
    /// `||A||_F^2`.
    pub frob_sq: f64,
    /// Mean over rows of `||grad f_i(x_star)||^2` with `f_i = (M/2)(a_i^T x - b_i)^2`.
    pub sigma_noise_sq: f64,
    pub sigma_min_sq: f64,
    pub sigma_max_sq: f64,
    /// Minimum objective value `F_*`.
    pub f_star: f64,
}

pub fn compute_constants(p: &SyntheticProblem) -> ProblemConstants {
    let m = p.rows();
    let x = p.x_star.as_slice();
    let mut l_tilde: f64 = 0.0;
    let mut frob_sq = 0.0;
    let mut noise = 0.0;
    for i in 0..m {
        let row = p.row(i);
        let nsq = dot(row, row);
        l_tilde = l_tilde.max(nsq);
        frob_sq += nsq;
        let r = dot(row, x) - p.b[i];
        let g = m as f64 * r;
        noise += g * g * nsq;
    }
    let smax = p.sigma[0];
    let smin = p.sigma[p.cols() - 1];
    ProblemConstants {
        rows: m,
        l_tilde,
        c_a: (smax * smax) / (smin * smin),
        frob_sq,
        sigma_noise_sq: noise / m as f64,
        sigma_min_sq: smin * smin,
        sigma_max_sq: smax * smax,
        f_star: p.f_star,
    }
}

/// Signed eigencomponent `<x - x_star, v_l>` for 1-based `l`.
pub fn component(p: &SyntheticProblem, x: &DVector<f64>, l: usize) -> Result<f64> {
    let v = p.right_singular(l)?;
    if x.len() != p.cols() {
        return Err(Error::Dimension("x length must equal cols".into()));
    }
    Ok(x
        .iter()
        .zip(p.x_star.iter())
        .zip(v)
        .map(|((xi, si), vi)| (xi - si) * vi)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rows: usize, cols: usize, seed: u64) -> SpectrumSpec {
        SpectrumSpec {
            rows,
            cols,
            sigma_min: 0.1,
            sigma_max: 1.0,
            spacing: Spacing::Linear,
            seed,
        }
    }

    #[test]
    fn orthonormal_one_dim() {
        let q = random_orthonormal(1, 1, 99).unwrap();
        assert_eq!(q[(0, 0)].abs(), 1.0);
        assert_eq!(q.tr_mul(&q)[(0, 0)], 1.0);
    }

    #[test]
    fn orthonormal_identity_and_determinism() {
        let q = random_orthonormal(5, 3, 7).unwrap();
        let dev = (q.tr_mul(&q) - DMatrix::<f64>::identity(3, 3)).amax();
        assert!(dev < 1e-12);
        let q2 = random_orthonormal(5, 3, 7).unwrap();
        assert_eq!(q.as_slice(), q2.as_slice());
    }

    #[test]
    fn orthonormal_rejects_wide() {
        assert!(matches!(
            random_orthonormal(3, 5, 1),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn spectrum_endpoints_and_order() {
        for spacing in [Spacing::Linear, Spacing::Geometric] {
            let s = SpectrumSpec {
                rows: 40,
                cols: 17,
                sigma_min: 0.01,
                sigma_max: 2.0,
                spacing,
                seed: 0,
            }
            .singular_values()
            .unwrap();
            assert_eq!(s[0], 2.0);
            assert_eq!(s[16], 0.01);
            assert!(s.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn spec_validation() {
        assert!(spec(2, 3, 0).validate().is_err());
        let mut s = spec(3, 2, 0);
        s.sigma_min = 0.0;
        assert!(s.validate().is_err());
        let mut s = spec(3, 2, 0);
        s.sigma_max = 0.05;
        assert!(s.validate().is_err());
    }

    #[test]
    fn tiny_consistent_problem_recovers_x_true() {
        let c = 3.25;
        let u = DMatrix::from_column_slice(2, 1, &[0.6, 0.8]);
        let v = DMatrix::from_element(1, 1, 1.0);
        let p = SyntheticProblem::consistent(
            u,
            DVector::from_element(1, 1.0),
            v,
            DVector::from_element(1, c),
        )
        .unwrap();
        assert_eq!(p.x_star()[0], c);
        assert_eq!(p.f_star(), 0.0);
        assert!(p.is_consistent());
    }

    #[test]
    fn inconsistent_f_star_matches_projection_residual() {
        let p = build_problem(
            &spec(3, 2, 11),
            Consistency::Inconsistent { noise_level: 0.5 },
            5,
        )
        .unwrap();
        // oracle: SVD-based pseudoinverse of A, independent of the stored factors
        let pinv = p.a().clone().pseudo_inverse(1e-14).unwrap();
        let proj = p.a() * (&pinv * p.b());
        let oracle = 0.5 * (p.b() - proj).norm_squared();
        assert!((p.f_star() - oracle).abs() <= 1e-12 * oracle.max(1e-300));
        assert!(p.f_star() > 0.0);
        assert!(!p.is_consistent());

        // ||r_perp|| / ||A x_true|| = noise_level, where r_perp is b's residual
        let x_star_oracle = &pinv * p.b();
        assert!((p.x_star() - &x_star_oracle).norm() < 1e-10 * x_star_oracle.norm());
    }

    #[test]
    fn inconsistent_needs_tall_matrix() {
        assert!(build_problem(
            &spec(3, 3, 1),
            Consistency::Inconsistent { noise_level: 0.1 },
            1
        )
        .is_err());
    }

    #[test]
    fn identity_constants() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let p = SyntheticProblem::consistent(
            i2.clone(),
            DVector::from_element(2, 1.0),
            i2,
            DVector::from_vec(vec![1.0, -2.0]),
        )
        .unwrap();
        let c = compute_constants(&p);
        assert_eq!(c.l_tilde, 1.0);
        assert_eq!(c.c_a, 1.0);
        assert_eq!(c.frob_sq, 2.0);
        assert_eq!(c.sigma_noise_sq, 0.0);
    }

    #[test]
    fn consistent_noise_vanishes() {
        let p = build_problem(&spec(30, 20, 3), Consistency::Consistent, 4).unwrap();
        let c = compute_constants(&p);
        assert!(c.sigma_noise_sq <= 1e-18 * p.b().norm_squared());
        assert!(p.residual(p.x_star()).norm() <= 1e-10 * p.b().norm());
    }

    #[test]
    fn noise_constant_matches_row_sum() {
        let p = build_problem(
            &spec(3, 2, 21),
            Consistency::Inconsistent { noise_level: 0.3 },
            8,
        )
        .unwrap();
        let c = compute_constants(&p);
        // brute force: (1/M) sum_i || M (a_i^T x* - b_i) a_i ||^2
        let m = 3.0;
        let mut total = 0.0;
        for i in 0..3 {
            let a_i = p.a().row(i).transpose();
            let r = a_i.dot(p.x_star()) - p.b()[i];
            total += (a_i * (m * r)).norm_squared();
        }
        total /= m;
        assert!((c.sigma_noise_sq - total).abs() <= 1e-12 * total);
        let frob: f64 = p.sigma().iter().map(|s| s * s).sum();
        assert!((c.frob_sq - frob).abs() < 1e-12 * frob);
        assert!(c.c_a >= 1.0 && c.l_tilde > 0.0);
    }

    #[test]
    fn component_basics() {
        let p = build_problem(&spec(8, 5, 9), Consistency::Consistent, 1).unwrap();
        for l in 1..=5 {
            assert_eq!(component(&p, p.x_star(), l).unwrap(), 0.0);
        }
        let v3 = DVector::from_column_slice(p.right_singular(3).unwrap());
        let x = p.x_star() + v3;
        for l in 1..=5 {
            let c = component(&p, &x, l).unwrap();
            let want = if l == 3 { 1.0 } else { 0.0 };
            assert!((c - want).abs() < 1e-12, "l={l} c={c}");
        }
        assert!(matches!(
            component(&p, &x, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(component(&p, &x, 6).is_err());
    }

    #[test]
    fn reconstruction_and_determinism() {
        let s = spec(12, 7, 4);
        let p = build_problem(&s, Consistency::Consistent, 2).unwrap();
        let rebuilt = p.u() * DMatrix::from_diagonal(p.sigma()) * p.v().transpose();
        assert!((rebuilt - p.a()).norm() <= 1e-10 * p.a().norm());
        let q = build_problem(&s, Consistency::Consistent, 2).unwrap();
        assert_eq!(p.a().as_slice(), q.a().as_slice());
        assert_eq!(p.b().as_slice(), q.b().as_slice());
        assert_eq!(p.digest(), q.digest());
    }
}
