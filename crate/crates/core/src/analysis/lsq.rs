//! Bounded Levenberg–Marquardt with a central-difference Jacobian.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::models::{FitModel, ModelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FitStatus {
    /// Relative objective change, gradient or step below tolerance.
    Converged,
    MaxIterations,
    /// Normal matrix singular or numerically rank deficient at the optimum.
    Degenerate,
    /// Model-specific sanity check failed (e.g. less than one period).
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T: Real> {
    pub model: ModelKind,
    pub params: Vec<T>,
    pub stderr: Vec<T>,
    /// `sqrt(Σ w r²)`.
    pub residual_norm: T,
    /// `Σ w r² / dof`.
    pub reduced_chi2: T,
    pub dof: usize,
    pub converged: bool,
    pub status: FitStatus,
    pub n_iter: usize,
}

impl<T: Real> FitResult<T> {
    pub fn names(&self) -> &'static [&'static str] {
        self.model.names()
    }

    /// Parameter by name.
    pub fn get(&self, name: &str) -> Option<T> {
        self.index(name).map(|i| self.params[i])
    }

    pub fn err(&self, name: &str) -> Option<T> {
        self.index(name).map(|i| self.stderr[i])
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names().iter().position(|n| *n == name)
    }

    pub(crate) fn reject(mut self) -> Self {
        self.converged = false;
        self.status = FitStatus::Rejected;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions<T: Real> {
    pub max_iter: usize,
    /// Relative objective change.
    pub ftol: T,
    /// Infinity norm of `Jᵀ W r`, relative to `max(1, cost)`.
    pub gtol: T,
    /// Treat weights as exact inverse variances instead of rescaling the
    /// covariance by the reduced χ².
    pub absolute_sigma: bool,
}

impl<T: Real> Default for LmOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 200,
            ftol: T::lit(1e-10),
            gtol: T::lit(1e-8),
            absolute_sigma: false,
        }
    }
}

/// Weighted least-squares fit of `model` to `(xs, ys)` from `init`.
///
/// `weights` are inverse variances; `None` means uniform.
pub fn fit_least_squares<T: Real>(
    model: &FitModel<T>,
    xs: &[T],
    ys: &[T],
    weights: Option<&[T]>,
    init: &[T],
    opts: &LmOptions<T>,
) -> Result<FitResult<T>> {
    let k = model.kind.arity();
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "xs and ys differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if init.len() != k || model.bounds.len() != k {
        return Err(Error::InvalidInput(format!(
            "{:?} takes {k} parameters, got init {} / bounds {}",
            model.kind,
            init.len(),
            model.bounds.len()
        )));
    }

    if xs.iter().chain(ys).chain(init).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite data or initial value".into()));
    }
    let w: Vec<T> = match weights {
        Some(w) => {
            if w.len() != xs.len() || w.iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
                return Err(Error::InvalidInput("weights must be finite, >= 0, one per point".into()));
            }
            w.iter().map(|v| v.sqrt()).collect()
        }
        None => vec![T::one(); xs.len()],
    };
    for (i, (lo, hi)) in model.bounds.iter().enumerate() {
        if !(lo <= hi) {
            return Err(Error::InvalidInput(format!("bound {i}: lo > hi")));
        }
    }
    let free: Vec<usize> = (0..k).filter(|&i| model.bounds[i].0 < model.bounds[i].1).collect();
    let m = free.len();
    if xs.len() < m + 1 {
        return Err(Error::InvalidInput(format!(
            "need at least {} points for {:?} with {m} free parameters, got {}",
            m + 1,
            model.kind,
            xs.len()
        )));
    }
    let n = xs.len();
    let dof = n.saturating_sub(m).max(1);

    let clamp = |j: usize, v: T| v.max(model.bounds[j].0).min(model.bounds[j].1);
    let mut p: Vec<T> = init.iter().enumerate().map(|(j, v)| clamp(j, *v)).collect();

    let residuals = |p: &[T], out: &mut Vec<T>| {
        out.clear();
        out.extend((0..n).map(|i| w[i] * (ys[i] - model.kind.eval(xs[i], p))));
    };
    let cost_of = |r: &[T]| r.iter().fold(T::zero(), |a, v| a + *v * *v);
    let jacobian = |p: &[T], jac: &mut Vec<Vec<T>>| {
        let h0 = T::epsilon().cbrt();
        let mut q = p.to_vec();
        for (c, &j) in free.iter().enumerate() {
            let h = h0 * p[j].abs().max(T::one());
            let up = clamp(j, p[j] + h);
            let dn = clamp(j, p[j] - h);
            let span = up - dn;
            for i in 0..n {
                q[j] = up;
                let fu = model.kind.eval(xs[i], &q);
                q[j] = dn;
                let fd = model.kind.eval(xs[i], &q);
                // residual derivative is -w df/dp
                jac[i][c] = -w[i] * (fu - fd) / span;
            }
            q[j] = p[j];
        }
    };

    let mut r = Vec::with_capacity(n);
    residuals(&p, &mut r);
    let mut cost = cost_of(&r);
    if !cost.is_finite() {
        return Err(Error::InvalidInput("model not finite at initial parameters".into()));
    }
    let mut jac = vec![vec![T::zero(); m]; n];
    let mut lambda = T::lit(1e-3);
    let mut status = FitStatus::MaxIterations;
    let mut n_iter = 0;
    let mut trial = vec![T::zero(); k];
    let mut r_trial = Vec::with_capacity(n);

    if m == 0 {
        status = FitStatus::Converged;
    }
    while m > 0 && n_iter < opts.max_iter {
        n_iter += 1;
        jacobian(&p, &mut jac);
        let (a, g) = normal_equations(&jac, &r);
        let gnorm = g.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        if cost == T::zero() || gnorm <= opts.gtol * cost.max(T::one()) {
            status = FitStatus::Converged;
            break;
        }
        let mut accepted = false;
        while lambda < T::lit(1e16) {
            let mut damped = a.clone();
            for d in 0..m {
                let diag = a[d][d].max(T::epsilon() * T::lit(1e3));
                damped[d][d] = a[d][d] + lambda * diag;
            }
            // Gauss-Newton direction for residuals r: -(JᵀJ)⁻¹ Jᵀ r
            let Some(step) = cholesky_solve(&damped, &g) else {
                lambda *= T::lit(10.0);
                continue;
            };
            trial.copy_from_slice(&p);
            for (c, &j) in free.iter().enumerate() {
                trial[j] = clamp(j, p[j] - step[c]);
            }
            residuals(&trial, &mut r_trial);
            let new_cost = cost_of(&r_trial);
            if new_cost.is_finite() && new_cost <= cost {
                let rel = (cost - new_cost) / cost.max(T::min_positive_value());
                let moved = free.iter().any(|&j| trial[j] != p[j]);
                p.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut r_trial);
                cost = new_cost;
                lambda = (lambda / T::lit(3.0)).max(T::lit(1e-12));
                accepted = true;
                if rel < opts.ftol || !moved {
                    status = FitStatus::Converged;
                }
                break;
            }
            lambda *= T::lit(10.0);
        }
        if !accepted {
            // no downhill step at any damping: stationary to working precision
            status = FitStatus::Converged;
            break;
        }
        if status == FitStatus::Converged {
            break;
        }
    }

    jacobian(&p, &mut jac);
    let (a, _) = normal_equations(&jac, &r);
    let scale = if opts.absolute_sigma {
        T::one()
    } else {
        cost / T::from_usize_lossy(dof)
    };
    let mut stderr = vec![T::zero(); k];
    match invert_spd(&a) {
        Some(cov) => {
            for (c, &j) in free.iter().enumerate() {
                stderr[j] = (cov[c][c] * scale).max(T::zero()).sqrt();
            }
        }
        None => {
            status = FitStatus::Degenerate;
            for &j in &free {
                stderr[j] = T::infinity();
            }
        }
    }
    Ok(FitResult {
        model: model.kind,
        params: p,
        stderr,
        residual_norm: cost.sqrt(),
        reduced_chi2: cost / T::from_usize_lossy(dof),
        dof,
        converged: status == FitStatus::Converged,
        status,
        n_iter,
    })
}

fn normal_equations<T: Real>(jac: &[Vec<T>], r: &[T]) -> (Vec<Vec<T>>, Vec<T>) {
    let m = jac.first().map_or(0, |row| row.len());
    let mut a = vec![vec![T::zero(); m]; m];
    let mut g = vec![T::zero(); m];
    for (row, ri) in jac.iter().zip(r) {
        for c in 0..m {
            g[c] += row[c] * *ri;
            for d in 0..=c {
                a[c][d] += row[c] * row[d];
            }
        }
    }
    for c in 0..m {
        for d in 0..c {
            a[d][c] = a[c][d];
        }
    }
    (a, g)
}

/// Lower Cholesky factor, or `None` if not numerically positive definite.
fn cholesky<T: Real>(a: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let m = a.len();
    let mut l = vec![vec![T::zero(); m]; m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

pub(crate) fn cholesky_solve<T: Real>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let l = cholesky(a)?;
    Some(solve_factored(&l, b))
}

fn solve_factored<T: Real>(l: &[Vec<T>], b: &[T]) -> Vec<T> {
    let m = l.len();
    let mut y = b.to_vec();
    for i in 0..m {
        for k in 0..i {
            let t = l[i][k] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i][i];
    }
    for i in (0..m).rev() {
        for k in i + 1..m {
            let t = l[k][i] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i][i];
    }
    y
}

/// Inverse of a symmetric positive definite matrix after equilibration;
/// `None` when the scaled matrix is singular or its pivots span more than
/// `eps^(-2/3)`.
fn invert_spd<T: Real>(a: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let m = a.len();
    let d: Vec<T> = (0..m).map(|i| a[i][i]).collect();
    if d.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
        return None;
    }
    let s: Vec<T> = d.iter().map(|v| T::one() / v.sqrt()).collect();
    let scaled: Vec<Vec<T>> = (0..m)
        .map(|i| (0..m).map(|j| a[i][j] * s[i] * s[j]).collect())
        .collect();
    let l = cholesky(&scaled)?;
    let piv: Vec<T> = (0..m).map(|i| l[i][i] * l[i][i]).collect();
    let lo = piv.iter().fold(T::infinity(), |a, v| a.min(*v));
    let hi = piv.iter().fold(T::zero(), |a, v| a.max(*v));
    if lo < hi * T::epsilon().powf(T::lit(2.0 / 3.0)) {
        return None;
    }
    let mut inv = vec![vec![T::zero(); m]; m];
    for c in 0..m {
        let mut e = vec![T::zero(); m];
        e[c] = T::one();
        let col = solve_factored(&l, &e);
        for r in 0..m {
            inv[r][c] = col[r] * s[r] * s[c];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = vec![vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]];
        let b = vec![1.0, 2.0, 3.0];
        let x = cholesky_solve(&a, &b).unwrap();
        for i in 0..3 {
            let v: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            assert!((v - b[i]).abs() < 1e-12);
        }
        let inv = invert_spd(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i][k] * inv[k][j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_detected() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(invert_spd(&a).is_none());
        let a = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        assert!(invert_spd(&a).is_none());
    }
}
