//! Model-specific fits with data-driven initial guesses.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::lsq::{cholesky_solve, fit_least_squares, FitResult, LmOptions};
use super::models::{FitModel, ModelKind};

/// Poisson inverse-variance weights `1 / max(y, 1)`.
pub fn poisson_weights<T: Real>(ys: &[T]) -> Vec<T> {
    ys.iter().map(|y| T::one() / y.max(T::one())).collect()
}

fn span<T: Real>(xs: &[T]) -> (T, T) {
    xs.iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

fn wrap_phase<T: Real>(phi: T) -> T {
    let tau = T::TAU();
    let mut p = phi % tau;
    if p > T::PI() {
        p -= tau;
    } else if p <= -T::PI() {
        p += tau;
    }
    p
}

/// Linear least squares `y ≈ Σ c_k b_k(x)`; `None` if the basis is singular.
fn linear_fit<T: Real>(xs: &[T], ys: &[T], basis: &dyn Fn(T) -> Vec<T>) -> Option<Vec<T>> {
    let k = basis(xs[0]).len();
    let mut a = vec![vec![T::zero(); k]; k];
    let mut b = vec![T::zero(); k];
    for (x, y) in xs.iter().zip(ys) {
        let f = basis(*x);
        for i in 0..k {
            b[i] += f[i] * *y;
            for j in 0..k {
                a[i][j] += f[i] * f[j];
            }
        }
    }
    cholesky_solve(&a, &b)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PeakOptions<T: Real> {
    /// Only points with `x` inside this window are fitted.
    pub window: Option<(T, T)>,
    /// Uniform weights instead of Poisson.
    pub uniform_weights: bool,
}

/// Lorentzian peak on a constant background, seeded from the maximum and the
/// second moment of the excess above a low quantile.
pub fn fit_lorentzian<T: Real>(xs: &[T], ys: &[T], opts: &PeakOptions<T>) -> Result<FitResult<T>> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("xs and ys differ in length".into()));
    }
    let (px, py): (Vec<T>, Vec<T>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, _)| opts.window.is_none_or(|(lo, hi)| **x >= lo && **x <= hi))
        .map(|(x, y)| (*x, *y))
        .unzip();
    if px.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "peak fit needs at least 5 points in the window, got {}",
            px.len()
        )));
    }
    let mut sorted = py.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let offset = sorted[sorted.len() / 5];
    let (imax, ymax) = py
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |acc, (i, y)| if *y > acc.1 { (i, *y) } else { acc });
    let amp = ymax - offset;
    let center = px[imax];
    let (lo, hi) = span(&px);
    let step = (hi - lo) / T::from_usize_lossy(px.len() - 1);
    let cut = T::lit(0.2) * amp;
    let (mut w0, mut w2) = (T::zero(), T::zero());
    for (x, y) in px.iter().zip(&py) {
        let e = *y - offset;
        if e > cut {
            w0 += e;
            w2 += e * (*x - center) * (*x - center);
        }
    }
    let fwhm = if w0 > T::zero() {
        (T::lit(2.2) * (w2 / w0).sqrt()).max(step)
    } else {
        step
    };
    let weights = if opts.uniform_weights { None } else { Some(poisson_weights(&py)) };
    let model = FitModel::new(ModelKind::LorentzianPeak).bound(0, T::zero(), T::infinity());
    fit_least_squares(
        &model,
        &px,
        &py,
        weights.as_deref(),
        &[amp.max(T::zero()), center, fwhm, offset],
        &LmOptions::default(),
    )
}

/// Dominant angular frequency of `ys - mean` over non-uniform samples.
pub fn dominant_frequency<T: Real>(ts: &[T], ys: &[T]) -> T {
    let n = ts.len();
    let mean = ys.iter().fold(T::zero(), |a, y| a + *y) / T::from_usize_lossy(n);
    let (lo, hi) = span(ts);
    let duration = hi - lo;
    let power = |omega: T| {
        let (mut c, mut s) = (T::zero(), T::zero());
        for (t, y) in ts.iter().zip(ys) {
            let ph = omega * (*t - lo);
            c += (*y - mean) * ph.cos();
            s += (*y - mean) * ph.sin();
        }
        c * c + s * s
    };
    let base = T::TAU() / duration;
    let (mut best, mut best_p) = (base, T::neg_infinity());
    for k in 1..=n / 2 {
        let w = base * T::from_usize_lossy(k);
        let p = power(w);
        if p > best_p {
            best = w;
            best_p = p;
        }
    }
    // refine within ±1 bin
    let mut w = best - base;
    let step = base / T::lit(40.0);
    let end = best + base;
    while w <= end {
        if w > T::zero() {
            let p = power(w);
            if p > best_p {
                best = w;
                best_p = p;
            }
        }
        w += step;
    }
    best
}

/// `A e^{-t/T} sin(Ω t + φ) + c`, seeded from the dominant spectral bin and
/// a linear fit of amplitude and phase. Fits spanning less than one period
/// of the fitted frequency are flagged as not converged.
pub fn fit_damped_sine<T: Real>(ts: &[T], ys: &[T], weights: Option<&[T]>) -> Result<FitResult<T>> {
    if ts.len() != ys.len() || ts.len() < 6 {
        return Err(Error::InvalidInput(format!(
            "damped sine needs >= 6 equal-length samples, got {} / {}",
            ts.len(),
            ys.len()
        )));
    }
    let (lo, hi) = span(ts);
    let duration = hi - lo;
    if !(duration > T::zero()) {
        return Err(Error::InvalidInput("time axis has zero span".into()));
    }
    let omega = dominant_frequency(ts, ys);
    let model = FitModel::new(ModelKind::DampedSine);
    let mut best: Option<FitResult<T>> = None;
    for scale in [T::lit(0.3), T::one(), T::lit(3.0)] {
        let decay = duration * scale;
        let Some(c) = linear_fit(ts, ys, &|t: T| {
            let e = (-t / decay).exp();
            vec![e * (omega * t).sin(), e * (omega * t).cos(), T::one()]
        }) else {
            continue;
        };
        let amp = c[0].hypot(c[1]);
        let phase = c[1].atan2(c[0]);
        let Ok(fit) = fit_least_squares(
            &model,
            ts,
            ys,
            weights,
            &[amp, decay, omega, phase, c[2]],
            &LmOptions::default(),
        ) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| fit.residual_norm < b.residual_norm) {
            best = Some(fit);
        }
    }
    let mut fit = best.ok_or_else(|| Error::InvalidInput("degenerate damped-sine data".into()))?;
    if fit.params[0] < T::zero() {
        fit.params[0] = -fit.params[0];
        fit.params[3] += T::PI();
    }
    fit.params[3] = wrap_phase(fit.params[3]);
    if fit.params[2] * duration < T::TAU() {
        fit = fit.reject();
    }
    Ok(fit)
}

/// `A sin(φ + φ0) + c` with `A >= 0`; exact linear solution refined by LM
/// for standard errors.
pub fn fit_phase_fringe<T: Real>(phases: &[T], ys: &[T], weights: Option<&[T]>) -> Result<FitResult<T>> {
    if phases.len() != ys.len() {
        return Err(Error::InvalidInput("phases and values differ in length".into()));
    }
    let mut distinct: Vec<T> = phases.iter().map(|p| wrap_phase(*p)).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup_by(|a, b| (*a - *b).abs() < T::lit(1e-9));
    if distinct.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "phase fringe needs at least 4 distinct phases, got {}",
            distinct.len()
        )));
    }
    let c = linear_fit(phases, ys, &|p: T| vec![p.sin(), p.cos(), T::one()])
        .ok_or_else(|| Error::InvalidInput("singular phase design".into()))?;
    let init = [c[0].hypot(c[1]), c[1].atan2(c[0]), c[2]];
    let mut fit = fit_least_squares(
        &FitModel::new(ModelKind::PhaseSine),
        phases,
        ys,
        weights,
        &init,
        &LmOptions::default(),
    )?;
    if fit.params[0] < T::zero() {
        fit.params[0] = -fit.params[0];
        fit.params[1] += T::PI();
    }
    fit.params[1] = wrap_phase(fit.params[1]);
    Ok(fit)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EnvelopeOptions<T: Real> {
    /// Fit a constant offset (fixed at 0 otherwise).
    pub offset: bool,
    /// Hold the amplitude at this value.
    pub fixed_amplitude: Option<T>,
}

/// `A0 e^{-(τ/T2*)²}`, seeded from a line through `(τ², ln A)`.
pub fn fit_gaussian_envelope<T: Real>(
    taus: &[T],
    amps: &[T],
    weights: Option<&[T]>,
    opts: &EnvelopeOptions<T>,
) -> Result<FitResult<T>> {
    if taus.len() != amps.len() || taus.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "envelope fit needs >= 3 equal-length points, got {} / {}",
            taus.len(),
            amps.len()
        )));
    }
    let (pt, pa): (Vec<T>, Vec<T>) = taus
        .iter()
        .zip(amps)
        .filter(|(_, a)| **a > T::zero())
        .map(|(t, a)| (*t * *t, a.ln()))
        .unzip();
    let (lo, hi) = span(taus);
    let mut a0 = amps.iter().fold(T::zero(), |m, a| m.max(*a));
    let mut t2 = (hi - lo).max(T::lit(1e-3)) / T::lit(2.0);
    if pt.len() >= 2 {
        if let Some(c) = linear_fit(&pt, &pa, &|x: T| vec![x, T::one()]) {
            if c[0] < T::zero() {
                t2 = (-T::one() / c[0]).sqrt();
                a0 = c[1].exp();
            }
        }
    }
    let mut model = FitModel::new(ModelKind::GaussianEnvelope);
    if !opts.offset {
        model = model.fix(2, T::zero());
    }
    if let Some(a) = opts.fixed_amplitude {
        model = model.fix(0, a);
        a0 = a;
    }
    let fit = fit_least_squares(&model, taus, amps, weights, &[a0, t2, T::zero()], &LmOptions::default())?;
    if pt.len() < 3 {
        return Ok(fit.reject());
    }
    Ok(fit)
}

/// Contrast-scaled two-level `g²` model from `(γ, ω, contrast)` seeds.
pub fn fit_g2<T: Real>(taus: &[T], ys: &[T], weights: Option<&[T]>, init: [T; 3]) -> Result<FitResult<T>> {
    let model = FitModel::new(ModelKind::G2Model).bound(2, T::zero(), T::lit(2.0));
    fit_least_squares(&model, taus, ys, weights, &init, &LmOptions::default())
}

/// `g²(0)` implied by a fitted [`ModelKind::G2Model`].
pub fn g2_zero<T: Real>(fit: &FitResult<T>) -> T {
    T::one() - fit.params[2]
}
