use serde::{Deserialize, Serialize};

use crate::physics::g2::g2_unchecked;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// `amplitude / (1 + (2(x - center)/fwhm)²) + offset`
    LorentzianPeak,
    /// `A e^{-t/T} sin(Ω t + φ) + c`
    DampedSine,
    /// `A sin(φ + φ0) + c`
    PhaseSine,
    /// `A0 e^{-(τ/T2)²} + c`
    GaussianEnvelope,
    /// `1 - a e^{-3γτ/4}(cos ωτ + (3γ/4ω) sin ωτ)`
    G2Model,
}

impl ModelKind {
    pub fn names(&self) -> &'static [&'static str] {
        match self {
            Self::LorentzianPeak => &["amplitude", "center", "fwhm", "offset"],
            Self::DampedSine => &["amplitude", "decay_time", "omega", "phase", "offset"],
            Self::PhaseSine => &["amplitude", "phase", "offset"],
            Self::GaussianEnvelope => &["amplitude", "t2_star", "offset"],
            Self::G2Model => &["gamma", "omega", "contrast"],
        }
    }

    /// Units for plot-ready summaries, given the unit of `x`.
    pub fn units(&self) -> &'static [&'static str] {
        match self {
            Self::LorentzianPeak => &["counts", "MHz", "MHz", "counts"],
            Self::DampedSine => &["counts", "ns", "rad/ns", "rad", "counts"],
            Self::PhaseSine => &["1", "rad", "1"],
            Self::GaussianEnvelope => &["1", "ns", "1"],
            Self::G2Model => &["rad/ns", "rad/ns", "1"],
        }
    }

    pub fn arity(&self) -> usize {
        self.names().len()
    }

    pub fn eval<T: Real>(&self, x: T, p: &[T]) -> T {
        match self {
            Self::LorentzianPeak => {
                let u = T::lit(2.0) * (x - p[1]) / p[2];
                p[0] / (T::one() + u * u) + p[3]
            }
            Self::DampedSine => p[0] * (-x / p[1]).exp() * (p[2] * x + p[3]).sin() + p[4],
            Self::PhaseSine => p[0] * (x + p[1]).sin() + p[2],
            Self::GaussianEnvelope => {
                let u = x / p[1];
                p[0] * (-u * u).exp() + p[2]
            }
            Self::G2Model => T::one() - p[2] * (T::one() - g2_unchecked(x, p[0], p[1])),
        }
    }

    /// Unbounded box for every parameter except the physically positive ones.
    pub fn default_bounds<T: Real>(&self) -> Vec<(T, T)> {
        let inf = T::infinity();
        let free = (-inf, inf);
        let pos = (T::min_positive_value(), inf);
        match self {
            Self::LorentzianPeak => vec![free, free, pos, free],
            Self::DampedSine => vec![free, pos, pos, free, free],
            Self::PhaseSine => vec![free, free, free],
            Self::GaussianEnvelope => vec![free, pos, free],
            Self::G2Model => vec![(T::zero(), inf), pos, free],
        }
    }
}

/// A model together with per-parameter bounds; `lo == hi` fixes a parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FitModel<T: Real> {
    pub kind: ModelKind,
    pub bounds: Vec<(T, T)>,
}

impl<T: Real> FitModel<T> {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            bounds: kind.default_bounds(),
        }
    }

    pub fn fix(mut self, index: usize, value: T) -> Self {
        self.bounds[index] = (value, value);
        self
    }

    pub fn bound(mut self, index: usize, lo: T, hi: T) -> Self {
        self.bounds[index] = (lo, hi);
        self
    }

    pub fn eval(&self, x: T, p: &[T]) -> T {
        self.kind.eval(x, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::g2::g2_analytic;

    #[test]
    fn g2_model_is_g2_analytic_at_unit_contrast() {
        for k in 0..500 {
            let tau = k as f64 * 0.05;
            let a = ModelKind::G2Model.eval(tau, &[0.19, 1.3, 1.0]);
            assert_eq!(a, g2_analytic(tau, 0.19, 1.3).unwrap());
        }
    }

    #[test]
    fn lorentzian_half_max_at_half_width() {
        let p = [10.0_f64, 3.0, 31.0, 1.0];
        assert_eq!(ModelKind::LorentzianPeak.eval(3.0, &p), 11.0);
        assert!((ModelKind::LorentzianPeak.eval(3.0 + 15.5, &p) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn arity_matches_bounds() {
        for k in [
            ModelKind::LorentzianPeak,
            ModelKind::DampedSine,
            ModelKind::PhaseSine,
            ModelKind::GaussianEnvelope,
            ModelKind::G2Model,
        ] {
            assert_eq!(k.arity(), k.default_bounds::<f64>().len());
            assert_eq!(k.arity(), k.units().len());
        }
    }
}
