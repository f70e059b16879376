//! Intensity correlations of a driven two-level emitter.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::physics::bloch::BlochDrive;
use crate::scalar::Real;

/// `g²(τ) = 1 - e^{-3γτ/4}(cos ωτ + (3γ/4ω) sin ωτ)`; `tau` in ns, rates in rad/ns.
pub fn g2_analytic<T: Real>(tau: T, gamma: T, omega: T) -> Result<T> {
    if !(omega > T::zero()) {
        return Err(Error::InvalidArgument(format!("omega must be > 0, got {omega}")));
    }
    if gamma < T::zero() || tau < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "gamma and tau must be >= 0 (gamma {gamma}, tau {tau})"
        )));
    }
    Ok(g2_unchecked(tau, gamma, omega))
}

pub(crate) fn g2_unchecked<T: Real>(tau: T, gamma: T, omega: T) -> T {
    let q = T::lit(0.75) * gamma;
    let wt = omega * tau;
    T::one() - (-q * tau).exp() * (wt.cos() + q / omega * wt.sin())
}

/// Oscillation frequency `sqrt(Ω² - Γ²/16)` in the resonant correlation
/// function, or `None` in the overdamped regime.
pub fn g2_oscillation(rabi: f64, decay: f64) -> Option<f64> {
    let w2 = rabi * rabi - decay * decay / 16.0;
    (w2 > 0.0).then(|| w2.sqrt())
}

/// Inverse-CDF sampler for the delay between consecutive emissions.
///
/// After each emission the emitter restarts in the ground state and evolves
/// under the no-jump Hamiltonian; the survival `S(t) = |ψ(t)|²` is tabulated
/// once and inverted by bisection.
#[derive(Debug, Clone)]
pub struct WaitingTimeSampler {
    step: f64,
    survival: Vec<f64>,
}

impl WaitingTimeSampler {
    pub fn new(drive: &BlochDrive<f64>) -> Result<Self> {
        if !(drive.decay > 0.0) || !(drive.rabi > 0.0) {
            return Err(Error::InvalidArgument(
                "waiting-time sampler needs decay > 0 and nonzero drive".into(),
            ));
        }
        let rate = drive.decay.max(drive.rabi).max(drive.detuning.abs());
        let step = 0.01 / rate;
        let i = Complex::new(0.0, 1.0);
        let e_iphi = Complex::new(drive.phase.cos(), drive.phase.sin());
        let half_rabi = 0.5 * drive.rabi;
        // i dψ/dt = H_eff ψ with ψ = (c_g, c_e)
        let deriv = |g: Complex<f64>, e: Complex<f64>| {
            let dg = -i * (e_iphi * half_rabi * e);
            let de = -i * (e_iphi.conj() * half_rabi * g - drive.detuning * e)
                - e * (0.5 * drive.decay);
            (dg, de)
        };
        let (mut g, mut e) = (Complex::new(1.0, 0.0), Complex::new(0.0, 0.0));
        let mut survival = vec![1.0];
        let cap = 50_000_000usize;
        while survival.last().copied().unwrap_or(0.0) > 1e-13 {
            let (k1g, k1e) = deriv(g, e);
            let (k2g, k2e) = deriv(g + k1g * (step / 2.0), e + k1e * (step / 2.0));
            let (k3g, k3e) = deriv(g + k2g * (step / 2.0), e + k2e * (step / 2.0));
            let (k4g, k4e) = deriv(g + k3g * step, e + k3e * step);
            g += (k1g + k2g * 2.0 + k3g * 2.0 + k4g) * (step / 6.0);
            e += (k1e + k2e * 2.0 + k3e * 2.0 + k4e) * (step / 6.0);
            let s = (g.norm_sqr() + e.norm_sqr()).min(*survival.last().unwrap());
            survival.push(s);
            if survival.len() > cap {
                return Err(Error::InvalidArgument("waiting-time table did not converge".into()));
            }
        }
        Ok(Self { step, survival })
    }

    /// Mean delay between emissions, ns.
    pub fn mean(&self) -> f64 {
        // ∫ S(t) dt, trapezoid
        let n = self.survival.len();
        let sum: f64 = self.survival.iter().sum::<f64>() - 0.5 * (self.survival[0] + self.survival[n - 1]);
        sum * self.step
    }

    /// Delay (ns) with survival equal to `u ∈ (0, 1]`.
    pub fn invert(&self, u: f64) -> f64 {
        let s = &self.survival;
        // survival is non-increasing: first index with s[k] < u
        let k = s.partition_point(|&v| v >= u);
        if k == 0 {
            return 0.0;
        }
        if k >= s.len() {
            return (s.len() - 1) as f64 * self.step;
        }
        let (a, b) = (s[k - 1], s[k]);
        let frac = if a > b { (a - u) / (a - b) } else { 0.0 };
        ((k - 1) as f64 + frac) * self.step
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        self.invert(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::rng::derive_stream;

    #[test]
    fn formula_identities() {
        assert_eq!(g2_analytic(0.0, 0.2, 1.3).unwrap(), 0.0);
        assert_eq!(g2_analytic(0.0f32, 0.2, 1.3).unwrap(), 0.0);
        let v: f64 = g2_analytic(400.0, 0.2, 1.3).unwrap();
        assert!((v - 1.0).abs() < (-0.75f64 * 0.2 * 400.0).exp() * 3.0);
        assert!(g2_analytic(1.0, 0.2, 0.0).is_err());
        for k in 0..2000 {
            let v = g2_analytic(k as f64 * 0.01, 0.2, 2.0).unwrap();
            assert!((0.0..=2.0).contains(&v));
        }
    }

    #[test]
    fn waiting_time_mean_is_inverse_rate() {
        let gamma = 0.19478_f64;
        let rabi = 1.5 * gamma;
        let drive = BlochDrive {
            detuning: 0.0,
            rabi,
            phase: 0.0,
            decay: gamma,
        };
        let w = WaitingTimeSampler::new(&drive).unwrap();
        // steady emission rate Γ ρ_ee
        let rho_ee = rabi * rabi / (gamma * gamma + 2.0 * rabi * rabi);
        let expect = 1.0 / (gamma * rho_ee);
        assert!((w.mean() / expect - 1.0).abs() < 1e-4, "{} vs {expect}", w.mean());
        let mut rng = derive_stream(1, 0);
        let n = 200_000;
        let m = (0..n).map(|_| w.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m / expect - 1.0).abs() < 0.01);
    }
}
