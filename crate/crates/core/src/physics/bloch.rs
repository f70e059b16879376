//! Optical Bloch equations for a driven two-level system with radiative decay.
//!
//! Rotating frame at the laser frequency, `H = -Δ|e⟩⟨e| + (Ω/2)(e^{iφ}|g⟩⟨e| + h.c.)`
//! with `Δ = ω_laser - ω_emitter` and a single collapse operator `√Γ σ⁻`.
//! Internally all rates are angular (rad/ns) and times are ns.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest `dt * max(Γ, Ω)` accepted by a single step.
pub const MAX_STEP_PRODUCT: f64 = 0.5;
/// Sub-step size (relative to the fastest rate) used by [`propagate`].
pub const SUBSTEP_PRODUCT: f64 = 0.05;

/// 2×2 Hermitian density matrix stored as populations and `ρ_ge`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix<T: Real> {
    pub ground: T,
    pub excited: T,
    /// Off-diagonal element `ρ_ge = ⟨g|ρ|e⟩`.
    pub coherence: Complex<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn ground_state() -> Self {
        Self {
            ground: T::one(),
            excited: T::zero(),
            coherence: Complex::new(T::zero(), T::zero()),
        }
    }

    pub fn excited_state() -> Self {
        Self {
            ground: T::zero(),
            excited: T::one(),
            coherence: Complex::new(T::zero(), T::zero()),
        }
    }

    /// Fully mixed state.
    pub fn mixed() -> Self {
        let h = T::lit(0.5);
        Self {
            ground: h,
            excited: h,
            coherence: Complex::new(T::zero(), T::zero()),
        }
    }

    pub fn trace(&self) -> T {
        self.ground + self.excited
    }

    /// Trace one and positive semidefinite, both within `tol`.
    pub fn is_physical(&self, tol: T) -> bool {
        (self.trace() - T::one()).abs() <= tol
            && self.ground >= -tol
            && self.excited >= -tol
            && self.coherence.norm_sqr() <= self.ground * self.excited + tol
    }

    fn axpy(&self, k: T, d: &Self) -> Self {
        Self {
            ground: self.ground + k * d.ground,
            excited: self.excited + k * d.excited,
            coherence: self.coherence + d.coherence * k,
        }
    }
}

/// Drive and decay parameters in angular units (rad/ns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochDrive<T: Real> {
    /// Laser minus emitter frequency.
    pub detuning: T,
    pub rabi: T,
    pub phase: T,
    pub decay: T,
}

impl<T: Real> BlochDrive<T> {
    pub fn free(detuning: T, decay: T) -> Self {
        Self {
            detuning,
            rabi: T::zero(),
            phase: T::zero(),
            decay,
        }
    }

    fn fastest_rate(&self) -> T {
        self.decay.max(self.rabi.abs())
    }
}

/// Time derivative of `rho` under `drive`.
pub fn derivative<T: Real>(rho: &DensityMatrix<T>, drive: &BlochDrive<T>) -> DensityMatrix<T> {
    let half = T::lit(0.5);
    let i = Complex::new(T::zero(), T::one());
    let e_iphi = Complex::new(drive.phase.cos(), drive.phase.sin());
    let z = e_iphi.conj() * rho.coherence;
    let d_excited = drive.rabi * z.im - drive.decay * rho.excited;
    let inversion = rho.excited - rho.ground;
    let d_coh = -(i * (e_iphi * (drive.rabi * half * inversion) + rho.coherence * drive.detuning))
        - rho.coherence * (half * drive.decay);
    DensityMatrix {
        ground: -d_excited,
        excited: d_excited,
        coherence: d_coh,
    }
}

/// One classical fourth-order Runge–Kutta step of length `dt` (ns).
pub fn bloch_evolve<T: Real>(
    rho: &DensityMatrix<T>,
    drive: &BlochDrive<T>,
    dt: T,
) -> Result<DensityMatrix<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    let rate = drive.fastest_rate();
    let product = dt * rate;
    if product > T::lit(MAX_STEP_PRODUCT) {
        return Err(Error::StepTooLarge {
            dt: dt.to_f64().unwrap_or(f64::NAN),
            rate: rate.to_f64().unwrap_or(f64::NAN),
            product: product.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(rk4(rho, drive, dt))
}

fn rk4<T: Real>(rho: &DensityMatrix<T>, drive: &BlochDrive<T>, dt: T) -> DensityMatrix<T> {
    let half = T::lit(0.5);
    let k1 = derivative(rho, drive);
    let k2 = derivative(&rho.axpy(dt * half, &k1), drive);
    let k3 = derivative(&rho.axpy(dt * half, &k2), drive);
    let k4 = derivative(&rho.axpy(dt, &k3), drive);
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    DensityMatrix {
        ground: rho.ground + sixth * (k1.ground + two * k2.ground + two * k3.ground + k4.ground),
        excited: rho.excited
            + sixth * (k1.excited + two * k2.excited + two * k3.excited + k4.excited),
        coherence: rho.coherence
            + (k1.coherence + k2.coherence * two + k3.coherence * two + k4.coherence) * sixth,
    }
}

/// Number of equal sub-steps used to cover `duration` (ns).
pub fn substeps<T: Real>(drive: &BlochDrive<T>, duration: T) -> usize {
    let rate = drive.fastest_rate().max(drive.detuning.abs());
    if rate == T::zero() {
        return 1;
    }
    let n = (duration * rate / T::lit(SUBSTEP_PRODUCT)).ceil();
    n.to_usize().unwrap_or(1).max(1)
}

/// Evolve over `duration` (ns) with sub-steps no longer than
/// `0.05 / max(Γ, |Ω|, |Δ|)`.
pub fn propagate<T: Real>(
    rho: &DensityMatrix<T>,
    drive: &BlochDrive<T>,
    duration: T,
) -> Result<DensityMatrix<T>> {
    if duration < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "duration must be >= 0, got {duration}"
        )));
    }
    if duration == T::zero() {
        return Ok(*rho);
    }
    let n = substeps(drive, duration);
    let dt = duration / T::from_usize_lossy(n);
    let mut out = *rho;
    for _ in 0..n {
        out = rk4(&out, drive, dt);
    }
    Ok(out)
}

/// Evolve over `duration` and return the final state together with
/// `∫ ρ_ee dt` over each of `n_bins` equal sub-intervals (Simpson rule on the
/// integration grid).
pub fn propagate_binned<T: Real>(
    rho: &DensityMatrix<T>,
    drive: &BlochDrive<T>,
    duration: T,
    n_bins: usize,
) -> Result<(DensityMatrix<T>, Vec<T>)> {
    if n_bins == 0 || !(duration > T::zero()) {
        return Err(Error::InvalidArgument(
            "binned propagation needs duration > 0 and at least one bin".into(),
        ));
    }
    let bin = duration / T::from_usize_lossy(n_bins);
    // even number of sub-steps per bin for Simpson
    let mut per_bin = substeps(drive, bin);
    per_bin += per_bin % 2;
    let dt = bin / T::from_usize_lossy(per_bin);
    let (two, four, three) = (T::lit(2.0), T::lit(4.0), T::lit(3.0));
    let mut state = *rho;
    let mut out = Vec::with_capacity(n_bins);
    for _ in 0..n_bins {
        let mut acc = state.excited;
        for k in 1..=per_bin {
            state = rk4(&state, drive, dt);
            let w = if k == per_bin {
                T::one()
            } else if k % 2 == 1 {
                four
            } else {
                two
            };
            acc += w * state.excited;
        }
        out.push(acc * dt / three);
    }
    Ok((state, out))
}

/// Exact free evolution (no drive) over `t` ns.
pub fn free_evolve<T: Real>(rho: &DensityMatrix<T>, detuning: T, decay: T, t: T) -> DensityMatrix<T> {
    let pop_decay = (-decay * t).exp();
    let excited = rho.excited * pop_decay;
    let phase = Complex::new(-decay * T::lit(0.5) * t, -detuning * t).exp();
    DensityMatrix {
        ground: T::one() - excited,
        excited,
        coherence: rho.coherence * phase,
    }
}

/// Instantaneous rotation by `angle` about the equatorial axis at `phase`;
/// equal to a resonant `Γ = 0` pulse of area `angle` under the same
/// Hamiltonian convention.
pub fn rotate<T: Real>(rho: &DensityMatrix<T>, angle: T, phase: T) -> DensityMatrix<T> {
    let half = angle * T::lit(0.5);
    let (c, s) = (half.cos(), half.sin());
    let zero = T::zero();
    let mi = Complex::new(zero, -T::one());
    let e_iphi = Complex::new(phase.cos(), phase.sin());
    // U in basis (g, e)
    let u = [
        [Complex::new(c, zero), mi * e_iphi * s],
        [mi * e_iphi.conj() * s, Complex::new(c, zero)],
    ];
    let r = [
        [Complex::new(rho.ground, zero), rho.coherence],
        [rho.coherence.conj(), Complex::new(rho.excited, zero)],
    ];
    let mut ur = [[Complex::new(zero, zero); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            ur[a][b] = u[a][0] * r[0][b] + u[a][1] * r[1][b];
        }
    }
    let mut out = [[Complex::new(zero, zero); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            out[a][b] = ur[a][0] * u[b][0].conj() + ur[a][1] * u[b][1].conj();
        }
    }
    DensityMatrix {
        ground: out[0][0].re,
        excited: out[1][1].re,
        coherence: out[0][1],
    }
}

/// Closed-form excited population for resonant drive from the ground state,
/// valid for `Ω > Γ/4`.
pub fn resonant_transient<T: Real>(t: T, rabi: T, decay: T) -> T {
    let q = T::lit(0.75) * decay;
    let mu = (rabi * rabi - decay * decay / T::lit(16.0)).sqrt();
    let steady = rabi * rabi / (decay * decay + T::lit(2.0) * rabi * rabi);
    steady * (T::one() - (-q * t).exp() * ((mu * t).cos() + q / mu * (mu * t).sin()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact propagator: `exp(L dt)` of the real 4×4 Liouvillian acting on
    /// `(ρ_gg, ρ_ee, Re ρ_ge, Im ρ_ge)`.
    fn liouvillian_step(rho: &DensityMatrix<f64>, d: &BlochDrive<f64>, dt: f64) -> DensityMatrix<f64> {
        use nalgebra::{Matrix4, Vector4};
        let (c, s) = (d.phase.cos(), d.phase.sin());
        let (w, g, dl) = (d.rabi, d.decay, d.detuning);
        // dee = w (c y - s x) - g ee ; dx = -g/2 x + dl y + (w/2) s (ee - gg) ;
        // dy = -g/2 y - dl x - (w/2) c (ee - gg)
        let l = Matrix4::new(
            0.0, g, s * w, -c * w,
            0.0, -g, -s * w, c * w,
            -0.5 * w * s, 0.5 * w * s, -0.5 * g, dl,
            0.5 * w * c, -0.5 * w * c, -dl, -0.5 * g,
        );
        let v = Vector4::new(rho.ground, rho.excited, rho.coherence.re, rho.coherence.im);
        let out = (l * dt).exp() * v;
        DensityMatrix {
            ground: out[0],
            excited: out[1],
            coherence: Complex::new(out[2], out[3]),
        }
    }

    #[test]
    fn matches_exact_propagator_on_grid() {
        let gamma = 0.19478_f64;
        let rho0 = rotate(&DensityMatrix::ground_state(), 1.1, 0.4);
        for &wr in &[0.1, 0.5, 1.0, 3.0, 10.0] {
            for &dr in &[-5.0, -1.0, 0.0, 0.7, 4.0] {
                let d = BlochDrive {
                    detuning: dr * gamma,
                    rabi: wr * gamma,
                    phase: 0.3,
                    decay: gamma,
                };
                let dt = 0.05 / d.decay.max(d.rabi).max(d.detuning.abs());
                let mut rho = rho0;
                for _ in 0..50 {
                    let a = bloch_evolve(&rho, &d, dt).unwrap();
                    let b = liouvillian_step(&rho, &d, dt);
                    let err = (a.excited - b.excited).abs().max((a.coherence - b.coherence).norm());
                    assert!(err < 1e-8, "Ω={wr}γ δ={dr}γ err={err}");
                    rho = b;
                }
            }
        }
    }

    #[test]
    fn free_decay_matches_exponential() {
        let gamma = 0.19478_f64;
        let drive = BlochDrive::free(0.0, gamma);
        let mut rho = DensityMatrix::excited_state();
        let dt = 0.05 / gamma;
        for k in 1..=200 {
            rho = bloch_evolve(&rho, &drive, dt).unwrap();
            let exact = (-gamma * dt * k as f64).exp();
            assert!(((rho.excited - exact) / exact).abs() < 1e-6, "step {k}");
        }
    }

    #[test]
    fn refuses_oversized_steps() {
        let drive = BlochDrive {
            detuning: 0.0,
            rabi: 1.0,
            phase: 0.0,
            decay: 0.2,
        };
        let rho = DensityMatrix::<f64>::ground_state();
        assert!(matches!(
            bloch_evolve(&rho, &drive, 0.6),
            Err(Error::StepTooLarge { .. })
        ));
        assert!(bloch_evolve(&rho, &drive, 0.5).is_ok());
        assert!(bloch_evolve(&rho, &drive, 0.0).is_err());
    }

    #[test]
    fn resonant_transient_matches_closed_form() {
        let gamma = 0.19478_f64;
        let rabi = 12.0 * gamma;
        let drive = BlochDrive {
            detuning: 0.0,
            rabi,
            phase: 0.0,
            decay: gamma,
        };
        let mut rho = DensityMatrix::ground_state();
        let dt = 0.05 / rabi;
        let mut t = 0.0;
        for _ in 0..4000 {
            rho = bloch_evolve(&rho, &drive, dt).unwrap();
            t += dt;
            assert!((rho.excited - resonant_transient(t, rabi, gamma)).abs() < 1e-4);
        }
    }

    #[test]
    fn trace_and_positivity_preserved() {
        let drive = BlochDrive {
            detuning: 0.7,
            rabi: 1.3,
            phase: 0.4,
            decay: 0.19,
        };
        let mut rho = DensityMatrix::<f64>::ground_state();
        for _ in 0..5000 {
            rho = bloch_evolve(&rho, &drive, 0.03).unwrap();
            assert!(rho.is_physical(1e-9), "{rho:?}");
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let drive = BlochDrive {
            detuning: 0.5,
            rabi: 1.0,
            phase: 0.0,
            decay: 0.2,
        };
        let rho0 = DensityMatrix::<f64>::ground_state();
        let run = |n: usize| {
            let dt = 10.0 / n as f64;
            let mut r = rho0;
            for _ in 0..n {
                r = bloch_evolve(&r, &drive, dt).unwrap();
            }
            r.excited
        };
        let reference = run(20_000);
        let e1 = (run(50) - reference).abs();
        let e2 = (run(100) - reference).abs();
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.3, "observed order {order}");
    }

    #[test]
    fn finite_lossless_pulse_equals_rotation() {
        let rabi = 0.8_f64;
        let phase = 1.1;
        let angle = std::f64::consts::FRAC_PI_2;
        let drive = BlochDrive {
            detuning: 0.0,
            rabi,
            phase,
            decay: 0.0,
        };
        let rho = DensityMatrix::ground_state();
        let a = propagate(&rho, &drive, angle / rabi).unwrap();
        let b = rotate(&rho, angle, phase);
        assert!((a.excited - b.excited).abs() < 1e-7);
        assert!((a.coherence - b.coherence).norm() < 1e-7);
    }

    #[test]
    fn free_evolution_exact_matches_integrator() {
        let rho = rotate(&DensityMatrix::<f64>::ground_state(), 1.0, 0.3);
        let drive = BlochDrive::free(0.9, 0.19);
        let a = propagate(&rho, &drive, 7.0).unwrap();
        let b = free_evolve(&rho, 0.9, 0.19, 7.0);
        assert!((a.excited - b.excited).abs() < 1e-7);
        assert!((a.coherence - b.coherence).norm() < 1e-7);
    }

    #[test]
    fn binned_integral_of_free_decay() {
        let gamma = 0.2_f64;
        let drive = BlochDrive::free(0.0, gamma);
        let (_, bins) = propagate_binned(&DensityMatrix::excited_state(), &drive, 10.0, 5).unwrap();
        for (k, b) in bins.iter().enumerate() {
            let (t0, t1) = (2.0 * k as f64, 2.0 * (k + 1) as f64);
            let exact = ((-gamma * t0).exp() - (-gamma * t1).exp()) / gamma;
            assert!((b - exact).abs() < 1e-7);
        }
    }

    #[test]
    fn single_precision_tracks_double() {
        let d64 = BlochDrive {
            detuning: 0.3,
            rabi: 1.0,
            phase: 0.0,
            decay: 0.2,
        };
        let d32 = BlochDrive {
            detuning: 0.3f32,
            rabi: 1.0,
            phase: 0.0,
            decay: 0.2,
        };
        let a = propagate(&DensityMatrix::<f64>::ground_state(), &d64, 5.0).unwrap();
        let b = propagate(&DensityMatrix::<f32>::ground_state(), &d32, 5.0).unwrap();
        assert!((a.excited - b.excited as f64).abs() < 1e-4);
    }
}
