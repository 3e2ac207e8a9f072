//! Steady-state (constant control) propagation in the frequency domain.

use num_complex::Complex;
use rustfft::FftPlanner;

use super::{EnsembleParams, PulseEnvelope};
use crate::error::{Error, Result};
use crate::scalar::{idx, Real};

/// Complex amplitude transmission of the whole medium for a detuning `delta`
/// (rad/s) of the signal from two-photon resonance, with constant control
/// Rabi frequency `omega`:
///
/// `T(δ) = exp(−g² / [Γ/2 − iδ + (Ω²/4)/(γs − iδ)])`.
///
/// A spectral component `e^{−iδt}` of the input leaves multiplied by `T(δ)`.
pub fn transfer_function<T: Real>(ensemble: &EnsembleParams<T>, omega: T, delta: T) -> Complex<T> {
    let g2 = ensemble.coupling().powi(2);
    let a = Complex::new(ensemble.gamma / T::lit(2.0), -delta);
    let exponent = if omega == T::zero() {
        -a.inv() * g2
    } else {
        // multiplied through by (γs − iδ) so that δ = γs = 0 is regular
        let b = Complex::new(ensemble.gamma_s, -delta);
        -(b * g2) / (a * b + omega * omega / T::lit(4.0))
    };
    exponent.exp()
}

/// Group delay `∂ arg T/∂δ` at `δ = 0`. Equals `dΓ/Ω²` for γs = 0 and
/// `−d/Γ` (an advance) without control.
pub fn group_delay<T: Real>(ensemble: &EnsembleParams<T>, omega: T) -> T {
    let g2 = ensemble.coupling().powi(2);
    let q = omega * omega / T::lit(4.0);
    let gs = ensemble.gamma_s;
    let d0 = ensemble.gamma * gs / T::lit(2.0) + q;
    if d0 == T::zero() {
        return -T::lit(4.0) * g2 / (ensemble.gamma * ensemble.gamma);
    }
    g2 * (q - gs * gs) / (d0 * d0)
}

/// Propagates a pulse through the medium with a constant control by
/// filtering its spectrum with [`transfer_function`]. The input is zero
/// padded to `pad_factor` times its length so the delayed output is not
/// wrapped; the returned envelope starts at the input's `t0`.
pub fn propagate_linear<T: Real>(
    pulse: &PulseEnvelope<T>,
    ensemble: &EnsembleParams<T>,
    omega: T,
    pad_factor: usize,
) -> Result<PulseEnvelope<T>> {
    ensemble.validate()?;
    if pad_factor == 0 || pulse.is_empty() {
        return Err(Error::InvalidArgument(
            "need a non-empty pulse and pad factor ≥ 1".into(),
        ));
    }
    let n = pulse.len() * pad_factor;
    let mut buf = pulse.samples.clone();
    buf.resize(n, Complex::default());
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let dw = T::TAU() / (idx::<T>(n) * pulse.dt);
    for (k, x) in buf.iter_mut().enumerate() {
        let signed = if k <= n / 2 { idx::<T>(k) } else { -idx::<T>(n - k) };
        // rustfft's forward transform pairs bin ω_k with e^{+iω_k t}
        *x *= transfer_function(ensemble, omega, -signed * dw);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let norm = idx::<T>(n).recip();
    for x in &mut buf {
        *x *= norm;
    }
    PulseEnvelope::new(pulse.t0, pulse.dt, buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn ens(d: f64, gs: f64) -> EnsembleParams<f64> {
        EnsembleParams {
            optical_depth: d,
            gamma: TAU * 5.2e6,
            gamma_s: gs,
            length: 1e-3,
            control_waist: None,
            signal_waist: 50.0,
        }
    }

    #[test]
    fn resonant_transmission() {
        let e = ens(15.0, 0.0);
        assert!((transfer_function(&e, 0.0, 0.0).norm_sqr() - (-15.0f64).exp()).abs() < 1e-15);
        assert!((transfer_function(&e, TAU * 5e6, 0.0).norm_sqr() - 1.0).abs() < 1e-15);
        // with dephasing: exp(−2dΓγs/(2Γγs + Ω²))
        let e = ens(15.0, 1e5);
        let om = TAU * 3e6;
        let want = (-2.0 * 15.0 * e.gamma * 1e5 / (2.0 * e.gamma * 1e5 + om * om)).exp();
        assert!((transfer_function(&e, om, 0.0).norm_sqr() - want).abs() < 1e-12);
    }

    #[test]
    fn delay_limits() {
        let e = ens(15.0, 0.0);
        let om = TAU * 5e6;
        assert!((group_delay(&e, om) - 15.0 * e.gamma / (om * om)).abs() < 1e-18);
        assert!((group_delay(&e, 0.0) + 15.0 / e.gamma).abs() < 1e-18);
        assert!((group_delay(&ens(15.0, 1e4), 0.0) + 15.0 / e.gamma).abs() < 1e-18);
    }

    #[test]
    fn far_detuned_is_transparent() {
        let e = ens(15.0, 0.0);
        assert!((transfer_function(&e, 0.0, 1e12).norm() - 1.0).abs() < 1e-3);
    }
}
