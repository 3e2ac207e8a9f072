//! Dynamic-EIT storage and retrieval in a resonant three-level Λ medium.
//!
//! Signal envelope `E(z, τ)` (photon-flux amplitude, `|E|²` in photons/s),
//! optical polarization `P` and ground-state coherence `S` obey, in the
//! co-moving frame with `z ∈ [0, 1]` measured in units of the medium length,
//!
//! ```text
//! ∂z E = i g P
//! ∂τ P = −(Γ/2) P + i g E + i (Ω/2) S
//! ∂τ S = −γs S + i (Ω/2) P
//! ```
//!
//! with `g = √(dΓ)/2`, so that without control the intensity transmission
//! is `e^{−d}`. `Ω` is the full control Rabi frequency. `|P|²` and `|S|²`
//! are excitation densities per unit `z`, so
//! `∂z|E|² + ∂τ(|P|² + |S|²) = −Γ|P|² − 2γs|S|²`.

mod linear;
mod shells;
mod solver;

pub use linear::{group_delay, propagate_linear, transfer_function};
pub use shells::{run_memory, shell_radii, MemoryOutput};
pub use solver::{hold, retrieve, store, EnergyLedger, Integrator, StoreOutcome};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{idx, Real};

/// Parameters of the atomic ensemble. Rates in rad/s, waists in μm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleParams<T> {
    /// Resonant intensity optical depth without control: `|T|² = e^{−d}`.
    pub optical_depth: T,
    /// Excited-state population decay rate Γ.
    pub gamma: T,
    /// Ground-state coherence decay rate γs.
    pub gamma_s: T,
    /// Physical length in m. The co-moving frame normalizes it away; kept for
    /// reporting.
    pub length: T,
    /// Control beam waist; `None` means a uniform control field.
    pub control_waist: Option<T>,
    pub signal_waist: T,
}

impl<T: Real> EnsembleParams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.optical_depth > T::zero() && self.optical_depth.is_finite()) {
            return bad("optical depth must be positive");
        }
        if !(self.gamma > T::zero() && self.gamma.is_finite()) {
            return bad("excited-state decay rate must be positive");
        }
        if !(self.gamma_s >= T::zero() && self.gamma_s.is_finite()) {
            return bad("ground coherence decay rate must be non-negative");
        }
        if !(self.signal_waist > T::zero() && self.signal_waist.is_finite()) {
            return bad("signal waist must be positive");
        }
        if let Some(wc) = self.control_waist {
            if !(wc >= self.signal_waist) {
                return bad("control waist must be at least the signal waist");
            }
        }
        Ok(())
    }

    /// Light-matter coupling `g = √(dΓ)/2` in √(rad/s).
    pub fn coupling(&self) -> T {
        (self.optical_depth * self.gamma).sqrt() / T::lit(2.0)
    }

    /// Control Rabi frequency scale at radius `r` (μm) relative to the axis.
    pub fn control_profile(&self, r: T) -> T {
        match self.control_waist {
            Some(wc) => (-(r * r) / (wc * wc)).exp(),
            None => T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchShape {
    Linear,
    SmoothStep,
}

/// Control field timing. The field ramps down over
/// `[off_time, off_time + switch_duration]`, stays off, and ramps back up
/// over `[on_time, on_time + switch_duration]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSchedule<T> {
    pub omega0: T,
    pub off_time: T,
    pub on_time: T,
    pub switch_duration: T,
    pub shape: SwitchShape,
}

impl<T: Real> ControlSchedule<T> {
    /// A control field that never switches.
    pub fn always_on(omega0: T) -> Self {
        Self {
            omega0,
            off_time: T::infinity(),
            on_time: T::infinity(),
            switch_duration: T::one(),
            shape: SwitchShape::SmoothStep,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 >= T::zero() && self.omega0.is_finite()) {
            return Err(Error::InvalidArgument(
                "control Rabi frequency must be non-negative".into(),
            ));
        }
        if !(self.switch_duration > T::zero()) {
            return Err(Error::InvalidArgument("switch duration must be positive".into()));
        }
        if !self.switches() {
            return Ok(());
        }
        if !(self.off_time < self.on_time && self.on_time.is_finite()) {
            return Err(Error::InvalidArgument(
                "control must switch off before it switches on".into(),
            ));
        }
        if self.off_time + self.switch_duration > self.on_time {
            return Err(Error::InvalidArgument(
                "switch-off ramp overlaps the switch-on ramp".into(),
            ));
        }
        Ok(())
    }

    pub fn switches(&self) -> bool {
        self.off_time.is_finite()
    }

    /// Time at which the control is fully off.
    pub fn off_complete(&self) -> T {
        self.off_time + self.switch_duration
    }

    /// Normalized Rabi envelope in `[0, 1]` at time `t`.
    pub fn profile(&self, t: T) -> T {
        if !self.switches() || t <= self.off_time {
            return T::one();
        }
        let ramp = |x: T| {
            let x = x.max(T::zero()).min(T::one());
            match self.shape {
                SwitchShape::Linear => x,
                SwitchShape::SmoothStep => x * x * (T::lit(3.0) - T::lit(2.0) * x),
            }
        };
        if t < self.on_time {
            T::one() - ramp((t - self.off_time) / self.switch_duration)
        } else {
            ramp((t - self.on_time) / self.switch_duration)
        }
    }

    pub fn omega(&self, t: T) -> T {
        self.omega0 * self.profile(t)
    }

    pub fn with_omega0(&self, omega0: T) -> Self {
        Self { omega0, ..*self }
    }
}

/// Temporal envelope sampled at `t0 + n·dt`, normalized so that
/// `Σ|E|²·dt` is the mean photon number.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseEnvelope<T> {
    pub t0: T,
    pub dt: T,
    pub samples: Vec<Complex<T>>,
}

impl<T: Real> PulseEnvelope<T> {
    pub fn new(t0: T, dt: T, samples: Vec<Complex<T>>) -> Result<Self> {
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(Error::InvalidArgument("pulse time step must be positive".into()));
        }
        let p = Self { t0, dt, samples };
        if !p.energy().is_finite() {
            return Err(Error::InvalidArgument("pulse energy is not finite".into()));
        }
        Ok(p)
    }

    pub fn zeros(t0: T, dt: T, n: usize) -> Self {
        Self {
            t0,
            dt,
            samples: vec![Complex::default(); n],
        }
    }

    /// Rising half-Gaussian that ends abruptly at its peak, `t = 0`. `width`
    /// is the intensity FWHM of the parent Gaussian.
    pub fn half_gaussian(width: T, mean_photons: T, t0: T, dt: T, n: usize) -> Result<Self> {
        Self::shaped(width, mean_photons, t0, dt, n, true)
    }

    /// Full Gaussian centred on `t = 0` with intensity FWHM `width`.
    pub fn gaussian(width: T, mean_photons: T, t0: T, dt: T, n: usize) -> Result<Self> {
        Self::shaped(width, mean_photons, t0, dt, n, false)
    }

    fn shaped(width: T, mean_photons: T, t0: T, dt: T, n: usize, half: bool) -> Result<Self> {
        if !(width > T::zero()) || !(mean_photons >= T::zero()) {
            return Err(Error::InvalidArgument(
                "pulse width and photon number must be positive".into(),
            ));
        }
        // amplitude exp(−2 ln2 t²/w²) gives intensity FWHM w
        let k = T::lit(2.0 * std::f64::consts::LN_2) / (width * width);
        let tol = dt * T::lit(1e-6);
        let mut samples: Vec<Complex<T>> = (0..n)
            .map(|i| {
                let t = t0 + idx::<T>(i) * dt;
                if half && t > tol {
                    Complex::default()
                } else {
                    Complex::new((-k * t * t).exp(), T::zero())
                }
            })
            .collect();
        let mut p = Self::new(t0, dt, std::mem::take(&mut samples))?;
        let e = p.energy();
        if !(e > T::zero()) {
            return Err(Error::InvalidArgument("pulse has no samples inside the window".into()));
        }
        let s = (mean_photons / e).sqrt();
        for v in &mut p.samples {
            *v *= s;
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, n: usize) -> T {
        self.t0 + idx::<T>(n) * self.dt
    }

    pub fn end_time(&self) -> T {
        self.time(self.samples.len().saturating_sub(1))
    }

    /// `Σ|E|²·dt`: mean photon number carried by the envelope.
    pub fn energy(&self) -> T {
        self.samples.iter().map(|c| c.norm_sqr()).sum::<T>() * self.dt
    }

    pub fn intensity(&self) -> Vec<T> {
        self.samples.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Sample at time `t`, zero outside the window. `t` must lie on the grid
    /// to within a small fraction of `dt`.
    pub fn at_index(&self, n: isize) -> Complex<T> {
        if n < 0 {
            return Complex::default();
        }
        self.samples.get(n as usize).copied().unwrap_or_default()
    }

    /// Time of the intensity maximum.
    pub fn peak_time(&self) -> T {
        let (i, _) = self
            .samples
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, bv), (i, c)| {
                let v = c.norm_sqr();
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        self.time(i)
    }

    /// Intensity-weighted mean arrival time.
    pub fn centroid(&self) -> T {
        let (num, den) = self
            .samples
            .iter()
            .enumerate()
            .fold((T::zero(), T::zero()), |(a, b), (i, c)| {
                let v = c.norm_sqr();
                (a + v * self.time(i), b + v)
            });
        num / den
    }
}

/// Stored ground-state coherence of one radial shell.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinWave<T> {
    /// Positions in units of the medium length.
    pub z: Vec<T>,
    pub s: Vec<Complex<T>>,
    pub stored_at: T,
}

impl<T: Real> SpinWave<T> {
    /// Stored excitation `∫|S|² dz` (trapezoid).
    pub fn excitation(&self) -> T {
        trapezoid_norm(&self.s, self.z.get(1).copied().unwrap_or(T::one()) - self.z[0])
    }
}

pub(crate) fn trapezoid_norm<T: Real>(v: &[Complex<T>], h: T) -> T {
    let n = v.len();
    if n < 2 {
        return T::zero();
    }
    let inner: T = v.iter().map(|c| c.norm_sqr()).sum();
    (inner - (v[0].norm_sqr() + v[n - 1].norm_sqr()) / T::lit(2.0)) * h
}

/// Spatial and temporal resolution of the integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    /// Number of z intervals across the medium.
    pub n_z: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { n_z: 200 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_step_schedule() {
        let s = ControlSchedule {
            omega0: 2.0f64,
            off_time: 0.0,
            on_time: 1.0,
            switch_duration: 0.1,
            shape: SwitchShape::SmoothStep,
        };
        s.validate().unwrap();
        assert_eq!(s.omega(-1.0), 2.0);
        assert!((s.omega(0.05) - 1.0).abs() < 1e-12);
        assert_eq!(s.omega(0.5), 0.0);
        assert!((s.omega(1.05) - 1.0).abs() < 1e-12);
        assert_eq!(s.omega(2.0), 2.0);
        assert_eq!(ControlSchedule::always_on(3.0).omega(1e9), 3.0);
    }

    #[test]
    fn schedule_rejects_overlap() {
        let s = ControlSchedule {
            omega0: 1.0,
            off_time: 0.0,
            on_time: 0.05,
            switch_duration: 0.1,
            shape: SwitchShape::Linear,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn half_gaussian_normalization() {
        let p = PulseEnvelope::half_gaussian(0.5e-6f64, 0.6, -2e-6, 1e-9, 3000).unwrap();
        assert!((p.energy() - 0.6).abs() < 1e-12);
        assert!(p.peak_time().abs() < 1e-12);
        // nothing after the peak
        assert!(p
            .samples
            .iter()
            .enumerate()
            .all(|(i, c)| p.time(i) <= 1e-15 || c.norm() == 0.0));
    }
}
