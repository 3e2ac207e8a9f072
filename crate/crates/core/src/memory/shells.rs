//! Transverse structure of the memory: independent radial shells.
//!
//! With a Gaussian control beam the Rabi frequency, and hence the whole
//! storage/retrieval response, depends on radius. Transverse coupling is
//! negligible over the medium length, so each shell is an independent
//! one-dimensional problem. The response is evaluated at Gauss-Legendre
//! radii inside three signal waists and interpolated in between.

use num_complex::Complex;
use rayon::prelude::*;

use super::{hold, retrieve, store, ControlSchedule, EnergyLedger, EnsembleParams, Numerics, PulseEnvelope};
use crate::error::{Error, Result};
use crate::grid::gauss_legendre;
use crate::modes::TransverseField;
use crate::scalar::{idx, Real};

/// Gauss-Legendre shell radii and weights (`∫ f(r) dr` weights, no `r`
/// factor) on `[0, 3·signal_waist]`, in increasing order.
pub fn shell_radii<T: Real>(signal_waist: T, n_shells: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre(n_shells);
    let half = T::lit(1.5) * signal_waist;
    let mut pairs: Vec<(T, T)> = x
        .iter()
        .zip(&w)
        .map(|(&x, &w)| (half * (T::lit(x) + T::one()), half * T::lit(w)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    pairs.into_iter().unzip()
}

/// Output of the memory for a unit-gain transverse profile, sampled at
/// `t0 + n·dt`.
#[derive(Debug, Clone)]
pub struct MemoryOutput<T> {
    pub t0: T,
    pub dt: T,
    pub shell_radii: Vec<T>,
    /// `traces[shell][n]`: output envelope of each shell.
    pub traces: Vec<Vec<Complex<T>>>,
    pub ledgers: Vec<(EnergyLedger<T>, EnergyLedger<T>)>,
    /// Spin excitation of each shell when readout begins.
    pub stored: Vec<T>,
    /// First sample of the readout (index into the traces).
    pub readout_index: usize,
}

impl<T: Real> MemoryOutput<T> {
    pub fn len(&self) -> usize {
        self.traces.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, n: usize) -> T {
        self.t0 + idx::<T>(n) * self.dt
    }

    /// Shell output at step `n` interpolated linearly in radius to each of
    /// `radii`; constant beyond the innermost and outermost shells.
    pub fn field_at(&self, n: usize, radii: &[T]) -> Vec<Complex<T>> {
        let rs = &self.shell_radii;
        radii
            .iter()
            .map(|&r| {
                let k = rs.partition_point(|&x| x < r);
                if k == 0 {
                    self.traces[0][n]
                } else if k == rs.len() {
                    self.traces[k - 1][n]
                } else {
                    let f = (r - rs[k - 1]) / (rs[k] - rs[k - 1]);
                    self.traces[k - 1][n] * (T::one() - f) + self.traces[k][n] * f
                }
            })
            .collect()
    }

    /// Output transverse field at step `n` for an input whose transverse
    /// profile is `field`: every ring is scaled by its interpolated gain.
    pub fn apply(&self, field: &TransverseField<T>, n: usize) -> TransverseField<T> {
        let gains = self.field_at(n, field.grid().radii());
        let mut out = field.clone();
        let nt = field.grid().n_theta();
        for (ring, g) in out.samples_mut().chunks_mut(nt).zip(&gains) {
            for v in ring {
                *v *= *g;
            }
        }
        out
    }

    /// Readout of one shell as an envelope.
    pub fn shell_envelope(&self, shell: usize) -> PulseEnvelope<T> {
        PulseEnvelope {
            t0: self.t0,
            dt: self.dt,
            samples: self.traces[shell].clone(),
        }
    }
}

/// Stores `pulse`, holds it with the control off and retrieves it until
/// `end_time`, independently for `n_shells` radial shells. The traces are the
/// transmitted leak followed by the retrieved signal on one time grid.
pub fn run_memory<T: Real>(
    pulse: &PulseEnvelope<T>,
    ensemble: &EnsembleParams<T>,
    schedule: &ControlSchedule<T>,
    numerics: Numerics,
    n_shells: usize,
    end_time: T,
) -> Result<MemoryOutput<T>> {
    ensemble.validate()?;
    schedule.validate()?;
    if n_shells == 0 {
        return Err(Error::InvalidArgument("need at least one shell".into()));
    }
    let (radii, _) = shell_radii(ensemble.signal_waist, n_shells);
    let dt = pulse.dt;
    let total = ((end_time - pulse.t0) / dt).to_f64_lossy().floor();
    if !(total >= 1.0) {
        return Err(Error::InvalidArgument("end time precedes the pulse".into()));
    }
    let total = total as usize + 1;

    let shells: Vec<_> = radii
        .par_iter()
        .map(|&r| {
            let sched = schedule.with_omega0(schedule.omega0 * ensemble.control_profile(r));
            run_shell(pulse, ensemble, &sched, numerics, total)
        })
        .collect::<Result<_>>()?;

    let readout_index = shells.iter().map(|s| s.3).min().unwrap_or(total);
    let mut traces = Vec::with_capacity(n_shells);
    let mut ledgers = Vec::with_capacity(n_shells);
    let mut stored = Vec::with_capacity(n_shells);
    for (trace, st, rt, _, ex) in shells {
        traces.push(trace);
        ledgers.push((st, rt));
        stored.push(ex);
    }
    Ok(MemoryOutput {
        t0: pulse.t0,
        dt,
        shell_radii: radii,
        traces,
        ledgers,
        stored,
        readout_index,
    })
}

type ShellRun<T> = (Vec<Complex<T>>, EnergyLedger<T>, EnergyLedger<T>, usize, T);

fn run_shell<T: Real>(
    pulse: &PulseEnvelope<T>,
    ensemble: &EnsembleParams<T>,
    schedule: &ControlSchedule<T>,
    numerics: Numerics,
    total: usize,
) -> Result<ShellRun<T>> {
    let st = store(pulse, ensemble, schedule, numerics)?;
    let mut trace = st.leak.samples;
    if !schedule.switches() {
        trace.resize(total, Complex::default());
        let ex = st.spin_wave.excitation();
        return Ok((trace, st.ledger, EnergyLedger::default(), total, ex));
    }
    trace.truncate(total);
    let start = trace.len() - 1;
    let t_start = pulse.time(start);
    let held = hold(&st.spin_wave, t_start - st.spin_wave.stored_at, ensemble.gamma_s)?;
    let ex = held.excitation();
    let steps = total - 1 - start;
    let (out, ledger) = retrieve(&held, ensemble, schedule, numerics, pulse.dt, steps)?;
    // the readout's first sample coincides with the last leak sample
    for (dst, src) in trace.iter_mut().skip(start).zip(&out.samples) {
        *dst += *src;
    }
    trace.extend_from_slice(&out.samples[1..]);
    Ok((trace, st.ledger, ledger, start, ex))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shells_are_ordered_and_integrate() {
        let (r, w) = shell_radii(50.0f64, 8);
        assert!(r.windows(2).all(|p| p[0] < p[1]));
        assert!(r[0] > 0.0 && r[7] < 150.0);
        // ∫₀^{150} r² dr
        let s: f64 = r.iter().zip(&w).map(|(r, w)| r * r * w).sum();
        assert!((s - 150f64.powi(3) / 3.0).abs() < 1e-6);
    }

    #[test]
    fn interpolation_is_linear_and_clamped() {
        let out = MemoryOutput {
            t0: 0.0f64,
            dt: 1.0,
            shell_radii: vec![1.0, 3.0],
            traces: vec![vec![Complex::new(1.0, 0.0)], vec![Complex::new(3.0, 2.0)]],
            ledgers: vec![],
            stored: vec![],
            readout_index: 0,
        };
        let f = out.field_at(0, &[0.0, 2.0, 5.0]);
        assert_eq!(f[0], Complex::new(1.0, 0.0));
        assert_eq!(f[1], Complex::new(2.0, 1.0));
        assert_eq!(f[2], Complex::new(3.0, 2.0));
    }
}
