//! Crank-Nicolson time stepping of the co-moving Maxwell-Bloch system with
//! a trapezoidal sweep along `z`.
//!
//! At each new time level the nodes are solved in order `j = 0..=N`: the
//! field at node `j` depends only on the polarization at nodes `≤ j`, so each
//! node reduces to a 2×2 linear solve for `(P_j, S_j)`.

use num_complex::Complex;

use super::{trapezoid_norm, ControlSchedule, EnsembleParams, Numerics, PulseEnvelope, SpinWave};
use crate::error::{Error, Result};
use crate::scalar::{idx, Real};

/// Running excitation balance of one integration. All entries are in
/// photons.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyLedger<T> {
    /// Excitation present when the integration started.
    pub initial: T,
    /// Photons that entered at `z = 0`.
    pub input: T,
    /// Photons that left at `z = 1`.
    pub output: T,
    /// Spontaneous emission out of the mode, `∫∫ Γ|P|²`.
    pub gamma_loss: T,
    /// Ground-coherence dephasing, `∫∫ 2γs|S|²`.
    pub dephasing_loss: T,
    /// Spin excitation removed from the integrator for storage.
    pub extracted: T,
    /// `∫|P|² + |S|² dz` at the current step.
    pub excitation: T,
}

impl<T: Real> EnergyLedger<T> {
    pub fn supplied(&self) -> T {
        self.initial + self.input
    }

    pub fn accounted(&self) -> T {
        self.output + self.gamma_loss + self.dephasing_loss + self.extracted + self.excitation
    }

    /// `accounted / supplied − 1`; zero for an exact balance.
    pub fn relative_error(&self) -> T {
        let s = self.supplied();
        if s > T::zero() {
            self.accounted() / s - T::one()
        } else {
            self.accounted()
        }
    }
}

/// Time stepper for one radial shell.
#[derive(Debug, Clone)]
pub struct Integrator<T> {
    g: T,
    half_gamma: T,
    gamma_s: T,
    h: T,
    dt: T,
    p: Vec<Complex<T>>,
    s: Vec<Complex<T>>,
    e: Vec<Complex<T>>,
    t: T,
    omega: T,
    e_in: Complex<T>,
    ledger: EnergyLedger<T>,
    loss_rate: T,
}

impl<T: Real> Integrator<T> {
    /// Starts at time `t0` with zero polarization, the given spin wave (or
    /// none), input sample `e_in` and control `omega`.
    pub fn new(
        ensemble: &EnsembleParams<T>,
        numerics: Numerics,
        dt: T,
        t0: T,
        omega: T,
        e_in: Complex<T>,
        spin: Option<&[Complex<T>]>,
    ) -> Result<Self> {
        ensemble.validate()?;
        if numerics.n_z < 2 {
            return Err(Error::Numerical("need at least two z intervals".into()));
        }
        if !(dt > T::zero()) {
            return Err(Error::Numerical("time step must be positive".into()));
        }
        // Crank-Nicolson is A-stable, but accuracy needs the polarization
        // relaxation resolved.
        if dt * ensemble.gamma > T::lit(0.25) {
            return Err(Error::Numerical(format!(
                "time step {dt} s does not resolve 1/Γ = {} s (need dt·Γ ≤ 0.25)",
                ensemble.gamma.recip()
            )));
        }
        let n = numerics.n_z + 1;
        let s = match spin {
            Some(s) if s.len() != n => {
                return Err(Error::Numerical(format!(
                    "spin wave has {} nodes, integrator expects {n}",
                    s.len()
                )))
            }
            Some(s) => s.to_vec(),
            None => vec![Complex::default(); n],
        };
        let h = idx::<T>(numerics.n_z).recip();
        let mut it = Self {
            g: ensemble.coupling(),
            half_gamma: ensemble.gamma / T::lit(2.0),
            gamma_s: ensemble.gamma_s,
            h,
            dt,
            p: vec![Complex::default(); n],
            s,
            e: vec![e_in; n],
            t: t0,
            omega,
            e_in,
            ledger: EnergyLedger::default(),
            loss_rate: T::zero(),
        };
        it.ledger.initial = it.excitation();
        it.ledger.excitation = it.ledger.initial;
        it.loss_rate = it.instantaneous_loss();
        Ok(it)
    }

    pub fn time(&self) -> T {
        self.t
    }

    pub fn output(&self) -> Complex<T> {
        self.e[self.e.len() - 1]
    }

    pub fn ledger(&self) -> &EnergyLedger<T> {
        &self.ledger
    }

    pub fn spin(&self) -> &[Complex<T>] {
        &self.s
    }

    pub fn polarization(&self) -> &[Complex<T>] {
        &self.p
    }

    pub fn z_nodes(&self) -> Vec<T> {
        (0..self.s.len()).map(|j| idx::<T>(j) * self.h).collect()
    }

    fn excitation(&self) -> T {
        trapezoid_norm(&self.p, self.h) + trapezoid_norm(&self.s, self.h)
    }

    fn instantaneous_loss(&self) -> T {
        T::lit(2.0) * self.half_gamma * trapezoid_norm(&self.p, self.h)
            + T::lit(2.0) * self.gamma_s * trapezoid_norm(&self.s, self.h)
    }

    fn dephasing_rate(&self) -> T {
        T::lit(2.0) * self.gamma_s * trapezoid_norm(&self.s, self.h)
    }

    /// Removes the spin wave from the integrator and books it as extracted.
    /// Only meaningful while the control is off, when `S` is decoupled from
    /// the optical fields.
    pub fn take_spin(&mut self) -> Vec<Complex<T>> {
        let out = std::mem::replace(&mut self.s, vec![Complex::default(); self.p.len()]);
        self.ledger.extracted += trapezoid_norm(&out, self.h);
        self.ledger.excitation = self.excitation();
        self.loss_rate = self.instantaneous_loss();
        out
    }

    /// Advances one step to `t + dt` given the input sample and control
    /// Rabi frequency at the new time. Returns the output field.
    pub fn step(&mut self, e_in_next: Complex<T>, omega_next: T) -> Complex<T> {
        let a = self.dt / T::lit(2.0);
        let i = Complex::new(T::zero(), T::one());
        let g = self.g;
        let hg = self.half_gamma;
        let gs = self.gamma_s;
        let half_om_now = self.omega / T::lit(2.0);
        let half_om = omega_next / T::lit(2.0);
        let alpha = self.h / T::lit(2.0);

        let out_before = self.output().norm_sqr();
        let gamma_before = self.loss_rate - self.dephasing_rate();
        let deph_before = self.dephasing_rate();

        let n = self.p.len();
        let mut prev_e = Complex::default();
        let mut prev_p = Complex::default();
        for j in 0..n {
            let (k, al) = if j == 0 {
                (e_in_next, T::zero())
            } else {
                (prev_e + i * (g * alpha) * prev_p, alpha)
            };
            let p0 = self.p[j];
            let s0 = self.s[j];
            let e0 = self.e[j];
            let rhs_p = p0 + (p0 * (-hg) + i * g * e0 + i * half_om_now * s0) * a + i * (a * g) * k;
            let rhs_s = s0 + (s0 * (-gs) + i * half_om_now * p0) * a;
            let a11 = T::one() + a * hg + a * g * g * al;
            let a22 = T::one() + a * gs;
            let off = -i * (a * half_om);
            let det = a11 * a22 + (a * half_om) * (a * half_om);
            let p1 = (rhs_p * a22 - off * rhs_s) / det;
            let s1 = (rhs_s * a11 - off * rhs_p) / det;
            let e1 = k + i * (g * al) * p1;
            self.p[j] = p1;
            self.s[j] = s1;
            self.e[j] = e1;
            prev_e = e1;
            prev_p = p1;
        }

        let two = T::lit(2.0);
        self.ledger.input += a * (self.e_in.norm_sqr() + e_in_next.norm_sqr());
        self.ledger.output += a * (out_before + self.output().norm_sqr());
        self.loss_rate = self.instantaneous_loss();
        let deph_after = self.dephasing_rate();
        self.ledger.gamma_loss += a * (gamma_before + self.loss_rate - deph_after);
        self.ledger.dephasing_loss += a * (deph_before + deph_after);
        self.ledger.excitation = self.excitation();
        let _ = two;

        self.t += self.dt;
        self.omega = omega_next;
        self.e_in = e_in_next;
        self.output()
    }
}

/// Result of the storage phase of one shell.
#[derive(Debug, Clone)]
pub struct StoreOutcome<T> {
    /// Field transmitted before and during the switch-off, plus the decay
    /// of residual polarization while the control is off. Starts at the
    /// input's `t0`.
    pub leak: PulseEnvelope<T>,
    pub spin_wave: SpinWave<T>,
    pub ledger: EnergyLedger<T>,
}

fn check_switch_resolution<T: Real>(schedule: &ControlSchedule<T>, dt: T) -> Result<()> {
    if schedule.switches() && dt > schedule.switch_duration / T::lit(10.0) {
        return Err(Error::Numerical(format!(
            "time step {dt} s does not resolve the {} s control switch",
            schedule.switch_duration
        )));
    }
    Ok(())
}

fn steps_until<T: Real>(t0: T, dt: T, t: T, round_up: bool) -> usize {
    let x = ((t - t0) / dt).to_f64_lossy();
    let n = if round_up {
        (x - 1e-9).ceil()
    } else {
        (x + 1e-9).floor()
    };
    n.max(0.0) as usize
}

/// Integrates the pulse into the medium until the control is fully off,
/// freezes the spin wave there, then follows the decoupled optical
/// subsystem until the control starts to switch back on.
///
/// With a schedule that never switches, the integration runs until the
/// pulse has left the medium and the returned spin wave is whatever
/// excitation remains.
pub fn store<T: Real>(
    pulse: &PulseEnvelope<T>,
    ensemble: &EnsembleParams<T>,
    schedule: &ControlSchedule<T>,
    numerics: Numerics,
) -> Result<StoreOutcome<T>> {
    schedule.validate()?;
    check_switch_resolution(schedule, pulse.dt)?;
    let dt = pulse.dt;
    let t0 = pulse.t0;
    let mut it = Integrator::new(ensemble, numerics, dt, t0, schedule.omega(t0), pulse.at_index(0), None)?;
    let mut leak = vec![it.output()];
    let advance = |it: &mut Integrator<T>, leak: &mut Vec<Complex<T>>, n: usize| {
        let t = t0 + idx::<T>(n) * dt;
        let out = it.step(pulse.at_index(n as isize), schedule.omega(t));
        leak.push(out);
    };

    if schedule.switches() {
        let n_freeze = steps_until(t0, dt, schedule.off_complete(), true);
        let n_on = steps_until(t0, dt, schedule.on_time, false);
        if n_on < n_freeze {
            return Err(Error::Numerical(
                "no full time step between switch-off and switch-on".into(),
            ));
        }
        for n in 1..=n_freeze {
            advance(&mut it, &mut leak, n);
        }
        let stored_at = it.time();
        let z = it.z_nodes();
        let s = it.take_spin();
        for n in (n_freeze + 1)..=n_on {
            advance(&mut it, &mut leak, n);
        }
        let ledger = *it.ledger();
        Ok(StoreOutcome {
            leak: PulseEnvelope::new(t0, dt, leak)?,
            spin_wave: SpinWave { z, s, stored_at },
            ledger,
        })
    } else {
        // Run past the input until the medium has emptied out.
        let delay = super::group_delay(ensemble, schedule.omega0).abs();
        let cap = pulse.len() + 4 * steps_until(T::zero(), dt, delay, true) + 2000;
        let mut n = 1;
        loop {
            advance(&mut it, &mut leak, n);
            let l = it.ledger();
            let done_input = n + 1 >= pulse.len();
            if done_input && l.excitation <= T::lit(1e-9) * l.input.max(T::tiny()) {
                break;
            }
            if n >= cap {
                break;
            }
            n += 1;
        }
        let z = it.z_nodes();
        let stored_at = it.time();
        let s = it.spin().to_vec();
        Ok(StoreOutcome {
            leak: PulseEnvelope::new(t0, dt, leak)?,
            spin_wave: SpinWave { z, s, stored_at },
            ledger: *it.ledger(),
        })
    }
}

/// Free evolution of a stored spin wave with the control off.
pub fn hold<T: Real>(sw: &SpinWave<T>, duration: T, gamma_s: T) -> Result<SpinWave<T>> {
    if !(duration >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "hold duration must be non-negative, got {duration}"
        )));
    }
    if !(gamma_s >= T::zero()) {
        return Err(Error::InvalidArgument("dephasing rate must be non-negative".into()));
    }
    let f = (-gamma_s * duration).exp();
    Ok(SpinWave {
        z: sw.z.clone(),
        s: sw.s.iter().map(|c| *c * f).collect(),
        stored_at: sw.stored_at + duration,
    })
}

/// Reads a spin wave out in the forward direction, integrating from
/// `sw.stored_at` for `n_steps` steps of `dt` with no input field. Returns
/// the output envelope (starting at `stored_at`) and the excitation ledger.
pub fn retrieve<T: Real>(
    sw: &SpinWave<T>,
    ensemble: &EnsembleParams<T>,
    schedule: &ControlSchedule<T>,
    numerics: Numerics,
    dt: T,
    n_steps: usize,
) -> Result<(PulseEnvelope<T>, EnergyLedger<T>)> {
    schedule.validate()?;
    check_switch_resolution(schedule, dt)?;
    if schedule.on_time < sw.stored_at - dt * T::lit(1e-6) {
        return Err(Error::InvalidArgument(
            "retrieval must start before the control switches on".into(),
        ));
    }
    let t0 = sw.stored_at;
    let mut it = Integrator::new(
        ensemble,
        numerics,
        dt,
        t0,
        schedule.omega(t0),
        Complex::default(),
        Some(&sw.s),
    )?;
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(it.output());
    for n in 1..=n_steps {
        let t = t0 + idx::<T>(n) * dt;
        out.push(it.step(Complex::default(), schedule.omega(t)));
    }
    Ok((PulseEnvelope::new(t0, dt, out)?, *it.ledger()))
}
