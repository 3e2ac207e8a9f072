//! Laguerre-Gauss basis at the waist plane, phase-only SLM synthesis and
//! projection of sampled transverse fields onto a truncated LG basis.
//!
//! All modes are evaluated at `z = 0`. Gouy and curvature phases are
//! omitted: every overlap in the model is taken at a mode-matched plane.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PolarGrid;
use crate::scalar::{cis, idx, Real};

/// Default radial truncation of the LG basis.
pub const DEFAULT_P_MAX: usize = 8;
/// Default azimuthal truncation of the LG basis.
pub const DEFAULT_L_MAX: usize = 5;

/// Label of an LG mode: radial index `p` and winding number `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub p: u32,
    pub l: i32,
}

impl ModeIndex {
    pub const fn new(p: u32, l: i32) -> Self {
        Self { p, l }
    }

    pub const TEM00: ModeIndex = ModeIndex::new(0, 0);
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LG_{}^{:+}", self.p, self.l)
    }
}

/// Generalized Laguerre polynomial `L_p^α(x)` by the three-term recurrence.
pub fn laguerre<T: Real>(p: usize, alpha: usize, x: T) -> T {
    let a: T = idx(alpha);
    let mut prev = T::one();
    if p == 0 {
        return prev;
    }
    let mut cur = T::one() + a - x;
    for k in 1..p {
        let kf: T = idx(k);
        let next = ((kf + kf + T::one() + a - x) * cur - (kf + a) * prev) / (kf + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// Normalized radial profile `R_p^{|l|}(r)` so that `∫ |R|² 2π r dr = 1`.
pub fn lg_radial<T: Real>(p: usize, abs_l: usize, waist: T, r: T) -> T {
    let two = T::lit(2.0);
    // p! / (p+|l|)!
    let mut ratio = T::one();
    for k in (p + 1)..=(p + abs_l) {
        ratio /= idx::<T>(k);
    }
    let norm = (two * ratio / T::PI()).sqrt() / waist;
    let s = two.sqrt() * r / waist;
    let x = s * s;
    norm * s.powi(abs_l as i32) * laguerre(p, abs_l, x) * (-x / two).exp()
}

/// Unit-normalized LG_p^l amplitude at polar position `(r, θ)` in the waist
/// plane of a beam with waist `waist`.
pub fn lg_amplitude<T: Real>(mode: ModeIndex, waist: T, r: T, theta: T) -> Result<Complex<T>> {
    if !(waist.is_finite() && r.is_finite() && theta.is_finite()) {
        return Err(Error::InvalidArgument("non-finite LG argument".into()));
    }
    if waist <= T::zero() {
        return Err(Error::InvalidArgument(format!("waist must be positive, got {waist}")));
    }
    if r < T::zero() {
        return Err(Error::InvalidArgument(format!("radius must be non-negative, got {r}")));
    }
    let radial = lg_radial(mode.p as usize, mode.l.unsigned_abs() as usize, waist, r);
    Ok(cis(T::from_i32(mode.l).unwrap() * theta) * radial)
}

/// Complex LG coefficients of a transverse field for a basis of waist
/// `waist`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients<T> {
    pub waist: T,
    pub entries: BTreeMap<ModeIndex, Complex<T>>,
}

impl<T: Real> ModeCoefficients<T> {
    pub fn new(waist: T) -> Self {
        Self {
            waist,
            entries: BTreeMap::new(),
        }
    }

    /// A single normalized mode.
    pub fn pure(waist: T, mode: ModeIndex) -> Self {
        let mut c = Self::new(waist);
        c.entries.insert(mode, Complex::new(T::one(), T::zero()));
        c
    }

    /// Adds `amp` to the coefficient of `mode`; repeated modes accumulate.
    pub fn with(mut self, mode: ModeIndex, amp: Complex<T>) -> Self {
        *self.entries.entry(mode).or_default() += amp;
        self
    }

    pub fn get(&self, mode: ModeIndex) -> Complex<T> {
        self.entries.get(&mode).copied().unwrap_or_default()
    }

    pub fn power(&self) -> T {
        self.entries.values().map(|c| c.norm_sqr()).sum()
    }

    /// Power carried by all modes of winding `l`.
    pub fn winding_power(&self, l: i32) -> T {
        self.entries
            .iter()
            .filter(|(m, _)| m.l == l)
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    pub fn l_max(&self) -> usize {
        self.entries
            .keys()
            .map(|m| m.l.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn normalized(&self) -> Result<Self> {
        if self.entries.is_empty() {
            return Err(Error::EmptyTarget);
        }
        let p = self.power();
        if !(p > T::zero()) {
            return Err(Error::ZeroPower);
        }
        let s = p.sqrt().recip();
        Ok(Self {
            waist: self.waist,
            entries: self.entries.iter().map(|(m, c)| (*m, *c * s)).collect(),
        })
    }
}

/// Complex transverse amplitude sampled on a [`PolarGrid`]. Samples are
/// stored radius-major: index `i_r * n_theta + i_theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseField<T> {
    grid: Arc<PolarGrid<T>>,
    samples: Vec<Complex<T>>,
}

impl<T: Real> TransverseField<T> {
    pub fn zeros(grid: Arc<PolarGrid<T>>) -> Self {
        let n = grid.len();
        Self {
            grid,
            samples: vec![Complex::default(); n],
        }
    }

    pub fn from_samples(grid: Arc<PolarGrid<T>>, samples: Vec<Complex<T>>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {}",
                samples.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, samples })
    }

    pub fn from_fn(grid: Arc<PolarGrid<T>>, mut f: impl FnMut(T, T) -> Complex<T>) -> Self {
        let mut samples = Vec::with_capacity(grid.len());
        for &r in grid.radii() {
            for &t in grid.thetas() {
                samples.push(f(r, t));
            }
        }
        Self { grid, samples }
    }

    /// Renders a coefficient vector on `grid` using the coefficients' own
    /// waist.
    pub fn render(grid: Arc<PolarGrid<T>>, coeffs: &ModeCoefficients<T>) -> Self {
        let n_t = grid.n_theta();
        let mut out = Self::zeros(grid.clone());
        for (m, &c) in &coeffs.entries {
            let abs_l = m.l.unsigned_abs() as usize;
            let phases: Vec<Complex<T>> = grid
                .thetas()
                .iter()
                .map(|&t| cis(T::from_i32(m.l).unwrap() * t) * c)
                .collect();
            for (i, &r) in grid.radii().iter().enumerate() {
                let rad = lg_radial(m.p as usize, abs_l, coeffs.waist, r);
                let row = &mut out.samples[i * n_t..(i + 1) * n_t];
                for (s, ph) in row.iter_mut().zip(&phases) {
                    *s += *ph * rad;
                }
            }
        }
        out
    }

    pub fn grid(&self) -> &Arc<PolarGrid<T>> {
        &self.grid
    }

    pub fn waist(&self) -> T {
        self.grid.waist()
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.samples
    }

    pub fn ring(&self, i_r: usize) -> &[Complex<T>] {
        let n = self.grid.n_theta();
        &self.samples[i_r * n..(i_r + 1) * n]
    }

    /// Total power by quadrature.
    pub fn power(&self) -> T {
        let n = self.grid.n_theta();
        let dth = self.grid.dtheta();
        self.grid
            .radial_weights()
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let ring: T = self.samples[i * n..(i + 1) * n].iter().map(|c| c.norm_sqr()).sum();
                w * dth * ring
            })
            .sum()
    }

    pub fn scaled(&self, s: Complex<T>) -> Self {
        Self {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|c| *c * s).collect(),
        }
    }

    /// Multiplies the field by `e^{i·shift·θ}` on the grid nodes.
    pub fn shift_winding(&self, shift: i32) -> Self {
        let n = self.grid.n_theta();
        let phases: Vec<Complex<T>> = self
            .grid
            .thetas()
            .iter()
            .map(|&t| cis(T::from_i32(shift).unwrap() * t))
            .collect();
        let mut out = self.clone();
        for ring in out.samples.chunks_mut(n) {
            for (s, ph) in ring.iter_mut().zip(&phases) {
                *s *= *ph;
            }
        }
        out
    }

    /// Azimuthal harmonic of winding `l` on every ring:
    /// `(1/N_θ) Σ_k e^{-ilθ_k} f(r_i, θ_k)`.
    pub fn azimuthal_harmonic(&self, l: i32) -> Vec<Complex<T>> {
        let n = self.grid.n_theta();
        let inv_n = idx::<T>(n).recip();
        let phases: Vec<Complex<T>> = self
            .grid
            .thetas()
            .iter()
            .map(|&t| cis(-T::from_i32(l).unwrap() * t))
            .collect();
        self.samples
            .chunks(n)
            .map(|ring| {
                let s: Complex<T> = ring.iter().zip(&phases).map(|(a, b)| *a * *b).sum();
                s * inv_n
            })
            .collect()
    }
}

/// Inner product `⟨a|b⟩ = ∫ conj(a)·b dA` by quadrature.
pub fn overlap<T: Real>(a: &TransverseField<T>, b: &TransverseField<T>) -> Result<Complex<T>> {
    if !a.grid.same_as(&b.grid) {
        return Err(Error::GridMismatch("overlap of fields on different grids".into()));
    }
    let n = a.grid.n_theta();
    let dth = a.grid.dtheta();
    let mut acc = Complex::default();
    for (i, &w) in a.grid.radial_weights().iter().enumerate() {
        let ring: Complex<T> = a.samples[i * n..(i + 1) * n]
            .iter()
            .zip(&b.samples[i * n..(i + 1) * n])
            .map(|(x, y)| x.conj() * *y)
            .sum();
        acc += ring * (w * dth);
    }
    Ok(acc)
}

/// Projects a field onto LG modes with `p ≤ p_max`, `|l| ≤ l_max` at the
/// field's grid waist.
pub fn decompose<T: Real>(field: &TransverseField<T>, p_max: usize, l_max: usize) -> Result<ModeCoefficients<T>> {
    decompose_at(field, field.waist(), p_max, l_max)
}

/// Like [`decompose`] but for a basis waist that differs from the grid's
/// reference waist. The basis is evaluated on the field's own nodes, which
/// is the resampling step for mismatched waists.
pub fn decompose_at<T: Real>(
    field: &TransverseField<T>,
    basis_waist: T,
    p_max: usize,
    l_max: usize,
) -> Result<ModeCoefficients<T>> {
    let grid = &field.grid;
    check_truncation(grid, p_max, l_max)?;
    if !(basis_waist.is_finite() && basis_waist > T::zero()) {
        return Err(Error::InvalidArgument("basis waist must be positive".into()));
    }
    let mut out = ModeCoefficients::new(basis_waist);
    let tau = T::TAU();
    for l in -(l_max as i32)..=(l_max as i32) {
        let harmonic = field.azimuthal_harmonic(l);
        let abs_l = l.unsigned_abs() as usize;
        for p in 0..=p_max {
            let c: Complex<T> = grid
                .radii()
                .iter()
                .zip(grid.radial_weights())
                .zip(&harmonic)
                .map(|((&r, &w), h)| *h * (w * lg_radial(p, abs_l, basis_waist, r)))
                .sum::<Complex<T>>()
                * tau;
            out.entries.insert(ModeIndex::new(p as u32, l), c);
        }
    }
    Ok(out)
}

fn check_truncation<T: Real>(grid: &PolarGrid<T>, p_max: usize, l_max: usize) -> Result<()> {
    // N_θ ≥ 4 l_max keeps every basis harmonic and every pairwise product
    // below Nyquist; the radial rule needs at least one node per half
    // oscillation of the highest Laguerre factor pair.
    let azimuth_ok = grid.n_theta() >= 4 * l_max.max(1);
    let radial_ok = grid.n_r() >= 2 * (2 * p_max + l_max + 1);
    if azimuth_ok && radial_ok {
        Ok(())
    } else {
        Err(Error::TruncationExceedsGrid {
            p_max,
            l_max,
            n_r: grid.n_r(),
            n_theta: grid.n_theta(),
        })
    }
}

/// Fundamental Gaussian of waist `waist`, unit power on an infinite plane.
pub fn gaussian<T: Real>(grid: Arc<PolarGrid<T>>, waist: T) -> TransverseField<T> {
    TransverseField::from_fn(grid, |r, _| Complex::new(lg_radial(0, 0, waist, r), T::zero()))
}

/// SLM shaping of a Gaussian input beam.
///
/// With `phase_only == false` the target is rendered exactly. Otherwise the
/// input Gaussian (waist `input_waist`) is multiplied by the unit-modulus
/// mask `exp(i·arg target)`; the amplitude profile stays Gaussian, which is
/// what seeds the higher radial orders.
pub fn synthesize_slm<T: Real>(
    grid: Arc<PolarGrid<T>>,
    target: &ModeCoefficients<T>,
    phase_only: bool,
    input_waist: T,
) -> Result<TransverseField<T>> {
    if target.entries.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let target_power = target.power();
    if !(target_power > T::zero()) {
        return Err(Error::ZeroPower);
    }
    let rendered = TransverseField::render(grid.clone(), target);
    if !phase_only {
        return Ok(rendered);
    }
    if !(input_waist.is_finite() && input_waist > T::zero()) {
        return Err(Error::InvalidArgument("SLM input waist must be positive".into()));
    }
    let amp = target_power.sqrt();
    let n = grid.n_theta();
    let mut out = TransverseField::zeros(grid.clone());
    for (i, &r) in grid.radii().iter().enumerate() {
        let g = lg_radial(0, 0, input_waist, r) * amp;
        for k in 0..n {
            let t = rendered.samples[i * n + k];
            // arg(0) = 0 by convention
            out.samples[i * n + k] = cis(t.im.atan2(t.re)) * g;
        }
    }
    Ok(out)
}

/// Power per `(p, l)` of a synthesized beam, sorted by mode.
pub fn power_spectrum<T: Real>(coeffs: &ModeCoefficients<T>) -> Vec<(ModeIndex, T)> {
    coeffs.entries.iter().map(|(m, c)| (*m, c.norm_sqr())).collect()
}
