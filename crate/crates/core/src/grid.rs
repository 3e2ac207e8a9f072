//! Polar sampling grid: Gauss-Legendre radial nodes on `[0, extent]` and
//! uniform, half-step-offset azimuthal nodes.
//!
//! The azimuthal offset keeps every node off the symmetry axes, so binary
//! phase masks such as `sign(cos θ)` never sample an exact zero crossing.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Resolution of a polar grid, independent of the physical waist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_r: usize,
    pub n_theta: usize,
    /// Radial extent in units of the reference waist.
    pub extent_waists: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_r: 128,
            n_theta: 64,
            extent_waists: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid<T> {
    spec: GridSpec,
    waist: T,
    radii: Vec<T>,
    /// Gauss-Legendre weight times `r`, so `Σ w_i f(r_i) ≈ ∫ f(r) r dr`.
    radial_weights: Vec<T>,
    thetas: Vec<T>,
}

impl<T: Real> PolarGrid<T> {
    pub fn new(waist: T, spec: GridSpec) -> Result<Self> {
        if !(waist.is_finite() && waist > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "grid waist must be positive, got {waist}"
            )));
        }
        if spec.n_r < 2 || spec.n_theta < 4 {
            return Err(Error::InvalidArgument(format!(
                "grid too small: n_r={} n_theta={}",
                spec.n_r, spec.n_theta
            )));
        }
        if !(spec.extent_waists.is_finite() && spec.extent_waists > 0.0) {
            return Err(Error::InvalidArgument("grid extent must be positive".into()));
        }
        let extent = waist.to_f64_lossy() * spec.extent_waists;
        let (x, w) = gauss_legendre(spec.n_r);
        let half = 0.5 * extent;
        let radii_f: Vec<f64> = x.iter().map(|&xi| half * (xi + 1.0)).collect();
        let radii = radii_f.iter().map(|&r| T::lit(r)).collect();
        let radial_weights = radii_f.iter().zip(&w).map(|(&r, &wi)| T::lit(half * wi * r)).collect();
        let dtheta = 2.0 * PI / spec.n_theta as f64;
        let thetas = (0..spec.n_theta).map(|k| T::lit(dtheta * (k as f64 + 0.5))).collect();
        Ok(Self {
            spec,
            waist,
            radii,
            radial_weights,
            thetas,
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn waist(&self) -> T {
        self.waist
    }

    pub fn n_r(&self) -> usize {
        self.spec.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.spec.n_theta
    }

    pub fn len(&self) -> usize {
        self.spec.n_r * self.spec.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    pub fn radial_weights(&self) -> &[T] {
        &self.radial_weights
    }

    pub fn thetas(&self) -> &[T] {
        &self.thetas
    }

    /// Azimuthal quadrature weight `2π / N_θ`.
    pub fn dtheta(&self) -> T {
        T::TAU() / T::from_usize(self.spec.n_theta).unwrap()
    }

    /// Area element of sample `(i_r, ·)`.
    pub fn area(&self, i_r: usize) -> T {
        self.radial_weights[i_r] * self.dtheta()
    }

    /// Largest winding number whose products with any other basis winding
    /// stay strictly below the Nyquist harmonic.
    pub fn max_resolved_winding(&self) -> usize {
        self.spec.n_theta / 4
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.spec == other.spec && self.waist == other.waist
    }
}
