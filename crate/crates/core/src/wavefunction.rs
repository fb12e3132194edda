//! Wave functions on a [`GridSpec`] and their expectation values.

use std::f64::consts::PI;

use crate::fft::FftPair;
use crate::grid::GridSpec;
use crate::hamiltonian::HamiltonianSpec;
use crate::{Error, C64, Result};

/// Normalization tolerance accepted by the checked expectation routines.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Largest amplitude tolerated inside the outer guard bands.
pub const BOUNDARY_AMPLITUDE: f64 = 1e-6;

/// Complex amplitudes `ψ(x_k)` on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction {
    grid: GridSpec,
    amplitudes: Vec<C64>,
}

/// Observables with a direct grid or spectral representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    Q,
    P,
    Q2,
    P2,
    Energy,
    /// The symmetrized product `q̂p̂ + p̂q̂`.
    QpPq,
}

/// First and second moments of `q̂` and `p̂` for one state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub q_mean: f64,
    pub p_mean: f64,
    pub q_var: f64,
    pub p_var: f64,
    /// `½⟨q̂p̂ + p̂q̂⟩ − ⟨q̂⟩⟨p̂⟩`
    pub qp_cov: f64,
    pub norm: f64,
}

impl WaveFunction {
    pub fn from_amplitudes(grid: GridSpec, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points {
            return Err(Error::config(format!(
                "{} amplitudes for a grid of {} points",
                amplitudes.len(),
                grid.n_points
            )));
        }
        Ok(WaveFunction { grid, amplitudes })
    }

    /// Sample `f` at the grid nodes (unnormalized).
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64) -> C64) -> Self {
        let amplitudes = grid.positions().into_iter().map(f).collect();
        WaveFunction {
            grid: grid.clone(),
            amplitudes,
        }
    }

    /// Normalized Gaussian with position mean `center`, position standard
    /// deviation `width` and mean momentum `momentum`.
    pub fn gaussian(grid: &GridSpec, center: f64, width: f64, momentum: f64) -> Self {
        let hbar = grid.hbar;
        let amp = (2.0 * PI * width * width).powf(-0.25);
        let mut psi = Self::from_fn(grid, |x| {
            let d = x - center;
            let env = amp * (-d * d / (4.0 * width * width)).exp();
            C64::from_polar(env, momentum * d / hbar)
        });
        psi.normalize();
        psi
    }

    /// All mass on the single grid node nearest to `x0`.
    pub fn point_mass(grid: &GridSpec, x0: f64) -> Self {
        let k = (((x0 - grid.x_min) / grid.dx()).round().max(0.0) as usize).min(grid.n_points - 1);
        let mut amplitudes = vec![C64::new(0.0, 0.0); grid.n_points];
        amplitudes[k] = C64::new(1.0 / grid.dx().sqrt(), 0.0);
        WaveFunction {
            grid: grid.clone(),
            amplitudes,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    /// `Σ|ψ_k|²·dx`
    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes, self.grid.dx())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescale to unit norm. Returns the norm before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            let s = 1.0 / n;
            for a in &mut self.amplitudes {
                *a *= s;
            }
        }
        n
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &WaveFunction) -> C64 {
        inner(&self.amplitudes, &other.amplitudes, self.grid.dx())
    }

    /// `|⟨self|other⟩|` for normalized states.
    pub fn fidelity(&self, other: &WaveFunction) -> f64 {
        self.inner(other).norm()
    }

    /// L² distance `‖self − other‖`.
    pub fn distance(&self, other: &WaveFunction) -> f64 {
        let dx = self.grid.dx();
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            * dx.sqrt()
    }

    /// Error if the guard bands carry amplitude above [`BOUNDARY_AMPLITUDE`].
    pub fn check_boundary(&self) -> Result<()> {
        check_boundary(&self.amplitudes, &self.grid)
    }

    pub fn check_normalized(&self) -> Result<()> {
        let n2 = self.norm_sqr();
        if (n2 - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::numeric(format!(
                "wave function not normalized: ‖ψ‖² = {n2:.12}"
            )));
        }
        Ok(())
    }

    /// `⟨ψ|X̂ψ⟩` for a normalized state.
    pub fn expectation(&self, observable: Observable, h: &HamiltonianSpec) -> Result<f64> {
        self.check_normalized()?;
        let ops = SpectralOps::new(&self.grid);
        let value = match observable {
            Observable::Q => ops.q_moment(&self.amplitudes, 1),
            Observable::Q2 => ops.q_moment(&self.amplitudes, 2),
            Observable::P => ops.p_moment(&self.amplitudes, 1),
            Observable::P2 => ops.p_moment(&self.amplitudes, 2),
            Observable::Energy => ops.energy(&self.amplitudes, h),
            Observable::QpPq => ops.qp_sym(&self.amplitudes),
        };
        Ok(value)
    }

    /// Moments of `q̂` and `p̂` (no normalization check).
    pub fn moments(&self) -> Moments {
        SpectralOps::new(&self.grid).moments(&self.amplitudes)
    }
}

pub(crate) fn norm_sqr(a: &[C64], dx: f64) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx
}

pub(crate) fn inner(a: &[C64], b: &[C64], dx: f64) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>() * dx
}

pub(crate) fn check_boundary(a: &[C64], grid: &GridSpec) -> Result<()> {
    let w = grid.guard_width();
    let n = a.len();
    let worst = a[..w]
        .iter()
        .chain(&a[n - w..])
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    if worst > BOUNDARY_AMPLITUDE {
        let mass = norm_sqr(&a[..w], grid.dx()) + norm_sqr(&a[n - w..], grid.dx());
        return Err(Error::BoundaryEscape { mass, step: None });
    }
    Ok(())
}

/// Grid and spectral operator applications sharing one FFT plan.
#[derive(Clone)]
pub struct SpectralOps {
    pub(crate) grid: GridSpec,
    pub(crate) x: Vec<f64>,
    pub(crate) p: Vec<f64>,
    pub(crate) fft: FftPair,
}

impl SpectralOps {
    pub fn new(grid: &GridSpec) -> Self {
        SpectralOps {
            grid: grid.clone(),
            x: grid.positions(),
            p: grid.momenta(),
            fft: FftPair::new(grid.n_points),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    pub fn momenta(&self) -> &[f64] {
        &self.p
    }

    pub fn fft(&self) -> &FftPair {
        &self.fft
    }

    /// `Σ x^k |ψ|² dx / ‖ψ‖²`
    pub fn q_moment(&self, a: &[C64], k: i32) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (v, &x) in a.iter().zip(&self.x) {
            let w = v.norm_sqr();
            num += w * x.powi(k);
            den += w;
        }
        num / den
    }

    /// Moment of `p̂` from the discrete spectrum.
    pub fn p_moment(&self, a: &[C64], k: i32) -> f64 {
        let mut buf = a.to_vec();
        self.fft.forward(&mut buf);
        let mut num = 0.0;
        let mut den = 0.0;
        for (v, &p) in buf.iter().zip(&self.p) {
            let w = v.norm_sqr();
            num += w * p.powi(k);
            den += w;
        }
        num / den
    }

    /// `f(p̂)ψ` applied spectrally.
    pub fn apply_p_fn(&self, a: &[C64], f: impl Fn(f64) -> C64) -> Vec<C64> {
        let mut buf = a.to_vec();
        self.fft.forward(&mut buf);
        for (v, &p) in buf.iter_mut().zip(&self.p) {
            *v *= f(p);
        }
        self.fft.inverse(&mut buf);
        buf
    }

    pub fn apply_p(&self, a: &[C64]) -> Vec<C64> {
        self.apply_p_fn(a, |p| C64::new(p, 0.0))
    }

    pub fn apply_p2(&self, a: &[C64]) -> Vec<C64> {
        self.apply_p_fn(a, |p| C64::new(p * p, 0.0))
    }

    pub fn apply_q_fn(&self, a: &[C64], f: impl Fn(f64) -> f64) -> Vec<C64> {
        a.iter().zip(&self.x).map(|(v, &x)| v * f(x)).collect()
    }

    pub fn apply_q(&self, a: &[C64]) -> Vec<C64> {
        self.apply_q_fn(a, |x| x)
    }

    /// `Ĥψ`, or zero when the Hamiltonian is switched off.
    pub fn apply_h(&self, a: &[C64], h: &HamiltonianSpec) -> Vec<C64> {
        let mut out: Vec<C64> = a
            .iter()
            .zip(h.potential())
            .map(|(v, &phi)| v * phi)
            .collect();
        if let Some(m) = h.kinetic_mass() {
            let k = self.apply_p2(a);
            for (o, kv) in out.iter_mut().zip(k) {
                *o += kv / (2.0 * m);
            }
        }
        out
    }

    pub fn energy(&self, a: &[C64], h: &HamiltonianSpec) -> f64 {
        let dx = self.grid.dx();
        let hpsi = self.apply_h(a, h);
        inner(a, &hpsi, dx).re / norm_sqr(a, dx)
    }

    /// `⟨q̂p̂ + p̂q̂⟩ = 2 Re⟨q̂ψ|p̂ψ⟩`
    pub fn qp_sym(&self, a: &[C64]) -> f64 {
        let dx = self.grid.dx();
        let qa = self.apply_q(a);
        let pa = self.apply_p(a);
        2.0 * inner(&qa, &pa, dx).re / norm_sqr(a, dx)
    }

    pub fn moments(&self, a: &[C64]) -> Moments {
        let dx = self.grid.dx();
        let n2 = norm_sqr(a, dx);
        let q1 = self.q_moment(a, 1);
        let q2 = self.q_moment(a, 2);
        let mut spec = a.to_vec();
        self.fft.forward(&mut spec);
        let (mut p1, mut p2, mut den) = (0.0, 0.0, 0.0);
        for (v, &p) in spec.iter().zip(&self.p) {
            let w = v.norm_sqr();
            p1 += w * p;
            p2 += w * p * p;
            den += w;
        }
        p1 /= den;
        p2 /= den;
        // p̂ψ from the spectrum already in hand
        for (v, &p) in spec.iter_mut().zip(&self.p) {
            *v *= p;
        }
        self.fft.inverse(&mut spec);
        let qa = self.apply_q(a);
        let sym = inner(&qa, &spec, dx).re / n2;
        Moments {
            q_mean: q1,
            p_mean: p1,
            q_var: q2 - q1 * q1,
            p_var: p2 - p1 * p1,
            qp_cov: sym - q1 * p1,
            norm: n2.sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> GridSpec {
        GridSpec::new(256, -20.0, 20.0, 1.0).unwrap()
    }

    #[test]
    fn gaussian_is_normalized() {
        let psi = WaveFunction::gaussian(&grid(), 0.3, 1.2, -0.5);
        assert_abs_diff_eq!(psi.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn even_gaussian_centered() {
        let h = HamiltonianSpec::zero(&grid());
        let psi = WaveFunction::gaussian(&grid(), 0.0, 1.0, 0.0);
        assert_abs_diff_eq!(psi.expectation(Observable::Q, &h).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn shifted_gaussian_mean() {
        // ψ ∝ exp(−(q−1.5)²/4): position variance 1
        let h = HamiltonianSpec::zero(&grid());
        let mut psi = WaveFunction::from_fn(&grid(), |x| {
            C64::new((-(x - 1.5) * (x - 1.5) / 4.0).exp(), 0.0)
        });
        psi.normalize();
        assert_abs_diff_eq!(psi.expectation(Observable::Q, &h).unwrap(), 1.5, epsilon = 1e-8);
        assert_abs_diff_eq!(psi.expectation(Observable::Q2, &h).unwrap(), 1.0 + 2.25, epsilon = 1e-8);
    }

    #[test]
    fn boosted_gaussian_momentum() {
        let h = HamiltonianSpec::zero(&grid());
        let mut psi = WaveFunction::from_fn(&grid(), |x| {
            C64::from_polar((-x * x / 4.0).exp(), 2.0 * x)
        });
        psi.normalize();
        assert_abs_diff_eq!(psi.expectation(Observable::P, &h).unwrap(), 2.0, epsilon = 1e-8);
        // Var p = ħ²/(4 Var q) = 1/4
        assert_abs_diff_eq!(psi.expectation(Observable::P2, &h).unwrap(), 4.25, epsilon = 1e-8);
    }

    #[test]
    fn unnormalized_state_rejected() {
        let h = HamiltonianSpec::zero(&grid());
        let mut psi = WaveFunction::gaussian(&grid(), 0.0, 1.0, 0.0);
        for a in psi.amplitudes_mut() {
            *a *= 2.0;
        }
        assert!(matches!(psi.expectation(Observable::Q, &h), Err(Error::Numeric(_))));
    }

    #[test]
    fn symmetrized_product_for_chirped_gaussian() {
        // ψ ∝ exp(−x²/4 + i c x²/2): ⟨qp+pq⟩ = 2c·ħ⁻¹·ħ Var q with Var q = 1
        let c = 0.3;
        let mut psi = WaveFunction::from_fn(&grid(), |x| C64::from_polar((-x * x / 4.0).exp(), c * x * x / 2.0));
        psi.normalize();
        let m = psi.moments();
        assert_abs_diff_eq!(m.qp_cov, c, epsilon = 1e-8);
        let h = HamiltonianSpec::zero(&grid());
        assert_abs_diff_eq!(psi.expectation(Observable::QpPq, &h).unwrap(), 2.0 * c, epsilon = 1e-8);
    }

    #[test]
    fn spectral_momentum_matches_finite_difference() {
        let g = grid();
        let psi = WaveFunction::gaussian(&g, 0.7, 0.9, 1.3);
        let dx = g.dx();
        let a = psi.amplitudes();
        let n = a.len();
        let mut fd = C64::new(0.0, 0.0);
        for k in 1..n - 1 {
            let d = (a[k + 1] - a[k - 1]) / (2.0 * dx);
            fd += a[k].conj() * C64::new(0.0, -g.hbar) * d;
        }
        let fd = (fd * dx).re;
        let spectral = psi.moments().p_mean;
        // central differences are O(dx²) accurate
        assert!((fd - spectral).abs() < 2.0 * dx * dx, "{fd} vs {spectral}");
    }

    #[test]
    fn boundary_guard() {
        let g = grid();
        assert!(WaveFunction::gaussian(&g, 0.0, 1.0, 0.0).check_boundary().is_ok());
        assert!(matches!(
            WaveFunction::gaussian(&g, 18.0, 1.0, 0.0).check_boundary(),
            Err(Error::BoundaryEscape { .. })
        ));
    }
}
