//! `Ĥ = p̂²/2m + Φ(q̂)` tabulated on a grid, and Strang split-step propagation.

use crate::grid::GridSpec;
use crate::spline::CubicSpline;
use crate::wavefunction::{check_boundary, SpectralOps, WaveFunction};
use crate::{Error, C64, Result};

/// A Hamiltonian tabulated on a grid.
///
/// The kinetic term may be switched off entirely (`Ĥ = Φ(q̂)`), which is how
/// the pure-monitoring runs with `Ĥ = 0` are expressed.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    mass: f64,
    kinetic: bool,
    potential: Vec<f64>,
    force: Vec<f64>,
    curvature: Vec<f64>,
}

impl HamiltonianSpec {
    /// `Ĥ = 0`
    pub fn zero(grid: &GridSpec) -> Self {
        HamiltonianSpec {
            mass: 1.0,
            kinetic: false,
            potential: vec![0.0; grid.n_points],
            force: vec![0.0; grid.n_points],
            curvature: vec![0.0; grid.n_points],
        }
    }

    pub fn free(grid: &GridSpec, mass: f64) -> Result<Self> {
        Self::from_fn(grid, mass, |_| (0.0, 0.0, 0.0))
    }

    /// `Φ = ½mω²q²`; `Φ″ ≡ mω²` exactly.
    pub fn harmonic(grid: &GridSpec, mass: f64, omega: f64) -> Result<Self> {
        let k = mass * omega * omega;
        Self::from_fn(grid, mass, |x| (0.5 * k * x * x, k * x, k))
    }

    /// `Φ = λq⁴`
    pub fn quartic(grid: &GridSpec, mass: f64, lambda: f64) -> Result<Self> {
        Self::from_fn(grid, mass, |x| {
            (lambda * x.powi(4), 4.0 * lambda * x.powi(3), 12.0 * lambda * x * x)
        })
    }

    /// User table of `(x, Φ(x), Φ″(x))`, spline-interpolated onto the grid.
    pub fn from_table(grid: &GridSpec, mass: f64, x: &[f64], phi: &[f64], phi_dd: &[f64]) -> Result<Self> {
        if phi.len() != x.len() || phi_dd.len() != x.len() {
            return Err(Error::config("potential table columns differ in length"));
        }
        let lo = x.first().copied().unwrap_or(f64::NAN);
        let hi = x.last().copied().unwrap_or(f64::NAN);
        if !(lo <= grid.x_min && hi >= grid.x(grid.n_points - 1)) {
            return Err(Error::config(format!(
                "potential table [{lo}, {hi}] does not cover the grid"
            )));
        }
        let s_phi = CubicSpline::natural(x.to_vec(), phi.to_vec())?;
        let s_dd = CubicSpline::natural(x.to_vec(), phi_dd.to_vec())?;
        Self::from_fn(grid, mass, |t| {
            let (v, d, _) = s_phi.eval_all(t);
            (v, d, s_dd.eval(t))
        })
    }

    /// Tabulate `x ↦ (Φ, Φ′, Φ″)`.
    pub fn from_fn(grid: &GridSpec, mass: f64, f: impl Fn(f64) -> (f64, f64, f64)) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::config(format!("mass must be positive, got {mass}")));
        }
        let n = grid.n_points;
        let mut h = HamiltonianSpec {
            mass,
            kinetic: true,
            potential: Vec::with_capacity(n),
            force: Vec::with_capacity(n),
            curvature: Vec::with_capacity(n),
        };
        for x in grid.positions() {
            let (v, d, dd) = f(x);
            if !(v.is_finite() && d.is_finite() && dd.is_finite()) {
                return Err(Error::config(format!("potential is not finite at x = {x}")));
            }
            h.potential.push(v);
            h.force.push(d);
            h.curvature.push(dd);
        }
        Ok(h)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// The mass if the kinetic term is present.
    pub fn kinetic_mass(&self) -> Option<f64> {
        self.kinetic.then_some(self.mass)
    }

    pub fn is_zero(&self) -> bool {
        !self.kinetic && self.potential.iter().all(|&v| v == 0.0)
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// `Φ′` at the grid nodes.
    pub fn potential_gradient(&self) -> &[f64] {
        &self.force
    }

    /// `Φ″` at the grid nodes.
    pub fn potential_curvature(&self) -> &[f64] {
        &self.curvature
    }
}

/// Precomputed Strang splitting `e^{−iΦτ/2ħ} e^{−ip²τ/2mħ} e^{−iΦτ/2ħ}`.
#[derive(Clone)]
pub struct Propagator {
    ops: SpectralOps,
    half_potential: Vec<C64>,
    kinetic: Option<Vec<C64>>,
    trivial: bool,
    tau: f64,
}

impl Propagator {
    pub fn new(grid: &GridSpec, h: &HamiltonianSpec, tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::config(format!("time step must be >= 0, got {tau}")));
        }
        if h.potential.len() != grid.n_points {
            return Err(Error::config("Hamiltonian tabulated on a different grid"));
        }
        let ops = SpectralOps::new(grid);
        let hbar = grid.hbar;
        let half_potential = h
            .potential
            .iter()
            .map(|&v| C64::from_polar(1.0, -v * tau / (2.0 * hbar)))
            .collect();
        let kinetic = h.kinetic_mass().map(|m| {
            ops.momenta()
                .iter()
                .map(|&p| C64::from_polar(1.0, -p * p * tau / (2.0 * m * hbar)))
                .collect()
        });
        Ok(Propagator {
            ops,
            half_potential,
            kinetic,
            trivial: tau == 0.0 || h.is_zero(),
            tau,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Apply one split step in place (no boundary check).
    pub fn apply(&self, a: &mut [C64]) {
        if self.trivial {
            return;
        }
        for (v, ph) in a.iter_mut().zip(&self.half_potential) {
            *v *= ph;
        }
        if let Some(kin) = &self.kinetic {
            self.ops.fft.forward(a);
            for (v, ph) in a.iter_mut().zip(kin) {
                *v *= ph;
            }
            self.ops.fft.inverse(a);
        }
        for (v, ph) in a.iter_mut().zip(&self.half_potential) {
            *v *= ph;
        }
    }

    /// Apply one step and enforce the boundary guard.
    pub fn step(&self, psi: &mut WaveFunction) -> Result<()> {
        self.apply(psi.amplitudes_mut());
        check_boundary(psi.amplitudes(), psi.grid())
    }
}

/// `e^{τĤ/iħ}ψ` by a single Strang step.
pub fn free_evolve(psi: &WaveFunction, h: &HamiltonianSpec, tau: f64) -> Result<WaveFunction> {
    let prop = Propagator::new(psi.grid(), h, tau)?;
    let mut out = psi.clone();
    prop.step(&mut out)?;
    Ok(out)
}

/// `n_steps` Strang steps of size `tau`.
pub fn evolve_steps(psi: &WaveFunction, h: &HamiltonianSpec, tau: f64, n_steps: usize) -> Result<WaveFunction> {
    let prop = Propagator::new(psi.grid(), h, tau)?;
    let mut out = psi.clone();
    for step in 0..n_steps {
        prop.step(&mut out).map_err(|e| e.at_step(step + 1))?;
    }
    Ok(out)
}
