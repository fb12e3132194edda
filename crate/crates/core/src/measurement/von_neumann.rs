use rand::Rng;

use crate::detector::DetectorProfile;
use crate::wavefunction::{norm_sqr, WaveFunction};
use crate::{Error, C64, Result};

/// Largest probability mass allowed outside an outcome grid.
pub const OUTCOME_TAIL_MASS: f64 = 1e-8;

/// `ρ(q′)` tabulated on a uniform outcome grid.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDensity {
    pub values: Vec<f64>,
    pub density: Vec<f64>,
    /// Simpson integral of `density` over the grid.
    pub mass: f64,
}

impl OutcomeDensity {
    /// `ρ(q′) = Σ_k |ψ_k|²dx·|φ_A(q′ − μq_k)|²` on `n` points in `[lo, hi]`.
    pub fn von_neumann(psi: &WaveFunction, profile: &DetectorProfile, mu: f64, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) || n < 3 {
            return Err(Error::config("outcome grid needs hi > lo and at least 3 points"));
        }
        let n = n | 1;
        let dx = psi.grid().dx();
        let weights: Vec<(f64, f64)> = psi
            .amplitudes()
            .iter()
            .zip(psi.grid().positions())
            .map(|(v, x)| (v.norm_sqr() * dx, x))
            .filter(|(w, _)| *w > 0.0)
            .collect();
        let h = (hi - lo) / (n - 1) as f64;
        let values: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
        let density: Vec<f64> = values
            .iter()
            .map(|&q| {
                weights
                    .iter()
                    .map(|&(w, x)| w * profile.pointer_amplitude(q - mu * x).powi(2))
                    .sum()
            })
            .collect();
        let mass = simpson(&density, h);
        if 1.0 - mass > OUTCOME_TAIL_MASS {
            return Err(Error::config(format!(
                "outcome grid [{lo}, {hi}] misses probability mass {:.3e}",
                1.0 - mass
            )));
        }
        Ok(OutcomeDensity { values, density, mass })
    }

    /// Outcome grid wide enough for the pointer support shifted by `μq` over
    /// the whole system grid.
    pub fn von_neumann_covering(psi: &WaveFunction, profile: &DetectorProfile, mu: f64, n: usize) -> Result<Self> {
        let g = psi.grid();
        let reach = profile.sigma() * profile.y_max();
        let (a, b) = (mu * g.x_min, mu * g.x(g.n_points - 1));
        Self::von_neumann(psi, profile, mu, a.min(b) - reach, a.max(b) + reach, n)
    }

    fn step(&self) -> f64 {
        self.values[1] - self.values[0]
    }

    pub fn mean(&self) -> f64 {
        let f: Vec<f64> = self.values.iter().zip(&self.density).map(|(x, d)| x * d).collect();
        simpson(&f, self.step()) / self.mass
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let f: Vec<f64> = self.values.iter().zip(&self.density).map(|(x, d)| (x - m).powi(2) * d).collect();
        simpson(&f, self.step()) / self.mass
    }
}

fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    let mut s = f[0] + f[n - 1];
    for (i, v) in f.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Draw a grid index from the weights `|a_k|²`.
pub(crate) fn sample_index<R: Rng + ?Sized>(a: &[C64], rng: &mut R) -> usize {
    let total: f64 = a.iter().map(|v| v.norm_sqr()).sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, v) in a.iter().enumerate() {
        let w = v.norm_sqr();
        if w > 0.0 {
            acc += w;
            last = k;
            if acc > target {
                return k;
            }
        }
    }
    last
}

/// One von Neumann measurement on grid amplitudes, in place. Returns `Q′`.
///
/// `Q′ = σY + μq_k` with `k` drawn from `|ψ_k|²` is an exact draw from
/// `ρ(q′)`; the state is then conditioned on it.
pub(crate) fn measure_position<R: Rng + ?Sized>(
    x: &[f64],
    a: &mut [C64],
    dx: f64,
    profile: &DetectorProfile,
    mu: f64,
    rng: &mut R,
) -> Result<f64> {
    let sigma = profile.sigma();
    if mu == 0.0 {
        return Ok(sigma * profile.sample(rng));
    }
    let k = sample_index(a, rng);
    let q_prime = sigma * profile.sample(rng) + mu * x[k];
    for (v, &xk) in a.iter_mut().zip(x) {
        *v *= profile.pointer_amplitude(q_prime - mu * xk);
    }
    let n2 = norm_sqr(a, dx);
    if !(n2 > 0.0 && n2.is_finite()) {
        return Err(Error::numeric(format!("outcome Q' = {q_prime} has zero likelihood")));
    }
    let s = 1.0 / n2.sqrt();
    for v in a.iter_mut() {
        *v *= s;
    }
    Ok(q_prime)
}

/// `(ψ′, Q′)` for one position measurement with coupling `mu`.
pub fn von_neumann_step<R: Rng + ?Sized>(
    psi: &WaveFunction,
    profile: &DetectorProfile,
    mu: f64,
    rng: &mut R,
) -> Result<(WaveFunction, f64)> {
    psi.check_normalized()?;
    let mut out = psi.clone();
    let x = psi.grid().positions();
    let dx = psi.grid().dx();
    let q = measure_position(&x, out.amplitudes_mut(), dx, profile, mu, rng)?;
    Ok((out, q))
}
