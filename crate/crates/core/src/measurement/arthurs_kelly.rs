use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::von_neumann::sample_index;
use crate::detector::DetectorProfile;
use crate::fft::FftPair;
use crate::grid::GridSpec;
use crate::quadrature::integrate;
use crate::wavefunction::{norm_sqr, SpectralOps};
use crate::{Error, C64, Result};

/// Mass allowed in the outer tenth of the `p″` period on either side.
pub const PERIOD_EDGE_MASS: f64 = 1e-8;

/// Discretization of the momentum-pointer apparatus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AkOptions {
    /// Number of `q″` nodes.
    pub n_qpp: usize,
    /// Half width of the `q″` grid in units of `ħ/σ_p`.
    pub qpp_half_width: f64,
}

impl Default for AkOptions {
    fn default() -> Self {
        AkOptions {
            n_qpp: 48,
            qpp_half_width: 6.0,
        }
    }
}

/// Exact Arthurs–Kelly measurement step on a system grid.
///
/// The momentum pointer is held in its conjugate (`q″`) representation on a
/// uniform grid of `n_b` nodes. With `S_j(q) = ψ(q + νq″_j)` the outcome
/// amplitude is
///
/// `Φ(q, q′, p″) ∝ Σ_j e^{−ip″q″_j/ħ} S_j(q) Λ̌(q″_j) φ_A(q′ − μq − μνq″_j/2)`,
///
/// which is sampled without materializing the three-axis tensor: `Q′` from
/// its mixture representation, then `P″` from the conditional density, a
/// trigonometric polynomial whose CDF is inverted in closed form.
#[derive(Clone)]
pub struct AkKernel {
    ops: SpectralOps,
    chi: DetectorProfile,
    lambda: DetectorProfile,
    mu: f64,
    nu: f64,
    qpp: Vec<f64>,
    lam: Vec<f64>,
    lam_cdf: Vec<f64>,
    h: f64,
    /// `e^{ipνq″_j/ħ}`, row `j`
    shift_phase: Vec<C64>,
    corr: FftPair,
    spec: Vec<C64>,
    shifted: Vec<C64>,
    f: Vec<C64>,
    g: Vec<C64>,
    r: Vec<C64>,
    active: (usize, usize),
}

/// One sampled outcome with the pre-measurement mean momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct AkOutcome {
    pub q_prime: f64,
    pub p_double_prime: f64,
    pub p_mean_pre: f64,
}

impl AkKernel {
    pub fn new(
        grid: &GridSpec,
        chi: &DetectorProfile,
        lambda: &DetectorProfile,
        mu: f64,
        nu: f64,
        opts: AkOptions,
    ) -> Result<Self> {
        if opts.n_qpp < 4 || !(opts.qpp_half_width > 0.0) {
            return Err(Error::config("q'' grid needs at least 4 nodes and a positive half width"));
        }
        let hbar = grid.hbar;
        let nb = opts.n_qpp;
        let w = opts.qpp_half_width * hbar / lambda.sigma();
        let h = 2.0 * w / nb as f64;
        let qpp: Vec<f64> = (0..nb).map(|j| -w + j as f64 * h).collect();
        let lam = qpp
            .iter()
            .map(|&q| pointer_conjugate(lambda, q, hbar))
            .collect::<Result<Vec<f64>>>()?;
        let weights: Vec<f64> = lam.iter().map(|l| l * l * h).collect();
        let mass: f64 = weights.iter().sum();
        if (1.0 - mass).abs() > 1e-8 {
            return Err(Error::config(format!(
                "q'' grid captures pointer mass {mass:.10}; widen qpp_half_width or add nodes"
            )));
        }
        let mut lam_cdf = Vec::with_capacity(nb);
        let mut acc = 0.0;
        for w in &weights {
            acc += w / mass;
            lam_cdf.push(acc);
        }
        let n = grid.n_points;
        let l = 2 * nb;
        let ops = SpectralOps::new(grid);
        let shift_phase = qpp
            .iter()
            .flat_map(|&q| {
                ops.momenta()
                    .iter()
                    .map(move |&p| C64::from_polar(1.0, p * nu * q / hbar))
            })
            .collect();
        Ok(AkKernel {
            ops,
            chi: chi.clone(),
            lambda: lambda.clone(),
            mu,
            nu,
            qpp,
            lam,
            lam_cdf,
            h,
            shift_phase,
            corr: FftPair::new(l),
            spec: vec![C64::default(); n],
            shifted: vec![C64::default(); nb * n],
            f: vec![C64::default(); n * l],
            g: vec![C64::default(); n * l],
            r: vec![C64::default(); l],
            active: (0, 0),
        })
    }

    pub fn qpp_nodes(&self) -> &[f64] {
        &self.qpp
    }

    /// `Λ̌(q″_j)` at the nodes.
    pub fn qpp_amplitudes(&self) -> &[f64] {
        &self.lam
    }

    /// Period of the `p″` density on the discrete `q″` grid.
    pub fn p_period(&self) -> f64 {
        2.0 * PI * self.ops.grid().hbar / self.h
    }

    /// Fill `shifted` with `S_j = ψ(· + νq″_j)`; returns the mean momentum.
    fn shift_rows(&mut self, a: &[C64]) -> f64 {
        let n = a.len();
        self.spec.copy_from_slice(a);
        self.ops.fft().forward(&mut self.spec);
        let (mut num, mut den) = (0.0, 0.0);
        for (v, &p) in self.spec.iter().zip(self.ops.momenta()) {
            let w = v.norm_sqr();
            num += w * p;
            den += w;
        }
        for j in 0..self.qpp.len() {
            let row = &mut self.shifted[j * n..(j + 1) * n];
            if self.nu == 0.0 {
                row.copy_from_slice(a);
                continue;
            }
            let ph = &self.shift_phase[j * n..(j + 1) * n];
            for ((o, v), e) in row.iter_mut().zip(&self.spec).zip(ph) {
                *o = v * e;
            }
            self.ops.fft().inverse(row);
        }
        num / den
    }

    /// Indices `[lo, hi)` where some shifted row is non-negligible.
    fn active_range(&self, n: usize) -> (usize, usize) {
        let peak = self.shifted.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        let thr = peak * 1e-28;
        let nb = self.qpp.len();
        let live = |k: usize| (0..nb).any(|j| self.shifted[j * n + k].norm_sqr() > thr);
        let lo = (0..n).find(|&k| live(k)).unwrap_or(0);
        let hi = (0..n).rev().find(|&k| live(k)).map_or(n, |k| k + 1);
        (lo, hi)
    }

    /// `F[k][j] = S_j(q_k) Λ̌_j φ_A(Q′ − μq_k − μνq″_j/2)`, stored row-major
    /// by `k` with rows padded to `2n_b`.
    fn fill_f(&mut self, q_prime: f64, lo: usize, hi: usize) {
        let n = self.ops.grid().n_points;
        let nb = self.qpp.len();
        let l = 2 * nb;
        self.active = (lo, hi);
        let x = self.ops.positions();
        // the padding half of each row is never written and stays zero
        for k in lo..hi {
            let row = &mut self.f[(k - lo) * l..(k - lo) * l + nb];
            for (j, out) in row.iter_mut().enumerate() {
                let s = self.shifted[j * n + k];
                if s == C64::default() {
                    *out = s;
                    continue;
                }
                let arg = q_prime - self.mu * x[k] - 0.5 * self.mu * self.nu * self.qpp[j];
                *out = s * (self.lam[j] * self.chi.pointer_amplitude(arg));
            }
        }
    }

    /// Autocorrelations `R_d = Σ_k Σ_j F[k][j+d] F[k][j]*` for `d < n_b`.
    fn autocorrelate(&mut self) {
        let l = 2 * self.qpp.len();
        let len = (self.active.1 - self.active.0) * l;
        self.g[..len].copy_from_slice(&self.f[..len]);
        self.corr.forward_rows(&mut self.g[..len]);
        self.r.fill(C64::default());
        for row in self.g[..len].chunks(l) {
            for (acc, v) in self.r.iter_mut().zip(row) {
                *acc += v.norm_sqr();
            }
        }
        self.corr.inverse(&mut self.r);
    }

    /// CDF and density of `P″` on `[−P/2, P/2)` given the autocorrelations.
    fn p_cdf(&self, p: f64) -> (f64, f64) {
        let hbar = self.ops.grid().hbar;
        let period = self.p_period();
        let a = self.h / hbar;
        let r0 = self.r[0].re;
        let z = C64::from_polar(1.0, -a * p);
        let mut zd = C64::new(1.0, 0.0);
        let mut cdf = r0 * (p + 0.5 * period);
        let mut dens = r0;
        for d in 1..self.qpp.len() {
            zd *= z;
            let rd = self.r[d];
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            cdf += 2.0 * (rd * C64::new(0.0, 1.0 / (a * d as f64)) * (zd - sign)).re;
            dens += 2.0 * (rd * zd).re;
        }
        let total = r0 * period;
        (cdf / total, dens / total)
    }

    fn invert_p(&self, u: f64) -> f64 {
        let period = self.p_period();
        let (mut lo, mut hi) = (-0.5 * period, 0.5 * period);
        let mut p = 0.0;
        for _ in 0..200 {
            let (c, d) = self.p_cdf(p);
            let err = c - u;
            if err.abs() < 1e-15 {
                break;
            }
            if err > 0.0 {
                hi = p;
            } else {
                lo = p;
            }
            let newton = p - err / d;
            p = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-14 * period {
                break;
            }
        }
        p
    }

    /// Measure, condition `a` in place and return the outcomes.
    pub(crate) fn measure<R: Rng + ?Sized>(&mut self, a: &mut [C64], rng: &mut R) -> Result<AkOutcome> {
        let n = a.len();
        let hbar = self.ops.grid().hbar;
        if self.mu == 0.0 && self.nu == 0.0 {
            let p_mean_pre = self.ops.p_moment(a, 1);
            return Ok(AkOutcome {
                q_prime: self.chi.sigma() * self.chi.sample(rng),
                p_double_prime: self.lambda.sigma() * self.lambda.sample(rng),
                p_mean_pre,
            });
        }
        let p_mean_pre = self.shift_rows(a);
        let u: f64 = rng.random();
        let j = self.lam_cdf.partition_point(|&c| c <= u).min(self.qpp.len() - 1);
        let k = sample_index(&self.shifted[j * n..(j + 1) * n], rng);
        let q_prime = self.chi.sigma() * self.chi.sample(rng)
            + self.mu * self.ops.positions()[k]
            + 0.5 * self.mu * self.nu * self.qpp[j];
        let (lo, hi) = self.active_range(n);
        self.fill_f(q_prime, lo, hi);
        self.autocorrelate();
        if !(self.r[0].re > 0.0) {
            return Err(Error::numeric(format!("outcome Q' = {q_prime} has zero likelihood")));
        }
        let period = self.p_period();
        let edge = self.p_cdf(-0.4 * period).0 + 1.0 - self.p_cdf(0.4 * period).0;
        if edge > PERIOD_EDGE_MASS {
            return Err(Error::config(format!(
                "p'' density reaches the edge of its period (mass {edge:.3e}); use a finer q'' grid"
            )));
        }
        let p_double_prime = self.invert_p(rng.random());
        let l = 2 * self.qpp.len();
        let phases: Vec<C64> = self
            .qpp
            .iter()
            .map(|&q| C64::from_polar(1.0, -p_double_prime * q / hbar))
            .collect();
        a.fill(C64::default());
        for k in lo..hi {
            let row = &self.f[(k - lo) * l..(k - lo) * l + self.qpp.len()];
            a[k] = row.iter().zip(&phases).map(|(f, e)| f * e).sum();
        }
        let dx = self.ops.grid().dx();
        let n2 = norm_sqr(a, dx);
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::numeric("conditioned state vanished"));
        }
        let s = 1.0 / n2.sqrt();
        for v in a.iter_mut() {
            *v *= s;
        }
        Ok(AkOutcome {
            q_prime,
            p_double_prime,
            p_mean_pre,
        })
    }

    /// Unnormalized `ρ(Q′, p″)` for the current `a`, on `[−P/2, P/2)`
    /// scaled so that it integrates to the `Q′` marginal.
    pub fn joint_density(&mut self, a: &[C64], q_prime: f64, p: f64) -> f64 {
        let n = a.len();
        self.shift_rows(a);
        self.fill_f(q_prime, 0, n);
        self.autocorrelate();
        let (_, d) = self.p_cdf(p);
        let dx = self.ops.grid().dx();
        // Σ_k Σ_j |F|² h dx is the Q′ marginal
        d * self.r[0].re * self.h * dx
    }

    #[cfg(test)]
    pub(crate) fn f_matrix(&mut self, a: &[C64], q_prime: f64) -> Vec<C64> {
        let n = a.len();
        self.shift_rows(a);
        self.fill_f(q_prime, 0, n);
        self.f.clone()
    }
}

/// `Λ̌(q) = (2πħ)^{−1/2} ∫ e^{ipq/ħ} Λ(p) dp` for the real even pointer
/// `Λ(p) = σ^{−1/2} λ((p/σ)²)`.
pub(crate) fn pointer_conjugate(lambda: &DetectorProfile, q: f64, hbar: f64) -> Result<f64> {
    // the amplitude decays like the square root of the density, so reach
    // past the density cutoff
    let pmax = lambda.sigma() * lambda.y_max();
    let v = integrate(
        |p| (p * q / hbar).cos() * lambda.pointer_amplitude(p),
        0.0,
        2.0 * pmax,
        &[pmax],
        1e-15,
    )?;
    Ok(2.0 * v / (2.0 * PI * hbar).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::wavefunction::WaveFunction;

    fn setup(mu: f64, nu: f64) -> (GridSpec, AkKernel) {
        let g = GridSpec::new(128, -16.0, 16.0, 1.0).unwrap();
        let chi = DetectorProfile::gaussian(1.0).unwrap();
        let k = AkKernel::new(&g, &chi, &chi, mu, nu, AkOptions::default()).unwrap();
        (g, k)
    }

    #[test]
    fn gaussian_conjugate_pointer() {
        // Λ(p) with unit variance has Λ̌(q) = (π/2)^{−1/4} e^{−q²}
        let chi = DetectorProfile::gaussian(1.0).unwrap();
        for q in [0.0, 0.3, 1.1, 2.5] {
            let v = pointer_conjugate(&chi, q, 1.0).unwrap();
            assert!((v - (PI / 2.0).powf(-0.25) * (-q * q).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_step() {
        let (g, mut k) = setup(0.0, 0.0);
        let psi = WaveFunction::gaussian(&g, 0.5, 1.0, 0.3);
        let mut a = psi.amplitudes().to_vec();
        let mut rng = stream(4, 0);
        let o = k.measure(&mut a, &mut rng).unwrap();
        assert_eq!(a, psi.amplitudes());
        assert!((o.p_mean_pre - 0.3).abs() < 1e-8);
    }

    #[test]
    fn cdf_is_consistent() {
        let (g, mut k) = setup(0.3, 0.2);
        let psi = WaveFunction::gaussian(&g, 0.5, 1.0, 0.3);
        let a = psi.amplitudes().to_vec();
        k.shift_rows(&a);
        k.fill_f(0.4, 0, g.n_points);
        k.autocorrelate();
        let period = k.p_period();
        assert!(k.p_cdf(-0.5 * period).0.abs() < 1e-12);
        assert!((k.p_cdf(0.5 * period).0 - 1.0).abs() < 1e-12);
        // density integrates to the CDF increment
        let (a0, b0) = (-1.0, 1.5);
        let v = integrate(|p| k.p_cdf(p).1, a0, b0, &[], 1e-13).unwrap();
        assert!((v - (k.p_cdf(b0).0 - k.p_cdf(a0).0)).abs() < 1e-10);
        for u in [1e-6, 0.2, 0.5, 0.93] {
            assert!((k.p_cdf(k.invert_p(u)).0 - u).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_density_matches_direct_sum() {
        // independent route: Φ(q_k, Q′, p″) by direct evaluation of the q″ sum
        let (g, mut k) = setup(0.3, 0.2);
        let psi = WaveFunction::gaussian(&g, 0.5, 1.0, 0.3);
        let a = psi.amplitudes().to_vec();
        let (qp, pp) = (0.4, -0.7);
        let got = k.joint_density(&a, qp, pp);
        let chi = DetectorProfile::gaussian(1.0).unwrap();
        let h = k.h;
        let mut want = 0.0;
        for (kk, &x) in g.positions().iter().enumerate() {
            let mut amp = C64::default();
            for (j, &q) in k.qpp.iter().enumerate() {
                let s = k.shifted[j * g.n_points + kk];
                amp += C64::from_polar(1.0, -pp * q) * s * k.lam[j] * chi.pointer_amplitude(qp - 0.3 * x - 0.03 * q) * h;
            }
            want += amp.norm_sqr() * g.dx() / (2.0 * PI);
        }
        assert!((got - want).abs() < 1e-12 * want.max(1.0), "{got} {want}");
    }

    #[test]
    fn step_normalizes_and_is_deterministic() {
        let (g, mut k) = setup(0.1, 0.1);
        let psi = WaveFunction::gaussian(&g, 0.5, 1.0, 0.3);
        let mut a = psi.amplitudes().to_vec();
        let mut b = a.clone();
        let oa = k.measure(&mut a, &mut stream(9, 3)).unwrap();
        let ob = k.measure(&mut b, &mut stream(9, 3)).unwrap();
        assert_eq!(oa, ob);
        assert_eq!(a, b);
        assert!((norm_sqr(&a, g.dx()) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn coarse_qpp_grid_is_rejected() {
        let g = GridSpec::new(64, -8.0, 8.0, 1.0).unwrap();
        let chi = DetectorProfile::gaussian(1.0).unwrap();
        let opts = AkOptions {
            n_qpp: 8,
            qpp_half_width: 1.0,
        };
        assert!(matches!(
            AkKernel::new(&g, &chi, &chi, 0.1, 0.1, opts),
            Err(Error::Config(_))
        ));
    }
}
