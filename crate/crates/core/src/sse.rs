//! Euler–Maruyama integration of the normalized stochastic Schrödinger
//! equation with position and momentum monitoring, and the Lindblad drift of
//! observables.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::hamiltonian::{HamiltonianSpec, Propagator};
use crate::rng::{stream, SimRng};
use crate::wavefunction::{check_boundary, inner, norm_sqr, Moments, Observable, SpectralOps, WaveFunction};
use crate::{Error, C64, Result};

/// Upper bound on `dt·κ·L²` for either channel.
pub const STABILITY_LIMIT: f64 = 0.1;

/// Time-stepping scheme for the measurement terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SseScheme {
    /// `ψ + {−κ(X−⟨X⟩)²dt − √(2κ)(X−⟨X⟩)dB}ψ` for each channel.
    #[default]
    EulerMaruyama,
    /// `exp{−2κ(X−⟨X⟩)²dt − √(2κ)(X−⟨X⟩)dB}ψ`, position factor then
    /// momentum factor. Agrees with the Milstein expansion up to a scalar
    /// multiple of ψ, so observables converge with strong order one.
    Exponential,
}

/// Parameters of one SSE run.
#[derive(Clone, Debug)]
pub struct SseConfig {
    pub kappa_q: f64,
    pub kappa_p: f64,
    pub dt: f64,
    pub hamiltonian: HamiltonianSpec,
    pub n_steps: usize,
    pub seed: u64,
    pub renormalize: bool,
    /// Record expectations every this many steps (the initial state is
    /// always recorded).
    pub record_every: usize,
    pub scheme: SseScheme,
}

impl SseConfig {
    pub fn new(kappa_q: f64, kappa_p: f64, dt: f64, hamiltonian: HamiltonianSpec, n_steps: usize, seed: u64) -> Self {
        SseConfig {
            kappa_q,
            kappa_p,
            dt,
            hamiltonian,
            n_steps,
            seed,
            renormalize: true,
            record_every: 1,
            scheme: SseScheme::EulerMaruyama,
        }
    }

    /// Check signs and the explicit-step stability guard on `grid`.
    pub fn validate(&self, grid: &crate::grid::GridSpec) -> Result<()> {
        if !(self.kappa_q >= 0.0 && self.kappa_p >= 0.0) {
            return Err(Error::config("kappa_q and kappa_p must be >= 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::config("record_every must be >= 1"));
        }
        let lq = grid.x_max - grid.x_min;
        let lp = grid.dp() * grid.n_points as f64;
        let s = self.dt * (self.kappa_q * lq * lq).max(self.kappa_p * lp * lp);
        if s >= STABILITY_LIMIT {
            return Err(Error::config(format!(
                "dt·κ·L² = {s:.3} exceeds the stability limit {STABILITY_LIMIT}; reduce dt or the grid extent"
            )));
        }
        Ok(())
    }
}

/// Independent Wiener increments `dB_q`, `dB_p ~ N(0, dt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WienerPath {
    pub dt: f64,
    pub seed: u64,
    pub db_q: Vec<f64>,
    pub db_p: Vec<f64>,
}

impl WienerPath {
    pub fn generate<R: Rng + ?Sized>(n_steps: usize, dt: f64, seed: u64, rng: &mut R) -> Self {
        let s = dt.sqrt();
        let mut db_q = Vec::with_capacity(n_steps);
        let mut db_p = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            db_q.push(s * rng.sample::<f64, _>(StandardNormal));
            db_p.push(s * rng.sample::<f64, _>(StandardNormal));
        }
        WienerPath { dt, seed, db_q, db_p }
    }

    /// Path for `seed` on its own stream.
    pub fn from_seed(n_steps: usize, dt: f64, seed: u64) -> Self {
        Self::generate(n_steps, dt, seed, &mut stream(seed, 0))
    }

    pub fn len(&self) -> usize {
        self.db_q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.db_q.is_empty()
    }

    /// Header `step,t,dB_q,dB_p`, one row per increment ending at `t`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,t,dB_q,dB_p")?;
        for (k, (q, p)) in self.db_q.iter().zip(&self.db_p).enumerate() {
            let t = (k + 1) as f64 * self.dt;
            writeln!(w, "{},{t:.16e},{q:.16e},{p:.16e}", k + 1)?;
        }
        Ok(())
    }

    /// `(Σ dB_q², Σ dB_p²)`
    pub fn quadratic_variation(&self) -> (f64, f64) {
        (
            self.db_q.iter().map(|b| b * b).sum(),
            self.db_p.iter().map(|b| b * b).sum(),
        )
    }
}

/// One recorded row of a trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub moments: Moments,
    pub energy: f64,
}

/// Expectations along one trajectory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryResult {
    pub points: Vec<TrajectoryPoint>,
}

pub const TRAJECTORY_HEADER: &str = "t,q_mean,p_mean,q_var,p_var,qp_cov,norm,energy";

impl TrajectoryResult {
    pub(crate) fn record(&mut self, t: f64, ops: &SpectralOps, a: &[C64], h: &HamiltonianSpec) {
        self.points.push(TrajectoryPoint {
            t,
            moments: ops.moments(a),
            energy: ops.energy(a, h),
        });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    /// Column `name` from [`TRAJECTORY_HEADER`].
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let f: fn(&TrajectoryPoint) -> f64 = match name {
            "t" => |p| p.t,
            "q_mean" => |p| p.moments.q_mean,
            "p_mean" => |p| p.moments.p_mean,
            "q_var" => |p| p.moments.q_var,
            "p_var" => |p| p.moments.p_var,
            "qp_cov" => |p| p.moments.qp_cov,
            "norm" => |p| p.moments.norm,
            "energy" => |p| p.energy,
            _ => return None,
        };
        Some(self.points.iter().map(f).collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for p in &self.points {
            let m = &p.moments;
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.t, m.q_mean, m.p_mean, m.q_var, m.p_var, m.qp_cov, m.norm, p.energy
            )?;
        }
        Ok(())
    }
}

/// Reusable integrator state for one grid and configuration.
#[derive(Clone)]
pub struct SseIntegrator {
    ops: SpectralOps,
    prop: Propagator,
    cfg: SseConfig,
    spec: Vec<C64>,
}

impl SseIntegrator {
    pub fn new(grid: &crate::grid::GridSpec, cfg: &SseConfig) -> Result<Self> {
        cfg.validate(grid)?;
        Ok(SseIntegrator {
            ops: SpectralOps::new(grid),
            prop: Propagator::new(grid, &cfg.hamiltonian, cfg.dt)?,
            cfg: cfg.clone(),
            spec: vec![C64::new(0.0, 0.0); grid.n_points],
        })
    }

    pub fn config(&self) -> &SseConfig {
        &self.cfg
    }

    pub fn ops(&self) -> &SpectralOps {
        &self.ops
    }

    /// The measurement increment `ψ ↦ ψ + Δ_q + Δ_p` (no unitary part, no
    /// renormalization). Both increments use the means of the incoming state.
    pub fn stochastic_increment(&mut self, a: &mut [C64], db_q: f64, db_p: f64) {
        if self.cfg.scheme == SseScheme::Exponential {
            return self.exponential_factors(a, db_q, db_p);
        }
        let dt = self.cfg.dt;
        let (kq, kp) = (self.cfg.kappa_q, self.cfg.kappa_p);
        let dx = self.ops.grid().dx();
        let n2 = norm_sqr(a, dx);
        let mut dp_term: Option<Vec<C64>> = None;
        if kp > 0.0 {
            self.spec.copy_from_slice(a);
            self.ops.fft().forward(&mut self.spec);
            let (mut num, mut den) = (0.0, 0.0);
            for (v, &p) in self.spec.iter().zip(self.ops.momenta()) {
                let w = v.norm_sqr();
                num += w * p;
                den += w;
            }
            let pm = num / den;
            let s = (2.0 * kp).sqrt() * db_p;
            for (v, &p) in self.spec.iter_mut().zip(self.ops.momenta()) {
                let x = p - pm;
                *v *= -kp * x * x * dt - s * x;
            }
            self.ops.fft().inverse(&mut self.spec);
            dp_term = Some(self.spec.clone());
        }
        if kq > 0.0 {
            let qm = a
                .iter()
                .zip(self.ops.positions())
                .map(|(v, &x)| v.norm_sqr() * x)
                .sum::<f64>()
                * dx
                / n2;
            let s = (2.0 * kq).sqrt() * db_q;
            for (v, &x) in a.iter_mut().zip(self.ops.positions()) {
                let y = x - qm;
                *v += *v * (-kq * y * y * dt - s * y);
            }
        }
        if let Some(d) = dp_term {
            for (v, d) in a.iter_mut().zip(d) {
                *v += d;
            }
        }
    }

    fn exponential_factors(&mut self, a: &mut [C64], db_q: f64, db_p: f64) {
        let dt = self.cfg.dt;
        let (kq, kp) = (self.cfg.kappa_q, self.cfg.kappa_p);
        let dx = self.ops.grid().dx();
        let n2 = norm_sqr(a, dx);
        let qm = a
            .iter()
            .zip(self.ops.positions())
            .map(|(v, &x)| v.norm_sqr() * x)
            .sum::<f64>()
            * dx
            / n2;
        if kp > 0.0 {
            self.spec.copy_from_slice(a);
            self.ops.fft().forward(&mut self.spec);
            let (mut num, mut den) = (0.0, 0.0);
            for (v, &p) in self.spec.iter().zip(self.ops.momenta()) {
                let w = v.norm_sqr();
                num += w * p;
                den += w;
            }
            let pm = num / den;
            let s = (2.0 * kp).sqrt() * db_p;
            if kq > 0.0 {
                let s = (2.0 * kq).sqrt() * db_q;
                for (v, &x) in a.iter_mut().zip(self.ops.positions()) {
                    let y = x - qm;
                    *v *= (-2.0 * kq * y * y * dt - s * y).exp();
                }
                self.spec.copy_from_slice(a);
                self.ops.fft().forward(&mut self.spec);
            }
            for (v, &p) in self.spec.iter_mut().zip(self.ops.momenta()) {
                let x = p - pm;
                *v *= (-2.0 * kp * x * x * dt - s * x).exp();
            }
            self.ops.fft().inverse(&mut self.spec);
            a.copy_from_slice(&self.spec);
        } else if kq > 0.0 {
            let s = (2.0 * kq).sqrt() * db_q;
            for (v, &x) in a.iter_mut().zip(self.ops.positions()) {
                let y = x - qm;
                *v *= (-2.0 * kq * y * y * dt - s * y).exp();
            }
        }
    }

    /// One step of the measurement terms followed by the split-step unitary
    /// part.
    /// Returns the norm defect `|‖ψ_a‖² − 1|` before renormalization.
    pub fn step(&mut self, a: &mut [C64], db_q: f64, db_p: f64) -> Result<f64> {
        self.stochastic_increment(a, db_q, db_p);
        self.prop.apply(a);
        let dx = self.ops.grid().dx();
        let n2 = norm_sqr(a, dx);
        if !(n2.is_finite() && n2 > 0.0) {
            return Err(Error::numeric("state norm is not finite"));
        }
        if self.cfg.renormalize {
            let s = 1.0 / n2.sqrt();
            for v in a.iter_mut() {
                *v *= s;
            }
        }
        check_boundary(a, self.ops.grid())?;
        Ok((n2 - 1.0).abs())
    }

    /// Integrate along `path`, recording every `record_every` steps.
    pub fn run(&mut self, psi0: &WaveFunction, path: &WienerPath) -> Result<(TrajectoryResult, WaveFunction)> {
        let mut psi = psi0.clone();
        psi.check_normalized()?;
        let mut out = TrajectoryResult::default();
        let h = self.cfg.hamiltonian.clone();
        out.record(0.0, &self.ops, psi.amplitudes(), &h);
        let n = self.cfg.n_steps.min(path.len());
        if n < self.cfg.n_steps {
            return Err(Error::config(format!(
                "Wiener path has {} steps, run needs {}",
                path.len(),
                self.cfg.n_steps
            )));
        }
        for k in 0..n {
            self.step(psi.amplitudes_mut(), path.db_q[k], path.db_p[k])
                .map_err(|e| e.at_step(k + 1))?;
            if (k + 1) % self.cfg.record_every == 0 || k + 1 == n {
                out.record((k + 1) as f64 * self.cfg.dt, &self.ops, psi.amplitudes(), &h);
            }
        }
        Ok((out, psi))
    }
}

/// One SSE step on a normalized state; the result is renormalized if the
/// configuration asks for it.
pub fn sse_step(psi: &WaveFunction, cfg: &SseConfig, db_q: f64, db_p: f64) -> Result<WaveFunction> {
    psi.check_normalized()?;
    let mut integ = SseIntegrator::new(psi.grid(), cfg)?;
    let mut out = psi.clone();
    integ.step(out.amplitudes_mut(), db_q, db_p)?;
    Ok(out)
}

/// `|‖ψ_post‖² − ‖ψ_pre‖²|` for an un-renormalized step from a normalized state.
pub fn norm_defect(pre: &WaveFunction, post: &WaveFunction) -> f64 {
    (post.norm_sqr() - pre.norm_sqr()).abs()
}

/// Full SSE trajectory with its own Wiener path drawn from `cfg.seed`.
pub fn run_sse_trajectory(psi0: &WaveFunction, cfg: &SseConfig) -> Result<TrajectoryResult> {
    let path = WienerPath::from_seed(cfg.n_steps, cfg.dt, cfg.seed);
    let mut integ = SseIntegrator::new(psi0.grid(), cfg)?;
    Ok(integ.run(psi0, &path)?.0)
}

/// As [`run_sse_trajectory`], drawing increments from `rng` as it goes.
pub fn run_sse_with_rng(psi0: &WaveFunction, cfg: &SseConfig, rng: &mut SimRng) -> Result<(TrajectoryResult, WaveFunction)> {
    let path = WienerPath::generate(cfg.n_steps, cfg.dt, cfg.seed, rng);
    SseIntegrator::new(psi0.grid(), cfg)?.run(psi0, &path)
}

/// `⟨L(Ŷ)⟩ = ⟨[Ŷ,Ĥ]/iħ⟩ + κ_q⟨[q̂,Ŷ]q̂ + q̂[Ŷ,q̂]⟩ + κ_p⟨[p̂,Ŷ]p̂ + p̂[Ŷ,p̂]⟩`.
pub fn lindblad_drift(psi: &WaveFunction, y: Observable, kappa_q: f64, kappa_p: f64, h: &HamiltonianSpec) -> Result<f64> {
    psi.check_normalized()?;
    let ops = SpectralOps::new(psi.grid());
    let dx = psi.grid().dx();
    let hbar = psi.grid().hbar;
    let a = psi.amplitudes();
    let apply = |v: &[C64]| -> Result<Vec<C64>> {
        Ok(match y {
            Observable::Q => ops.apply_q(v),
            Observable::P => ops.apply_p(v),
            Observable::Q2 => ops.apply_q_fn(v, |x| x * x),
            Observable::P2 => ops.apply_p2(v),
            Observable::Energy => ops.apply_h(v, h),
            Observable::QpPq => return Err(Error::config("lindblad_drift supports q, p, q², p² and H")),
        })
    };
    let ya = apply(a)?;
    let ha = ops.apply_h(a, h);
    // ⟨[Y,H]⟩/iħ = 2 Im⟨Yψ|Hψ⟩/ħ
    let mut drift = 2.0 * inner(&ya, &ha, dx).im / hbar;
    // 2⟨Xψ|Y Xψ⟩ − 2 Re⟨Yψ|X²ψ⟩ for X = q, p
    if kappa_q != 0.0 {
        let xa = ops.apply_q(a);
        let x2a = ops.apply_q_fn(a, |x| x * x);
        let yxa = apply(&xa)?;
        drift += kappa_q * (2.0 * inner(&xa, &yxa, dx).re - 2.0 * inner(&ya, &x2a, dx).re);
    }
    if kappa_p != 0.0 {
        let xa = ops.apply_p(a);
        let x2a = ops.apply_p2(a);
        let yxa = apply(&xa)?;
        drift += kappa_p * (2.0 * inner(&xa, &yxa, dx).re - 2.0 * inner(&ya, &x2a, dx).re);
    }
    Ok(drift)
}
