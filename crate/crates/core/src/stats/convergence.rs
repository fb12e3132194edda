//! Discrete measurement against the limiting SSE along a ladder of τ.
//!
//! Each discrete trajectory is paired with an SSE trajectory driven by the
//! noise extracted from its own pointer readings,
//! `ΔB = √(2τ/κ)·Y′χ′/χ` with `Y′ = (reading − coupling·⟨mean⟩)/σ`,
//! refined to the SSE step by a Brownian bridge. Distances between the two
//! samples of `⟨q̂⟩_t` then shrink with τ instead of being swamped by
//! sampling noise.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use super::ensemble::par_map_indexed;
use super::ks::{kolmogorov_pvalue, ks_two_sample};
use super::{correlation, mean, shape_moments, variance};
use crate::detector::DetectorProfile;
use crate::hamiltonian::HamiltonianSpec;
use crate::measurement::{AkOptions, CouplingSchedule, DiscreteSimulator};
use crate::rng::{stream, SimRng};
use crate::sse::{SseConfig, SseIntegrator, SseScheme, WienerPath};
use crate::wavefunction::WaveFunction;
use crate::{Error, Result};

/// Seed offset between the rungs of the ladder.
const RUNG_STRIDE: u64 = 1_000_003;

#[derive(Clone)]
pub struct ConvergenceSpec {
    pub psi0: WaveFunction,
    pub hamiltonian: HamiltonianSpec,
    /// Position-channel profile.
    pub chi: DetectorProfile,
    /// Momentum-channel profile.
    pub lambda: DetectorProfile,
    /// Detector scale; couplings are `μ = ν = σ√τ`.
    pub sigma: f64,
    /// Strictly decreasing.
    pub taus: Vec<f64>,
    pub t: f64,
    pub m: usize,
    /// SSE step; must divide every τ.
    pub dt_sse: f64,
    pub sse_scheme: SseScheme,
    pub ak: AkOptions,
    pub n_bootstrap: usize,
    pub seed: u64,
}

/// A distance estimate with its bootstrap standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Distance {
    pub value: f64,
    pub se: f64,
}

/// Distances between the discrete and SSE samples at one τ. The τ = 0 row
/// compares two independent SSE ensembles.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub n_steps: usize,
    /// RMS of paired differences of `⟨q̂⟩_t` and `⟨p̂⟩_t`.
    pub rms_q: Distance,
    pub rms_p: Distance,
    /// Differences of the first four moments of `⟨q̂⟩_t`, in absolute value.
    pub d_mean: Distance,
    pub d_var: Distance,
    pub d_skew: Distance,
    pub d_kurt: Distance,
    /// Two-sample KS statistic on `⟨q̂⟩_t` and its p-value as if the
    /// samples were independent.
    pub ks: Distance,
    pub ks_pvalue: f64,
    /// Correlation of the extracted `B_q(t)` and `B_p(t)`.
    pub cross_corr: f64,
}

impl ConvergenceRow {
    fn metrics(&self) -> [Distance; 7] {
        [self.rms_q, self.rms_p, self.d_mean, self.d_var, self.d_skew, self.d_kurt, self.ks]
    }
}

pub const METRIC_NAMES: [&str; 7] = ["rms_q", "rms_p", "d_mean", "d_var", "d_skew", "d_kurt", "ks"];

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub kappa_q: f64,
    pub kappa_p: f64,
    pub t: f64,
    pub m: usize,
    pub dt_sse: f64,
    pub rows: Vec<ConvergenceRow>,
    pub floor: ConvergenceRow,
}

impl ConvergenceReport {
    /// `d_{k+1} ≤ d_k + 2√(se_k² + se_{k+1}²)` along the ladder for metric
    /// `i` of [`METRIC_NAMES`].
    pub fn monotone(&self, i: usize) -> bool {
        self.rows.windows(2).all(|w| {
            let (a, b) = (w[0].metrics()[i], w[1].metrics()[i]);
            b.value <= a.value + 2.0 * a.se.hypot(b.se)
        })
    }

    pub fn all_monotone(&self) -> bool {
        (0..METRIC_NAMES.len()).all(|i| self.monotone(i))
    }

    /// Paired `⟨q̂⟩_t` distance at the coarsest τ over that at the finest.
    pub fn shrink_ratio(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) if b.rms_q.value > 0.0 => a.rms_q.value / b.rms_q.value,
            _ => f64::NAN,
        }
    }

    pub fn corr_limit(&self) -> f64 {
        3.0 / (self.m as f64).sqrt()
    }

    pub fn cross_ok(&self) -> bool {
        self.rows.iter().all(|r| r.cross_corr.abs() < self.corr_limit())
    }

    /// The SSE self-comparison is consistent with sampling noise.
    pub fn floor_ok(&self) -> bool {
        self.floor.ks_pvalue >= 0.01
    }

    pub fn passes(&self) -> bool {
        self.all_monotone() && self.shrink_ratio() >= 2.0 && self.cross_ok() && self.floor_ok()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "tau,n_steps")?;
        for n in METRIC_NAMES {
            write!(w, ",{n},{n}_se")?;
        }
        writeln!(w, ",ks_pvalue,cross_corr")?;
        for r in self.rows.iter().chain(std::iter::once(&self.floor)) {
            write!(w, "{:.16e},{}", r.tau, r.n_steps)?;
            for d in r.metrics() {
                write!(w, ",{:.16e},{:.16e}", d.value, d.se)?;
            }
            writeln!(w, ",{:.16e},{:.16e}", r.ks_pvalue, r.cross_corr)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "kappa_q={:.6} kappa_p={:.6} t={} M={} dt_sse={:e}\n",
            self.kappa_q, self.kappa_p, self.t, self.m, self.dt_sse
        );
        s.push_str("tau        rms_q              |dmean|            |dvar|             ks                 corr\n");
        for r in self.rows.iter().chain(std::iter::once(&self.floor)) {
            let f = |d: Distance| format!("{:.3e}±{:.1e}", d.value, d.se);
            s.push_str(&format!(
                "{:<10.3e} {:<18} {:<18} {:<18} {:<18} {:+.4}\n",
                r.tau,
                f(r.rms_q),
                f(r.d_mean),
                f(r.d_var),
                f(r.ks),
                r.cross_corr
            ));
        }
        for (i, n) in METRIC_NAMES.iter().enumerate() {
            s.push_str(&format!("monotone {n}: {}\n", self.monotone(i)));
        }
        s.push_str(&format!(
            "shrink ratio {:.2} (need >= 2), cross-channel |corr| < {:.4}: {}, SSE floor KS p = {:.3}\n",
            self.shrink_ratio(),
            self.corr_limit(),
            self.cross_ok(),
            self.floor.ks_pvalue
        ));
        s
    }
}

/// Final-time observables of one discrete/SSE pair.
#[derive(Clone, Copy, Debug)]
struct Pair {
    q_disc: f64,
    p_disc: f64,
    q_sse: f64,
    p_sse: f64,
    b_q: f64,
    b_p: f64,
}

struct Worker {
    sim: DiscreteSimulator,
    sse: SseIntegrator,
}

fn rung_seed(master: u64, i: usize) -> u64 {
    master.wrapping_add(RUNG_STRIDE.wrapping_mul(i as u64 + 1))
}

fn run_pair(w: &mut Worker, spec: &ConvergenceSpec, n: usize, k: usize, rng: &mut SimRng) -> Result<Pair> {
    let s = *w.sim.schedule();
    let (kq, kp) = (w.sse.config().kappa_q, w.sse.config().kappa_p);
    let (cq, cp) = ((2.0 * s.tau / kq).sqrt(), (2.0 * s.tau / kp).sqrt());
    let mut psi = spec.psi0.clone();
    let mut db = Vec::with_capacity(n);
    for j in 0..n {
        let o = w.sim.step(psi.amplitudes_mut(), rng).map_err(|e| e.at_step(j + 1))?;
        let yq = (o.q_prime - s.mu * o.q_mean_pre) / s.sigma;
        let (pp, pm) = (o.p_double_prime.unwrap_or(0.0), o.p_mean_pre.unwrap_or(0.0));
        let yp = (pp - s.nu * pm) / s.sigma;
        db.push((cq * spec.chi.score(yq), cp * spec.lambda.score(yp)));
    }
    let m_disc = psi.moments();
    let dt = w.sse.config().dt;
    let sd = dt.sqrt();
    let mut path = WienerPath {
        dt,
        seed: 0,
        db_q: Vec::with_capacity(n * k),
        db_p: Vec::with_capacity(n * k),
    };
    let mut z = vec![(0.0, 0.0); k];
    for &(bq, bp) in &db {
        for v in z.iter_mut() {
            *v = (sd * rng.sample::<f64, _>(StandardNormal), sd * rng.sample::<f64, _>(StandardNormal));
        }
        let (sq, sp) = z.iter().fold((0.0, 0.0), |a, v| (a.0 + v.0, a.1 + v.1));
        let (cq, cp) = ((bq - sq) / k as f64, (bp - sp) / k as f64);
        for v in &z {
            path.db_q.push(v.0 + cq);
            path.db_p.push(v.1 + cp);
        }
    }
    let (_, psi_sse) = w.sse.run(&spec.psi0, &path)?;
    let m_sse = psi_sse.moments();
    Ok(Pair {
        q_disc: m_disc.q_mean,
        p_disc: m_disc.p_mean,
        q_sse: m_sse.q_mean,
        p_sse: m_sse.p_mean,
        b_q: db.iter().map(|d| d.0).sum(),
        b_p: db.iter().map(|d| d.1).sum(),
    })
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).collect();
    mean(&d).sqrt()
}

/// Metric values for samples `(q_a, p_a)` and `(q_b, p_b)`, in
/// [`METRIC_NAMES`] order.
fn metric_values(qa: &[f64], pa: &[f64], qb: &[f64], pb: &[f64]) -> [f64; 7] {
    let (sa, ka) = shape_moments(qa);
    let (sb, kb) = shape_moments(qb);
    [
        rms(qa, qb),
        rms(pa, pb),
        (mean(qa) - mean(qb)).abs(),
        (variance(qa) - variance(qb)).abs(),
        (sa - sb).abs(),
        (ka - kb).abs(),
        ks_two_sample(qa, qb),
    ]
}

/// Metrics with bootstrap standard errors; resampling keeps pairs together.
fn distances(qa: &[f64], pa: &[f64], qb: &[f64], pb: &[f64], n_boot: usize, rng: &mut SimRng) -> [Distance; 7] {
    let base = metric_values(qa, pa, qb, pb);
    let m = qa.len();
    let mut reps: Vec<[f64; 7]> = Vec::with_capacity(n_boot);
    let mut idx = vec![0usize; m];
    let pick = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
    for _ in 0..n_boot {
        for i in idx.iter_mut() {
            *i = rng.random_range(0..m);
        }
        reps.push(metric_values(&pick(qa, &idx), &pick(pa, &idx), &pick(qb, &idx), &pick(pb, &idx)));
    }
    std::array::from_fn(|i| Distance {
        value: base[i],
        se: variance(&reps.iter().map(|r| r[i]).collect::<Vec<_>>()).sqrt(),
    })
}

fn row(tau: f64, n_steps: usize, qa: &[f64], pa: &[f64], qb: &[f64], pb: &[f64], n_boot: usize, rng: &mut SimRng) -> ConvergenceRow {
    let [rms_q, rms_p, d_mean, d_var, d_skew, d_kurt, ks] = distances(qa, pa, qb, pb, n_boot, rng);
    let n = qa.len() as f64;
    ConvergenceRow {
        tau,
        n_steps,
        rms_q,
        rms_p,
        d_mean,
        d_var,
        d_skew,
        d_kurt,
        ks_pvalue: kolmogorov_pvalue(ks.value, n / 2.0),
        ks,
        cross_corr: 0.0,
    }
}

/// Run `spec.m` paired discrete/SSE trajectories per τ, plus two
/// independent SSE ensembles as the sampling-noise floor.
pub fn convergence_study(spec: &ConvergenceSpec) -> Result<ConvergenceReport> {
    if spec.taus.is_empty() || spec.taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("tau list must be non-empty and strictly decreasing"));
    }
    if spec.m < 2 {
        return Err(Error::config("convergence study needs M >= 2"));
    }
    if spec.m < 500 {
        log::warn!("M = {} is below the recommended 500 trajectories per rung", spec.m);
    }
    if !(spec.t > 0.0) {
        return Err(Error::config("t must be positive"));
    }
    let (kq, kp) = (spec.chi.kappa()?, spec.lambda.kappa()?);
    let grid = spec.psi0.grid().clone();
    let mut rows = Vec::with_capacity(spec.taus.len());
    for (ti, &tau) in spec.taus.iter().enumerate() {
        let n = (spec.t / tau).round() as usize;
        let k = (tau / spec.dt_sse).round() as usize;
        if k == 0 || ((k as f64) * spec.dt_sse - tau).abs() > 1e-9 * tau {
            return Err(Error::config(format!("dt_sse = {} does not divide tau = {tau}", spec.dt_sse)));
        }
        let schedule = CouplingSchedule::sqrt_tau(tau, spec.sigma)?;
        let sim = DiscreteSimulator::joint(&grid, &spec.hamiltonian, &spec.chi, &spec.lambda, schedule, spec.ak)?;
        let mut cfg = SseConfig::new(kq, kp, spec.dt_sse, spec.hamiltonian.clone(), n * k, 0);
        cfg.record_every = (n * k).max(1);
        cfg.scheme = spec.sse_scheme;
        let sse = SseIntegrator::new(&grid, &cfg)?;
        log::info!("tau = {tau:e}: {} x {n} discrete steps, {} SSE substeps each", spec.m, k);
        let pairs = par_map_indexed(
            spec.m,
            rung_seed(spec.seed, ti),
            || Worker {
                sim: sim.clone(),
                sse: sse.clone(),
            },
            |w, _, rng| run_pair(w, spec, n, k, rng),
        )?;
        let col = |f: fn(&Pair) -> f64| pairs.iter().map(f).collect::<Vec<f64>>();
        let mut boot = stream(rung_seed(spec.seed, ti), u64::MAX);
        let mut r = row(
            tau,
            n,
            &col(|p| p.q_disc),
            &col(|p| p.p_disc),
            &col(|p| p.q_sse),
            &col(|p| p.p_sse),
            spec.n_bootstrap,
            &mut boot,
        );
        r.cross_corr = correlation(&col(|p| p.b_q), &col(|p| p.b_p));
        rows.push(r);
    }

    let n_ref = (spec.t / spec.dt_sse).round() as usize;
    let mut cfg = SseConfig::new(kq, kp, spec.dt_sse, spec.hamiltonian.clone(), n_ref, 0);
    cfg.record_every = n_ref.max(1);
    cfg.scheme = spec.sse_scheme;
    let sse = SseIntegrator::new(&grid, &cfg)?;
    let run_free = |seed: u64| {
        par_map_indexed(spec.m, seed, || sse.clone(), |w, _, rng| {
            let path = WienerPath::generate(n_ref, spec.dt_sse, 0, rng);
            let m = w.run(&spec.psi0, &path)?.1.moments();
            Ok((m.q_mean, m.p_mean))
        })
    };
    let len = spec.taus.len();
    let a = run_free(rung_seed(spec.seed, len))?;
    let b = run_free(rung_seed(spec.seed, len + 1))?;
    let (qa, pa): (Vec<f64>, Vec<f64>) = a.into_iter().unzip();
    let (qb, pb): (Vec<f64>, Vec<f64>) = b.into_iter().unzip();
    let mut boot = stream(rung_seed(spec.seed, len + 2), u64::MAX);
    let floor = row(0.0, n_ref, &qa, &pa, &qb, &pb, spec.n_bootstrap, &mut boot);

    Ok(ConvergenceReport {
        kappa_q: kq,
        kappa_p: kp,
        t: spec.t,
        m: spec.m,
        dt_sse: spec.dt_sse,
        rows,
        floor,
    })
}
