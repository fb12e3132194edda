use rand::Rng;

use super::ks::{kolmogorov_pvalue, ks_one_sample, normal_cdf};
use super::{correlation, mean, pairwise_sum, variance};
use crate::detector::DetectorProfile;
use crate::{Error, Result};

/// Redraws allowed when a sampled pointer value lands where `χ` vanishes.
const MAX_REDRAWS: usize = 64;

/// Draw `Y` with `χ(Y²) ≠ 0`, returning `(Y, χ, χ′, χ″)` at `Y²`.
fn draw<R: Rng + ?Sized>(profile: &DetectorProfile, rng: &mut R) -> Result<(f64, f64, f64, f64)> {
    for _ in 0..MAX_REDRAWS {
        let y = profile.sample(rng);
        let (c, c1, c2) = profile.chi_u(y * y);
        if c != 0.0 {
            return Ok((y, c, c1, c2));
        }
    }
    Err(Error::numeric("profile vanishes at sampled pointer values"))
}

fn check_tau(tau: f64, t: f64) -> Result<usize> {
    if !(tau > 0.0 && tau <= 1e-2) {
        return Err(Error::config(format!("tau must lie in (0, 1e-2], got {tau}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::config(format!("t must be >= 0, got {t}")));
    }
    Ok((t / tau).round() as usize)
}

/// `τ/t · Σ_{j ≤ t/τ} f(Y_j)` with its standard error.
fn lln<R: Rng + ?Sized>(
    profile: &DetectorProfile,
    tau: f64,
    t: f64,
    rng: &mut R,
    f: impl Fn(f64, f64, f64, f64) -> f64,
) -> Result<(f64, f64)> {
    let n = check_tau(tau, t)?;
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        let (y, c, c1, c2) = draw(profile, rng)?;
        xs.push(f(y * y, c, c1, c2));
    }
    let scale = n as f64 * tau / t;
    Ok((scale * mean(&xs), scale * (variance(&xs) / n as f64).sqrt()))
}

fn kappa_summand(y2: f64, c: f64, c1: f64, c2: f64) -> f64 {
    -(c1 / c + 2.0 * (c2 / c) * y2)
}

fn theta_summand(y2: f64, c: f64, c1: f64, c2: f64) -> f64 {
    let r = c1 / c;
    r + 2.0 * r * r * y2 + 2.0 * (c2 / c) * y2
}

/// Law-of-large-numbers estimate of κ from `t/τ` pointer draws:
/// `−τ/t · Σ (χ′/χ + 2(χ″/χ)Y²)`. Returns `(κ̂, SE)`.
pub fn lln_kappa_check<R: Rng + ?Sized>(profile: &DetectorProfile, tau: f64, t: f64, rng: &mut R) -> Result<(f64, f64)> {
    lln(profile, tau, t, rng, kappa_summand)
}

/// The same estimator applied to the θ integrand,
/// `χ′/χ + 2(χ′/χ)²Y² + 2(χ″/χ)Y²`. Returns `(θ̂, SE)`.
pub fn theta_hat<R: Rng + ?Sized>(profile: &DetectorProfile, tau: f64, t: f64, rng: &mut R) -> Result<(f64, f64)> {
    lln(profile, tau, t, rng, theta_summand)
}

/// Results of [`clt_brownian_check`].
#[derive(Clone, Debug)]
pub struct LimitDiagnostics {
    pub tau: f64,
    pub t: f64,
    pub n_paths: usize,
    /// Pointer draws per channel (`n_paths · t/τ`).
    pub n_samples: usize,
    pub kappa_hat: f64,
    pub kappa_hat_se: f64,
    pub theta_hat: f64,
    pub theta_hat_se: f64,
    /// Rescaled sums `B_q(t)` and `B_p(t)`, one per path.
    pub b_q: Vec<f64>,
    pub b_p: Vec<f64>,
    /// `B_q(t/2)` per path.
    pub b_q_half: Vec<f64>,
    /// Sample variance of `B_q(t)`.
    pub var_b: f64,
    /// KS statistic of `B_q(t)/√t` against N(0, 1) and its p-value.
    pub ks_stat: f64,
    pub ks_pvalue: f64,
    /// Correlation of the increments over `[0, t/2]` and `[t/2, t]`.
    pub increment_corr: f64,
    /// Correlation of `B_q(t)` and `B_p(t)`.
    pub cross_corr: f64,
}

impl LimitDiagnostics {
    /// Half-width of the acceptance band for `Var B_t / t`.
    pub fn var_band(&self) -> f64 {
        3.0 * (2.0 / self.n_paths as f64).sqrt()
    }

    /// Bound on the correlation estimates, `3/√n_paths`.
    pub fn corr_limit(&self) -> f64 {
        3.0 / (self.n_paths as f64).sqrt()
    }

    pub fn variance_ok(&self) -> bool {
        (self.var_b / self.t - 1.0).abs() <= self.var_band()
    }

    pub fn normality_ok(&self) -> bool {
        self.ks_pvalue >= 0.01
    }

    pub fn increments_ok(&self) -> bool {
        self.increment_corr.abs() < self.corr_limit()
    }

    pub fn cross_ok(&self) -> bool {
        self.cross_corr.abs() < self.corr_limit()
    }

    pub fn passes(&self) -> bool {
        self.variance_ok() && self.normality_ok() && self.increments_ok() && self.cross_ok()
    }
}

/// Build `n_paths` rescaled pointer-sum paths `B(t) = Σ √(2τ/κ)·Y_jχ′/χ`
/// for the position channel (`chi`) and the momentum channel (`lambda`),
/// and test them against Brownian motion.
pub fn clt_brownian_check<R: Rng + ?Sized>(
    chi: &DetectorProfile,
    lambda: &DetectorProfile,
    tau: f64,
    t: f64,
    n_paths: usize,
    rng: &mut R,
) -> Result<LimitDiagnostics> {
    if n_paths < 1000 {
        return Err(Error::config(format!("n_paths must be >= 1000, got {n_paths}")));
    }
    let n = check_tau(tau, t)?;
    if n < 2 {
        return Err(Error::config("need at least two pointer draws per path"));
    }
    let (kq, kp) = (chi.kappa()?, lambda.kappa()?);
    let (sq, sp) = ((2.0 * tau / kq).sqrt(), (2.0 * tau / kp).sqrt());
    let half = n / 2;
    let mut b_q = Vec::with_capacity(n_paths);
    let mut b_p = Vec::with_capacity(n_paths);
    let mut b_q_half = Vec::with_capacity(n_paths);
    // Per-path means of the κ and θ summands, pooled afterwards.
    let mut k_means = Vec::with_capacity(n_paths);
    let mut th_means = Vec::with_capacity(n_paths);
    let mut incr = vec![0.0; n];
    let mut ks = vec![0.0; n];
    let mut th = vec![0.0; n];
    for _ in 0..n_paths {
        for j in 0..n {
            let (y, c, c1, c2) = draw(chi, rng)?;
            let y2 = y * y;
            incr[j] = sq * y * c1 / c;
            ks[j] = kappa_summand(y2, c, c1, c2);
            th[j] = theta_summand(y2, c, c1, c2);
        }
        b_q_half.push(pairwise_sum(&incr[..half]));
        b_q.push(pairwise_sum(&incr));
        k_means.push(mean(&ks));
        th_means.push(mean(&th));
        for v in incr.iter_mut() {
            let (y, c, c1, _) = draw(lambda, rng)?;
            *v = sp * y * c1 / c;
        }
        b_p.push(pairwise_sum(&incr));
    }
    let second: Vec<f64> = b_q.iter().zip(&b_q_half).map(|(b, h)| b - h).collect();
    let scaled: Vec<f64> = b_q.iter().map(|b| b / t.sqrt()).collect();
    let ks_stat = ks_one_sample(&scaled, normal_cdf);
    let np = n_paths as f64;
    Ok(LimitDiagnostics {
        tau,
        t,
        n_paths,
        n_samples: n_paths * n,
        kappa_hat: mean(&k_means),
        kappa_hat_se: (variance(&k_means) / np).sqrt(),
        theta_hat: mean(&th_means),
        theta_hat_se: (variance(&th_means) / np).sqrt(),
        var_b: variance(&b_q),
        ks_stat,
        ks_pvalue: kolmogorov_pvalue(ks_stat, np),
        increment_corr: correlation(&b_q_half, &second),
        cross_corr: correlation(&b_q, &b_p),
        b_q,
        b_p,
        b_q_half,
    })
}
