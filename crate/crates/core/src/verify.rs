//! Desk-scale invariant suite behind `qtraj verify`.
//!
//! Every check is deterministic given the seed and finishes in seconds.
//! The heavy statistical criteria (ensembles of thousands of trajectories,
//! the convergence ladder) live in the `acceptance` test target instead.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::detector::DetectorProfile;
use crate::grid::GridSpec;
use crate::hamiltonian::{HamiltonianSpec, Propagator};
use crate::measurement::{conjugation_check, von_neumann_step, CouplingSchedule, DiscreteSimulator, OutcomeDensity};
use crate::rng::stream;
use crate::sse::{run_sse_trajectory, SseConfig};
use crate::stats::{clt_brownian_check, lln_kappa_check, theta_hat};
use crate::wavefunction::WaveFunction;
use crate::weyl::{momentum_matrix, position_matrix, weyl_operator_apply, weyl_quantize_monomial};
use crate::{Result, C64};

/// One named check: `value` must not exceed `limit`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
        }
    }

    pub fn passed(&self) -> bool {
        self.value <= self.limit
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<44} {:.3e} (limit {:.1e})", self.name, self.value, self.limit)
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    fn push(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        // NaN never passes
        let value = if value.is_nan() { f64::INFINITY } else { value };
        self.checks.push(Check::new(name, value, limit));
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

/// The shipped profiles: gaussian and perturbed-gaussian at a = 0.1, 0.3, 0.5.
pub fn shipped_profiles() -> Result<Vec<(String, DetectorProfile)>> {
    let mut v = vec![("gaussian".to_string(), DetectorProfile::gaussian(1.0)?)];
    for a in [0.1, 0.3, 0.5] {
        v.push((format!("perturbed-gaussian(a={a})"), DetectorProfile::perturbed_gaussian(a, 1.0)?));
    }
    Ok(v)
}

/// Run every invariant on the shipped profiles plus `extra`.
pub fn run_invariant_suite(extra: &[(String, DetectorProfile)], seed: u64) -> Result<VerifyReport> {
    let mut r = VerifyReport::default();
    let mut profiles = shipped_profiles()?;
    profiles.extend(extra.iter().cloned());

    profile_checks(&mut r, &profiles, seed)?;
    grid_checks(&mut r)?;
    weyl_checks(&mut r, seed)?;
    measurement_checks(&mut r, seed)?;
    sse_checks(&mut r, seed)?;
    clt_checks(&mut r, &profiles, seed)?;
    Ok(r)
}

fn profile_checks(r: &mut VerifyReport, profiles: &[(String, DetectorProfile)], seed: u64) -> Result<()> {
    r.push("kappa(gaussian) = 1/8", (profiles[0].1.kappa()? - 0.125).abs(), 1e-6);
    for (i, (name, p)) in profiles.iter().enumerate() {
        let (m, v) = p.mass_and_variance()?;
        r.push(format!("{name}: unit mass"), (m - 1.0).abs(), 1e-7);
        r.push(format!("{name}: unit variance"), (v - 1.0).abs(), 1e-7);
        let k = p.kappa()?;
        r.push(format!("{name}: kappa > 0"), -k, -1e-12);
        r.push(format!("{name}: kappa forms agree"), (k - p.kappa_by_parts()?).abs(), 1e-7);
        r.push(format!("{name}: theta = 0"), p.theta()?.abs(), 1e-7);
        let mut rng = stream(seed, 100 + i as u64);
        let (kh, se) = lln_kappa_check(p, 1e-4, 1.0, &mut rng)?;
        r.push(format!("{name}: LLN kappa (SE units)"), (kh - k).abs() / se, 3.0);
        let (th, se) = theta_hat(p, 1e-4, 1.0, &mut rng)?;
        r.push(format!("{name}: LLN theta (SE units)"), th.abs() / se, 3.0);
    }
    Ok(())
}

fn grid_checks(r: &mut VerifyReport) -> Result<()> {
    let g = GridSpec::new(256, -20.0, 20.0, 1.0)?;
    let psi = WaveFunction::gaussian(&g, 0.5, 1.0, 0.7);
    let h = HamiltonianSpec::harmonic(&g, 1.0, 1.0)?;
    let prop = Propagator::new(&g, &h, 1e-2)?;
    let mut phi = psi.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let before = phi.norm();
        prop.step(&mut phi)?;
        worst = worst.max((phi.norm() - before).abs());
    }
    r.push("propagator unitarity per step", worst, 1e-12);

    // central difference of ψ against the spectral ⟨p̂⟩
    let a = psi.amplitudes();
    let (n, dx) = (g.n_points, g.dx());
    let mut fd = C64::new(0.0, 0.0);
    for k in 1..n - 1 {
        let d = (a[k + 1] - a[k - 1]) / (2.0 * dx);
        fd += a[k].conj() * C64::new(0.0, -g.hbar) * d * dx;
    }
    r.push("spectral <p> vs finite difference", (fd.re - psi.moments().p_mean).abs(), 10.0 * dx * dx);
    Ok(())
}

fn weyl_checks(r: &mut VerifyReport, seed: u64) -> Result<()> {
    let g = GridSpec::new(256, -20.0, 20.0, 1.0)?;
    let psi = WaveFunction::gaussian(&g, 0.0, 1.0, 0.0);
    let mut rng = stream(seed, 1);
    let mut worst: f64 = 0.0;
    let mut unit: f64 = 0.0;
    for _ in 0..20 {
        let [q, p, q2, p2]: [f64; 4] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let inner = weyl_operator_apply(&psi, q2, p2)?;
        unit = unit.max((inner.norm() - psi.norm()).abs());
        let lhs = weyl_operator_apply(&inner, q, p)?;
        let mut rhs = weyl_operator_apply(&psi, q + q2, p + p2)?;
        let phase = C64::from_polar(1.0, -(q * p2 - p * q2) / (2.0 * g.hbar));
        for v in rhs.amplitudes_mut() {
            *v *= phase;
        }
        worst = worst.max(lhs.distance(&rhs));
    }
    r.push("Weyl operator unitarity", unit, 1e-12);
    r.push("Weyl composition law (20 points)", worst, 1e-8);

    let g = GridSpec::new(64, -8.0, 8.0, 1.0)?;
    let (qm, pm) = (position_matrix(&g), momentum_matrix(&g));
    let v = DVector::from_column_slice(WaveFunction::gaussian(&g, 0.0, 1.0, 0.0).amplitudes());
    let mut worst: f64 = 0.0;
    for total in 0..=3 {
        for j in 0..=total {
            let w = weyl_quantize_monomial(&g, j, total - j)?;
            let d = (&w - ordering_average(&qm, &pm, j, total - j)) * &v;
            worst = worst.max((d.norm_squared() * g.dx()).sqrt());
        }
    }
    r.push("Weyl symmetric ordering, degree <= 3", worst, 1e-8);
    Ok(())
}

/// Mean of all distinct words with `j` factors of `q` and `k` of `p`.
fn ordering_average(q: &DMatrix<C64>, p: &DMatrix<C64>, j: usize, k: usize) -> DMatrix<C64> {
    let n = j + k;
    let mut acc = DMatrix::zeros(q.nrows(), q.ncols());
    let mut count = 0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != j {
            continue;
        }
        let mut m = DMatrix::identity(q.nrows(), q.ncols());
        for bit in 0..n {
            m = if mask >> bit & 1 == 1 { m * q } else { m * p };
        }
        acc += m;
        count += 1;
    }
    acc * C64::from(1.0 / count as f64)
}

fn measurement_checks(r: &mut VerifyReport, seed: u64) -> Result<()> {
    let g = GridSpec::new(128, -16.0, 16.0, 1.0)?;
    let chi = DetectorProfile::gaussian(1.0)?;
    let psi = WaveFunction::gaussian(&g, 0.3, 1.0, 0.2);
    let mut rng = stream(seed, 2);
    let mut worst: f64 = 0.0;
    let mut cur = psi.clone();
    for _ in 0..50 {
        cur = von_neumann_step(&cur, &chi, 0.1, &mut rng)?.0;
        worst = worst.max((cur.norm() - 1.0).abs());
    }
    r.push("collapse keeps unit norm", worst, 1e-10);
    let rho = OutcomeDensity::von_neumann_covering(&psi, &chi, 0.1, 4001)?;
    r.push("outcome density mass", (rho.mass - 1.0).abs(), 1e-8);
    r.push(
        "outcome density nonnegative",
        -rho.density.iter().copied().fold(f64::INFINITY, f64::min),
        0.0,
    );

    let c = conjugation_check(0.1, 0.1, 64, &mut stream(seed, 3))?;
    r.push("conjugation residual, q'", c.residual_q, 1e-6);
    r.push("conjugation residual, p''", c.residual_p, 1e-6);

    let h = HamiltonianSpec::harmonic(&g, 1.0, 1.0)?;
    let lambda = DetectorProfile::perturbed_gaussian(0.3, 1.0)?;
    let sim = DiscreteSimulator::joint(&g, &h, &chi, &lambda, CouplingSchedule::sqrt_tau(1e-2, 1.0)?, Default::default())?;
    let run = |s: u64| sim.clone().run(&psi, 20, &mut stream(s, 0));
    let (ta, ra, _) = run(seed)?;
    let (tb, rb, _) = run(seed)?;
    r.push("discrete runs are reproducible", if ta == tb && ra == rb { 0.0 } else { 1.0 }, 0.0);
    let norms = ta.column("norm").unwrap_or_default();
    let worst = norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    r.push("discrete trajectory norm", worst, 1e-10);
    Ok(())
}

fn sse_checks(r: &mut VerifyReport, seed: u64) -> Result<()> {
    let g = GridSpec::new(64, -10.0, 10.0, 1.0)?;
    let h = HamiltonianSpec::harmonic(&g, 1.0, 1.0)?;
    let psi = WaveFunction::gaussian(&g, 0.5, 1.0, 0.0);
    let cfg = SseConfig::new(0.125, 0.125, 1e-3, h, 1000, seed);
    let traj = run_sse_trajectory(&psi, &cfg)?;
    let norms = traj.column("norm").unwrap_or_default();
    let worst = norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    r.push("SSE renormalized norm (1000 steps)", worst, 1e-8);

    // a position eigenvector is a fixed point of pure position monitoring
    let x0 = g.x(32);
    let delta = WaveFunction::point_mass(&g, x0);
    let cfg = SseConfig::new(0.125, 0.0, 1e-3, HamiltonianSpec::zero(&g), 100, seed);
    let mut integ = crate::sse::SseIntegrator::new(&g, &cfg)?;
    let path = crate::sse::WienerPath::from_seed(100, 1e-3, seed);
    let (_, out) = integ.run(&delta, &path)?;
    r.push("position eigenvector is a fixed point", out.distance(&delta), 1e-12);
    Ok(())
}

fn clt_checks(r: &mut VerifyReport, profiles: &[(String, DetectorProfile)], seed: u64) -> Result<()> {
    let chi = &profiles[0].1;
    for (i, (name, lambda)) in profiles.iter().enumerate() {
        let d = clt_brownian_check(chi, lambda, 1e-2, 1.0, 1000, &mut stream(seed, 200 + i as u64))?;
        r.push(format!("CLT {name}: |Var B/t - 1|"), (d.var_b / d.t - 1.0).abs(), d.var_band());
        r.push(format!("CLT {name}: KS p-value >= 0.01"), 0.01 - d.ks_pvalue, 0.0);
        r.push(format!("CLT {name}: |increment corr|"), d.increment_corr.abs(), d.corr_limit());
        r.push(format!("CLT {name}: |q/p cross corr|"), d.cross_corr.abs(), d.corr_limit());
    }
    Ok(())
}
