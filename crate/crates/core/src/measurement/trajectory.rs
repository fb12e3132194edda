use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arthurs_kelly::{AkKernel, AkOptions};
use super::von_neumann::measure_position;
use super::{CouplingSchedule, MeasurementRecord};
use crate::detector::DetectorProfile;
use crate::grid::GridSpec;
use crate::hamiltonian::{HamiltonianSpec, Propagator};
use crate::sse::TrajectoryResult;
use crate::wavefunction::{check_boundary, norm_sqr, SpectralOps, WaveFunction};
use crate::{Error, C64, Result};

/// Which observables are monitored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementModel {
    /// von Neumann measurement of `q̂` only.
    Position,
    /// Arthurs–Kelly joint measurement of `q̂` and `p̂`.
    #[default]
    Joint,
}

/// Readings of one step together with the pre-measurement means, from
/// which the pointer residuals are formed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub q_prime: f64,
    pub p_double_prime: Option<f64>,
    pub q_mean_pre: f64,
    pub p_mean_pre: Option<f64>,
}

/// Repeated measurement with interleaved free evolution:
/// `ψ_n = e^{τĤ/iħ} V̂(Q′_n, P″_n) ψ_{n−1} / √ρ`.
#[derive(Clone)]
pub struct DiscreteSimulator {
    ops: SpectralOps,
    prop: Propagator,
    h: HamiltonianSpec,
    chi: DetectorProfile,
    schedule: CouplingSchedule,
    kernel: Option<AkKernel>,
    record_every: usize,
}

impl DiscreteSimulator {
    pub fn position(grid: &GridSpec, h: &HamiltonianSpec, chi: &DetectorProfile, schedule: CouplingSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(DiscreteSimulator {
            ops: SpectralOps::new(grid),
            prop: Propagator::new(grid, h, schedule.tau)?,
            h: h.clone(),
            chi: chi.with_sigma(schedule.sigma)?,
            schedule,
            kernel: None,
            record_every: 1,
        })
    }

    pub fn joint(
        grid: &GridSpec,
        h: &HamiltonianSpec,
        chi: &DetectorProfile,
        lambda: &DetectorProfile,
        schedule: CouplingSchedule,
        opts: AkOptions,
    ) -> Result<Self> {
        let mut sim = Self::position(grid, h, chi, schedule)?;
        let lambda = lambda.with_sigma(schedule.sigma)?;
        sim.kernel = Some(AkKernel::new(grid, &sim.chi, &lambda, schedule.mu, schedule.nu, opts)?);
        Ok(sim)
    }

    /// Record expectations every `n` steps (the last step is always kept).
    pub fn with_record_every(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("record_every must be >= 1"));
        }
        self.record_every = n;
        Ok(self)
    }

    pub fn model(&self) -> MeasurementModel {
        if self.kernel.is_some() {
            MeasurementModel::Joint
        } else {
            MeasurementModel::Position
        }
    }

    pub fn schedule(&self) -> &CouplingSchedule {
        &self.schedule
    }

    pub fn grid(&self) -> &GridSpec {
        self.ops.grid()
    }

    /// Measure, condition, then evolve freely for τ.
    pub fn step<R: Rng + ?Sized>(&mut self, a: &mut [C64], rng: &mut R) -> Result<StepOutcome> {
        let dx = self.ops.grid().dx();
        let q_mean_pre = self.ops.q_moment(a, 1);
        let out = match self.kernel.as_mut() {
            Some(k) => {
                let o = k.measure(a, rng)?;
                StepOutcome {
                    q_prime: o.q_prime,
                    p_double_prime: Some(o.p_double_prime),
                    q_mean_pre,
                    p_mean_pre: Some(o.p_mean_pre),
                }
            }
            None => StepOutcome {
                q_prime: measure_position(self.ops.positions(), a, dx, &self.chi, self.schedule.mu, rng)?,
                p_double_prime: None,
                q_mean_pre,
                p_mean_pre: None,
            },
        };
        self.prop.apply(a);
        check_boundary(a, self.ops.grid())?;
        Ok(out)
    }

    /// Run `n_steps` steps from `psi0`; also returns the final state.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        psi0: &WaveFunction,
        n_steps: usize,
        rng: &mut R,
    ) -> Result<(TrajectoryResult, MeasurementRecord, WaveFunction)> {
        psi0.check_normalized()?;
        let mut psi = psi0.clone();
        let mut traj = TrajectoryResult::default();
        let mut record = MeasurementRecord::new(self.schedule, self.kernel.is_some());
        traj.record(0.0, &self.ops, psi.amplitudes(), &self.h);
        let tau = self.schedule.tau;
        for n in 1..=n_steps {
            let o = self.step(psi.amplitudes_mut(), rng).map_err(|e| e.at_step(n))?;
            let t = n as f64 * tau;
            record.push(t, o.q_prime, o.p_double_prime);
            if n % self.record_every == 0 || n == n_steps {
                traj.record(t, &self.ops, psi.amplitudes(), &self.h);
            }
        }
        debug_assert!((norm_sqr(psi.amplitudes(), psi.grid().dx()) - 1.0).abs() < 1e-8);
        Ok((traj, record, psi))
    }
}

/// Expectations and pointer readings of one discrete trajectory.
pub fn run_discrete_trajectory<R: Rng + ?Sized>(
    psi0: &WaveFunction,
    sim: &mut DiscreteSimulator,
    n_steps: usize,
    rng: &mut R,
) -> Result<(TrajectoryResult, MeasurementRecord)> {
    let (t, r, _) = sim.run(psi0, n_steps, rng)?;
    Ok((t, r))
}
