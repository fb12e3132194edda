//! Exact simulation of repeated indirect measurements: the von Neumann
//! position model and the Arthurs–Kelly joint position/momentum model.

mod arthurs_kelly;
mod tensor;
mod trajectory;
mod von_neumann;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use arthurs_kelly::{AkKernel, AkOptions};
pub use tensor::{conjugation_check, ConjugationReport, TensorState};
pub use trajectory::{run_discrete_trajectory, DiscreteSimulator, MeasurementModel, StepOutcome};
pub use von_neumann::{von_neumann_step, OutcomeDensity};

use crate::{Error, Result};

/// Coupling ratio above which the weak-measurement regime is considered left.
pub const PERTURBATIVE_LIMIT: f64 = 0.3;

/// How the couplings depend on the time step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingRule {
    Fixed,
    /// `μ = ν = σ√τ`
    #[default]
    SqrtTau,
}

/// Couplings μ (position channel), ν (momentum channel), step τ and
/// detector scale σ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingSchedule {
    pub mu: f64,
    pub nu: f64,
    pub tau: f64,
    pub rule: ScalingRule,
    pub sigma: f64,
}

impl CouplingSchedule {
    pub fn fixed(mu: f64, nu: f64, tau: f64, sigma: f64) -> Result<Self> {
        let s = CouplingSchedule {
            mu,
            nu,
            tau,
            rule: ScalingRule::Fixed,
            sigma,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn sqrt_tau(tau: f64, sigma: f64) -> Result<Self> {
        let c = sigma * tau.sqrt();
        let s = CouplingSchedule {
            mu: c,
            nu: c,
            tau,
            rule: ScalingRule::SqrtTau,
            sigma,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.nu >= 0.0 && self.mu.is_finite() && self.nu.is_finite()) {
            return Err(Error::config("couplings mu and nu must be finite and >= 0"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !self.is_perturbative() {
            log::warn!(
                "coupling ratio max(mu, nu)/sigma = {:.3} exceeds {PERTURBATIVE_LIMIT}; outside the weak-measurement regime",
                self.mu.max(self.nu) / self.sigma
            );
        }
        Ok(())
    }

    pub fn is_perturbative(&self) -> bool {
        self.mu.max(self.nu) / self.sigma <= PERTURBATIVE_LIMIT
    }
}

/// Pointer readings of a run, one row per measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub schedule: CouplingSchedule,
    pub times: Vec<f64>,
    pub q_prime: Vec<f64>,
    /// Momentum-channel readings for the joint model.
    pub p_double_prime: Option<Vec<f64>>,
}

impl MeasurementRecord {
    pub fn new(schedule: CouplingSchedule, joint: bool) -> Self {
        MeasurementRecord {
            schedule,
            times: Vec::new(),
            q_prime: Vec::new(),
            p_double_prime: joint.then(Vec::new),
        }
    }

    pub fn push(&mut self, t: f64, q: f64, p: Option<f64>) {
        self.times.push(t);
        self.q_prime.push(q);
        if let (Some(col), Some(p)) = (self.p_double_prime.as_mut(), p) {
            col.push(p);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        match &self.p_double_prime {
            Some(p) => {
                writeln!(w, "step,t,Qprime,Pdoubleprime")?;
                for (i, ((t, q), p)) in self.times.iter().zip(&self.q_prime).zip(p).enumerate() {
                    writeln!(w, "{},{t:.16e},{q:.16e},{p:.16e}", i + 1)?;
                }
            }
            None => {
                writeln!(w, "step,t,Qprime")?;
                for (i, (t, q)) in self.times.iter().zip(&self.q_prime).enumerate() {
                    writeln!(w, "{},{t:.16e},{q:.16e}", i + 1)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_tau_rule() {
        let s = CouplingSchedule::sqrt_tau(1e-2, 1.0).unwrap();
        assert_eq!(s.mu, 0.1);
        assert_eq!(s.nu, 0.1);
        assert!(s.is_perturbative());
        let s = CouplingSchedule::sqrt_tau(0.25, 1.0).unwrap();
        assert!(!s.is_perturbative());
        assert!(CouplingSchedule::fixed(-0.1, 0.0, 1e-3, 1.0).is_err());
        assert!(CouplingSchedule::fixed(0.1, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn record_csv() {
        let s = CouplingSchedule::sqrt_tau(1e-2, 1.0).unwrap();
        let mut r = MeasurementRecord::new(s, true);
        r.push(0.01, 0.5, Some(-0.25));
        r.push(0.02, 0.125, Some(1.0));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,t,Qprime,Pdoubleprime");
        assert_eq!(lines[2], "2,2.0000000000000000e-2,1.2500000000000000e-1,1.0000000000000000e0");
    }
}
