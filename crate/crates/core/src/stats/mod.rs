//! Ensemble execution, limit-theorem diagnostics and the discrete to
//! continuum convergence study.

mod convergence;
mod ensemble;
mod ks;
mod limits;

use std::io::Write;

use crate::sse::TrajectoryResult;
use crate::{Error, Result};

pub use convergence::{convergence_study, ConvergenceReport, ConvergenceRow, ConvergenceSpec, Distance, METRIC_NAMES};
pub use ensemble::{configure_threads, ensemble_run, ensemble_trajectories, par_map_indexed, EnsembleSpec, Simulation, THREADS_ENV};
pub use ks::{kolmogorov_pvalue, ks_critical_value, ks_one_sample, ks_two_sample, normal_cdf};
pub use limits::{clt_brownian_check, lln_kappa_check, theta_hat, LimitDiagnostics};

/// Pairwise (cascade) summation; the result does not depend on how the
/// caller partitions work, only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let d: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    pairwise_sum(&d) / (xs.len() - 1) as f64
}

/// Pearson correlation; zero if either sample is constant.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    let sxy: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let sxx: Vec<f64> = xs.iter().map(|x| (x - mx).powi(2)).collect();
    let syy: Vec<f64> = ys.iter().map(|y| (y - my).powi(2)).collect();
    let den = (pairwise_sum(&sxx) * pairwise_sum(&syy)).sqrt();
    if den > 0.0 {
        pairwise_sum(&sxy) / den
    } else {
        0.0
    }
}

/// Skewness and excess kurtosis (population estimators).
pub fn shape_moments(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let n = xs.len() as f64;
    let c = |k: i32| pairwise_sum(&xs.iter().map(|x| (x - m).powi(k)).collect::<Vec<_>>()) / n;
    let v = c(2);
    if v <= 0.0 {
        return (0.0, 0.0);
    }
    (c(3) / v.powf(1.5), c(4) / (v * v) - 3.0)
}

/// Names of the aggregated trajectory columns, in output order.
pub const STAT_COLUMNS: [&str; 7] = ["q_mean", "p_mean", "q_var", "p_var", "qp_cov", "norm", "energy"];

/// Ensemble mean, variance and standard error of one column at every
/// checkpoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub se: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub m: usize,
    /// Indexed like [`STAT_COLUMNS`].
    pub columns: Vec<ColumnStats>,
    /// False for a single trajectory; the SE columns are then zero and
    /// meaningless.
    pub se_defined: bool,
}

impl EnsembleStats {
    pub fn from_trajectories(trajs: &[TrajectoryResult]) -> Result<Self> {
        let first = trajs.first().ok_or_else(|| Error::config("empty ensemble"))?;
        let times = first.times();
        for (i, tr) in trajs.iter().enumerate() {
            let t = tr.times();
            let same = t.len() == times.len()
                && t.iter().zip(&times).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
            if !same {
                return Err(Error::numeric(format!("trajectory {i} has different checkpoint times")));
            }
        }
        let m = trajs.len();
        let data: Vec<Vec<Vec<f64>>> = STAT_COLUMNS
            .iter()
            .map(|c| trajs.iter().map(|t| t.column(c).expect("known column")).collect())
            .collect();
        let columns = data
            .iter()
            .map(|per_traj| {
                let mut cs = ColumnStats::default();
                let mut xs = vec![0.0; m];
                for k in 0..times.len() {
                    for (x, tr) in xs.iter_mut().zip(per_traj) {
                        *x = tr[k];
                    }
                    let v = variance(&xs);
                    cs.mean.push(mean(&xs));
                    cs.variance.push(v);
                    cs.se.push((v / m as f64).sqrt());
                }
                cs
            })
            .collect();
        Ok(EnsembleStats {
            times,
            m,
            columns,
            se_defined: m > 1,
        })
    }

    pub fn column(&self, name: &str) -> Option<&ColumnStats> {
        STAT_COLUMNS.iter().position(|c| *c == name).map(|i| &self.columns[i])
    }

    /// One row per checkpoint: `t`, then `<col>_mean,<col>_var,<col>_se`
    /// for every column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = String::from("t");
        for c in STAT_COLUMNS {
            header.push_str(&format!(",{c}_mean,{c}_var,{c}_se"));
        }
        writeln!(w, "{header}")?;
        for (k, t) in self.times.iter().enumerate() {
            write!(w, "{t:.16e}")?;
            for c in &self.columns {
                write!(w, ",{:.16e},{:.16e},{:.16e}", c.mean[k], c.variance[k], c.se[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
