//! Thin wrappers over `rustfft` with per-thread plan caches.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::C64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static SCRATCH: RefCell<Vec<C64>> = const { RefCell::new(Vec::new()) };
}

fn run(plan: &dyn Fft<f64>, buf: &mut [C64]) {
    let need = plan.get_inplace_scratch_len();
    SCRATCH.with(|s| {
        let mut s = s.borrow_mut();
        if s.len() < need {
            s.resize(need, C64::default());
        }
        plan.process_with_scratch(buf, &mut s[..need]);
    });
}

/// Forward and inverse plans of one length. Cheap to clone.
#[derive(Clone)]
pub struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            FftPair {
                forward: p.plan_fft_forward(n),
                inverse: p.plan_fft_inverse(n),
                scale: 1.0 / n as f64,
            }
        })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalized forward transform, `Σ_k x_k e^{−2πi jk/n}`.
    pub fn forward(&self, buf: &mut [C64]) {
        run(self.forward.as_ref(), buf);
    }

    /// Inverse transform including the `1/n` factor.
    pub fn inverse(&self, buf: &mut [C64]) {
        run(self.inverse.as_ref(), buf);
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }

    /// Forward transforms of consecutive length-`n` rows.
    pub fn forward_rows(&self, buf: &mut [C64]) {
        run(self.forward.as_ref(), buf);
    }

    /// Inverse transforms of consecutive length-`n` rows, normalized.
    pub fn inverse_rows(&self, buf: &mut [C64]) {
        self.inverse(buf);
    }
}

pub fn forward(buf: &mut [C64]) {
    FftPair::new(buf.len()).forward(buf);
}

pub fn inverse(buf: &mut [C64]) {
    FftPair::new(buf.len()).inverse(buf);
}
