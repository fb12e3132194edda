use rand::Rng;

use crate::fft::FftPair;
use crate::grid::GridSpec;
use crate::rng::SimRng;
use crate::{Error, C64, Result};

/// Default memory cap for a dense three-axis state, in bytes.
pub const DEFAULT_TENSOR_BYTES: usize = 256 << 20;

/// A state of system ⊗ position pointer ⊗ momentum pointer, all three axes
/// in position representation, index `(k, m, j)` ↦ `(k·n₁ + m)·n₂ + j`.
#[derive(Clone, Debug)]
pub struct TensorState {
    pub axes: [GridSpec; 3],
    pub data: Vec<C64>,
}

impl TensorState {
    pub fn zeros(axes: [GridSpec; 3], cap_bytes: usize) -> Result<Self> {
        let len = axes.iter().map(|g| g.n_points).product::<usize>();
        let bytes = len * std::mem::size_of::<C64>();
        if bytes > cap_bytes {
            return Err(Error::Resource(format!(
                "tensor grid needs {bytes} bytes, cap is {cap_bytes}"
            )));
        }
        Ok(TensorState {
            axes,
            data: vec![C64::default(); len],
        })
    }

    /// `f₀(q)·f₁(q′)·f₂(q″)`
    pub fn product(axes: [GridSpec; 3], f: [&dyn Fn(f64) -> C64; 3], cap_bytes: usize) -> Result<Self> {
        let mut t = Self::zeros(axes, cap_bytes)?;
        let v: Vec<Vec<C64>> = (0..3)
            .map(|i| t.axes[i].positions().into_iter().map(f[i]).collect())
            .collect();
        let (n1, n2) = (t.axes[1].n_points, t.axes[2].n_points);
        for (k, a) in v[0].iter().enumerate() {
            for (m, b) in v[1].iter().enumerate() {
                for (j, c) in v[2].iter().enumerate() {
                    t.data[(k * n1 + m) * n2 + j] = a * b * c;
                }
            }
        }
        Ok(t)
    }

    fn dims(&self) -> [usize; 3] {
        [self.axes[0].n_points, self.axes[1].n_points, self.axes[2].n_points]
    }

    fn strides(&self) -> [usize; 3] {
        let [_, n1, n2] = self.dims();
        [n1 * n2, n2, 1]
    }

    /// `L²` norm with the product measure.
    pub fn norm(&self) -> f64 {
        let vol: f64 = self.axes.iter().map(|g| g.dx()).product();
        (self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * vol).sqrt()
    }

    /// Forward (`inverse = false`) or normalized inverse FFT along `axis`.
    pub fn fft_axis(&mut self, axis: usize, inverse: bool) {
        let dims = self.dims();
        let stride = self.strides()[axis];
        let n = dims[axis];
        let fft = FftPair::new(n);
        let mut line = vec![C64::default(); n];
        let total = self.data.len();
        for base in 0..total {
            // visit each line once: its first element has axis index 0
            if (base / stride) % n != 0 {
                continue;
            }
            for (i, v) in line.iter_mut().enumerate() {
                *v = self.data[base + i * stride];
            }
            if inverse {
                fft.inverse(&mut line);
            } else {
                fft.forward(&mut line);
            }
            for (i, v) in line.iter().enumerate() {
                self.data[base + i * stride] = *v;
            }
        }
    }

    /// Multiply by `f(c₀, c₁, c₂)` where `c_i` is the position or momentum
    /// of axis `i` as selected by `momentum[i]`.
    fn multiply(&mut self, momentum: [bool; 3], f: impl Fn(f64, f64, f64) -> C64) {
        let c: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                if momentum[i] {
                    self.axes[i].momenta()
                } else {
                    self.axes[i].positions()
                }
            })
            .collect();
        let [_, n1, n2] = self.dims();
        for (idx, v) in self.data.iter_mut().enumerate() {
            let (k, m, j) = (idx / (n1 * n2), (idx / n2) % n1, idx % n2);
            *v *= f(c[0][k], c[1][m], c[2][j]);
        }
    }

    /// Apply `V = exp{(μp̂′q̂ − νq̂″p̂)/iħ} = e^A e^B e^C` exactly, where `A`
    /// shifts `q′` by `μq`, `B` shifts `q` by `−νq″` and `C` shifts `q′` by
    /// `μνq″/2`. The three factors are exact because the commutator of the
    /// two generator terms is central.
    pub fn apply_interaction(&mut self, mu: f64, nu: f64) {
        let hbar = self.axes[0].hbar;
        self.fft_axis(1, false);
        self.multiply([false, true, false], |_, pp, qpp| {
            C64::from_polar(1.0, -mu * nu * pp * qpp / (2.0 * hbar))
        });
        self.fft_axis(0, false);
        self.multiply([true, true, false], |p, _, qpp| C64::from_polar(1.0, nu * qpp * p / hbar));
        self.fft_axis(0, true);
        self.multiply([false, true, false], |q, pp, _| C64::from_polar(1.0, -mu * q * pp / hbar));
        self.fft_axis(1, true);
    }

    /// Multiply by a position function of each axis: `Σ_i c_i x_i`.
    pub fn apply_linear_position(&mut self, c: [f64; 3]) {
        self.multiply([false; 3], |a, b, d| C64::from(c[0] * a + c[1] * b + c[2] * d));
    }

    /// `Σ_i c_i p̂_i` applied spectrally.
    pub fn apply_linear_momentum(&mut self, c: [f64; 3]) {
        let orig = self.data.clone();
        let mut acc = vec![C64::default(); orig.len()];
        for (axis, &ci) in c.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            self.data.copy_from_slice(&orig);
            self.fft_axis(axis, false);
            let mut sel = [false; 3];
            sel[axis] = true;
            self.multiply(sel, |a, b, d| C64::from(ci * [a, b, d][axis]));
            self.fft_axis(axis, true);
            for (o, v) in acc.iter_mut().zip(&self.data) {
                *o += v;
            }
        }
        self.data = acc;
    }

    pub fn distance(&self, other: &TensorState) -> f64 {
        let vol: f64 = self.axes.iter().map(|g| g.dx()).product();
        (self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            * vol)
            .sqrt()
    }
}

/// Applied-to-state residuals of the two conjugation identities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugationReport {
    /// `‖V†q̂′VΨ − (q̂′ + μq̂ − ½μνq̂″)Ψ‖`
    pub residual_q: f64,
    /// `‖V†p̂″VΨ − (p̂″ + νp̂ − ½μνp̂′)Ψ‖`
    pub residual_p: f64,
    pub n_per_axis: usize,
    pub mu: f64,
    pub nu: f64,
}

impl ConjugationReport {
    pub fn max_residual(&self) -> f64 {
        self.residual_q.max(self.residual_p)
    }
}

/// Check `V†q̂′V = q̂′ + μq̂ − ½μνq̂″` and `V†p̂″V = p̂″ + νp̂ − ½μνp̂′` on a
/// random Gaussian product state with `n ≤ 64` nodes per axis.
pub fn conjugation_check(mu: f64, nu: f64, n: usize, rng: &mut SimRng) -> Result<ConjugationReport> {
    if !(8..=64).contains(&n) || !n.is_power_of_two() {
        return Err(Error::config("conjugation check needs a power-of-two n in [8, 64]"));
    }
    let g = GridSpec::new(n, -12.0, 12.0, 1.0)?;
    let axes = [g.clone(), g.clone(), g];
    let gauss = |rng: &mut SimRng| {
        let c: f64 = rng.random_range(-1.0..1.0);
        let w: f64 = rng.random_range(0.8..1.2);
        let k: f64 = rng.random_range(-1.0..1.0);
        move |x: f64| C64::from_polar((-(x - c) * (x - c) / (4.0 * w * w)).exp(), k * x)
    };
    let (f0, f1, f2) = (gauss(rng), gauss(rng), gauss(rng));
    let psi = TensorState::product(axes, [&f0, &f1, &f2], DEFAULT_TENSOR_BYTES)?;
    let scale = 1.0 / psi.norm();
    let mut psi = psi;
    for v in psi.data.iter_mut() {
        *v *= scale;
    }

    let mut lhs = psi.clone();
    lhs.apply_interaction(mu, nu);
    lhs.apply_linear_position([0.0, 1.0, 0.0]);
    lhs.apply_interaction(-mu, -nu);
    let mut rhs = psi.clone();
    rhs.apply_linear_position([mu, 1.0, -0.5 * mu * nu]);
    let residual_q = lhs.distance(&rhs);

    let mut lhs = psi.clone();
    lhs.apply_interaction(mu, nu);
    lhs.apply_linear_momentum([0.0, 0.0, 1.0]);
    lhs.apply_interaction(-mu, -nu);
    let mut rhs = psi;
    rhs.apply_linear_momentum([nu, -0.5 * mu * nu, 1.0]);
    let residual_p = lhs.distance(&rhs);

    Ok(ConjugationReport {
        residual_q,
        residual_p,
        n_per_axis: n,
        mu,
        nu,
    })
}
