//! Weyl operators `Ŵ(q₀,p₀) = exp((q₀p̂ − p₀q̂)/iħ)` and dense Weyl
//! (symmetric-ordering) quantization of low-degree polynomials.

use nalgebra::DMatrix;

use crate::grid::GridSpec;
use crate::wavefunction::{check_boundary, SpectralOps, WaveFunction};
use crate::{Error, C64, Result};

/// Largest grid for which dense operator matrices are built.
pub const MAX_DENSE_POINTS: usize = 256;

/// Largest polynomial degree accepted by the dense quantizers.
pub const MAX_DEGREE: usize = 4;

/// `(Ŵψ)(x) = e^{ip₀(x − q₀/2)/ħ} ψ(x − q₀)`: a spectral shift by `q₀`, then a
/// boost by `p₀` carrying the symmetric-ordering phase.
pub fn weyl_operator_apply(psi: &WaveFunction, q0: f64, p0: f64) -> Result<WaveFunction> {
    let ops = SpectralOps::new(psi.grid());
    let mut out = psi.clone();
    apply_in_place(&ops, out.amplitudes_mut(), q0, p0);
    check_boundary(out.amplitudes(), out.grid())?;
    Ok(out)
}

pub(crate) fn apply_in_place(ops: &SpectralOps, a: &mut [C64], q0: f64, p0: f64) {
    let hbar = ops.grid().hbar;
    if q0 != 0.0 {
        ops.fft().forward(a);
        for (v, &p) in a.iter_mut().zip(ops.momenta()) {
            *v *= C64::from_polar(1.0, -p * q0 / hbar);
        }
        ops.fft().inverse(a);
    }
    if p0 != 0.0 {
        for (v, &x) in a.iter_mut().zip(ops.positions()) {
            *v *= C64::from_polar(1.0, p0 * (x - 0.5 * q0) / hbar);
        }
    }
}

fn check_dense(grid: &GridSpec, degree: usize) -> Result<()> {
    if grid.n_points > MAX_DENSE_POINTS {
        return Err(Error::Resource(format!(
            "dense quantization limited to {MAX_DENSE_POINTS} grid points, got {}",
            grid.n_points
        )));
    }
    if degree > MAX_DEGREE {
        return Err(Error::Resource(format!(
            "dense quantization limited to degree {MAX_DEGREE}, got {degree}"
        )));
    }
    Ok(())
}

/// Matrix of `q̂`.
pub fn position_matrix(grid: &GridSpec) -> DMatrix<C64> {
    let x: Vec<C64> = grid.positions().into_iter().map(C64::from).collect();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(x))
}

/// Matrix of `p̂ = F⁻¹ diag(p) F`, built column by column.
pub fn momentum_matrix(grid: &GridSpec) -> DMatrix<C64> {
    let n = grid.n_points;
    let ops = SpectralOps::new(grid);
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        e.fill(C64::new(0.0, 0.0));
        e[k] = C64::new(1.0, 0.0);
        let col = ops.apply_p(&e);
        m.column_mut(k).copy_from_slice(&col);
    }
    m
}

fn power(m: &DMatrix<C64>, n: usize) -> DMatrix<C64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..n {
        out = &out * m;
    }
    out
}

/// `[(aq + bp)ⁿ]_Weyl = (aq̂ + bp̂)ⁿ`.
pub fn weyl_quantize_linear_power(grid: &GridSpec, a: f64, b: f64, n: usize) -> Result<DMatrix<C64>> {
    check_dense(grid, n)?;
    let l = position_matrix(grid) * C64::from(a) + momentum_matrix(grid) * C64::from(b);
    Ok(power(&l, n))
}

/// `[q^j p^k]_Weyl`, the average of `q̂^j p̂^k` over all orderings.
///
/// Obtained by polarization: the coefficient of `s^j` in `(sq̂ + p̂)^{j+k}`
/// is `C(j+k, j)·[q^j p^k]_Weyl`, extracted with roots of unity.
pub fn weyl_quantize_monomial(grid: &GridSpec, j: usize, k: usize) -> Result<DMatrix<C64>> {
    let n = j + k;
    check_dense(grid, n)?;
    let q = position_matrix(grid);
    let p = momentum_matrix(grid);
    let m = n + 1;
    let mut acc = DMatrix::<C64>::zeros(grid.n_points, grid.n_points);
    for l in 0..m {
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * l as f64 / m as f64);
        let term = power(&(&q * w + &p), n);
        acc += term * w.powi(-(j as i32));
    }
    let scale = 1.0 / (m as f64 * binomial(n, j));
    Ok(acc * C64::from(scale))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use nalgebra::DVector;
    use rand::Rng;

    fn grid() -> GridSpec {
        GridSpec::new(256, -20.0, 20.0, 1.0).unwrap()
    }

    fn vec_of(psi: &WaveFunction) -> DVector<C64> {
        DVector::from_column_slice(psi.amplitudes())
    }

    fn l2(v: &DVector<C64>, dx: f64) -> f64 {
        (v.norm_squared() * dx).sqrt()
    }

    #[test]
    fn identity_at_origin() {
        let g = grid();
        let psi = WaveFunction::gaussian(&g, 0.3, 1.0, 0.5);
        let out = weyl_operator_apply(&psi, 0.0, 0.0).unwrap();
        assert_eq!(out, psi);
    }

    #[test]
    fn shifts_mean_position_and_momentum() {
        let g = grid();
        let psi = WaveFunction::gaussian(&g, 0.3, 1.0, 0.5);
        let m0 = psi.moments();
        let out = weyl_operator_apply(&psi, 2.5, -1.25).unwrap();
        let m1 = out.moments();
        assert!((m1.q_mean - m0.q_mean - 2.5).abs() < 1e-8);
        assert!((m1.p_mean - m0.p_mean + 1.25).abs() < 1e-8);
        assert!((out.norm_sqr() - psi.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn composition_law() {
        let g = grid();
        let psi = WaveFunction::gaussian(&g, 0.0, 1.0, 0.0);
        let mut rng = stream(11, 0);
        for _ in 0..20 {
            let (q, p, q2, p2): (f64, f64, f64, f64) = (
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let lhs = weyl_operator_apply(&weyl_operator_apply(&psi, q2, p2).unwrap(), q, p).unwrap();
            let mut rhs = weyl_operator_apply(&psi, q + q2, p + p2).unwrap();
            let phase = C64::from_polar(1.0, -(q * p2 - p * q2) / (2.0 * g.hbar));
            for v in rhs.amplitudes_mut() {
                *v *= phase;
            }
            assert!(lhs.distance(&rhs) < 1e-8, "{}", lhs.distance(&rhs));
        }
    }

    #[test]
    fn off_grid_shift_is_rejected() {
        let g = grid();
        let psi = WaveFunction::gaussian(&g, 0.0, 1.0, 0.0);
        assert!(matches!(
            weyl_operator_apply(&psi, 17.0, 0.0),
            Err(Error::BoundaryEscape { .. })
        ));
    }

    #[test]
    fn constant_symbol_is_identity() {
        let g = GridSpec::new(32, -4.0, 4.0, 1.0).unwrap();
        let m = weyl_quantize_monomial(&g, 0, 0).unwrap();
        assert!((m - DMatrix::<C64>::identity(32, 32)).norm() < 1e-12);
    }

    #[test]
    fn q2p_matches_three_term_average() {
        let g = grid();
        let (q, p) = (position_matrix(&g), momentum_matrix(&g));
        let w = weyl_quantize_monomial(&g, 2, 1).unwrap();
        let sym = (&q * &q * &p + &q * &p * &q + &p * &q * &q) * C64::from(1.0 / 3.0);
        let psi = vec_of(&WaveFunction::gaussian(&g, 0.5, 1.0, 0.3));
        assert!(l2(&((&w - &sym) * &psi), g.dx()) < 1e-8);
    }

    /// All distinct words with `j` q's and `k` p's.
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

    #[test]
    fn monomials_equal_ordering_average() {
        let g = GridSpec::new(64, -8.0, 8.0, 1.0).unwrap();
        let (q, p) = (position_matrix(&g), momentum_matrix(&g));
        let psi = vec_of(&WaveFunction::gaussian(&g, 0.0, 1.0, 0.0));
        for total in 0..=3 {
            for j in 0..=total {
                let w = weyl_quantize_monomial(&g, j, total - j).unwrap();
                let avg = ordering_average(&q, &p, j, total - j);
                let rel = (&w - &avg).norm() / avg.norm().max(1.0);
                assert!(rel < 1e-10, "q^{j} p^{}: {rel}", total - j);
                assert!(l2(&((&w - &avg) * &psi), g.dx()) < 1e-8);
            }
        }
    }

    #[test]
    fn mccoy_form_for_q2p2() {
        // [q^2 p^2]_W = ¼ (p²q² + 2 q p² q + q² p²); relies on [q̂, p̂] = iħ,
        // which the grid only honours on well-resolved states
        let g = GridSpec::new(128, -14.0, 14.0, 1.0).unwrap();
        let (q, p) = (position_matrix(&g), momentum_matrix(&g));
        let p2 = &p * &p;
        let q2 = &q * &q;
        let mc = (&p2 * &q2 + &q * &p2 * &q * C64::from(2.0) + &q2 * &p2) * C64::from(0.25);
        let w = weyl_quantize_monomial(&g, 2, 2).unwrap();
        let psi = vec_of(&WaveFunction::gaussian(&g, 0.4, 1.0, -0.2));
        let r = l2(&((&w - &mc) * &psi), g.dx());
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn square_of_q_plus_p_on_gaussian() {
        // ψ = e^{−x²/2}: (q̂ + p̂)²ψ = (x² − i(2x·(−x) + 1)·... ) computed by hand:
        // q̂²ψ = x²ψ, p̂²ψ = (1 − x²)ψ, (q̂p̂ + p̂q̂)ψ = −i(1 − 2x²)ψ
        let g = grid();
        let psi = WaveFunction::from_fn(&g, |x| C64::from((-0.5 * x * x).exp()));
        let w = weyl_quantize_linear_power(&g, 1.0, 1.0, 2).unwrap();
        let got = &w * vec_of(&psi);
        let want = DVector::from_iterator(
            g.n_points,
            g.positions().into_iter().map(|x| {
                let e = (-0.5 * x * x).exp();
                C64::new(1.0, -(1.0 - 2.0 * x * x)) * e
            }),
        );
        assert!(l2(&(got - &want), g.dx()) < 1e-8);
        let by_monomials = weyl_quantize_monomial(&g, 2, 0).unwrap()
            + weyl_quantize_monomial(&g, 1, 1).unwrap() * C64::from(2.0)
            + weyl_quantize_monomial(&g, 0, 2).unwrap();
        assert!(l2(&((by_monomials - &w) * vec_of(&psi)), g.dx()) < 1e-8);
    }

    #[test]
    fn resource_limits() {
        let big = GridSpec::new(512, -20.0, 20.0, 1.0).unwrap();
        assert!(matches!(weyl_quantize_monomial(&big, 1, 1), Err(Error::Resource(_))));
        let g = GridSpec::new(16, -2.0, 2.0, 1.0).unwrap();
        assert!(matches!(weyl_quantize_linear_power(&g, 1.0, 1.0, 5), Err(Error::Resource(_))));
    }
}
