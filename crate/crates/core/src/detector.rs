//! Pointer-state profiles `χ`, their measurement constant κ and exact
//! sampling of pre-interaction pointer values.
//!
//! A profile is stored as `χ(u) = A·g(c·u)` for a raw shape `g`, where
//! `u = y²`. The density of the dimensionless pointer variable `Y` is
//! `χ(y²)²`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::quadrature::{gauss_legendre, integrate};
use crate::spline::CubicSpline;
use crate::{Error, Result};

/// Minimum knot count for which spline derivatives are trusted.
pub const MIN_TABLE_KNOTS: usize = 32;

const QUAD_TOL: f64 = 1e-14;
const TAIL_MASS: f64 = 1e-12;
const CDF_CELLS: usize = 4096;

/// How a profile is specified in a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Gaussian,
    PerturbedGaussian { a: f64 },
    /// Two-column text file `(y, χ_raw(y²))`.
    Table { path: String },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Gaussian
    }
}

/// Which pair of integrals is set to one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `∫χ(y²)²dy = ∫y²χ(y²)²dy = 1`, so `Y` has unit mass and variance.
    #[default]
    Probabilistic,
    /// `∫χ(y²)dy = ∫y²χ(y²)dy = 1`, taken at face value.
    Literal,
}

#[derive(Clone, Debug)]
enum Shape {
    /// `g(v) = (1 + a·v)e^{−v/4}`
    Analytic { a: f64 },
    /// Natural cubic spline in `v`, zero beyond the last knot.
    Spline { spline: CubicSpline, v_max: f64 },
}

impl Shape {
    /// `(g, g′, g″)` at `v ≥ 0`.
    fn eval(&self, v: f64) -> (f64, f64, f64) {
        match self {
            Shape::Analytic { a } => {
                let e = (-0.25 * v).exp();
                let b = 1.0 + a * v;
                (b * e, (a - 0.25 * b) * e, (b / 16.0 - 0.5 * a) * e)
            }
            Shape::Spline { spline, v_max } => {
                if v > *v_max {
                    (0.0, 0.0, 0.0)
                } else {
                    spline.eval_all(v)
                }
            }
        }
    }

    fn value(&self, v: f64) -> f64 {
        match self {
            Shape::Analytic { a } => (1.0 + a * v) * (-0.25 * v).exp(),
            Shape::Spline { spline, v_max } => {
                if v > *v_max {
                    0.0
                } else {
                    spline.eval(v)
                }
            }
        }
    }

    /// Edge of the support in the raw variable `z = √v`, if finite.
    fn z_support(&self) -> Option<f64> {
        match self {
            Shape::Analytic { .. } => None,
            Shape::Spline { v_max, .. } => Some(v_max.sqrt()),
        }
    }

    fn knots_z(&self) -> Vec<f64> {
        match self {
            Shape::Analytic { .. } => vec![1.0, 2.0, 4.0, 8.0],
            Shape::Spline { spline, .. } => spline.knots().iter().map(|v| v.max(0.0).sqrt()).collect(),
        }
    }
}

/// A normalized pointer profile with its scale σ and sampling table.
#[derive(Clone, Debug)]
pub struct DetectorProfile {
    spec: ProfileSpec,
    shape: Shape,
    amp: f64,
    arg: f64,
    sigma: f64,
    y_max: f64,
    breaks: Vec<f64>,
    norm: Normalization,
    derivatives_ok: bool,
    kappa: Option<f64>,
    cdf_y: Vec<f64>,
    cdf: Vec<f64>,
}

/// Pre-interaction pointer values for one measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointerSample {
    pub y_q: f64,
    /// Present for joint position/momentum measurements.
    pub y_p: Option<f64>,
}

impl DetectorProfile {
    /// `χ(u) = (2π)^{−1/4} e^{−u/4}`
    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::build(ProfileSpec::Gaussian, Shape::Analytic { a: 0.0 }, sigma, Normalization::Probabilistic)
    }

    /// `χ_a(u) ∝ (1 + a·u)e^{−u/4}`, renormalized; `a ∈ [0, 0.5]`.
    pub fn perturbed_gaussian(a: f64, sigma: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&a) {
            return Err(Error::config(format!("perturbed-gaussian parameter a = {a} outside [0, 0.5]")));
        }
        Self::build(ProfileSpec::PerturbedGaussian { a }, Shape::Analytic { a }, sigma, Normalization::Probabilistic)
    }

    /// Profile from raw samples `χ_raw(y_i²)`, spline-interpolated in `u = y²`.
    pub fn from_table(y: &[f64], chi_raw: &[f64], sigma: f64, norm: Normalization) -> Result<Self> {
        Self::from_table_with_spec(y, chi_raw, sigma, norm, ProfileSpec::Table { path: String::new() })
    }

    fn from_table_with_spec(
        y: &[f64],
        chi_raw: &[f64],
        sigma: f64,
        norm: Normalization,
        spec: ProfileSpec,
    ) -> Result<Self> {
        if y.len() != chi_raw.len() || y.len() < 4 {
            return Err(Error::config("profile table needs at least 4 rows of (y, chi)"));
        }
        if y.iter().any(|&v| v < 0.0) || chi_raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("profile table needs y >= 0 and finite values"));
        }
        let u: Vec<f64> = y.iter().map(|v| v * v).collect();
        let v_max = *u.last().unwrap();
        let spline = CubicSpline::natural(u, chi_raw.to_vec())?;
        let n = y.len();
        let mut p = Self::build(spec, Shape::Spline { spline, v_max }, sigma, norm)?;
        if n < MIN_TABLE_KNOTS {
            p.derivatives_ok = false;
            p.kappa = None;
        }
        Ok(p)
    }

    /// Load a two-column table; `#` starts a comment, separators are
    /// whitespace or commas.
    pub fn load_table(path: &Path, sigma: f64, norm: Normalization) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read profile table {}: {e}", path.display())))?;
        let (y, chi) = parse_table(&text)?;
        Self::from_table_with_spec(&y, &chi, sigma, norm, ProfileSpec::Table {
            path: path.display().to_string(),
        })
    }

    pub fn from_spec(spec: &ProfileSpec, sigma: f64, norm: Normalization) -> Result<Self> {
        match spec {
            ProfileSpec::Gaussian if norm == Normalization::Probabilistic => Self::gaussian(sigma),
            ProfileSpec::Gaussian => Self::build(spec.clone(), Shape::Analytic { a: 0.0 }, sigma, norm),
            ProfileSpec::PerturbedGaussian { a } if norm == Normalization::Probabilistic => {
                Self::perturbed_gaussian(*a, sigma)
            }
            ProfileSpec::PerturbedGaussian { a } => Self::build(spec.clone(), Shape::Analytic { a: *a }, sigma, norm),
            ProfileSpec::Table { path } => Self::load_table(Path::new(path), sigma, norm),
        }
    }

    fn build(spec: ProfileSpec, shape: Shape, sigma: f64, norm: Normalization) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config(format!("detector scale sigma must be positive, got {sigma}")));
        }
        let z_end = shape.z_support().unwrap_or(40.0);
        let zb = shape.knots_z();
        let g = |z: f64| shape.eval(z * z).0;
        let (c, amp) = match norm {
            Normalization::Probabilistic => {
                let m0 = 2.0 * integrate(|z| g(z).powi(2), 0.0, z_end, &zb, QUAD_TOL)?;
                let m2 = 2.0 * integrate(|z| (z * g(z)).powi(2), 0.0, z_end, &zb, QUAD_TOL)?;
                if !(m0 > 0.0 && m2 > 0.0 && m0.is_finite() && m2.is_finite()) {
                    return Err(Error::config("profile is zero or not square integrable"));
                }
                let c = m2 / m0;
                (c, (c.sqrt() / m0).sqrt())
            }
            Normalization::Literal => {
                let l0 = 2.0 * integrate(g, 0.0, z_end, &zb, QUAD_TOL)?;
                let l2 = 2.0 * integrate(|z| z * z * g(z), 0.0, z_end, &zb, QUAD_TOL)?;
                if !(l0 > 0.0 && l2 > 0.0 && l0.is_finite() && l2.is_finite()) {
                    return Err(Error::config("profile has no positive mass and second moment"));
                }
                let c = l2 / l0;
                (c, c.sqrt() / l0)
            }
        };
        let breaks: Vec<f64> = zb.iter().map(|z| z / c.sqrt()).collect();
        let mut p = DetectorProfile {
            spec,
            shape,
            amp,
            arg: c,
            sigma,
            y_max: 0.0,
            breaks,
            norm,
            derivatives_ok: true,
            kappa: None,
            cdf_y: Vec::new(),
            cdf: Vec::new(),
        };
        p.y_max = match p.shape.z_support() {
            Some(z) => z / c.sqrt(),
            None => p.tail_cutoff()?,
        };
        p.kappa = Some(p.kappa_form_square()?);
        p.build_cdf();
        Ok(p)
    }

    /// Smallest half-integer `y` whose two-sided tail mass is below 1e-12.
    /// Under the literal convention the tail of `χ` itself must be small too.
    fn tail_cutoff(&self) -> Result<f64> {
        let literal = self.norm == Normalization::Literal;
        let mut y = 4.0;
        while y < 200.0 {
            let tail = 2.0
                * integrate(
                    |t| {
                        let d = self.density(t);
                        if literal {
                            d + self.chi(t).abs() * (1.0 + t * t)
                        } else {
                            d
                        }
                    },
                    y,
                    y + 40.0,
                    &[],
                    1e-18,
                )?;
            if tail < TAIL_MASS {
                return Ok(y);
            }
            y += 0.5;
        }
        Err(Error::config("profile tail does not decay"))
    }

    fn build_cdf(&mut self) {
        let (gx, gw) = gauss_legendre(8);
        let h = self.y_max / CDF_CELLS as f64;
        let mut y = Vec::with_capacity(CDF_CELLS + 1);
        let mut cum = Vec::with_capacity(CDF_CELLS + 1);
        let mut acc = 0.0;
        y.push(0.0);
        cum.push(0.0);
        for i in 0..CDF_CELLS {
            let a = i as f64 * h;
            let mass: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(x, w)| w * self.density(a + 0.5 * h * (x + 1.0)))
                .sum::<f64>()
                * 0.5
                * h;
            acc += mass;
            y.push(a + h);
            cum.push(acc);
        }
        let total = acc;
        for v in cum.iter_mut() {
            *v /= total;
        }
        self.cdf_y = y;
        self.cdf = cum;
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Same profile with a different scale σ.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config(format!("detector scale sigma must be positive, got {sigma}")));
        }
        let mut p = self.clone();
        p.sigma = sigma;
        Ok(p)
    }

    /// Largest `|y|` treated as inside the support.
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    /// `χ(u)`, `χ′(u)`, `χ″(u)` with respect to `u`.
    pub fn chi_u(&self, u: f64) -> (f64, f64, f64) {
        let (g, g1, g2) = self.shape.eval(self.arg * u);
        let c = self.arg;
        (self.amp * g, self.amp * c * g1, self.amp * c * c * g2)
    }

    /// `χ(y²)`
    pub fn chi(&self, y: f64) -> f64 {
        self.amp * self.shape.value(self.arg * y * y)
    }

    /// Density of `Y`, `χ(y²)²`.
    pub fn density(&self, y: f64) -> f64 {
        self.chi(y).powi(2)
    }

    /// Apparatus wave function `σ^{−1/2} χ((x/σ)²)`.
    pub fn pointer_amplitude(&self, x: f64) -> f64 {
        let y = x / self.sigma;
        self.amp * self.shape.value(self.arg * y * y) / self.sigma.sqrt()
    }

    /// `y·χ′(y²)/χ(y²)`, the per-step score used to extract Brownian
    /// increments from outcomes. Zero where `χ` vanishes.
    pub fn score(&self, y: f64) -> f64 {
        let (c, c1, _) = self.chi_u(y * y);
        if c == 0.0 {
            0.0
        } else {
            y * c1 / c
        }
    }

    /// `∫_{−∞}^{∞} f(y) dy` for even `f`, restricted to the support.
    fn even_integral(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        Ok(2.0 * integrate(f, 0.0, self.y_max, &self.breaks, QUAD_TOL)?)
    }

    /// `(∫χ², ∫y²χ²)`; both are one for a probabilistically normalized profile.
    pub fn mass_and_variance(&self) -> Result<(f64, f64)> {
        Ok((
            self.even_integral(|y| self.density(y))?,
            self.even_integral(|y| y * y * self.density(y))?,
        ))
    }

    /// Fourth moment `∫y⁴χ(y²)²dy`.
    pub fn fourth_moment(&self) -> Result<f64> {
        self.even_integral(|y| y.powi(4) * self.density(y))
    }

    fn require_derivatives(&self) -> Result<()> {
        if self.derivatives_ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "profile table has fewer than {MIN_TABLE_KNOTS} knots; derivatives are not reliable"
            )))
        }
    }

    fn kappa_form_square(&self) -> Result<f64> {
        self.even_integral(|y| {
            let d = self.chi_u(y * y).1 * y;
            2.0 * d * d
        })
    }

    /// κ = 2∫(χ′(y²)y)²dy.
    pub fn kappa(&self) -> Result<f64> {
        self.require_derivatives()?;
        self.kappa.ok_or_else(|| Error::config("kappa unavailable"))
    }

    /// κ in its integrated-by-parts form, `−∫(χ′χ + 2χχ″y²)dy`.
    pub fn kappa_by_parts(&self) -> Result<f64> {
        self.require_derivatives()?;
        self.even_integral(|y| {
            let (c, c1, c2) = self.chi_u(y * y);
            -(c1 * c + 2.0 * c * c2 * y * y)
        })
    }

    /// θ = ∫(χχ′ + 2χ′²y² + 2χ″χy²)dy, zero for every profile vanishing at
    /// the edge of its support.
    pub fn theta(&self) -> Result<f64> {
        self.require_derivatives()?;
        self.even_integral(|y| {
            let (c, c1, c2) = self.chi_u(y * y);
            let y2 = y * y;
            c * c1 + 2.0 * c1 * c1 * y2 + 2.0 * c2 * c * y2
        })
    }

    /// Numeric CDF of `Y` from the sampling table.
    pub fn cdf(&self, y: f64) -> f64 {
        let half = 0.5 * self.half_cdf(y.abs());
        if y >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    }

    fn half_cdf(&self, y: f64) -> f64 {
        if y >= self.y_max {
            return 1.0;
        }
        let h = self.y_max / CDF_CELLS as f64;
        let i = ((y / h) as usize).min(CDF_CELLS - 1);
        let t = (y - self.cdf_y[i]) / h;
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }

    fn half_quantile(&self, t: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= t).clamp(1, CDF_CELLS) - 1;
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let frac = if c1 > c0 { (t - c0) / (c1 - c0) } else { 0.5 };
        self.cdf_y[i] + frac * (self.cdf_y[i + 1] - self.cdf_y[i])
    }

    /// Draw `Y` with density `χ(y²)²` by inverting the tabulated CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let y = self.half_quantile(s.abs());
        if s < 0.0 {
            -y
        } else {
            y
        }
    }

    /// Pre-interaction pointer values, with a momentum-channel value drawn
    /// from `lambda` when given.
    pub fn sample_pointer<R: Rng + ?Sized>(&self, lambda: Option<&DetectorProfile>, rng: &mut R) -> PointerSample {
        let y_q = self.sample(rng);
        PointerSample {
            y_q,
            y_p: lambda.map(|l| l.sample(rng)),
        }
    }
}

/// Parse `(y, χ)` rows.
pub fn parse_table(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut y = Vec::new();
    let mut chi = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::config(format!("profile table line {}: bad number {s:?}", lineno + 1)))
        };
        if cols.len() != 2 {
            return Err(Error::config(format!("profile table line {}: expected 2 columns", lineno + 1)));
        }
        y.push(parse(cols[0])?);
        chi.push(parse(cols[1])?);
    }
    Ok((y, chi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::f64::consts::PI;

    fn tabulated(f: impl Fn(f64) -> f64, n: usize, y_end: f64) -> (Vec<f64>, Vec<f64>) {
        let y: Vec<f64> = (0..n).map(|i| y_end * i as f64 / (n - 1) as f64).collect();
        let c = y.iter().map(|&y| f(y * y)).collect();
        (y, c)
    }

    #[test]
    fn gaussian_constants() {
        let p = DetectorProfile::gaussian(1.0).unwrap();
        assert!((p.amp - (2.0 * PI).powf(-0.25)).abs() < 1e-10);
        assert!((p.arg - 1.0).abs() < 1e-10);
        let (m, v) = p.mass_and_variance().unwrap();
        assert!((m - 1.0).abs() < 1e-10 && (v - 1.0).abs() < 1e-10);
        assert!((p.kappa().unwrap() - 0.125).abs() < 1e-10);
        assert!((p.kappa_by_parts().unwrap() - 0.125).abs() < 1e-10);
        assert!(p.theta().unwrap().abs() < 1e-10);
    }

    #[test]
    fn gaussian_from_unnormalized_raw() {
        let (y, c) = tabulated(|u| 3.0 * (-u / 4.0).exp(), 400, 12.0);
        let p = DetectorProfile::from_table(&y, &c, 1.0, Normalization::Probabilistic).unwrap();
        let g = DetectorProfile::gaussian(1.0).unwrap();
        for y in [0.0, 0.5, 1.3, 2.7] {
            assert!((p.chi(y) - g.chi(y)).abs() < 1e-6, "{y}");
        }
        assert!((p.kappa().unwrap() - 0.125).abs() < 1e-5);
    }

    #[test]
    fn normalization_is_idempotent() {
        let p = DetectorProfile::perturbed_gaussian(0.3, 1.0).unwrap();
        let (y, c) = tabulated(|u| p.chi_u(u).0, 2000, p.y_max());
        let q = DetectorProfile::from_table(&y, &c, 1.0, Normalization::Probabilistic).unwrap();
        assert!((q.amp - 1.0).abs() < 1e-8 && (q.arg - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_table_rejected() {
        let (y, c) = tabulated(|_| 0.0, 64, 5.0);
        assert!(matches!(
            DetectorProfile::from_table(&y, &c, 1.0, Normalization::Probabilistic),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn perturbed_family() {
        let g = DetectorProfile::gaussian(1.0).unwrap();
        let p0 = DetectorProfile::perturbed_gaussian(0.0, 1.0).unwrap();
        assert_eq!(p0.kappa().unwrap(), g.kappa().unwrap());
        let p = DetectorProfile::perturbed_gaussian(0.3, 1.0).unwrap();
        let (m, v) = p.mass_and_variance().unwrap();
        assert!((m - 1.0).abs() < 1e-10 && (v - 1.0).abs() < 1e-10);
        let k = p.kappa().unwrap();
        assert!(k > 0.0 && (k - 0.125).abs() > 1e-3);
        assert!((k - p.kappa_by_parts().unwrap()).abs() < 1e-9);
        assert!(p.theta().unwrap().abs() < 1e-9);
        assert!(DetectorProfile::perturbed_gaussian(0.7, 1.0).is_err());
    }

    #[test]
    fn perturbed_kappa_by_finite_differences() {
        // independent route: differentiate χ(u) numerically
        let p = DetectorProfile::perturbed_gaussian(0.4, 1.0).unwrap();
        let h = 1e-5;
        let d = |u: f64| (p.chi_u(u + h).0 - p.chi_u((u - h).max(0.0)).0) / (u + h - (u - h).max(0.0));
        let n = 200_000;
        let dy = p.y_max() / n as f64;
        let k: f64 = (0..n)
            .map(|i| {
                let y = (i as f64 + 0.5) * dy;
                4.0 * (d(y * y) * y).powi(2) * dy
            })
            .sum();
        assert!((k - p.kappa().unwrap()).abs() < 1e-7);
    }

    #[test]
    fn theta_invariant_under_rescaling() {
        // θ is quadratic in χ and a boundary term, so a mass-2 profile still has θ = 0
        let (y, c) = tabulated(|u| 2f64.sqrt() * (2.0 * PI).powf(-0.25) * (-u / 4.0).exp(), 800, 12.0);
        let p = DetectorProfile::from_table(&y, &c, 1.0, Normalization::Probabilistic).unwrap();
        let scaled = DetectorProfile { amp: p.amp * 2f64.sqrt(), ..p.clone() };
        assert!((scaled.mass_and_variance().unwrap().0 - 2.0).abs() < 1e-8);
        assert!(scaled.theta().unwrap().abs() < 1e-7);
    }

    #[test]
    fn theta_detects_truncated_profile() {
        let (y, c) = tabulated(|u| (-u / 4.0).exp(), 400, 2.0);
        let p = DetectorProfile::from_table(&y, &c, 1.0, Normalization::Probabilistic).unwrap();
        let t = p.theta().unwrap();
        // boundary term 2·y·χ·χ′ at the cut
        let ym = p.y_max();
        let (c0, c1, _) = p.chi_u(ym * ym);
        assert!((t - 2.0 * ym * c0 * c1).abs() < 1e-6);
        assert!(t.abs() > 1e-2);
    }

    #[test]
    fn short_table_has_no_kappa() {
        let (y, c) = tabulated(|u| (-u / 4.0).exp(), 20, 10.0);
        let p = DetectorProfile::from_table(&y, &c, 1.0, Normalization::Probabilistic).unwrap();
        assert!(matches!(p.kappa(), Err(Error::Config(_))));
        assert!(matches!(p.theta(), Err(Error::Config(_))));
    }

    #[test]
    fn literal_normalization() {
        let p = DetectorProfile::from_spec(&ProfileSpec::Gaussian, 1.0, Normalization::Literal).unwrap();
        let l0 = p.even_integral(|y| p.chi(y)).unwrap();
        let l2 = p.even_integral(|y| y * y * p.chi(y)).unwrap();
        assert!((l0 - 1.0).abs() < 1e-9 && (l2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn score_for_gaussian() {
        let p = DetectorProfile::gaussian(1.0).unwrap();
        assert!((p.score(1.7) + 1.7 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn sampler_moments_and_determinism() {
        let p = DetectorProfile::gaussian(1.0).unwrap();
        let n = 200_000;
        let mut rng = stream(7, 0);
        let ys: Vec<f64> = (0..n).map(|_| p.sample(&mut rng)).collect();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| y * y).sum::<f64>() / n as f64 - mean * mean;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
        let mut rng = stream(7, 0);
        assert_eq!(p.sample(&mut rng), ys[0]);
    }

    #[test]
    fn table_cdf_matches_quadrature() {
        let p = DetectorProfile::perturbed_gaussian(0.5, 1.0).unwrap();
        for y in [-2.0, -0.3, 0.0, 0.8, 3.1] {
            let q = 0.5 + integrate(|t| p.density(t), 0.0, y, &[], 1e-14).unwrap();
            assert!((p.cdf(y) - q).abs() < 1e-7, "{y} {} {q}", p.cdf(y));
        }
    }

    #[test]
    fn parse_two_columns() {
        let (y, c) = parse_table("# y chi\n0 1\n0.5, 0.9\n\n1.0\t0.5 # tail\n").unwrap();
        assert_eq!(y, vec![0.0, 0.5, 1.0]);
        assert_eq!(c, vec![1.0, 0.9, 0.5]);
        assert!(parse_table("1 2 3").is_err());
    }
}
