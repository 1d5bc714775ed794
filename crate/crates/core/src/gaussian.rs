//! Centered multivariate normals: sampling, exact moments, tails and the
//! covariance-perturbation estimates (Neumann series, determinant ratio,
//! density difference).

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::batch::{SampleBatch, Stage};
use crate::error::{Error, Result};
use crate::rng::{stream, PURPOSE_DENSITY_MC, PURPOSE_GAUSSIAN};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSpec {
    pub dim: usize,
    pub covariance: DMatrix<f64>,
    pub cholesky_factor: DMatrix<f64>,
}

impl GaussianSpec {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        let n = covariance.nrows();
        if n == 0 || covariance.ncols() != n {
            return Err(Error::Dimension { expected: n.max(1), got: covariance.ncols() });
        }
        let chol = covariance.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite {
            minors: (1..=n).map(|r| covariance.view((0, 0), (r, r)).into_owned().determinant()).collect(),
        })?;
        Ok(GaussianSpec { dim: n, cholesky_factor: chol.l(), covariance })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is PD")
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(crate::shifts_covariance::from_rows(rows))
    }

    /// uᵀKu.
    pub fn quad_form(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: u.len() });
        }
        let v = DVector::from_column_slice(u);
        Ok((v.transpose() * &self.covariance * &v)[(0, 0)])
    }
}

/// n i.i.d. rows L·g; row i draws from its own stream.
pub fn sample_mvn(spec: &GaussianSpec, n: usize, seed: u64) -> Result<SampleBatch> {
    let d = spec.dim;
    let l = &spec.cholesky_factor;
    let row = |i: usize| -> Vec<f64> {
        let mut rng = stream(seed, PURPOSE_GAUSSIAN, i as u64);
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        (0..d).map(|r| (0..=r).map(|c| l[(r, c)] * g[c]).sum()).collect()
    };
    let rows = crate::par::map(n, row);
    SampleBatch::new(Stage::ZTilde, d, rows.concat(), seed)
}

/// (2n−1)!! = (2n)!/(n! 2ⁿ).
pub fn double_factorial_odd(n: u32) -> f64 {
    (1..=n).map(|k| (2 * k - 1) as f64).product()
}

/// E[(u·Z)^{2n}] = (2n)!/(n! 2ⁿ) (uᵀKu)ⁿ.
pub fn mvn_even_moment(u: &[f64], spec: &GaussianSpec, n: u32) -> Result<f64> {
    Ok(double_factorial_odd(n) * spec.quad_form(u)?.powi(n as i32))
}

/// E[(u·Z)^{2n+1}] = 0.
pub fn mvn_odd_moment(u: &[f64], spec: &GaussianSpec, _n: u32) -> Result<f64> {
    spec.quad_form(u).map(|_| 0.0)
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// P(|N(0,1)| > r).
pub fn two_sided_tail(r: f64) -> f64 {
    erfc(r / std::f64::consts::SQRT_2)
}

/// sqrt(2/π)·e^{−r²/2}/r.
pub fn gaussian_tail(r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("tail threshold r = {r} must be positive")));
    }
    Ok((2.0 / std::f64::consts::PI).sqrt() * (-r * r / 2.0).exp() / r)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

fn check_pair(c: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64, f64)> {
    let n = c.nrows();
    if c.ncols() != n || e.nrows() != n || e.ncols() != n {
        return Err(Error::Dimension { expected: n, got: e.nrows() });
    }
    let cinv = GaussianSpec::new(c.clone())?
        .covariance
        .cholesky()
        .expect("checked")
        .inverse();
    let gamma = max_abs(&cinv);
    let admissibility = (n * n) as f64 * gamma * max_abs(e);
    if admissibility >= 1.0 {
        return Err(Error::Inadmissible(admissibility));
    }
    Ok((cinv, gamma, admissibility))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeumannInverse {
    pub inverse_approx: DMatrix<f64>,
    /// entrywise bound γ (Nb)^{terms+1}/(1 − Nb), with Nb = N²γ·maxentry(Ẽ)
    pub residual_bound: f64,
    /// N²·γ·maxentry(Ẽ)
    pub admissibility: f64,
    /// ‖(C+Ẽ)·approx − I‖_max
    pub identity_residual: f64,
}

/// (C+Ẽ)⁻¹ ≈ (I + Σ_{k=1}^{terms} (−C⁻¹Ẽ)^k) C⁻¹.
pub fn neumann_inverse(c: &DMatrix<f64>, e: &DMatrix<f64>, terms: u32) -> Result<NeumannInverse> {
    let (cinv, gamma, nb) = check_pair(c, e)?;
    let n = c.nrows();
    let a = -(&cinv * e);
    let mut power = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for _ in 0..terms {
        power = &power * &a;
        sum += &power;
    }
    let inverse_approx = sum * &cinv;
    let residual_bound = gamma * nb.powi(terms as i32 + 1) / (1.0 - nb);
    let identity_residual = max_abs(&((c + e) * &inverse_approx - DMatrix::identity(n, n)));
    Ok(NeumannInverse { inverse_approx, residual_bound, admissibility: nb, identity_residual })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetRatio {
    pub value: f64,
    /// (1 + Nb)^N − 1 with b the entry bound of C⁻¹Ẽ
    pub expansion_bound: f64,
    pub within_expansion: bool,
}

/// det(I + C⁻¹Ẽ) = det(C+Ẽ)/det C.
pub fn det_ratio(c: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<DetRatio> {
    let (cinv, _gamma, _) = check_pair(c, e)?;
    let n = c.nrows();
    let a = &cinv * e;
    let value = (DMatrix::identity(n, n) + &a).determinant();
    let b = max_abs(&a);
    let expansion_bound = (1.0 + n as f64 * b).powi(n as i32) - 1.0;
    Ok(DetRatio { value, expansion_bound, within_expansion: (value - 1.0).abs() <= expansion_bound * (1.0 + 1e-12) })
}

/// Largest eigenvalue of a symmetric PD matrix: power iteration, with a dense
/// eigen-decomposition fallback (and cross-check) for N ≤ 8.
pub fn lambda_max_sym(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lam = 0.0;
    let mut converged = false;
    for _ in 0..10_000 {
        let w = m * &v;
        let nl = w.norm();
        if nl == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / nl;
        if (next - lam).abs() <= 1e-14 * next.abs() {
            lam = next;
            converged = true;
            break;
        }
        lam = next;
    }
    if n <= 8 {
        let dense = m.clone().symmetric_eigenvalues().max();
        if !converged || (dense - lam).abs() > 1e-8 * dense.abs() {
            return dense;
        }
    }
    lam
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    Trapezoid,
    StratifiedMc,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRegion {
    /// half-width of the box in whitened standard deviations
    pub half_width: f64,
    pub nodes_per_axis: usize,
    /// beyond this dimension the Monte Carlo estimator is used
    pub max_grid_dim: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for DensityRegion {
    fn default() -> Self {
        DensityRegion { half_width: 8.0, nodes_per_axis: 201, max_grid_dim: 3, mc_samples: 200_000, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityDiff {
    /// f_sup·∫|φ_{C+Ẽ} − φ_C|
    pub numeric_integral: f64,
    /// f_sup × explicit bound: |1 − sqrt(det C̃/det C)| + c·(ρ/2)·(N/2a)·(π/a)^{N/2}
    pub bound_shape: f64,
    pub max_entry: f64,
    pub ratio: f64,
    pub std_error: f64,
    pub method: DensityMethod,
    /// ρ(C̃⁻¹ − C⁻¹) ≤ ½λ_min(C⁻¹), the range where the explicit bound holds
    pub bound_valid: bool,
}

pub fn density_diff(c: &DMatrix<f64>, e: &DMatrix<f64>, f_sup: f64, region: &DensityRegion) -> Result<DensityDiff> {
    let (cinv, _, _) = check_pair(c, e)?;
    let n = c.nrows();
    let ct = c + e;
    let ct_chol = ct.clone().cholesky().ok_or(Error::NotPositiveDefinite { minors: vec![] })?;
    let det_c = c.determinant();
    let det_ct = ct.determinant();
    let max_entry = max_abs(e);

    // explicit bound
    let ep = ct_chol.inverse() - &cinv;
    let rho = ep.clone().symmetric_eigenvalues().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let lam_min = 1.0 / lambda_max_sym(c);
    let a = lam_min / 4.0;
    let nf = n as f64;
    let cst = 1.0 / ((2.0 * std::f64::consts::PI).powf(nf / 2.0) * det_c.sqrt());
    let bound = (1.0 - (det_ct / det_c).sqrt()).abs()
        + cst * (rho / 2.0) * (nf / (2.0 * a)) * (std::f64::consts::PI / a).powf(nf / 2.0);
    let bound_valid = rho <= 0.5 * lam_min;

    // whitened coordinates: x = L y, ψ(y) = standard normal, ψ̃(y) ∝ exp(−½ yᵀ B y)
    let l = c.clone().cholesky().expect("checked").l();
    let linv = l.clone().try_inverse().ok_or(Error::NotPositiveDefinite { minors: vec![] })?;
    let m = DMatrix::identity(n, n) + &linv * e * linv.transpose();
    let b = m.clone().try_inverse().ok_or(Error::NotPositiveDefinite { minors: vec![] })?;
    let scale = (det_c / det_ct).sqrt();
    let norm = (2.0 * std::f64::consts::PI).powf(-nf / 2.0);
    let diff_at = |y: &[f64]| -> f64 {
        let mut q0 = 0.0;
        let mut q1 = 0.0;
        for i in 0..n {
            q0 += y[i] * y[i];
            for j in 0..n {
                q1 += y[i] * b[(i, j)] * y[j];
            }
        }
        norm * (scale * (-0.5 * q1).exp() - (-0.5 * q0).exp()).abs()
    };

    if max_entry == 0.0 {
        return Ok(DensityDiff {
            numeric_integral: 0.0,
            bound_shape: 0.0,
            max_entry,
            ratio: 0.0,
            std_error: 0.0,
            method: if n <= region.max_grid_dim { DensityMethod::Trapezoid } else { DensityMethod::StratifiedMc },
            bound_valid: true,
        });
    }

    let (integral, std_error, method) = if n <= region.max_grid_dim {
        let k = region.nodes_per_axis.max(3);
        let h = 2.0 * region.half_width / (k - 1) as f64;
        let node = |i: usize| -region.half_width + h * i as f64;
        let w = |i: usize| if i == 0 || i == k - 1 { 0.5 } else { 1.0 };
        let total = k.pow(n as u32);
        let eval = |idx: usize| -> f64 {
            let mut y = [0.0f64; 8];
            let mut r = idx;
            let mut wt = 1.0;
            for d in 0..n {
                let i = r % k;
                r /= k;
                y[d] = node(i);
                wt *= w(i);
            }
            wt * diff_at(&y[..n])
        };
        let s = crate::par::chunked_sum(total, k, eval);
        (s * h.powi(n as i32), 0.0, DensityMethod::Trapezoid)
    } else {
        // importance sampling from ψ, stratified in the first coordinate
        let strata = 100usize;
        let per = (region.mc_samples / strata).max(2);
        let mut means = Vec::with_capacity(strata);
        let mut vars = Vec::with_capacity(strata);
        for s in 0..strata {
            let mut rng = stream(region.seed, PURPOSE_DENSITY_MC, s as u64);
            let mut acc = Vec::with_capacity(per);
            for _ in 0..per {
                let u: f64 = (s as f64 + rand::Rng::gen::<f64>(&mut rng)) / strata as f64;
                let mut y: Vec<f64> = vec![inverse_std_normal(u.clamp(1e-300, 1.0 - 1e-16))];
                y.extend((1..n).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
                let base = norm * (-0.5 * y.iter().map(|v| v * v).sum::<f64>()).exp();
                acc.push(diff_at(&y) / base);
            }
            let mu = acc.iter().sum::<f64>() / per as f64;
            let var = acc.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (per - 1) as f64;
            means.push(mu);
            vars.push(var / per as f64);
        }
        let est = means.iter().sum::<f64>() / strata as f64;
        let se = (vars.iter().sum::<f64>()).sqrt() / strata as f64;
        (est, se, DensityMethod::StratifiedMc)
    };
    let numeric_integral = f_sup * integral;
    let bound_shape = f_sup * bound;
    Ok(DensityDiff {
        numeric_integral,
        bound_shape,
        max_entry,
        ratio: if bound_shape > 0.0 { numeric_integral / bound_shape } else { 0.0 },
        std_error: f_sup * std_error,
        method,
        bound_valid,
    })
}

/// Φ^{-1}(p) by bisection refined with Newton steps on erfc.
pub fn inverse_std_normal(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if std_normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}
