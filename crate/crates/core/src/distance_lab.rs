//! Distances between sample batches and between a batch and a centered
//! Gaussian: coupling L¹ upper bounds, cone-dictionary lower bounds,
//! characteristic-function grids, the smoothing certificate, and KS.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::batch::SampleBatch;
use crate::dirichlet_series::params::{ll, lll};
use crate::error::{Error, Result};
use crate::gaussian::{std_normal_cdf, GaussianSpec};
use crate::par;
use crate::rng::{stream, PURPOSE_BL_REFERENCE, PURPOSE_DICTIONARY};
use crate::shifts_covariance::KAPPA2;

pub const FLAG_UNNORMALIZED: &str = "unnormalized";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    CouplingL1,
    BlLower,
    CfGrid,
    AbbCertificate,
    Ks1d,
    DensityDiff,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::CouplingL1 => "coupling_l1",
            EstimatorKind::BlLower => "bl_lower",
            EstimatorKind::CfGrid => "cf_grid",
            EstimatorKind::AbbCertificate => "abb_certificate",
            EstimatorKind::Ks1d => "ks_1d",
            EstimatorKind::DensityDiff => "density_diff",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub stage_a: String,
    pub stage_b: String,
    pub estimator: EstimatorKind,
    pub value: f64,
    pub uncertainty: f64,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[serde(rename = "F")]
    pub f: Option<f64>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub seed: u64,
    /// theoretical rate shape for the pair, when one applies
    pub theory_shape: Option<f64>,
    pub flags: Vec<String>,
}

impl DistanceReport {
    pub fn new(stage_a: &str, stage_b: &str, estimator: EstimatorKind, value: f64, uncertainty: f64, seed: u64) -> Self {
        DistanceReport {
            stage_a: stage_a.to_string(),
            stage_b: stage_b.to_string(),
            estimator,
            value,
            uncertainty,
            l: None,
            m: None,
            r: None,
            f: None,
            t: None,
            seed,
            theory_shape: None,
            flags: Vec::new(),
        }
    }
}

/// Smoothing-argument constants at height T.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub r_threshold: f64,
    #[serde(rename = "N_trunc")]
    pub n_trunc: f64,
    pub u_norm1: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub kappa2: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub eps1: f64,
    pub eps2: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

pub const DEFAULT_EPS1: f64 = 0.3;
pub const DEFAULT_EPS2: f64 = 0.5;
pub const DEFAULT_C2: f64 = 8.0;

impl BoundParams {
    /// 𝔯 = sqrt(½ll)/(C₁C₂)·lll^{ε₂}, ‖u‖₁ = lll^{ε₁}, 𝔑 = C₁C₂𝔯‖u‖₁/sqrt(½ll).
    pub fn new(t: f64, c1: f64, c2: f64, eps1: f64, eps2: f64) -> Result<Self> {
        if !(c2 > 7.5) {
            return Err(Error::Domain(format!("C2 = {c2} must exceed 7.5")));
        }
        if !(eps1 > 0.0 && eps1 < eps2 && eps1 + eps2 < 1.0) {
            return Err(Error::Domain(format!("need 0 < eps1 < eps2, eps1 + eps2 < 1 (got {eps1}, {eps2})")));
        }
        if !(c1 > 0.0) {
            return Err(Error::Domain(format!("C1 = {c1} must be positive")));
        }
        let l3 = lll(t);
        if !(l3 > 0.0) {
            return Err(Error::DegenerateParams { t, detail: "log log log T must be positive".into() });
        }
        let half = (0.5 * ll(t)).sqrt();
        let r_threshold = half / (c1 * c2) * l3.powf(eps2);
        let u_norm1 = l3.powf(eps1);
        let n_trunc = c1 * c2 * r_threshold * u_norm1 / half;
        Ok(BoundParams { r_threshold, n_trunc, u_norm1, c1, kappa2: KAPPA2, c2, eps1, eps2, t })
    }

    pub fn with_defaults(t: f64, c1: f64) -> Result<Self> {
        Self::new(t, c1, DEFAULT_C2, DEFAULT_EPS1, DEFAULT_EPS2)
    }

    /// R = log log log T.
    pub fn r_choice(&self) -> f64 {
        lll(self.t)
    }

    /// F = (log log log T)^{ε₁}.
    pub fn f_choice(&self) -> f64 {
        lll(self.t).powf(self.eps1)
    }
}

fn check_coupled(x: &SampleBatch, y: &SampleBatch) -> Result<()> {
    if x.n != y.n || x.dim != y.dim {
        return Err(Error::Dimension { expected: x.n * x.dim, got: y.n * y.dim });
    }
    if x.seed != y.seed {
        return Err(Error::Config(format!("batches not co-sampled: seeds {} and {}", x.seed, y.seed)));
    }
    Ok(())
}

fn included_rows(x: &SampleBatch, y: &SampleBatch) -> Vec<usize> {
    let mut skip = vec![false; x.n];
    for &i in x.flagged.iter().chain(y.flagged.iter()) {
        if i < x.n {
            skip[i] = true;
        }
    }
    (0..x.n).filter(|&i| !skip[i]).collect()
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// L·Σ_j mean|X_j − Y_j| over rows not flagged in either batch.
pub fn coupling_l1_upper(x: &SampleBatch, y: &SampleBatch, l: f64) -> Result<DistanceReport> {
    check_coupled(x, y)?;
    let rows = included_rows(x, y);
    let per_row: Vec<f64> = rows
        .iter()
        .map(|&i| x.row(i).iter().zip(y.row(i)).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .collect();
    let (mean, se) = mean_and_se(&per_row);
    let mut rep = DistanceReport::new(x.stage.name(), y.stage.name(), EstimatorKind::CouplingL1, l * mean, l * se, x.seed);
    rep.l = Some(l);
    let excluded = x.n - rows.len();
    if excluded > 0 {
        rep.flags.push(format!("excluded={excluded}"));
    }
    Ok(rep)
}

/// Cone f(x) = min(M, max(0, a − L‖x − c‖₂)).
#[derive(Clone, Debug, PartialEq)]
pub struct Cone {
    pub center: Vec<f64>,
    pub offset: f64,
}

impl Cone {
    #[inline]
    pub fn eval(&self, x: &[f64], l: f64, m: f64) -> f64 {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        (self.offset - l * d2.sqrt()).clamp(0.0, m)
    }
}

/// Second argument of the dictionary bound.
pub enum BlReference<'a> {
    Batch(&'a SampleBatch),
    /// N(mean, K) estimated from `n_ref` draws
    Gaussian { spec: &'a GaussianSpec, mean: Option<&'a [f64]>, n_ref: usize },
}

fn dictionary_member(seed: u64, k: usize, pool: &[&[f64]], l: f64, m: f64) -> Cone {
    let mut rng = stream(seed, PURPOSE_DICTIONARY, k as u64);
    let center = pool[rng.gen_range(0..pool.len())].to_vec();
    // offsets in (0, 2M] cover pointed cones and plateaus; the width M/L sets
    // the support radius scale
    let offset = rng.gen_range(0.0..2.0) * m;
    let _ = l;
    Cone { center, offset }
}

/// max over a sampled cone dictionary of |mean f(X) − E f(Y)|; a lower bound
/// on the bounded-Lipschitz distance up to Monte Carlo error.
pub fn bl_dictionary_lower(
    x: &SampleBatch,
    y: BlReference<'_>,
    l: f64,
    m: f64,
    dict_size: usize,
    seed: u64,
) -> Result<DistanceReport> {
    if dict_size == 0 {
        return Err(Error::Domain("dictionary size must be at least 1".into()));
    }
    if x.n == 0 {
        return Err(Error::EmptyDomain("empty sample batch".into()));
    }
    let reference: SampleBatch;
    let (ybatch, stage_b) = match y {
        BlReference::Batch(b) => {
            if b.dim != x.dim {
                return Err(Error::Dimension { expected: x.dim, got: b.dim });
            }
            (b, b.stage.name())
        }
        BlReference::Gaussian { spec, mean, n_ref } => {
            if spec.dim != x.dim {
                return Err(Error::Dimension { expected: x.dim, got: spec.dim });
            }
            let d = spec.dim;
            let lf = &spec.cholesky_factor;
            let rows = par::map(n_ref.max(2), |i| {
                let mut rng = stream(seed, PURPOSE_BL_REFERENCE, i as u64);
                let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                (0..d)
                    .map(|r| mean.map_or(0.0, |mu| mu[r]) + (0..=r).map(|c| lf[(r, c)] * g[c]).sum::<f64>())
                    .collect::<Vec<f64>>()
            });
            reference = SampleBatch::new(x.stage, d, rows.concat(), seed)?;
            (&reference, "gaussian")
        }
    };
    if ybatch.n == 0 {
        return Err(Error::EmptyDomain("empty sample batch".into()));
    }
    let pool: Vec<&[f64]> = (0..x.n).map(|i| x.row(i)).chain((0..ybatch.n).map(|i| ybatch.row(i))).collect();
    let same = std::ptr::eq(x, ybatch) || (x.data == ybatch.data && x.dim == ybatch.dim);
    let gaps = par::map(dict_size, |k| {
        let cone = dictionary_member(seed, k, &pool, l, m);
        let fx: Vec<f64> = (0..x.n).map(|i| cone.eval(x.row(i), l, m)).collect();
        let (mx, sx) = mean_and_se(&fx);
        let (my, sy) = if same {
            (mx, sx)
        } else {
            let fy: Vec<f64> = (0..ybatch.n).map(|i| cone.eval(ybatch.row(i), l, m)).collect();
            mean_and_se(&fy)
        };
        ((mx - my).abs(), (sx * sx + sy * sy).sqrt())
    });
    let (value, se) = gaps
        .into_iter()
        .fold((0.0f64, 0.0f64), |best, g| if g.0 > best.0 { g } else { best });
    let mut rep = DistanceReport::new(x.stage.name(), stage_b, EstimatorKind::BlLower, value, se, seed);
    rep.l = Some(l);
    rep.m = Some(m);
    Ok(rep)
}

fn check_u(x: &SampleBatch, u: &[f64]) -> Result<()> {
    if u.len() != x.dim {
        return Err(Error::Dimension { expected: x.dim, got: u.len() });
    }
    Ok(())
}

fn cf_sum(x: &SampleBatch, u: &[f64]) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..x.n {
        let ph: f64 = x.row(i).iter().zip(u).map(|(a, b)| a * b).sum();
        let (sn, cs) = ph.sin_cos();
        s += Complex64::new(cs, sn);
    }
    s
}

/// (1/n) Σ_rows exp(i u·row).
pub fn cf_empirical(x: &SampleBatch, u: &[f64]) -> Result<Complex64> {
    check_u(x, u)?;
    if x.n == 0 {
        return Err(Error::EmptyDomain("empty sample batch".into()));
    }
    Ok(cf_sum(x, u) / x.n as f64)
}

/// exp(−uᵀKu/2).
pub fn cf_gauss(spec: &GaussianSpec, u: &[f64]) -> Result<f64> {
    Ok((-0.5 * spec.quad_form(u)?).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfSup {
    pub sup: f64,
    pub argmax: Vec<f64>,
    pub grid_points: usize,
}

/// Odd node count g: u_k = F(2k − (g−1))/g, symmetric in (−F, F) and containing 0.
pub fn cf_grid_nodes(f: f64, grid_per_axis: usize) -> Vec<f64> {
    let g = grid_per_axis.max(1) | 1;
    (0..g).map(|k| f * (2.0 * k as f64 - (g - 1) as f64) / g as f64).collect()
}

/// sup over the tensor grid in (−F, F)^N of |cf_empirical − cf_gauss|.
/// Points are generated on the fly; only half the grid is evaluated since
/// both characteristic functions are Hermitian.
pub fn cf_sup_on_grid(x: &SampleBatch, spec: &GaussianSpec, f: f64, grid_per_axis: usize) -> Result<CfSup> {
    if !(f > 0.0) {
        return Err(Error::Domain(format!("F = {f} must be positive")));
    }
    if spec.dim != x.dim {
        return Err(Error::Dimension { expected: x.dim, got: spec.dim });
    }
    if x.n == 0 {
        return Err(Error::EmptyDomain("empty sample batch".into()));
    }
    let nodes = cf_grid_nodes(f, grid_per_axis);
    let g = nodes.len();
    let d = x.dim;
    let total = g.checked_pow(d as u32).ok_or(Error::Capacity { what: "cf grid", value: f64::INFINITY, cap: usize::MAX as f64 })?;
    // index ↔ −index under the reflection; evaluate the half ending at the centre
    let half = total / 2 + 1;
    let point = |idx: usize| -> Vec<f64> {
        let mut r = idx;
        (0..d)
            .map(|_| {
                let k = r % g;
                r /= g;
                nodes[k]
            })
            .collect()
    };
    let vals = par::map(half, |idx| {
        let u = point(idx);
        let emp = cf_sum(x, &u) / x.n as f64;
        let gau = cf_gauss(spec, &u).expect("dimension checked");
        (emp - gau).norm()
    });
    let (best, sup) = vals
        .iter()
        .enumerate()
        .fold((half - 1, 0.0f64), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    Ok(CfSup { sup, argmax: point(best), grid_points: total })
}

/// L/F + M((RF)^N·cf_sup + tail_mu + tail_nu); the implied constant of the
/// smoothing inequality is unknown, so the value carries the unnormalized flag.
pub fn abb_certificate(l: f64, m: f64, r: f64, f: f64, cf_sup: f64, tail_mu: f64, tail_nu: f64, n: u32) -> Result<f64> {
    for (name, v) in [("L", l), ("M", m), ("R", r), ("cf_sup", cf_sup), ("tail_mu", tail_mu), ("tail_nu", tail_nu)] {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("{name} = {v} must be nonnegative")));
        }
    }
    if !(f > 0.0) {
        return Err(Error::Domain(format!("F = {f} must be positive")));
    }
    Ok(l / f + m * ((r * f).powi(n as i32) * cf_sup + tail_mu + tail_nu))
}

/// sup_x |F_n(x) − F(x)|, evaluated at both sides of every jump.
pub fn kolmogorov_1d<C: Fn(f64) -> f64>(samples: &[f64], cdf: C) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDomain("empty sample batch".into()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("NaN sample".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = s.len() as f64;
    Ok(s.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let fx = cdf(x);
        d.max((i + 1) as f64 / n - fx).max(fx - i as f64 / n)
    }))
}

pub fn kolmogorov_std_normal(samples: &[f64]) -> Result<f64> {
    kolmogorov_1d(samples, std_normal_cdf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::Stage;
    use crate::gaussian::sample_mvn;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normal_batch(n: usize, seed: u64) -> SampleBatch {
        sample_mvn(&GaussianSpec::identity(1), n, seed).unwrap()
    }

    #[test]
    fn coupling_examples() {
        let x = SampleBatch::from_rows(Stage::QT, &[vec![0.0, 1.0], vec![2.0, -1.0]], 5).unwrap();
        assert_eq!(coupling_l1_upper(&x, &x, 3.0).unwrap().value, 0.0);
        let mut y = x.clone();
        y.stage = Stage::RT;
        for i in 0..y.n {
            y.data[i * 2] += 0.1;
        }
        let r = coupling_l1_upper(&x, &y, 1.0).unwrap();
        assert!((r.value - 0.1).abs() < 1e-15);
        let mut z = y.clone();
        z.seed = 6;
        assert!(coupling_l1_upper(&x, &z, 1.0).is_err());
        y.flagged.push(0);
        let r = coupling_l1_upper(&x, &y, 1.0).unwrap();
        assert_eq!(r.flags, vec!["excluded=1".to_string()]);
    }

    #[test]
    fn cones_are_lipschitz_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let l = rng.gen_range(0.1..3.0);
            let m = rng.gen_range(0.1..3.0);
            let c = Cone { center: vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)], offset: rng.gen_range(0.0..6.0) };
            let a = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let b = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let (fa, fb) = (c.eval(&a, l, m), c.eval(&b, l, m));
            assert!((0.0..=m).contains(&fa));
            let dist = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            assert!((fa - fb).abs() <= l * dist + 1e-12);
        }
    }

    #[test]
    fn bl_same_batch_zero_and_monotone() {
        let x = normal_batch(2000, 3);
        assert_eq!(bl_dictionary_lower(&x, BlReference::Batch(&x), 1.0, 1.0, 50, 9).unwrap().value, 0.0);
        let y = sample_mvn(&GaussianSpec::new(DMatrix::from_element(1, 1, 1.5)).unwrap(), 2000, 4).unwrap();
        let mut prev = 0.0;
        for k in [1, 5, 20, 80] {
            let v = bl_dictionary_lower(&x, BlReference::Batch(&y), 1.0, 1.0, k, 9).unwrap().value;
            assert!(v >= prev);
            prev = v;
        }
        assert!(bl_dictionary_lower(&x, BlReference::Batch(&y), 1.0, 1.0, 0, 9).is_err());
    }

    /// Best triangular cone gap between N(0,1) and N(0.5,1) by 1-D quadrature.
    fn best_cone_gap_oracle() -> f64 {
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut best = 0.0f64;
        for ci in -30..=30 {
            let c = ci as f64 * 0.1;
            for ai in 1..=20 {
                let a = ai as f64 * 0.1;
                let h = 1e-3;
                let mut s = 0.0;
                let mut x = c - a - 1.0;
                while x <= c + a + 1.0 {
                    let f = (a - (x - c).abs()).clamp(0.0, 1.0);
                    s += f * (phi(x) - phi(x - 0.5)) * h;
                    x += h;
                }
                best = best.max(s.abs());
            }
        }
        best
    }

    #[test]
    fn bl_detects_mean_shift() {
        let x = normal_batch(100_000, 11);
        let spec = GaussianSpec::identity(1);
        let mu = [0.5];
        let r = bl_dictionary_lower(&x, BlReference::Gaussian { spec: &spec, mean: Some(&mu), n_ref: 100_000 }, 1.0, 1.0, 1000, 2)
            .unwrap();
        let oracle = best_cone_gap_oracle();
        assert!(oracle > 0.05);
        assert!(r.value >= 0.05, "{} (oracle best {oracle})", r.value);
        assert!(r.value <= oracle + 5.0 * r.uncertainty);
        assert_eq!(r.stage_b, "gaussian");
    }

    #[test]
    fn bl_below_coupling() {
        let x = normal_batch(5000, 8);
        let mut y = x.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for v in y.data.iter_mut() {
            *v += rng.gen_range(-0.3..0.3) + 0.1;
        }
        let up = coupling_l1_upper(&x, &y, 1.0).unwrap();
        let lo = bl_dictionary_lower(&x, BlReference::Batch(&y), 1.0, 1.0, 200, 1).unwrap();
        assert!(lo.value <= up.value + 3.0 * (lo.uncertainty + up.uncertainty));
    }

    #[test]
    fn cf_examples() {
        let x = SampleBatch::from_rows(Stage::R1T, &[vec![0.3, -1.2]], 0).unwrap();
        assert_eq!(cf_empirical(&x, &[0.0, 0.0]).unwrap(), Complex64::new(1.0, 0.0));
        let v = cf_empirical(&x, &[1.0, 2.0]).unwrap();
        assert!((v - Complex64::from_polar(1.0, 0.3 - 2.4)).norm() < 1e-15);
        assert!(cf_empirical(&x, &[1.0]).is_err());
        assert_eq!(cf_gauss(&GaussianSpec::identity(2), &[0.0, 0.0]).unwrap(), 1.0);
        assert!((cf_gauss(&GaussianSpec::identity(2), &[1.0, 0.0]).unwrap() - (-0.5f64).exp()).abs() < 1e-16);
        let k = GaussianSpec::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
        assert!((cf_gauss(&k, &[1.0, 1.0]).unwrap() - (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn cf_gaussian_batch() {
        let x = normal_batch(1_000_000, 21);
        for s in [0.5, 1.0, 2.0] {
            let v = cf_empirical(&x, &[s]).unwrap();
            assert!(v.norm() <= 1.0);
            assert!((v.re - (-s * s / 2.0f64).exp()).abs() < 5e-3 && v.im.abs() < 5e-3);
        }
    }

    #[test]
    fn cf_grid_examples() {
        let spec = GaussianSpec::identity(2);
        let x = sample_mvn(&spec, 1_000_000, 5).unwrap();
        let nodes = cf_grid_nodes(2.0, 10);
        assert!(nodes.contains(&0.0) && nodes.iter().all(|u| u.abs() < 2.0));
        let r = cf_sup_on_grid(&x, &spec, 2.0, 9).unwrap();
        assert!(r.sup <= 0.01, "{}", r.sup);
        let tiny = cf_sup_on_grid(&x, &spec, 1e-6, 9).unwrap();
        assert!(tiny.sup < 1e-5);
        let k = GaussianSpec::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
        let mis = cf_sup_on_grid(&x, &k, 1.0 + 1.0 / 9.0, 10).unwrap();
        let gap = (-1.0f64).exp() - (-1.5f64).exp();
        assert!(mis.sup >= gap - 0.005, "{} < {gap}", mis.sup);
    }

    #[test]
    fn cf_grid_matches_full_scan() {
        let spec = GaussianSpec::identity(2);
        let x = sample_mvn(&spec, 500, 2).unwrap();
        let r = cf_sup_on_grid(&x, &spec, 3.0, 7).unwrap();
        let nodes = cf_grid_nodes(3.0, 7);
        let mut best = 0.0f64;
        for &a in &nodes {
            for &b in &nodes {
                let d = (cf_empirical(&x, &[a, b]).unwrap() - cf_gauss(&spec, &[a, b]).unwrap()).norm();
                best = best.max(d);
            }
        }
        assert!((r.sup - best).abs() < 1e-14);
    }

    #[test]
    fn abb_examples() {
        assert_eq!(abb_certificate(2.0, 1.0, 3.0, 4.0, 0.0, 0.0, 0.0, 2).unwrap(), 0.5);
        let a = abb_certificate(1.0, 1.0, 2.0, 1.0, 0.1, 0.0, 0.0, 3).unwrap();
        let b = abb_certificate(1.0, 1.0, 2.0, 2.0, 0.1, 0.0, 0.0, 3).unwrap();
        // first term halves, (RF)^N term scales by 2^N
        assert!((a - (1.0 + 0.8)).abs() < 1e-15 && (b - (0.5 + 6.4)).abs() < 1e-15);
        assert!(abb_certificate(1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1).is_err());
    }

    #[test]
    fn abb_reproduces_proposition_shape() {
        let t = 1e300f64;
        let bp = BoundParams::with_defaults(t, 1.0).unwrap();
        let l3 = lll(t);
        let (r, f) = (bp.r_choice(), bp.f_choice());
        let cf = (-0.5 * l3.powf(bp.eps1 + bp.eps2)).exp();
        for n in 1..=3u32 {
            let v = abb_certificate(1.0, 1.0, r, f, cf, 0.0, 0.0, n).unwrap();
            let shape = 1.0 / l3.powf(bp.eps1) + l3.powf(n as f64 * (bp.eps1 + 1.0)) * cf;
            assert!((v - shape).abs() < 1e-12 * shape);
        }
        assert!((bp.n_trunc - l3.powf(bp.eps1 + bp.eps2)).abs() < 1e-12);
    }

    #[test]
    fn bound_params_checks() {
        assert!(BoundParams::new(1e50, 1.0, 7.5, 0.3, 0.5).is_err());
        assert!(BoundParams::new(1e50, 1.0, 8.0, 0.5, 0.3).is_err());
        assert!(BoundParams::new(1e50, 1.0, 8.0, 0.4, 0.7).is_err());
        assert!(BoundParams::new(10.0, 1.0, 8.0, 0.3, 0.5).is_err());
        let b = BoundParams::new(1e50, 2.0, 9.0, 0.3, 0.5).unwrap();
        assert!((b.kappa2 - std::f64::consts::E / (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert!((b.n_trunc - lll(1e50).powf(0.8)).abs() < 1e-12);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(kolmogorov_std_normal(&[0.0]).unwrap(), 0.5);
        assert!(kolmogorov_std_normal(&[10.0; 20]).unwrap() > 0.999_999);
        let x = normal_batch(10_000, 99);
        assert!(kolmogorov_std_normal(&x.data).unwrap() <= 1.63 / 100.0);
        assert!(kolmogorov_std_normal(&[]).is_err());
        let mut y = x.data.clone();
        y.reverse();
        assert_eq!(kolmogorov_std_normal(&y).unwrap(), kolmogorov_std_normal(&x.data).unwrap());
        // uniform reference, exact value on a tiny sample
        let d = kolmogorov_1d(&[0.25, 0.5, 0.5], |x: f64| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }
}
