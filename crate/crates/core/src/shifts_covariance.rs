//! Shift classification, the covariance matrices 𝔎 and 𝔎̃(T), the quadratic
//! forms 𝒱 and 𝒰_a, the normalizer 𝔐_{T,χ} and positive-definiteness checks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::CompSum;
use crate::characters::{pair_delta, DirichletCharacter};
use crate::dirichlet_series::phase::{reduce_phase, Height};
use crate::dirichlet_series::{ApproxParams, PrimeBasis, PolyRange};
use crate::error::{Error, Result};

/// e/(e−1).
pub const KAPPA2: f64 = std::f64::consts::E / (std::f64::consts::E - 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairClass {
    pub c: f64,
    /// None for equal shifts
    pub e: Option<f64>,
    /// classified by the one-sided condition (|Δα| ≤ 1/log T up to e)
    pub cond1: bool,
    /// |e| exceeds δ(T) in the two-sided branch
    pub violation: bool,
}

pub fn classify_shift_pair(alpha_i: f64, alpha_j: f64, t: f64, delta_budget: f64) -> Result<PairClass> {
    let ll = t.ln().ln();
    if !(ll > 0.0) {
        return Err(Error::Domain(format!("log log T must be positive, T = {t}")));
    }
    let d = (alpha_i - alpha_j).abs();
    if d == 0.0 {
        return Ok(PairClass { c: 1.0, e: None, cond1: true, violation: false });
    }
    let l = -d.ln();
    let c = (l / ll).clamp(0.0, 1.0);
    let e = l - c * ll;
    // c = 1 is the inequality branch log(1/|Δα|) ≥ log log T + e, which any
    // e ∈ [−δ, δ] satisfies once log(1/|Δα|) ≥ log log T
    let cond1 = c == 1.0;
    let violation = !cond1 && e.abs() > delta_budget;
    Ok(PairClass { c, e: Some(e), cond1, violation })
}

/// 𝒱(T, α_i, α_j) = min(log log T, log(1/|α_i − α_j|)).
pub fn v_min(t: f64, alpha_i: f64, alpha_j: f64) -> f64 {
    let ll = t.ln().ln();
    let d = (alpha_i - alpha_j).abs();
    if d == 0.0 {
        ll
    } else {
        ll.min(-d.ln())
    }
}

/// How shifts are produced for a given T.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ShiftRule {
    /// fixed values α_j
    Explicit { alphas: Vec<f64> },
    /// α_1 = 0 and α_j = (log T)^{-c_j} for j ≥ 2, with c_1 ignored
    LogPower { exponents: Vec<f64> },
}

impl ShiftRule {
    pub fn alphas(&self, t: f64) -> Vec<f64> {
        match self {
            ShiftRule::Explicit { alphas } => alphas.clone(),
            ShiftRule::LogPower { exponents } => exponents
                .iter()
                .enumerate()
                .map(|(j, &c)| if j == 0 { 0.0 } else { t.ln().powf(-c) })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ShiftRule::Explicit { alphas } => alphas.len(),
            ShiftRule::LogPower { exponents } => exponents.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    pub alphas: Vec<f64>,
    pub pair_class: Vec<Vec<PairClass>>,
    /// Δ(T)
    pub big_delta: f64,
    /// δ(T)
    pub delta_budget: f64,
    pub epsilon: f64,
    pub t: f64,
    pub warnings: Vec<String>,
}

impl ShiftConfig {
    pub fn new(alphas: Vec<f64>, t: f64, big_delta: f64, delta_budget: f64, epsilon: f64) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        if !(epsilon > 0.0 && epsilon < 2.0 / 3.0) {
            return Err(Error::Domain(format!("epsilon = {epsilon} must lie in (0, 2/3)")));
        }
        if big_delta < 0.0 || delta_budget < 0.0 {
            return Err(Error::Domain("Δ(T) and δ(T) must be non-negative".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(a.abs() <= 0.5 * t)) {
            return Err(Error::Domain(format!("shift {a} exceeds T/2")));
        }
        let n = alphas.len();
        let mut pair_class = vec![vec![PairClass { c: 1.0, e: None, cond1: true, violation: false }; n]; n];
        let mut warnings = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let pc = classify_shift_pair(alphas[i], alphas[j], t, delta_budget)?;
                if pc.violation {
                    warnings.push(format!(
                        "unclassified pair ({i}, {j}): |e| = {:.4} exceeds δ(T) = {delta_budget}",
                        pc.e.unwrap_or(0.0).abs()
                    ));
                }
                pair_class[i][j] = pc;
                pair_class[j][i] = pc;
            }
        }
        Ok(ShiftConfig { alphas, pair_class, big_delta, delta_budget, epsilon, t, warnings })
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn c(&self, i: usize, j: usize) -> f64 {
        self.pair_class[i][j].c
    }
}

/// 𝒰_a = Σ a_j² log log T + 2 Σ_{i<j} a_i a_j δ_{ij} 𝒱(T, α_i, α_j).
pub fn u_quadratic(a: &[f64], shifts: &ShiftConfig, chars: &[DirichletCharacter], t: f64) -> Result<f64> {
    let n = shifts.dim();
    if a.len() != n {
        return Err(Error::Dimension { expected: n, got: a.len() });
    }
    if chars.len() != n {
        return Err(Error::Dimension { expected: n, got: chars.len() });
    }
    let ll = t.ln().ln();
    let mut s = CompSum::new();
    for i in 0..n {
        s.add(a[i] * a[i] * ll);
        for j in i + 1..n {
            if pair_delta(&chars[i], &chars[j]) == 1 {
                s.add(2.0 * a[i] * a[j] * v_min(t, shifts.alphas[i], shifts.alphas[j]));
            }
        }
    }
    Ok(s.value())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdVerdict {
    PositiveDefinite,
    /// a leading minor within tolerance of zero
    Borderline,
    NotPositiveDefinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdReport {
    pub pd: bool,
    pub verdict: PdVerdict,
    pub minors: Vec<f64>,
    pub cholesky_ok: bool,
    /// Sylvester (strict) and Cholesky gave the same answer
    pub methods_agree: bool,
}

pub fn check_pd(m: &DMatrix<f64>) -> Result<PdReport> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension { expected: n, got: m.ncols() });
    }
    let scale = m.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .fold(0.0f64, |a, (i, j)| a.max((m[(i, j)] - m[(j, i)]).abs()));
    if asym > 1e-12 * scale.max(1.0) {
        return Err(Error::Asymmetric(asym));
    }
    let minors: Vec<f64> = (1..=n).map(|r| m.view((0, 0), (r, r)).into_owned().determinant()).collect();
    let tol = |r: usize| 1e-10 * scale.powi(r as i32);
    let mut verdict = PdVerdict::PositiveDefinite;
    for (k, &d) in minors.iter().enumerate() {
        if d < -tol(k + 1) {
            verdict = PdVerdict::NotPositiveDefinite;
            break;
        }
        if d <= tol(k + 1) {
            verdict = PdVerdict::Borderline;
        }
    }
    if n == 0 {
        verdict = PdVerdict::NotPositiveDefinite;
    }
    let cholesky_ok = n > 0 && m.clone().cholesky().is_some();
    let sylvester_strict = n > 0 && minors.iter().all(|&d| d > 0.0);
    let methods_agree = sylvester_strict == cholesky_ok;
    let pd = verdict == PdVerdict::PositiveDefinite && cholesky_ok;
    Ok(PdReport { pd, verdict, minors, cholesky_ok, methods_agree })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSide {
    pub matrix: Vec<Vec<f64>>,
    pub pd: PdReport,
}

impl CovarianceSide {
    pub fn dmatrix(&self) -> DMatrix<f64> {
        from_rows(&self.matrix)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    #[serde(rename = "K_target")]
    pub k_target: Vec<Vec<f64>>,
    #[serde(rename = "K_empirical")]
    pub k_empirical: Vec<Vec<f64>>,
    pub pd_target: bool,
    pub pd_empirical: bool,
    #[serde(rename = "T")]
    pub t: f64,
}

impl CovarianceSpec {
    pub fn new(t: f64, target: &CovarianceSide, empirical: &CovarianceSide) -> Self {
        CovarianceSpec {
            k_target: target.matrix.clone(),
            k_empirical: empirical.matrix.clone(),
            pd_target: target.pd.pd,
            pd_empirical: empirical.pd.pd,
            t,
        }
    }
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let c = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(n, c, |i, j| rows[i][j])
}

/// 𝔎 with k_ii = 1 and k_ij = δ_ij c_ij.
pub fn build_k(shifts: &ShiftConfig, chars: &[DirichletCharacter]) -> Result<CovarianceSide> {
    let n = shifts.dim();
    if chars.len() != n {
        return Err(Error::Dimension { expected: n, got: chars.len() });
    }
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            pair_delta(&chars[i], &chars[j]) as f64 * shifts.c(i, j)
        }
    });
    let pd = check_pd(&m)?;
    Ok(CovarianceSide { matrix: to_rows(&m), pd })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    /// 𝔐_{T,χ}
    pub m: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub m_below_ll: bool,
    /// C₁² < κ₂; false at every computable T
    pub c1_sq_below_kappa2: bool,
}

/// 𝔐_{T,χ} = Σ_{13<p≤Y} |χ(p)|²/p^{2σ₀} and C₁ = sqrt(log log T/𝔐).
pub fn normalizer(basis: &PrimeBasis, chi: &DirichletCharacter, params: &ApproxParams) -> Result<Normalizer> {
    let (lo, hi) = PolyRange::P1.bounds(params);
    if hi.floor() > basis.limit() as f64 {
        return Err(Error::Capacity { what: "prime range", value: hi, cap: basis.limit() as f64 });
    }
    let r = basis.table.range(lo, hi);
    if r.is_empty() {
        return Err(Error::EmptyRange(format!("no primes in (13, {hi}]")));
    }
    let mut s = CompSum::new();
    for i in r {
        let v = chi.evaluate_u(basis.table.primes[i]).norm_sqr();
        if v > 0.0 {
            s.add(v * (-2.0 * params.sigma0 * basis.table.log_p[i]).exp());
        }
    }
    let m = s.value();
    if m <= 0.0 {
        return Err(Error::EmptyRange("character vanishes on every prime of P₁".into()));
    }
    let ll = params.ll();
    let c1 = (ll / m).sqrt();
    Ok(Normalizer { m, c1, m_below_ll: m <= ll, c1_sq_below_kappa2: c1 * c1 < KAPPA2 })
}

/// Σ_{13<p≤Y} χ_iχ̄_j(p) p^{-i(α_i−α_j)} p^{-2σ₀}.
pub fn p1_cross_sum(
    basis: &PrimeBasis,
    chi_i: &DirichletCharacter,
    chi_j: &DirichletCharacter,
    dalpha: f64,
    params: &ApproxParams,
) -> Result<Complex64> {
    let (lo, hi) = PolyRange::P1.bounds(params);
    if hi.floor() > basis.limit() as f64 {
        return Err(Error::Capacity { what: "prime range", value: hi, cap: basis.limit() as f64 });
    }
    let h = Height::from_f64(dalpha)?;
    let mut re = CompSum::new();
    let mut im = CompSum::new();
    for i in basis.table.range(lo, hi) {
        let p = basis.table.primes[i];
        let v = chi_i.evaluate_u(p) * chi_j.evaluate_u(p).conj();
        if v.re == 0.0 && v.im == 0.0 {
            continue;
        }
        let z = v * reduce_phase(&h, basis.turn(i)).neg().cis() * (-2.0 * params.sigma0 * basis.table.log_p[i]).exp();
        re.add(z.re);
        im.add(z.im);
    }
    Ok(Complex64::new(re.value(), im.value()))
}

/// 𝔎̃(T): correlations of the P₁ coordinates, computed analytically.
pub fn build_k_tilde(
    basis: &PrimeBasis,
    shifts: &ShiftConfig,
    chars: &[DirichletCharacter],
    params: &ApproxParams,
) -> Result<CovarianceSide> {
    let n = shifts.dim();
    if chars.len() != n {
        return Err(Error::Dimension { expected: n, got: chars.len() });
    }
    let norms: Vec<f64> = chars.iter().map(|c| normalizer(basis, c, params).map(|x| x.m)).collect::<Result<_>>()?;
    let mut m = DMatrix::identity(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let cov = p1_cross_sum(basis, &chars[i], &chars[j], shifts.alphas[i] - shifts.alphas[j], params)?.re;
            let k = (cov / (norms[i] * norms[j]).sqrt()).clamp(-1.0, 1.0);
            m[(i, j)] = k;
            m[(j, i)] = k;
        }
    }
    let pd = check_pd(&m)?;
    Ok(CovarianceSide { matrix: to_rows(&m), pd })
}

/// One pair of the Δ(T) condition: residual of the twisted prime sum after its
/// main term, and the shift distance, both against the configured Δ(T).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceCondition {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    /// |Σ_{13<p≤Y} χ_iχ̄_j(p)p^{-iΔα}p^{-2σ₀} − δ_ij·min(log log Y, log 1/|Δα|)|
    pub residual: f64,
    pub big_delta: f64,
    /// both quantities ≤ Δ(T), i.e. the O₁ reading with implied constant 1
    pub holds: bool,
}

/// Reported, never asserted: the q-dependent constant behind the residual is not known.
pub fn distance_condition(
    basis: &PrimeBasis,
    shifts: &ShiftConfig,
    chars: &[DirichletCharacter],
    params: &ApproxParams,
) -> Result<Vec<DistanceCondition>> {
    let n = shifts.dim();
    if chars.len() != n {
        return Err(Error::Dimension { expected: n, got: chars.len() });
    }
    let lly = params.y_eff().ln().ln();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = shifts.alphas[i] - shifts.alphas[j];
            let s = p1_cross_sum(basis, &chars[i], &chars[j], d, params)?;
            let main = if pair_delta(&chars[i], &chars[j]) == 1 {
                if d == 0.0 { lly } else { lly.min(-d.abs().ln()) }
            } else {
                0.0
            };
            let residual = (s - main).norm();
            let big_delta = shifts.big_delta;
            out.push(DistanceCondition {
                i,
                j,
                distance: d.abs(),
                residual,
                big_delta,
                holds: residual <= big_delta && d.abs() <= big_delta,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::{character, character_group, principal};
    use crate::dirichlet_series::{derive_params_with, ParamConstants};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn classify_examples() {
        let t = 1e50f64;
        let ll = t.ln().ln();
        let half = classify_shift_pair(0.0, t.ln().powf(-0.5), t, 1.0).unwrap();
        assert!((half.c - 0.5).abs() < 1e-12);
        assert!(half.e.unwrap().abs() < 1e-12);
        let far = classify_shift_pair(0.0, 3.0, t, 2.0).unwrap();
        assert_eq!(far.c, 0.0);
        assert!((far.e.unwrap() + 3f64.ln()).abs() < 1e-15);
        assert!(!far.violation);
        assert!(classify_shift_pair(0.0, 30.0, t, 2.0).unwrap().violation);
        let near = classify_shift_pair(0.0, (-ll - 1.0).exp(), t, 1.0).unwrap();
        assert_eq!(near.c, 1.0);
        assert!((near.e.unwrap() - 1.0).abs() < 1e-12);
        assert!(near.cond1 && !near.violation);
        let eq = classify_shift_pair(2.0, 2.0, t, 0.0).unwrap();
        assert_eq!((eq.c, eq.e, eq.cond1), (1.0, None, true));
        assert!(classify_shift_pair(0.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn v_min_examples() {
        let t = 1e50f64;
        assert!((v_min(t, 0.0, (-1.0f64).exp()) - 1.0).abs() < 1e-15);
        assert_eq!(v_min(t, 1.0, 1.0), t.ln().ln());
        assert!((v_min(t, 0.0, 1e-3) - 4.7462).abs() < 1e-3);
    }

    #[test]
    fn u_quadratic_examples() {
        let t = 1e50f64;
        let ll = t.ln().ln();
        let s1 = ShiftConfig::new(vec![0.0], t, 0.0, 1.0, 0.5).unwrap();
        assert!((u_quadratic(&[1.0], &s1, &[principal(1)], t).unwrap() - ll).abs() < 1e-14);
        let g = character_group(5).unwrap();
        let s3 = ShiftConfig::new(vec![0.0, 0.1, 7.0], t, 0.0, 10.0, 0.5).unwrap();
        let a = [0.3, -1.2, 2.0];
        let norm2: f64 = a.iter().map(|x| x * x).sum();
        assert!((u_quadratic(&a, &s3, &g[1..4], t).unwrap() - norm2 * ll).abs() < 1e-12);
        let s2 = ShiftConfig::new(vec![0.0, t.ln().powf(-0.5)], t, 0.0, 1.0, 0.5).unwrap();
        let chi = character(5, 1).unwrap();
        let u = u_quadratic(&[1.0, 1.0], &s2, &[chi.clone(), chi], t).unwrap();
        assert!((u - 3.0 * ll).abs() < 1e-9);
        assert!(u_quadratic(&[1.0], &s2, &g[..2], t).is_err());
    }

    #[test]
    fn build_k_examples() {
        let t = 1e50f64;
        let g = character_group(7).unwrap();
        let s = ShiftConfig::new(vec![0.0; 3], t, 0.0, 1.0, 0.5).unwrap();
        let k = build_k(&s, &g[1..4]).unwrap();
        assert_eq!(k.dmatrix(), DMatrix::identity(3, 3));
        assert!(k.pd.pd);
        let chi = character(5, 1).unwrap();
        let s2 = ShiftConfig::new(vec![0.0, 0.0], t, 0.0, 1.0, 0.5).unwrap();
        let k2 = build_k(&s2, &[chi.clone(), chi.clone()]).unwrap();
        assert_eq!(k2.matrix, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(!k2.pd.pd);
        let s3 = ShiftConfig::new(vec![0.0, t.ln().powf(-0.5)], t, 0.0, 1.0, 0.5).unwrap();
        let k3 = build_k(&s3, &[chi.clone(), chi]).unwrap();
        assert!((k3.matrix[0][1] - 0.5).abs() < 1e-12);
        assert!(k3.pd.pd);
        assert!((k3.pd.minors[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn translation_invariance() {
        let t = 1e30f64;
        let chi = character(5, 1).unwrap();
        let chars = vec![chi.clone(), chi.clone(), character(5, 3).unwrap()];
        let a = vec![0.0, 0.01, 0.3];
        let b: Vec<f64> = a.iter().map(|x| x + 123.25).collect();
        let ka = build_k(&ShiftConfig::new(a, t, 0.0, 5.0, 0.5).unwrap(), &chars).unwrap();
        let kb = build_k(&ShiftConfig::new(b, t, 0.0, 5.0, 0.5).unwrap(), &chars).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((ka.matrix[i][j] - kb.matrix[i][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identity_configuration_up_to_six() {
        let g = character_group(7).unwrap();
        for n in 1..=6 {
            let s = ShiftConfig::new(vec![0.0; n], 1e40, 0.0, 1.0, 0.5).unwrap();
            let k = build_k(&s, &g[..n]).unwrap();
            assert_eq!(k.dmatrix(), DMatrix::identity(n, n));
        }
    }

    #[test]
    fn pd_examples() {
        let r = check_pd(&DMatrix::identity(4, 4)).unwrap();
        assert!(r.pd && r.minors.iter().all(|&m| m == 1.0));
        let r = check_pd(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert!(!r.pd);
        assert_eq!(r.verdict, PdVerdict::Borderline);
        assert!(r.minors[1].abs() < 1e-15);
        let r = check_pd(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert_eq!(r.verdict, PdVerdict::NotPositiveDefinite);
        assert!(check_pd(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0])).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let c = &a * a.transpose() + DMatrix::identity(4, 4) * 1e-6;
        let r = check_pd(&c).unwrap();
        assert!(r.pd);
        assert!(c.symmetric_eigenvalues().iter().all(|&l| l > 0.0));
    }

    fn desk(y: f64) -> ApproxParams {
        derive_params_with(1e5, ParamConstants::default(), Some(y), Some(y.max(1e5))).unwrap()
    }

    #[test]
    fn normalizer_principal() {
        let b = PrimeBasis::new(100_000).unwrap();
        let p = desk(1e5);
        let n = normalizer(&b, &principal(1), &p).unwrap();
        // cross-check against the plain prime sum
        let all = crate::arith::prime_sum(&b.table, &principal(1), 0.0, 2.0 * p.sigma0, 1e5).unwrap().re;
        let small = crate::arith::prime_sum(&b.table, &principal(1), 0.0, 2.0 * p.sigma0, 13.0).unwrap().re;
        assert!((n.m - (all - small)).abs() < 1e-14);
        let gap = p.ll() - n.m;
        assert!(gap > 0.0 && n.m_below_ll);
        assert!(n.c1 > 1.0);
        // C₁² < κ₂ is an asymptotic statement; at desk T it fails
        assert!(!n.c1_sq_below_kappa2);
        assert!((KAPPA2 - 1.5819767068693265).abs() < 1e-15);
        let empty = derive_params_with(1e5, ParamConstants::default(), Some(16.0), Some(100.0)).unwrap();
        assert!(matches!(normalizer(&b, &principal(1), &empty), Err(Error::EmptyRange(_))));
    }

    #[test]
    fn k_tilde_same_character_half() {
        let b = PrimeBasis::new(100_000).unwrap();
        let p = desk(1e5);
        let chi = character(5, 1).unwrap();
        let s = ShiftConfig::new(vec![0.0, 1e5f64.ln().powf(-0.5)], 1e5, 0.0, 1.0, 0.5).unwrap();
        let k = build_k_tilde(&b, &s, &[chi.clone(), chi], &p).unwrap();
        assert_eq!(k.matrix[0][0], 1.0);
        assert!((k.matrix[0][1] - 0.5).abs() < 0.1, "{}", k.matrix[0][1]);
        assert!(k.pd.pd);
    }

    #[test]
    fn k_tilde_distinct_characters_decay() {
        let b = PrimeBasis::new(100_000).unwrap();
        let g = character_group(5).unwrap();
        let s = ShiftConfig::new(vec![0.0, 0.37], 1e5, 0.0, 1.0, 0.5).unwrap();
        // compare at σ = 1/2 + small so the sum is not dominated by the first primes
        let mk = |y: f64| {
            let mut p = desk(y);
            p.sigma0 = 0.55;
            build_k_tilde(&b, &s, &[g[1].clone(), g[2].clone()], &p).unwrap().matrix[0][1].abs()
        };
        assert!(mk(1e5) < mk(1e4));
        for row in build_k_tilde(&b, &s, &g[1..3], &desk(1e4)).unwrap().matrix {
            assert!(row.iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn distance_condition_reports_residuals() {
        let t = 1e8;
        let p = derive_params_with(t, ParamConstants::default(), Some(500.0), Some(500.0)).unwrap();
        let basis = PrimeBasis::new(500).unwrap();
        let chars = vec![character(5, 1).unwrap(), character(5, 1).unwrap(), character(5, 2).unwrap()];
        let sh = ShiftConfig::new(vec![0.0, 0.0, 0.0], t, 2.0, 1.0, 0.5).unwrap();
        let rows = distance_condition(&basis, &sh, &chars, &p).unwrap();
        assert_eq!(rows.len(), 3);
        // equal shifts, equal characters: the sum over 13 < p ≤ Y falls short of
        // log log Y by roughly Σ_{p≤13} 1/p plus the σ₀ damping
        let r01 = &rows[0];
        let direct = p1_cross_sum(&basis, &chars[0], &chars[1], 0.0, &p).unwrap().re;
        assert!((r01.residual - (direct - 500f64.ln().ln()).abs()).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.distance == 0.0));
        assert!(rows[1].residual < 0.5);
    }
}
