//! Brute-force checks of the moment machinery: mean values of prime
//! polynomials by quadrature and by exact enumeration, tail bounds, the
//! exponential partial-sum bound, Stirling, and the mollifier mean square.

use astro_float::{BigFloat, RoundingMode};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::{mobius, CompSum, CompSumC};
use crate::characters::DirichletCharacter;
use crate::dirichlet_series::params::ApproxParams;
use crate::dirichlet_series::phase::{reduce_phase, Height};
use crate::dirichlet_series::poly::{integer_phasors, mollifier_coeff, PrimeBasis};
use crate::arith::SpfTable;
use crate::error::{Error, Result};
use crate::par;
use crate::shifts_covariance::ShiftConfig;

pub const MIN_NODES: usize = 1000;
const BLOCK: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub k: u32,
    pub l: u32,
    pub quad_re: f64,
    pub quad_im: f64,
    /// diagonal sum for k = l, 0 otherwise
    pub formula: f64,
    /// off-diagonal bound + quadrature halving difference
    pub budget: f64,
    pub off_diagonal_bound: f64,
    pub quadrature_error: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub nodes: usize,
}

impl MomentReport {
    pub fn quad_value(&self) -> Complex64 {
        Complex64::new(self.quad_re, self.quad_im)
    }
}

/// Primes p ≤ Y with weights ψ(p) p^{-σ₀}, ψ(p) = Σ_j a_j χ_j(p) p^{-iα_j}.
pub struct WeightedPrimes {
    pub index: Vec<usize>,
    pub weight: Vec<Complex64>,
}

pub fn weighted_primes(
    basis: &PrimeBasis,
    a: &[f64],
    shifts: &ShiftConfig,
    chars: &[DirichletCharacter],
    params: &ApproxParams,
) -> Result<WeightedPrimes> {
    let n = shifts.dim();
    if a.len() != n || chars.len() != n {
        return Err(Error::Dimension { expected: n, got: a.len().min(chars.len()) });
    }
    let y = params.y_eff();
    if y.floor() > basis.limit() as f64 {
        return Err(Error::Capacity { what: "prime range", value: y, cap: basis.limit() as f64 });
    }
    let heights: Vec<Height> = shifts.alphas.iter().map(|&x| Height::from_f64(x)).collect::<Result<_>>()?;
    let mut index = Vec::new();
    let mut weight = Vec::new();
    for i in basis.table.range(0.0, y) {
        let p = basis.table.primes[i];
        let mut psi = Complex64::new(0.0, 0.0);
        for j in 0..n {
            psi += a[j] * chars[j].evaluate_u(p) * reduce_phase(&heights[j], basis.turn(i)).neg().cis();
        }
        if psi.norm_sqr() == 0.0 {
            continue;
        }
        index.push(i);
        weight.push(psi * (-params.sigma0 * basis.table.log_p[i]).exp());
    }
    Ok(WeightedPrimes { index, weight })
}

/// Largest admissible node spacing for 𝒫^k conj(𝒫)^l with primes ≤ Y.
pub fn max_spacing(y: f64, k: u32, l: u32) -> f64 {
    let ly = y.ln();
    let base = std::f64::consts::PI / (4.0 * ly);
    let m = k.max(l).max(1) as f64;
    base.min(std::f64::consts::PI / (2.0 * m * ly))
}

pub fn required_nodes(t: f64, y: f64, k: u32, l: u32) -> usize {
    ((t / max_spacing(y, k, l)).ceil() as usize + 1).max(MIN_NODES)
}

/// Trapezoid sums over [T, 2T] at spacing h and 2h (nodes rounded up to odd).
/// `eval(m0, count)` returns integrand values at nodes m0..m0+count.
fn trapezoid<F>(nodes: usize, eval: F) -> (Complex64, Complex64)
where
    F: Fn(usize, usize) -> Vec<Complex64> + Sync + Send,
{
    let blocks = nodes.div_ceil(BLOCK);
    let parts = par::map(blocks, |b| {
        let m0 = b * BLOCK;
        let cnt = BLOCK.min(nodes - m0);
        let vals = eval(m0, cnt);
        let mut fine = CompSumC::new();
        let mut coarse = CompSumC::new();
        for (off, v) in vals.into_iter().enumerate() {
            let m = m0 + off;
            let w = if m == 0 || m == nodes - 1 { 0.5 } else { 1.0 };
            fine.add(v * w);
            if m % 2 == 0 {
                coarse.add(v * w);
            }
        }
        (fine.value(), coarse.value())
    });
    let mut fine = CompSumC::new();
    let mut coarse = CompSumC::new();
    for (f, c) in parts {
        fine.add(f);
        coarse.add(c);
    }
    (fine.value(), coarse.value())
}

/// (1/T)∫_T^{2T} 𝒫^k conj(𝒫)^l dt with 𝒫(t) = Σ_{p≤Y} ψ(p) p^{-σ₀-it}.
#[allow(clippy::too_many_arguments)]
pub fn quad_moment(
    basis: &PrimeBasis,
    a: &[f64],
    shifts: &ShiftConfig,
    chars: &[DirichletCharacter],
    params: &ApproxParams,
    k: u32,
    l: u32,
    nodes: usize,
) -> Result<MomentReport> {
    let t = params.t;
    let y = params.y_eff();
    let wp = weighted_primes(basis, a, shifts, chars, params)?;
    let mut nodes = nodes.max(MIN_NODES);
    if nodes % 2 == 0 {
        nodes += 1;
    }
    let mut rep = MomentReport {
        k,
        l,
        quad_re: 1.0,
        quad_im: 0.0,
        formula: if k == l { 1.0 } else { 0.0 },
        budget: 0.0,
        off_diagonal_bound: 0.0,
        quadrature_error: 0.0,
        t,
        y,
        n: shifts.dim(),
        nodes,
    };
    if k == 0 && l == 0 {
        return Ok(rep);
    }
    let need = required_nodes(t, y, k, l);
    if nodes < need {
        return Err(Error::UnderResolved { required: need, got: nodes });
    }
    let h = t / (nodes - 1) as f64;
    let t0 = Height::from_f64(t)?;
    let steps: Vec<Complex64> = wp.index.iter().map(|&i| Complex64::from_polar(1.0, -h * basis.table.log_p[i])).collect();
    let eval = |m0: usize, cnt: usize| -> Vec<Complex64> {
        let start = t0.add_f64(m0 as f64 * h).expect("height in range");
        let mut ph: Vec<Complex64> = wp.index.iter().map(|&i| basis.phasor(i, &start)).collect();
        let mut out = Vec::with_capacity(cnt);
        for _ in 0..cnt {
            let mut p = CompSumC::new();
            for (w, z) in wp.weight.iter().zip(&ph) {
                p.add(w * z);
            }
            let p = p.value();
            out.push(p.powu(k) * p.conj().powu(l));
            for (z, s) in ph.iter_mut().zip(&steps) {
                *z *= s;
            }
        }
        out
    };
    let (fine, coarse) = trapezoid(nodes, eval);
    let q = fine * (h / t);
    let q2 = coarse * (2.0 * h / t);
    let s1: f64 = wp.weight.iter().map(|w| w.norm()).sum();
    // |(1/T)∫_T^{2T}(m/n)^{it}dt| ≤ 2/(T|ln(m/n)|) and |ln(m/n)| ≥ 1/max(m,n)
    let off = 2.0 * y.powi(k.max(l) as i32) * s1.powi(k as i32) * s1.powi(l as i32) / t;
    rep.quad_re = q.re;
    rep.quad_im = q.im;
    rep.off_diagonal_bound = off;
    rep.quadrature_error = (q - q2).norm();
    if k == l {
        rep.formula = if k <= 3 && (wp.index.len() as f64).powi(k as i32) <= ENUM_BUDGET {
            diagonal_from_weights(&wp.weight, k)?.total
        } else {
            f64::NAN
        };
    }
    rep.budget = off + rep.quadrature_error;
    Ok(rep)
}

pub const ENUM_BUDGET: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMoment {
    pub total: f64,
    pub square_free: f64,
    pub non_square_free: f64,
    /// (k!)²·e_k(|ψ(p)|²p^{-2σ₀}) from power sums
    pub product_formula: f64,
}

/// Σ_n b_k(n)² |Ψ_k(n)|² / n^{2σ₀} by enumeration of prime multisets.
pub fn exact_diagonal_moment(
    basis: &PrimeBasis,
    a: &[f64],
    shifts: &ShiftConfig,
    chars: &[DirichletCharacter],
    params: &ApproxParams,
    k: u32,
) -> Result<DiagonalMoment> {
    if k > 3 {
        return Err(Error::Budget(format!("exact enumeration supports k <= 3, got {k}")));
    }
    let wp = weighted_primes(basis, a, shifts, chars, params)?;
    if (wp.index.len() as f64).powi(k as i32) > ENUM_BUDGET {
        return Err(Error::Budget(format!("{} primes to the power {k} exceeds {ENUM_BUDGET}", wp.index.len())));
    }
    diagonal_from_weights(&wp.weight, k)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// Visits every non-decreasing index tuple of length `left`, reporting the
/// product of multiplicity factorials, the product of weights, and whether all
/// indices are distinct.
#[allow(clippy::too_many_arguments)]
fn walk_multisets<F: FnMut(f64, f64, bool)>(
    x: &[f64],
    left: u32,
    start: usize,
    prev: Option<usize>,
    run: u32,
    mult: f64,
    prod: f64,
    distinct: bool,
    visit: &mut F,
) {
    if left == 0 {
        visit(mult, prod, distinct);
        return;
    }
    for i in start..x.len() {
        let (r, m, d) = if prev == Some(i) { (run + 1, mult * (run + 1) as f64, false) } else { (1, mult, distinct) };
        walk_multisets(x, left - 1, i, Some(i), r, m, prod * x[i], d, visit);
    }
}

fn diagonal_from_weights(w: &[Complex64], k: u32) -> Result<DiagonalMoment> {
    let x: Vec<f64> = w.iter().map(|z| z.norm_sqr()).collect();
    let kf = factorial(k);
    let mut sf = CompSum::new();
    let mut nsf = CompSum::new();
    walk_multisets(&x, k, 0, None, 1, 1.0, 1.0, true, &mut |mult, prod, distinct| {
        let b = kf / mult;
        if distinct {
            sf.add(b * b * prod);
        } else {
            nsf.add(b * b * prod);
        }
    });
    let p = |e: i32| -> f64 {
        let mut s = CompSum::new();
        for v in &x {
            s.add(v.powi(e));
        }
        s.value()
    };
    let ek = match k {
        0 => 1.0,
        1 => p(1),
        2 => (p(1).powi(2) - p(2)) / 2.0,
        _ => (p(1).powi(3) - 3.0 * p(1) * p(2) + 2.0 * p(3)) / 6.0,
    };
    let square_free = sf.value();
    let non_square_free = nsf.value();
    Ok(DiagonalMoment { total: square_free + non_square_free, square_free, non_square_free, product_formula: kf * kf * ek })
}

/// moment_2k / threshold^{2k}.
pub fn chebyshev_tail(moment_2k: f64, threshold: f64, k: u32) -> Result<f64> {
    if !(moment_2k >= 0.0) || !(threshold > 0.0) {
        return Err(Error::Domain(format!("need moment >= 0 and threshold > 0 (got {moment_2k}, {threshold})")));
    }
    Ok(moment_2k / threshold.powi(2 * k as i32))
}

/// ln of the Chebyshev bound for P(|P₁| > log log T) with the Gaussian-shape
/// moment (2k)!/(k!2^k)(½ log log T)^k at k = ⌊log log T⌋, via ln Γ.
pub fn chebyshev_envelope_ln(t: f64) -> Result<f64> {
    let ll = t.ln().ln();
    if !(ll >= 1.0) {
        return Err(Error::DegenerateParams { t, detail: "log log T must be at least 1".into() });
    }
    let k = ll.floor();
    let ln_moment = libm::lgamma(2.0 * k + 1.0) - libm::lgamma(k + 1.0) - k * 2f64.ln() + k * (0.5 * ll).ln();
    Ok(ln_moment - 2.0 * k * ll.ln())
}

/// sqrt(1/π)·(sqrt(log log T)/r)·exp(−r²/log log T) + 1/T.
pub fn p1_exp_tail(r: f64, t: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("r = {r} must be positive")));
    }
    let ll = t.ln().ln();
    if !(ll > 0.0) {
        return Err(Error::DegenerateParams { t, detail: "log log T must be positive".into() });
    }
    Ok((1.0 / std::f64::consts::PI).sqrt() * ll.sqrt() / r * (-r * r / ll).exp() + 1.0 / t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpPartialCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

const EXP_PREC: usize = 320;
const RM: RoundingMode = RoundingMode::ToEven;

fn big_to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    x.to_string().parse().unwrap_or(f64::NAN)
}

/// |e^z − Σ_{j≤n} z^j/j!| via the tail Σ_{j>n} z^j/j! in 320-bit arithmetic,
/// against e^{−n}.
pub fn exp_partial_bound_check(z: Complex64, n: u32) -> ExpPartialCheck {
    let p = EXP_PREC;
    let zr = BigFloat::from_f64(z.re, p);
    let zi = BigFloat::from_f64(z.im, p);
    let az = z.norm();
    // term_j = z^j/j!, starting from j = n+1
    let mut tr = BigFloat::from_u8(1, p);
    let mut ti = BigFloat::from_u8(0, p);
    for j in 1..=n + 1 {
        let jr = BigFloat::from_u32(j, p);
        let nr = tr.mul(&zr, p, RM).sub(&ti.mul(&zi, p, RM), p, RM).div(&jr, p, RM);
        let ni = tr.mul(&zi, p, RM).add(&ti.mul(&zr, p, RM), p, RM).div(&jr, p, RM);
        tr = nr;
        ti = ni;
    }
    let mut sr = BigFloat::from_u8(0, p);
    let mut si = BigFloat::from_u8(0, p);
    let mut j = n + 1;
    let lhs;
    loop {
        sr = sr.add(&tr, p, RM);
        si = si.add(&ti, p, RM);
        j += 1;
        let jr = BigFloat::from_u32(j, p);
        let nr = tr.mul(&zr, p, RM).sub(&ti.mul(&zi, p, RM), p, RM).div(&jr, p, RM);
        let ni = tr.mul(&zi, p, RM).add(&ti.mul(&zr, p, RM), p, RM).div(&jr, p, RM);
        tr = nr;
        ti = ni;
        // stop once terms are negligible and decreasing
        if (j as f64) > 2.0 * az {
            let mag = tr.mul(&tr, p, RM).add(&ti.mul(&ti, p, RM), p, RM);
            let s2 = sr.mul(&sr, p, RM).add(&si.mul(&si, p, RM), p, RM);
            let eps = BigFloat::from_f64(2f64.powi(-(2 * p as i32 - 20)), p);
            if mag.is_zero() || mag <= s2.mul(&eps, p, RM) {
                let s2f = s2;
                lhs = s2f;
                break;
            }
        }
        if j > n + 100_000 {
            lhs = sr.mul(&sr, p, RM).add(&si.mul(&si, p, RM), p, RM);
            break;
        }
    }
    let lhs_f = big_to_f64(&lhs).sqrt();
    let rhs = (-(n as f64)).exp();
    // compare |tail|² with e^{−2n} without leaving extended precision
    let mut cc = astro_float::Consts::new().expect("constants");
    let rhs2 = BigFloat::from_f64(-2.0 * n as f64, p).exp(p, RM, &mut cc);
    ExpPartialCheck { lhs: lhs_f, rhs, ok: lhs < rhs2 }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirlingReport {
    pub value: f64,
    pub main: f64,
    pub rel_err: f64,
    pub ln_value: f64,
    pub ln_main: f64,
}

/// n! against sqrt(2πn)(n/e)^n.
pub fn stirling_bounds(n: u64) -> Result<StirlingReport> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let nf = n as f64;
    let ln_main = 0.5 * (2.0 * std::f64::consts::PI * nf).ln() + nf * (nf.ln() - 1.0);
    let (ln_value, rel_err) = if n <= 170 {
        let v: f64 = (1..=n).map(|x| x as f64).product();
        let main = (2.0 * std::f64::consts::PI * nf).sqrt() * (nf / std::f64::consts::E).powf(nf);
        (v.ln(), (v / main - 1.0).abs())
    } else {
        // ln n! − ln main by the Stirling series; at n > 170 the truncation is far below f64
        let d = 1.0 / (12.0 * nf) - 1.0 / (360.0 * nf.powi(3)) + 1.0 / (1260.0 * nf.powi(5));
        (ln_main + d, d.exp_m1().abs())
    };
    Ok(StirlingReport { value: ln_value.exp(), main: ln_main.exp(), rel_err, ln_value, ln_main })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierMeanSquare {
    pub value: f64,
    pub quadrature_error: f64,
    pub cutoff: u64,
    pub nodes: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub caveat: String,
}

pub const MOLLIFIER_DESK_LIMIT: f64 = 1e5;

/// (1/T)∫_T^{2T} |1 − L(σ₀+it)M(σ₀+it)|² dt, both series truncated at `cutoff`.
pub fn mollifier_mean_square(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    params: &ApproxParams,
    cutoff: u64,
    nodes: usize,
) -> Result<MollifierMeanSquare> {
    mollifier_mean_square_with(basis, chi, params, cutoff, cutoff, nodes)
}

/// As `mollifier_mean_square` with separate truncations for L and M.
pub fn mollifier_mean_square_with(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    params: &ApproxParams,
    l_cutoff: u64,
    m_cutoff: u64,
    nodes: usize,
) -> Result<MollifierMeanSquare> {
    let t = params.t;
    let cutoff = l_cutoff.max(m_cutoff);
    if t > MOLLIFIER_DESK_LIMIT || cutoff as f64 > MOLLIFIER_DESK_LIMIT {
        return Err(Error::Budget(format!("mollifier mean square is desk-scale only (T = {t}, cutoff = {cutoff})")));
    }
    if l_cutoff == 0 || m_cutoff == 0 {
        return Err(Error::Domain("cutoff must be positive".into()));
    }
    if cutoff > basis.limit() {
        return Err(Error::Capacity { what: "prime range", value: cutoff as f64, cap: basis.limit() as f64 });
    }
    let c = cutoff as usize;
    let spf = SpfTable::new(c);
    let s0 = params.sigma0;
    let mut lc = vec![Complex64::new(0.0, 0.0); c + 1];
    let mut mc = vec![Complex64::new(0.0, 0.0); c + 1];
    for n in 1..=c {
        let v = chi.evaluate_u(n as u64);
        if v.norm_sqr() == 0.0 {
            continue;
        }
        let mag = (n as f64).powf(-s0);
        if n as u64 <= l_cutoff {
            lc[n] = v * mag;
        }
        let mu = mobius(n as u64)?;
        if n as u64 <= m_cutoff && mu != 0 && mollifier_coeff(n as u64, params)? != 0 {
            mc[n] = v * mag * mu as f64;
        }
    }
    let mut nodes = nodes.max(MIN_NODES);
    if nodes % 2 == 0 {
        nodes += 1;
    }
    let h = t / (nodes - 1) as f64;
    let t0 = Height::from_f64(t)?;
    let eval = |m0: usize, cnt: usize| -> Vec<Complex64> {
        let mut ph = Vec::new();
        (0..cnt)
            .map(|off| {
                let ht = t0.add_f64((m0 + off) as f64 * h).expect("height in range");
                integer_phasors(basis, &spf, &ht, c, &mut ph);
                let mut l = CompSumC::new();
                let mut m = CompSumC::new();
                for n in 1..=c {
                    l.add(lc[n] * ph[n]);
                    m.add(mc[n] * ph[n]);
                }
                Complex64::new((Complex64::new(1.0, 0.0) - l.value() * m.value()).norm_sqr(), 0.0)
            })
            .collect()
    };
    let (fine, coarse) = trapezoid(nodes, eval);
    let value = fine.re * h / t;
    let coarse = coarse.re * 2.0 * h / t;
    Ok(MollifierMeanSquare {
        value,
        quadrature_error: (value - coarse).abs(),
        cutoff,
        nodes,
        t,
        caveat: "both series truncated at the cutoff; qualitative comparison across T only".into(),
    })
}
