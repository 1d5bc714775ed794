use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::params::ApproxParams;
use super::phase::{reduce_phase, turn_consts, Height, TurnConst};
use crate::arith::{sieve_primes, CompSumC, PrimeTable, SpfTable};
use crate::characters::DirichletCharacter;
use crate::error::{Error, Result};

/// Primes up to a limit with their high-precision turn constants.
pub struct PrimeBasis {
    pub table: PrimeTable,
    consts: Vec<TurnConst>,
}

impl PrimeBasis {
    pub fn new(limit: u64) -> Result<Self> {
        let table = sieve_primes(limit)?;
        let consts = turn_consts(&table.primes);
        Ok(PrimeBasis { table, consts })
    }

    pub fn limit(&self) -> u64 {
        self.table.limit
    }

    pub fn turn(&self, i: usize) -> &TurnConst {
        &self.consts[i]
    }

    /// p_i^{-it}.
    #[inline]
    pub fn phasor(&self, i: usize, t: &Height) -> Complex64 {
        reduce_phase(t, &self.consts[i]).neg().cis()
    }

    fn check(&self, hi: f64) -> Result<()> {
        if hi.floor() > self.table.limit as f64 {
            return Err(Error::Capacity { what: "prime range", value: hi, cap: self.table.limit as f64 });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolyRange {
    P0,
    P1,
    P2,
    Full,
}

impl PolyRange {
    /// (lo, hi] for the range under the effective Y, X.
    pub fn bounds(&self, params: &ApproxParams) -> (f64, f64) {
        let (y, x) = (params.y_eff(), params.x_eff());
        match self {
            PolyRange::P0 => (0.0, 13.0),
            PolyRange::P1 => (13.0, y),
            PolyRange::P2 => (y, x),
            PolyRange::Full => (0.0, x),
        }
    }
}

/// Σ_{lo<p≤hi} χ(p) p^{-σ-it}.
pub fn prime_sum_at(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    sigma: f64,
    t: &Height,
    lo: f64,
    hi: f64,
) -> Result<Complex64> {
    basis.check(hi)?;
    let mut acc = CompSumC::new();
    for i in basis.table.range(lo, hi) {
        let v = chi.evaluate_u(basis.table.primes[i]);
        if v.re == 0.0 && v.im == 0.0 {
            continue;
        }
        let mag = (-sigma * basis.table.log_p[i]).exp();
        acc.add(v * basis.phasor(i, t) * mag);
    }
    Ok(acc.value())
}

/// Complex sums over P0, P1, P2 at σ + it.
pub fn prime_poly_parts(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    sigma: f64,
    t: &Height,
    params: &ApproxParams,
) -> Result<[Complex64; 3]> {
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (k, r) in [PolyRange::P0, PolyRange::P1, PolyRange::P2].iter().enumerate() {
        let (lo, hi) = r.bounds(params);
        out[k] = prime_sum_at(basis, chi, sigma, t, lo, hi)?;
    }
    Ok(out)
}

pub fn eval_prime_poly_at(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    sigma: f64,
    t: &Height,
    range: PolyRange,
    params: &ApproxParams,
) -> Result<f64> {
    match range {
        PolyRange::Full => {
            let parts = prime_poly_parts(basis, chi, sigma, t, params)?;
            Ok(parts[0].re + parts[1].re + parts[2].re)
        }
        r => {
            let (lo, hi) = r.bounds(params);
            Ok(prime_sum_at(basis, chi, sigma, t, lo, hi)?.re)
        }
    }
}

/// Re Σ_{p in range} χ(p)/p^s.
pub fn eval_prime_poly(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    s: Complex64,
    range: PolyRange,
    params: &ApproxParams,
) -> Result<f64> {
    eval_prime_poly_at(basis, chi, s.re, &Height::from_f64(s.im)?, range, params)
}

/// Σ over prime powers lo < n = p^k ≤ hi of χ(p)^k / (k p^{ks}).
pub fn lambda_sum_at(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    sigma: f64,
    t: &Height,
    lo: f64,
    hi: f64,
) -> Result<Complex64> {
    basis.check(hi)?;
    let mut acc = CompSumC::new();
    for i in basis.table.range(0.0, hi) {
        let p = basis.table.primes[i] as f64;
        let v = chi.evaluate_u(basis.table.primes[i]);
        if v.re == 0.0 && v.im == 0.0 {
            continue;
        }
        let z = v * basis.phasor(i, t) * (-sigma * basis.table.log_p[i]).exp();
        let (mut pk, mut zk, mut k) = (p, z, 1.0);
        while pk <= hi {
            if pk > lo {
                acc.add(zk / k);
            }
            pk *= p;
            zk *= z;
            k += 1.0;
        }
    }
    Ok(acc.value())
}

pub fn lambda_poly_parts(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    sigma: f64,
    t: &Height,
    params: &ApproxParams,
) -> Result<[Complex64; 3]> {
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (k, r) in [PolyRange::P0, PolyRange::P1, PolyRange::P2].iter().enumerate() {
        let (lo, hi) = r.bounds(params);
        out[k] = lambda_sum_at(basis, chi, sigma, t, lo, hi)?;
    }
    Ok(out)
}

pub fn eval_lambda_poly_at(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    sigma: f64,
    t: &Height,
    range: PolyRange,
    params: &ApproxParams,
) -> Result<Complex64> {
    match range {
        PolyRange::Full => {
            let parts = lambda_poly_parts(basis, chi, sigma, t, params)?;
            Ok(parts[0] + parts[1] + parts[2])
        }
        r => {
            let (lo, hi) = r.bounds(params);
            lambda_sum_at(basis, chi, sigma, t, lo, hi)
        }
    }
}

/// 𝒫(s) restricted to `range`.
pub fn eval_lambda_poly(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    s: Complex64,
    range: PolyRange,
    params: &ApproxParams,
) -> Result<Complex64> {
    eval_lambda_poly_at(basis, chi, s.re, &Height::from_f64(s.im)?, range, params)
}

/// Which coefficient family of the mollifier to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MollifierPart {
    /// a(n): the full mollifier
    Full,
    /// a_0(n): 13-smooth n
    Small,
    /// a_1(n): all prime factors in (13, Y]
    Middle,
    /// a_2(n): all prime factors in (Y, X]
    Large,
}

fn coeff_from_factors(factors: &[(u64, u32)], params: &ApproxParams, part: MollifierPart) -> u8 {
    let (y, x) = (params.y_eff(), params.x_eff());
    let (mut small, mut mid, mut le_y, mut large, mut above) = (0u64, 0u64, 0u64, 0u64, false);
    for &(p, e) in factors {
        let pf = p as f64;
        let e = e as u64;
        if pf > x {
            above = true;
        } else if pf > y {
            large += e;
        } else {
            le_y += e;
            if pf > 13.0 {
                mid += e;
            } else {
                small += e;
            }
        }
    }
    let cap_y = 100.0 * params.ll();
    let cap_x = params.a * params.lll();
    let ok = match part {
        MollifierPart::Full => !above && le_y as f64 <= cap_y && large as f64 <= cap_x,
        MollifierPart::Small => !above && mid == 0 && large == 0 && small as f64 <= cap_y,
        MollifierPart::Middle => !above && small == 0 && large == 0 && mid as f64 <= cap_y,
        MollifierPart::Large => !above && small == 0 && mid == 0 && large as f64 <= cap_x,
    };
    ok as u8
}

/// a(n) from a prime factorization, so that huge n can be tested.
pub fn mollifier_coeff_factored(factors: &[(u64, u32)], params: &ApproxParams) -> u8 {
    coeff_from_factors(factors, params, MollifierPart::Full)
}

pub fn mollifier_coeff(n: u64, params: &ApproxParams) -> Result<u8> {
    let t = sieve_primes(((n as f64).sqrt() as u64 + 1).max(2))?;
    Ok(mollifier_coeff_factored(&t.factorize(n)?, params))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierValue {
    pub value: Complex64,
    pub cutoff: u64,
    /// crude bound on Σ_{n > cutoff, n in support} n^{-σ}; may be +inf
    pub tail_bound: f64,
    pub ln_tail_bound: f64,
}

/// ln of ∫_c^S x^{-σ} dx with ln S = ln_s.
fn ln_tail_integral(c: f64, ln_s: f64, sigma: f64) -> f64 {
    let ln_c = c.ln();
    if ln_s <= ln_c {
        return f64::NEG_INFINITY;
    }
    if (sigma - 1.0).abs() < 1e-12 {
        return (ln_s - ln_c).ln();
    }
    if sigma > 1.0 {
        // c^{1-σ}/(σ-1), the upper limit only helps
        return (1.0 - sigma) * ln_c - (sigma - 1.0).ln();
    }
    (1.0 - sigma) * ln_s - (1.0 - sigma).ln()
}

/// n^{-it} for all n ≤ cutoff, built multiplicatively from prime phasors.
pub fn integer_phasors(basis: &PrimeBasis, spf: &SpfTable, t: &Height, cutoff: usize, out: &mut Vec<Complex64>) {
    out.clear();
    out.resize(cutoff + 1, Complex64::new(0.0, 0.0));
    if cutoff >= 1 {
        out[1] = Complex64::new(1.0, 0.0);
    }
    let mut idx = 0usize;
    for n in 2..=cutoff {
        let p = spf.spf(n) as usize;
        if p == n {
            out[n] = basis.phasor(idx, t);
            idx += 1;
        } else {
            out[n] = out[n / p] * out[p];
        }
    }
}

pub fn eval_mollifier(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    s: Complex64,
    params: &ApproxParams,
    cutoff: u64,
) -> Result<MollifierValue> {
    eval_mollifier_part(basis, chi, s, params, cutoff, MollifierPart::Full)
}

/// Σ_{n≤cutoff} μ(n) a(n) χ(n) / n^s for the chosen coefficient family.
pub fn eval_mollifier_part(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    s: Complex64,
    params: &ApproxParams,
    cutoff: u64,
    part: MollifierPart,
) -> Result<MollifierValue> {
    if cutoff == 0 {
        return Err(Error::Domain("cutoff must be positive".into()));
    }
    basis.check(cutoff as f64)?;
    let t = Height::from_f64(s.im)?;
    let c = cutoff as usize;
    let spf = SpfTable::new(c);
    let mut ph = Vec::new();
    integer_phasors(basis, &spf, &t, c, &mut ph);
    let mut acc = CompSumC::new();
    for n in 1..=c {
        let f = spf.factorize(n);
        if f.iter().any(|&(_, e)| e > 1) {
            continue;
        }
        if coeff_from_factors(&f, params, part) == 0 {
            continue;
        }
        let v = chi.evaluate_u(n as u64);
        if v.re == 0.0 && v.im == 0.0 {
            continue;
        }
        let mu = if f.len() % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(v * ph[n] * (mu * (n as f64).powf(-s.re)));
    }
    let (y, x) = (params.y_eff(), params.x_eff());
    let ln_support = 100.0 * params.ll() * y.ln() + params.a * params.lll() * x.ln();
    let ln_tail = ln_tail_integral(c as f64, ln_support, s.re);
    Ok(MollifierValue { value: acc.value(), cutoff, tail_bound: ln_tail.exp(), ln_tail_bound: ln_tail })
}

/// Σ_{n≤cutoff} χ(n)/n^s evaluated at several abscissae sharing one set of phases.
pub struct TruncatedL {
    spf: SpfTable,
    sigmas: Vec<f64>,
    mags: Vec<Vec<f64>>,
}

impl TruncatedL {
    pub fn new(cutoff: u64, sigmas: &[f64]) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::Domain("cutoff must be positive".into()));
        }
        if let Some(s) = sigmas.iter().find(|&&s| !(s >= 0.5)) {
            return Err(Error::Domain(format!("truncated L-series needs Re s >= 1/2, got {s}")));
        }
        let c = cutoff as usize;
        let mags = sigmas
            .iter()
            .map(|&s| (0..=c).map(|n| if n == 0 { 0.0 } else { (n as f64).powf(-s) }).collect())
            .collect();
        Ok(TruncatedL { spf: SpfTable::new(c), sigmas: sigmas.to_vec(), mags })
    }

    pub fn cutoff(&self) -> usize {
        self.spf.limit()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// One value per configured σ, at height t.
    pub fn eval(
        &self,
        basis: &PrimeBasis,
        chi: &DirichletCharacter,
        t: &Height,
        scratch: &mut Vec<Complex64>,
    ) -> Result<Vec<Complex64>> {
        basis.check(self.cutoff() as f64)?;
        integer_phasors(basis, &self.spf, t, self.cutoff(), scratch);
        let mut accs = vec![CompSumC::new(); self.sigmas.len()];
        for n in 1..=self.cutoff() {
            let v = chi.evaluate_u(n as u64);
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            let z = v * scratch[n];
            for (acc, m) in accs.iter_mut().zip(&self.mags) {
                acc.add(z * m[n]);
            }
        }
        Ok(accs.iter().map(|a| a.value()).collect())
    }
}

pub fn eval_l_truncated(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    s: Complex64,
    cutoff: u64,
) -> Result<Complex64> {
    let l = TruncatedL::new(cutoff, &[s.re])?;
    let mut scratch = Vec::new();
    Ok(l.eval(basis, chi, &Height::from_f64(s.im)?, &mut scratch)?[0])
}
