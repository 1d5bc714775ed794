//! Prime sieving, elementary arithmetic functions and Mertens-type prime sums.

use num_complex::Complex64;

use crate::characters::DirichletCharacter;
use crate::error::{Error, Result};

/// Largest sieve limit accepted unless a caller raises it explicitly.
pub const DEFAULT_SIEVE_CAPACITY: u64 = 100_000_000;

/// Largest integer accepted by the trial-division factorizer.
pub const FACTOR_CAP: u64 = 1_000_000_000_000;

const SEGMENT: usize = 1 << 18;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompSum {
    sum: f64,
    c: f64,
}

impl CompSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CompSumC {
    re: CompSum,
    im: CompSum,
}

impl CompSumC {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Sorted table of all primes up to `limit` with cached logarithms.
#[derive(Clone, Debug)]
pub struct PrimeTable {
    pub limit: u64,
    pub primes: Vec<u64>,
    pub log_p: Vec<f64>,
}

impl PrimeTable {
    /// Primes p with lo < p <= hi.
    pub fn range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.primes.partition_point(|&p| (p as f64) <= lo);
        let b = self.primes.partition_point(|&p| (p as f64) <= hi);
        a..b.max(a)
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// Prime factorization as (p, e) pairs with p ascending.
    pub fn factorize(&self, n: u64) -> Result<Vec<(u64, u32)>> {
        if n == 0 {
            return Err(Error::Domain("cannot factor 0".into()));
        }
        let cap = (self.limit as u128 * self.limit as u128).min(u64::MAX as u128) as u64;
        if n > cap {
            return Err(Error::Capacity {
                what: "factorization input",
                value: n as f64,
                cap: cap as f64,
            });
        }
        let mut out = Vec::new();
        let mut m = n;
        for &p in &self.primes {
            if p * p > m {
                break;
            }
            if m % p == 0 {
                let mut e = 0;
                while m % p == 0 {
                    m /= p;
                    e += 1;
                }
                out.push((p, e));
            }
        }
        if m > 1 {
            out.push((m, 1));
        }
        Ok(out)
    }
}

pub fn sieve_primes(limit: u64) -> Result<PrimeTable> {
    sieve_primes_with_capacity(limit, DEFAULT_SIEVE_CAPACITY)
}

pub fn sieve_primes_with_capacity(limit: u64, capacity: u64) -> Result<PrimeTable> {
    if limit < 2 {
        return Err(Error::EmptyDomain(format!("sieve limit {limit} < 2")));
    }
    if limit > capacity {
        return Err(Error::Capacity {
            what: "sieve limit",
            value: limit as f64,
            cap: capacity as f64,
        });
    }
    let root = (limit as f64).sqrt() as u64 + 1;
    let base = simple_sieve(root);
    let mut primes: Vec<u64> = Vec::new();
    let mut seg = vec![true; SEGMENT];
    let mut lo = 2u64;
    while lo <= limit {
        let hi = (lo + SEGMENT as u64 - 1).min(limit);
        let len = (hi - lo + 1) as usize;
        seg[..len].iter_mut().for_each(|b| *b = true);
        for &p in &base {
            if p * p > hi {
                break;
            }
            let mut start = ((lo + p - 1) / p) * p;
            if start < p * p {
                start = p * p;
            }
            let mut j = start;
            while j <= hi {
                seg[(j - lo) as usize] = false;
                j += p;
            }
        }
        for (i, &b) in seg[..len].iter().enumerate() {
            if b {
                primes.push(lo + i as u64);
            }
        }
        lo = hi + 1;
    }
    let log_p = primes.iter().map(|&p| (p as f64).ln()).collect();
    Ok(PrimeTable { limit, primes, log_p })
}

fn simple_sieve(n: u64) -> Vec<u64> {
    let n = n as usize;
    let mut is = vec![true; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if is[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                is[j] = false;
                j += i;
            }
        }
    }
    out
}

/// Smallest-prime-factor table for bulk multiplicative work.
#[derive(Clone, Debug)]
pub struct SpfTable {
    spf: Vec<u32>,
}

impl SpfTable {
    pub fn new(limit: usize) -> Self {
        let mut spf = vec![0u32; limit + 1];
        for i in 2..=limit {
            if spf[i] == 0 {
                let mut j = i;
                while j <= limit {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        SpfTable { spf }
    }

    pub fn limit(&self) -> usize {
        self.spf.len() - 1
    }

    /// Smallest prime factor; 0 for n < 2.
    #[inline]
    pub fn spf(&self, n: usize) -> u32 {
        self.spf[n]
    }

    pub fn is_prime(&self, n: usize) -> bool {
        n >= 2 && self.spf[n] as usize == n
    }

    pub fn factorize(&self, mut n: usize) -> Vec<(u64, u32)> {
        let mut out: Vec<(u64, u32)> = Vec::new();
        while n > 1 {
            let p = self.spf[n] as usize;
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p as u64, e));
        }
        out
    }
}

fn trial_factor(n: u64) -> Result<Vec<(u64, u32)>> {
    if n == 0 {
        return Err(Error::Domain("argument must be positive".into()));
    }
    if n > FACTOR_CAP {
        return Err(Error::Capacity {
            what: "factorization input",
            value: n as f64,
            cap: FACTOR_CAP as f64,
        });
    }
    let mut out = Vec::new();
    let mut m = n;
    let mut d = 2u64;
    while d * d <= m {
        if m % d == 0 {
            let mut e = 0;
            while m % d == 0 {
                m /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if m > 1 {
        out.push((m, 1));
    }
    Ok(out)
}

pub fn mobius(n: u64) -> Result<i8> {
    let f = trial_factor(n)?;
    if f.iter().any(|&(_, e)| e > 1) {
        return Ok(0);
    }
    Ok(if f.len() % 2 == 0 { 1 } else { -1 })
}

pub fn von_mangoldt(n: u64) -> Result<f64> {
    let f = trial_factor(n)?;
    Ok(match f.as_slice() {
        [(p, _)] => (*p as f64).ln(),
        _ => 0.0,
    })
}

/// Ω(n).
pub fn big_omega(n: u64) -> Result<u32> {
    Ok(trial_factor(n)?.iter().map(|&(_, e)| e).sum())
}

/// Number of prime factors p of n with lo < p <= hi, with multiplicity.
pub fn count_prime_factors_in_range(n: u64, lo: f64, hi: f64) -> Result<u32> {
    if !(lo >= 0.0 && lo <= hi) {
        return Err(Error::Domain(format!("bad range ({lo}, {hi}]")));
    }
    Ok(trial_factor(n)?
        .iter()
        .filter(|&&(p, _)| (p as f64) > lo && (p as f64) <= hi)
        .map(|&(_, e)| e)
        .sum())
}

/// Σ_{p<=z} χ(p) p^{-iλ} / p^σ.
pub fn prime_sum(
    table: &PrimeTable,
    chi: &DirichletCharacter,
    lambda: f64,
    sigma: f64,
    z: f64,
) -> Result<Complex64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
    }
    if z > table.limit as f64 && z.floor() > table.limit as f64 {
        return Err(Error::Capacity {
            what: "prime sum range",
            value: z,
            cap: table.limit as f64,
        });
    }
    let mut acc = CompSumC::new();
    for i in table.range(0.0, z) {
        let p = table.primes[i];
        let v = chi.evaluate(p as i64);
        if v == Complex64::new(0.0, 0.0) {
            continue;
        }
        let lp = table.log_p[i];
        let mag = (-sigma * lp).exp();
        let ph = Complex64::from_polar(mag, -lambda * lp);
        acc.add(v * ph);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::{character, principal};

    fn naive_is_prime(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
    }

    #[test]
    fn small_sieves() {
        assert_eq!(sieve_primes(10).unwrap().primes, vec![2, 3, 5, 7]);
        assert_eq!(sieve_primes(2).unwrap().primes, vec![2]);
        assert!(matches!(sieve_primes(1), Err(Error::EmptyDomain(_))));
        assert!(matches!(
            sieve_primes_with_capacity(1000, 100),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn sieve_million_matches_trial_division() {
        let t = sieve_primes(1_000_000).unwrap();
        let count = (2..=1_000_000u64).filter(|&n| naive_is_prime(n)).count();
        assert_eq!(t.len(), count);
        assert_eq!(count, 78498);
        assert!(t.primes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sieve_crosses_segments() {
        let t = sieve_primes(3 * SEGMENT as u64 + 17).unwrap();
        for w in t.primes.windows(2) {
            for m in w[0] + 1..w[1] {
                assert!(!naive_is_prime(m), "{m} missed");
            }
        }
        assert!(t.primes.iter().take(2000).all(|&p| naive_is_prime(p)));
    }

    #[test]
    fn mobius_examples() {
        assert_eq!(mobius(1).unwrap(), 1);
        assert_eq!(mobius(12).unwrap(), 0);
        assert_eq!(mobius(30).unwrap(), -1);
        assert!(mobius(0).is_err());
    }

    #[test]
    fn von_mangoldt_examples() {
        assert!((von_mangoldt(8).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(von_mangoldt(6).unwrap(), 0.0);
        assert!((von_mangoldt(9).unwrap() - 1.0986122886681098).abs() < 1e-15);
        assert_eq!(von_mangoldt(1).unwrap(), 0.0);
    }

    #[test]
    fn range_counts() {
        assert_eq!(count_prime_factors_in_range(12, 1.0, 2.0).unwrap(), 2);
        assert_eq!(count_prime_factors_in_range(1, 1.0, 1e9).unwrap(), 0);
        assert_eq!(count_prime_factors_in_range(2 * 17 * 17, 13.0, 100.0).unwrap(), 2);
    }

    #[test]
    fn chebyshev_identity() {
        for n in 1..=10_000u64 {
            let mut s = CompSum::new();
            for d in 1..=n {
                if n % d == 0 {
                    s.add(von_mangoldt(d).unwrap());
                }
            }
            assert!((s.value() - (n as f64).ln()).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn big_omega_matches_range_count() {
        let spf = SpfTable::new(100_000);
        for n in 1..=100_000u64 {
            let direct: u32 = spf.factorize(n as usize).iter().map(|x| x.1).sum();
            assert_eq!(count_prime_factors_in_range(n, 0.0, n as f64).unwrap(), direct);
        }
    }

    #[test]
    fn reciprocal_prime_sum() {
        let t = sieve_primes(1_000_000).unwrap();
        let chi = principal(1);
        let s = prime_sum(&t, &chi, 0.0, 1.0, 100.0).unwrap();
        let direct: f64 = (2..=100u64).filter(|&n| naive_is_prime(n)).map(|p| 1.0 / p as f64).sum();
        assert!((s.re - direct).abs() < 1e-14);
        assert_eq!(s.im, 0.0);
        assert_eq!(prime_sum(&t, &chi, 0.0, 1.0, 1.5).unwrap(), Complex64::new(0.0, 0.0));
        let s2 = prime_sum(&t, &chi, 0.0, 2.0, 1e6).unwrap();
        assert!((s2.re - 0.4522474200410654).abs() < 2e-7);
        assert!(prime_sum(&t, &chi, 0.0, 1.0, 2e6).is_err());
    }

    #[test]
    fn mertens_decades_shrink() {
        let t = sieve_primes(10_000_000).unwrap();
        let chi = principal(1);
        let s: Vec<f64> = (1..=7)
            .map(|k| prime_sum(&t, &chi, 0.0, 1.0, 10f64.powi(k)).unwrap().re)
            .collect();
        let d: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
        // log log z + M0 tracks the sum closely at z = 10^7
        assert!((s[6] - 1e7f64.ln().ln() - 0.2614972128476428).abs() < 1e-3);
    }

    #[test]
    fn twisted_sum_conjugates() {
        let t = sieve_primes(10_000).unwrap();
        let chi = character(5, 1).unwrap();
        let a = prime_sum(&t, &chi, 0.7, 1.0, 5000.0).unwrap();
        let b = prime_sum(&t, &chi.conj(), -0.7, 1.0, 5000.0).unwrap();
        assert!((a - b.conj()).norm() < 1e-13);
    }
}
