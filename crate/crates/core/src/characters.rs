//! Dirichlet characters with exact rational exponents.
//!
//! A character mod q stores, for every residue r in 0..q, a numerator a with
//! χ(r) = e^{2πi a/den}, where den is the exponent of (ℤ/q)^×. Residues not
//! coprime to q carry a sentinel and evaluate to 0.
//!
//! Canonical ordering: write (ℤ/q)^× as a product of cyclic factors, one per
//! odd prime power (generated by the least primitive root) and, for 2^e, the
//! factors ⟨−1⟩ (e ≥ 2) and ⟨5⟩ (e ≥ 3). Primes are taken in ascending order,
//! with ⟨−1⟩ before ⟨5⟩. A character is the exponent tuple (k_1, …, k_r),
//! χ(g_i) = e^{2πi k_i/o_i}, and its index is the mixed-radix value of the
//! tuple with k_1 most significant. Index 0 is the principal character.

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

/// Moduli above this are refused (tables are O(q)).
pub const MAX_MODULUS: u64 = 1 << 22;

#[derive(Clone, Debug)]
pub struct DirichletCharacter {
    modulus: u64,
    den: u64,
    num: Vec<u32>,
    principal: bool,
    index: Option<u64>,
    vals: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterLabel {
    pub q: u64,
    pub index: u64,
}

struct Component {
    modulus: u64,
    order: u64,
    /// discrete log of each residue mod `modulus`, NONE off the unit group
    log: Vec<u32>,
}

fn factor_small(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = (r as u128 * b as u128 % m as u128) as u64;
        }
        b = (b as u128 * b as u128 % m as u128) as u64;
        e >>= 1;
    }
    r
}

fn primitive_root_prime(p: u64) -> u64 {
    if p == 2 {
        return 1;
    }
    let f = factor_small(p - 1);
    (2..p)
        .find(|&g| f.iter().all(|&(r, _)| pow_mod(g, (p - 1) / r, p) != 1))
        .expect("primes have primitive roots")
}

fn cyclic_log(modulus: u64, g: u64, order: u64) -> Vec<u32> {
    let mut log = vec![NONE; modulus as usize];
    let mut x = 1 % modulus;
    for k in 0..order {
        log[x as usize] = k as u32;
        x = x * g % modulus;
    }
    log
}

fn components(q: u64) -> Vec<Component> {
    let mut out = Vec::new();
    for (p, e) in factor_small(q) {
        let m = p.pow(e);
        if p == 2 {
            if e >= 2 {
                // ⟨−1⟩: residue r ≡ 1 mod 4 has log 0, r ≡ 3 mod 4 has log 1
                let log = (0..m)
                    .map(|r| if r % 2 == 0 { NONE } else if r % 4 == 1 { 0 } else { 1 })
                    .collect();
                out.push(Component { modulus: m, order: 2, log });
            }
            if e >= 3 {
                let order = m / 4;
                let mut log = vec![NONE; m as usize];
                let mut x = 1u64;
                for k in 0..order {
                    log[x as usize] = k as u32;
                    log[(m - x) as usize] = k as u32;
                    x = x * 5 % m;
                }
                out.push(Component { modulus: m, order, log });
            }
        } else {
            let mut g = primitive_root_prime(p);
            if e >= 2 && pow_mod(g, p - 1, p * p) == 1 {
                g += p;
            }
            let order = m / p * (p - 1);
            out.push(Component { modulus: m, order, log: cyclic_log(m, g, order) });
        }
    }
    out
}

fn lcm_all(it: impl Iterator<Item = u64>) -> u64 {
    it.fold(1, |a, b| a.lcm(&b))
}

fn check_modulus(q: u64) -> Result<()> {
    if q == 0 {
        return Err(Error::Domain("modulus must be positive".into()));
    }
    if q > MAX_MODULUS {
        return Err(Error::Capacity { what: "character modulus", value: q as f64, cap: MAX_MODULUS as f64 });
    }
    Ok(())
}

fn build(q: u64, comps: &[Component], digits: &[u64], index: u64) -> DirichletCharacter {
    let den = lcm_all(comps.iter().map(|c| c.order));
    let mut num = vec![NONE; q as usize];
    let mut principal = true;
    for r in 0..q {
        let mut a = 0u64;
        let mut unit = true;
        for (c, &k) in comps.iter().zip(digits) {
            let l = c.log[(r % c.modulus) as usize];
            if l == NONE {
                unit = false;
                break;
            }
            a = (a + k * l as u64 % c.order * (den / c.order)) % den;
        }
        if unit && r.gcd(&q) == 1 {
            num[r as usize] = a as u32;
            if a != 0 {
                principal = false;
            }
        }
    }
    DirichletCharacter::assemble(q, den, num, principal, Some(index))
}

fn digits_of(comps: &[Component], mut index: u64) -> Vec<u64> {
    let mut d = vec![0; comps.len()];
    for (i, c) in comps.iter().enumerate().rev() {
        d[i] = index % c.order;
        index /= c.order;
    }
    d
}

/// All φ(q) characters mod q in canonical order.
pub fn character_group(q: u64) -> Result<Vec<DirichletCharacter>> {
    check_modulus(q)?;
    let comps = components(q);
    let size: u64 = comps.iter().map(|c| c.order).product();
    Ok((0..size).map(|i| build(q, &comps, &digits_of(&comps, i), i)).collect())
}

/// The character with canonical index `index` mod q.
pub fn character(q: u64, index: u64) -> Result<DirichletCharacter> {
    check_modulus(q)?;
    let comps = components(q);
    let size: u64 = comps.iter().map(|c| c.order).product();
    if index >= size {
        return Err(Error::Domain(format!("character index {index} out of range for q = {q} (φ = {size})")));
    }
    Ok(build(q, &comps, &digits_of(&comps, index), index))
}

pub fn principal(q: u64) -> DirichletCharacter {
    character(q, 0).expect("principal character")
}

pub fn euler_phi(q: u64) -> u64 {
    factor_small(q).iter().map(|&(p, e)| p.pow(e - 1) * (p - 1)).product()
}

impl DirichletCharacter {
    fn assemble(modulus: u64, den: u64, num: Vec<u32>, principal: bool, index: Option<u64>) -> Self {
        let vals = num
            .iter()
            .map(|&a| if a == NONE { Complex64::new(0.0, 0.0) } else { root_of_unity(a as u64, den) })
            .collect();
        DirichletCharacter { modulus, den, num, principal, index, vals }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_principal(&self) -> bool {
        self.principal
    }

    pub fn index(&self) -> Option<u64> {
        self.index
    }

    pub fn label(&self) -> Option<CharacterLabel> {
        self.index.map(|index| CharacterLabel { q: self.modulus, index })
    }

    /// Exponent e with χ(n) = e^{2πi e}, or None when gcd(n, q) > 1.
    pub fn exponent(&self, n: i64) -> Option<Ratio<u64>> {
        let r = n.rem_euclid(self.modulus as i64) as usize;
        match self.num[r] {
            NONE => None,
            a => Some(Ratio::new(a as u64, self.den)),
        }
    }

    #[inline]
    fn raw(&self, n: u64) -> u32 {
        self.num[(n % self.modulus) as usize]
    }

    pub fn evaluate(&self, n: i64) -> Complex64 {
        self.vals[n.rem_euclid(self.modulus as i64) as usize]
    }

    #[inline]
    pub fn evaluate_u(&self, n: u64) -> Complex64 {
        self.vals[(n % self.modulus) as usize]
    }

    /// Order of χ in the character group.
    pub fn order(&self) -> u64 {
        let g = self.num.iter().filter(|&&a| a != NONE).fold(self.den, |g, &a| g.gcd(&(a as u64)));
        self.den / g
    }

    /// Real-valued (order ≤ 2).
    pub fn is_real(&self) -> bool {
        self.order() <= 2
    }

    pub fn conj(&self) -> Self {
        let num = self
            .num
            .iter()
            .map(|&a| if a == NONE { NONE } else { ((self.den - a as u64) % self.den) as u32 })
            .collect();
        DirichletCharacter::assemble(self.modulus, self.den, num, self.principal, None)
    }

    /// Pointwise product of two characters of the same modulus.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.modulus != other.modulus {
            return Err(Error::Domain("product of characters with different moduli".into()));
        }
        let den = self.den.lcm(&other.den);
        let (sa, sb) = (den / self.den, den / other.den);
        let mut principal = true;
        let num = self
            .num
            .iter()
            .zip(&other.num)
            .map(|(&a, &b)| {
                if a == NONE {
                    NONE
                } else {
                    let v = (a as u64 * sa + b as u64 * sb) % den;
                    principal &= v == 0;
                    v as u32
                }
            })
            .collect();
        Ok(DirichletCharacter::assemble(self.modulus, den, num, principal, None))
    }

    /// Same values on every residue coprime to both moduli.
    fn agrees_with(&self, other: &Self) -> bool {
        let l = self.modulus.lcm(&other.modulus);
        (0..l).filter(|r| r.gcd(&l) == 1).all(|r| {
            let a = self.raw(r) as u64;
            let b = other.raw(r) as u64;
            a * other.den == b * self.den
        })
    }
}

/// Equal modulus and equal exact values; labels and representation are ignored.
impl PartialEq for DirichletCharacter {
    fn eq(&self, other: &Self) -> bool {
        self.modulus == other.modulus && self.agrees_with(other)
    }
}

fn root_of_unity(a: u64, den: u64) -> Complex64 {
    let g = a.gcd(&den);
    let (a, d) = (a / g, den / g);
    match (a, d) {
        (0, _) => Complex64::new(1.0, 0.0),
        (1, 2) => Complex64::new(-1.0, 0.0),
        (1, 4) => Complex64::new(0.0, 1.0),
        (3, 4) => Complex64::new(0.0, -1.0),
        _ => {
            let x = 2.0 * std::f64::consts::PI * a as f64 / d as f64;
            Complex64::new(x.cos(), x.sin())
        }
    }
}

/// 1 iff χ_i·conj(χ_j) is principal mod lcm(q_i, q_j).
pub fn pair_delta(chi_i: &DirichletCharacter, chi_j: &DirichletCharacter) -> u8 {
    chi_i.agrees_with(chi_j) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn trivial_modulus() {
        let g = character_group(1).unwrap();
        assert_eq!(g.len(), 1);
        for n in -5..50 {
            assert_eq!(g[0].evaluate(n), Complex64::new(1.0, 0.0));
        }
        assert!(character_group(0).is_err());
    }

    #[test]
    fn mod_four() {
        let g = character_group(4).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g[0].is_principal());
        // brute force: the unique ±1 multiplicative assignment with χ(3) ≠ 1
        let chi = &g[1];
        assert_eq!(chi.evaluate(3), Complex64::new(-1.0, 0.0));
        assert_eq!(chi.evaluate(7), Complex64::new(-1.0, 0.0));
        assert_eq!(chi.evaluate(2), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn mod_five_generator() {
        let g = character_group(5).unwrap();
        assert_eq!(g.len(), 4);
        for (k, chi) in g.iter().enumerate() {
            let want = [1.0, 0.0, -1.0, 0.0][k % 4];
            let wanti = [0.0, 1.0, 0.0, -1.0][k % 4];
            assert_eq!(chi.evaluate(2), Complex64::new(want, wanti));
        }
        assert_eq!(g[1].order(), 4);
        assert!(g[2].is_real());
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(principal(6).evaluate(35), Complex64::new(1.0, 0.0));
        for chi in character_group(6).unwrap() {
            assert_eq!(chi.evaluate(4), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn delta_examples() {
        let g5 = character_group(5).unwrap();
        for a in &g5 {
            assert_eq!(pair_delta(a, a), 1);
            for b in &g5 {
                if a != b {
                    assert_eq!(pair_delta(a, b), 0);
                }
            }
        }
        assert_eq!(pair_delta(&principal(3), &principal(4)), 1);
        assert_eq!(pair_delta(&principal(3), &character(4, 1).unwrap()), 0);
    }

    #[test]
    fn groups_are_complete_and_closed() {
        for q in 1..=100u64 {
            let g = character_group(q).unwrap();
            assert_eq!(g.len() as u64, euler_phi(q), "q={q}");
            assert_eq!(g.iter().filter(|c| c.is_principal()).count(), 1);
            assert!(g[0].is_principal());
            for (i, a) in g.iter().enumerate() {
                for b in &g[i + 1..] {
                    assert_ne!(a.num, b.num, "q={q}");
                }
            }
            for a in g.iter().take(6) {
                for b in g.iter().take(6) {
                    let p = a.mul(b).unwrap();
                    assert!(g.iter().any(|c| c.agrees_with(&p)), "closure fails q={q}");
                }
            }
        }
    }

    #[test]
    fn multiplicativity() {
        for q in [7u64, 8, 9, 12, 16, 25, 27, 60, 81, 98] {
            for chi in character_group(q).unwrap() {
                assert_eq!(chi.exponent(1), Some(Ratio::new(0, 1)));
                for m in 0..q as i64 {
                    for n in 0..q as i64 {
                        match (chi.exponent(m), chi.exponent(n), chi.exponent(m * n)) {
                            (Some(a), Some(b), Some(c)) => {
                                let s = a + b;
                                assert_eq!(s - s.floor(), c, "q={q} m={m} n={n}");
                            }
                            (a, b, c) => assert!(c.is_none() && (a.is_none() || b.is_none())),
                        }
                    }
                }
            }
        }
    }

    // Exact orthogonality: the exponents of a character of order d are
    // equidistributed on the d-th roots of unity, so the sum is φ(q)·[d = 1].
    #[test]
    fn exact_orthogonality() {
        for q in 1..=100u64 {
            for chi in character_group(q).unwrap() {
                let mut hist: HashMap<Ratio<u64>, u64> = HashMap::new();
                for r in 0..q as i64 {
                    if let Some(e) = chi.exponent(r) {
                        *hist.entry(e).or_default() += 1;
                    }
                }
                let d = chi.order();
                assert_eq!(hist.len() as u64, d);
                let phi = euler_phi(q);
                assert!(hist.values().all(|&c| c == phi / d));
                assert_eq!(d == 1, chi.is_principal());
            }
        }
    }

    #[test]
    fn index_lookup_matches_group() {
        for q in [5u64, 12, 40, 63] {
            let g = character_group(q).unwrap();
            for (i, chi) in g.iter().enumerate() {
                assert_eq!(&character(q, i as u64).unwrap(), chi);
            }
            assert!(character(q, g.len() as u64).is_err());
        }
    }
}
