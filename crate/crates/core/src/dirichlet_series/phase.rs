//! Phase reduction t·ln n mod 2π for heights up to 2^256.
//!
//! Heights are signed fixed-point numbers with 256 integer and 128 fractional
//! bits. The constant ln n/(2π) is held with 384 fractional bits, so the
//! product can be reduced mod 1 exactly in limb arithmetic; the result is a
//! 128-bit fraction of a turn.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

use crate::error::{Error, Result};

const TAU: f64 = std::f64::consts::TAU;
/// Guard precision of the series evaluation, in fractional bits.
const G: u64 = 448;
/// Fractional bits kept in a [`TurnConst`].
const CF: u64 = 384;

/// Signed height |t| < 2^256 with 128 fractional bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Height {
    neg: bool,
    /// little endian; limbs 0..2 fractional, 2..6 integer
    limbs: [u64; 6],
}

impl fmt::Debug for Height {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Height({:e})", self.to_f64())
    }
}

fn cmp_mag(a: &[u64; 6], b: &[u64; 6]) -> Ordering {
    for i in (0..6).rev() {
        match a[i].cmp(&b[i]) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn add_mag(a: &[u64; 6], b: &[u64; 6]) -> Option<[u64; 6]> {
    let mut out = [0u64; 6];
    let mut carry = 0u64;
    for i in 0..6 {
        let (s1, c1) = a[i].overflowing_add(b[i]);
        let (s2, c2) = s1.overflowing_add(carry);
        out[i] = s2;
        carry = (c1 as u64) + (c2 as u64);
    }
    (carry == 0).then_some(out)
}

/// a - b for |a| >= |b|.
fn sub_mag(a: &[u64; 6], b: &[u64; 6]) -> [u64; 6] {
    let mut out = [0u64; 6];
    let mut borrow = 0u64;
    for i in 0..6 {
        let (d1, b1) = a[i].overflowing_sub(b[i]);
        let (d2, b2) = d1.overflowing_sub(borrow);
        out[i] = d2;
        borrow = (b1 as u64) + (b2 as u64);
    }
    out
}

impl Height {
    pub const ZERO: Height = Height { neg: false, limbs: [0; 6] };

    fn from_parts(neg: bool, limbs: [u64; 6]) -> Self {
        let neg = neg && limbs.iter().any(|&l| l != 0);
        Height { neg, limbs }
    }

    /// Exact conversion; bits below 2^-128 are truncated.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::Precision(format!("height {x} is not finite")));
        }
        if x == 0.0 {
            return Ok(Self::ZERO);
        }
        let bits = x.abs().to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let (mant, e) = if exp == 0 {
            (bits & ((1 << 52) - 1), -1074)
        } else {
            ((bits & ((1 << 52) - 1)) | (1 << 52), exp - 1075)
        };
        // value = mant * 2^e; fixed point integer = mant * 2^(e+128)
        let shift = e + 128;
        if shift + 53 > 384 {
            return Err(Error::Precision(format!("height {x:e} exceeds 2^256")));
        }
        let mut limbs = [0u64; 6];
        if shift >= 0 {
            let (w, b) = ((shift / 64) as usize, (shift % 64) as u32);
            limbs[w] |= mant << b;
            if b > 0 && w + 1 < 6 {
                limbs[w + 1] |= mant >> (64 - b);
            }
        } else if shift > -64 {
            limbs[0] = mant >> (-shift);
        }
        Ok(Self::from_parts(x < 0.0, limbs))
    }

    fn from_bigint_fixed(v: &BigInt) -> Result<Self> {
        let mag = v.magnitude();
        if mag.bits() > 384 {
            return Err(Error::Precision("height exceeds 2^256".into()));
        }
        let mut limbs = [0u64; 6];
        for (i, d) in mag.iter_u64_digits().enumerate() {
            limbs[i] = d;
        }
        Ok(Self::from_parts(v.sign() == Sign::Minus, limbs))
    }

    /// Sign byte followed by the six little-endian limbs.
    pub fn to_le_bytes(&self) -> [u8; 49] {
        let mut out = [0u8; 49];
        out[0] = self.neg as u8;
        for (i, l) in self.limbs.iter().enumerate() {
            out[1 + 8 * i..9 + 8 * i].copy_from_slice(&l.to_le_bytes());
        }
        out
    }

    #[cfg(test)]
    fn to_bigint_fixed(&self) -> BigInt {
        let mut m = BigUint::zero();
        for &l in self.limbs.iter().rev() {
            m = (m << 64u32) + BigUint::from(l);
        }
        BigInt::from_biguint(if self.neg { Sign::Minus } else { Sign::Plus }, m)
    }

    pub fn to_f64(&self) -> f64 {
        let mut v = 0.0;
        for i in (0..6).rev() {
            v += self.limbs[i] as f64 * 2f64.powi(64 * i as i32 - 128);
        }
        if self.neg {
            -v
        } else {
            v
        }
    }

    pub fn is_negative(&self) -> bool {
        self.neg
    }

    pub fn checked_add(&self, o: &Height) -> Result<Height> {
        let overflow = || Error::Precision("height addition overflows 2^256".into());
        if self.neg == o.neg {
            let m = add_mag(&self.limbs, &o.limbs).ok_or_else(overflow)?;
            return Ok(Self::from_parts(self.neg, m));
        }
        match cmp_mag(&self.limbs, &o.limbs) {
            Ordering::Less => Ok(Self::from_parts(o.neg, sub_mag(&o.limbs, &self.limbs))),
            _ => Ok(Self::from_parts(self.neg, sub_mag(&self.limbs, &o.limbs))),
        }
    }

    pub fn add_f64(&self, x: f64) -> Result<Height> {
        self.checked_add(&Height::from_f64(x)?)
    }

    pub fn neg(&self) -> Height {
        Self::from_parts(!self.neg, self.limbs)
    }

    pub fn sub(&self, o: &Height) -> Result<Height> {
        self.checked_add(&o.neg())
    }

    /// |self| · f for a fraction f = Σ f_i 2^{64 i - 256}, truncated.
    fn mul_frac(&self, f: &[u64; 4]) -> Height {
        let mut prod = [0u64; 10];
        for (i, &a) in self.limbs.iter().enumerate() {
            let mut carry = 0u128;
            for (j, &b) in f.iter().enumerate() {
                let cur = prod[i + j] as u128 + a as u128 * b as u128 + carry;
                prod[i + j] = cur as u64;
                carry = cur >> 64;
            }
            prod[i + 4] = carry as u64;
        }
        let mut limbs = [0u64; 6];
        limbs.copy_from_slice(&prod[4..10]);
        Self::from_parts(false, limbs)
    }

    /// Uniform draw from [lo, lo + |width|) at resolution |width|·2^-256.
    pub fn uniform<R: RngCore>(lo: &Height, width: &Height, rng: &mut R) -> Result<Height> {
        let u = [rng.next_u64(), rng.next_u64(), rng.next_u64(), rng.next_u64()];
        lo.checked_add(&width.mul_frac(&u))
    }
}

impl FromStr for Height {
    type Err = Error;

    /// Decimal literal such as `-12.5`, `1e40` or `123456789.000001e30`.
    fn from_str(s: &str) -> Result<Height> {
        let bad = || Error::Config(format!("cannot parse height {s:?}"));
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (mant, exp) = match body.find(['e', 'E']) {
            Some(i) => (&body[..i], body[i + 1..].parse::<i64>().map_err(|_| bad())?),
            None => (body, 0),
        };
        let (ip, fp) = match mant.find('.') {
            Some(i) => (&mant[..i], &mant[i + 1..]),
            None => (mant, ""),
        };
        if ip.is_empty() && fp.is_empty() {
            return Err(bad());
        }
        if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{ip}{fp}");
        let num = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
        let e10 = exp - fp.len() as i64;
        if e10 > 80 {
            return Err(Error::Precision(format!("height {s} exceeds 2^256")));
        }
        let scaled = num << 128u32;
        let fixed = if e10 >= 0 {
            scaled * BigInt::from(10u32).pow(e10 as u32)
        } else {
            scaled / BigInt::from(10u32).pow((-e10) as u32)
        };
        let h = Height::from_bigint_fixed(&fixed)?;
        Ok(if neg { h.neg() } else { h })
    }
}

/// ln n / 2π as an integer part plus 384 fractional bits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TurnConst {
    int: u64,
    frac: [u64; 6],
    /// ln n as a double, for magnitudes
    pub ln: f64,
}

/// A phase as a fraction of a full turn, in units of 2^-128.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Phase {
    pub turns: u128,
}

impl Phase {
    /// Angle in [0, 2π).
    pub fn radians(&self) -> f64 {
        let r = self.turns as f64 * (TAU / 2f64.powi(128));
        if r >= TAU {
            0.0
        } else {
            r
        }
    }

    /// Angle folded into [-π, π).
    pub fn signed_radians(&self) -> f64 {
        (self.turns as i128) as f64 * (TAU / 2f64.powi(128))
    }

    /// e^{iθ}.
    pub fn cis(&self) -> Complex64 {
        let (s, c) = self.signed_radians().sin_cos();
        Complex64::new(c, s)
    }

    pub fn neg(&self) -> Phase {
        Phase { turns: self.turns.wrapping_neg() }
    }

    pub fn add(&self, o: &Phase) -> Phase {
        Phase { turns: self.turns.wrapping_add(o.turns) }
    }
}

/// t·ln n mod 2π where `c` encodes ln n / 2π.
pub fn reduce_phase(t: &Height, c: &TurnConst) -> Phase {
    let t_l = &t.limbs;
    // integer part of c times t: only the low 128 bits of t·c_int survive mod 1
    let low = (t_l[0] as u128) | ((t_l[1] as u128) << 64);
    let a = low.wrapping_mul(c.int as u128);
    // fractional part: limbs 6 and 7 of the 12-limb product t·c_frac
    let mut prod = [0u64; 12];
    for i in 0..6 {
        let mut carry = 0u128;
        let ti = t_l[i] as u128;
        if ti == 0 {
            continue;
        }
        for j in 0..6 {
            if i + j > 7 {
                break;
            }
            let cur = prod[i + j] as u128 + ti * c.frac[j] as u128 + carry;
            prod[i + j] = cur as u64;
            carry = cur >> 64;
        }
        let mut k = i + 6;
        while carry != 0 && k < 8 {
            let cur = prod[k] as u128 + carry;
            prod[k] = cur as u64;
            carry = cur >> 64;
            k += 1;
        }
    }
    let b = (prod[6] as u128) | ((prod[7] as u128) << 64);
    let turns = a.wrapping_add(b);
    Phase { turns: if t.neg { turns.wrapping_neg() } else { turns } }
}

/// 2·atanh(d/m)·2^G for 0 < d < m.
fn atanh2(d: u64, m: u64) -> BigUint {
    let one = BigUint::one() << G;
    let d2 = BigUint::from(d) * BigUint::from(d);
    let m2 = BigUint::from(m) * BigUint::from(m);
    let mut pow = one * BigUint::from(d) / BigUint::from(m);
    let mut sum = BigUint::zero();
    let mut k = 1u64;
    while !pow.is_zero() {
        sum += &pow / BigUint::from(k);
        pow = pow * &d2 / &m2;
        k += 2;
    }
    sum << 1u32
}

fn arctan_inv(m: u64) -> BigInt {
    let one = BigInt::one() << G;
    let m2 = BigInt::from(m * m);
    let mut pow = one / BigInt::from(m);
    let mut sum = BigInt::zero();
    let mut k = 1i64;
    let mut sign = true;
    while !pow.is_zero() {
        let term = &pow / BigInt::from(k);
        if sign {
            sum += term;
        } else {
            sum -= term;
        }
        sign = !sign;
        pow /= &m2;
        k += 2;
    }
    sum
}

/// 2π·2^G.
fn two_pi_fixed() -> BigUint {
    let pi = (arctan_inv(5) << 4u32) - (arctan_inv(239) << 2u32);
    (pi << 1u32).to_biguint().expect("positive")
}

fn ln2_fixed() -> BigUint {
    atanh2(1, 3)
}

/// ln n · 2^G via n = 2^k·r, r ∈ [1, 2).
fn ln_fixed_direct(n: u64, ln2: &BigUint) -> BigUint {
    let k = 63 - n.leading_zeros() as u64;
    let base = ln2 * BigUint::from(k);
    let p2 = 1u64 << k;
    if n == p2 {
        return base;
    }
    // ln(n/2^k) = 2 atanh((n - 2^k)/(n + 2^k))
    base + atanh2(n - p2, n + p2)
}

fn make_const(ln: &BigUint, two_pi: &BigUint, n: u64) -> TurnConst {
    let c = (ln << G) / two_pi;
    let int = (&c >> G).to_u64().expect("small integer part");
    let frac_big: BigUint = (&c >> (G - CF)) & ((BigUint::one() << CF) - 1u32);
    let mut frac = [0u64; 6];
    for (i, d) in frac_big.iter_u64_digits().enumerate() {
        frac[i] = d;
    }
    TurnConst { int, frac, ln: (n as f64).ln() }
}

/// Turn constant for an arbitrary n ≥ 1.
pub fn turn_const(n: u64) -> Result<TurnConst> {
    if n == 0 {
        return Err(Error::Domain("ln 0".into()));
    }
    let ln2 = ln2_fixed();
    Ok(make_const(&ln_fixed_direct(n, &ln2), &two_pi_fixed(), n))
}

/// Turn constants for a list of increasing integers (primes in practice).
/// Each chunk is seeded directly and then chained through neighbours with
/// ln b = ln a + 2 atanh((b - a)/(b + a)).
pub fn turn_consts(ns: &[u64]) -> Vec<TurnConst> {
    const CHUNK: usize = 2048;
    let ln2 = ln2_fixed();
    let two_pi = two_pi_fixed();
    let work = |chunk: &[u64]| -> Vec<TurnConst> {
        let mut out = Vec::with_capacity(chunk.len());
        let mut prev: Option<(u64, BigUint)> = None;
        for &n in chunk {
            let ln = match &prev {
                Some((a, la)) if *a < n => la + atanh2(n - a, n + a),
                Some((a, la)) if *a == n => la.clone(),
                _ => ln_fixed_direct(n, &ln2),
            };
            out.push(make_const(&ln, &two_pi, n));
            prev = Some((n, ln));
        }
        out
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ns.par_chunks(CHUNK).flat_map_iter(work).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ns.chunks(CHUNK).flat_map(work).collect()
    }
}
