use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamConstants {
    pub k: f64,
    pub k_prime: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for ParamConstants {
    fn default() -> Self {
        ParamConstants { k: 10.0, k_prime: 4.0, a: 400.0, b: 80.0 }
    }
}

/// The parameter bundle at height scale T.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxParams {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "K_prime")]
    pub k_prime: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "W")]
    pub w: f64,
    /// derived X, before any override
    #[serde(rename = "X")]
    pub x: f64,
    /// derived Y, before any override
    #[serde(rename = "Y")]
    pub y: f64,
    pub sigma0: f64,
    #[serde(rename = "Y_override")]
    pub y_override: Option<f64>,
    #[serde(rename = "X_override")]
    pub x_override: Option<f64>,
    pub flags: Vec<String>,
}

pub const FLAG_ASYMPTOTIC: &str = "asymptotically-invalid";
pub const FLAG_X_BEYOND_T: &str = "x-override-beyond-T";

/// ln ln T.
pub fn ll(t: f64) -> f64 {
    t.ln().ln()
}

/// ln ln ln T.
pub fn lll(t: f64) -> f64 {
    t.ln().ln().ln()
}

pub fn derive_params(t: f64, k: f64, k_prime: f64, a: f64, b: f64) -> Result<ApproxParams> {
    derive_params_with(t, ParamConstants { k, k_prime, a, b }, None, None)
}

pub fn derive_params_with(
    t: f64,
    c: ParamConstants,
    y_override: Option<f64>,
    x_override: Option<f64>,
) -> Result<ApproxParams> {
    if !(t.is_finite() && t > std::f64::consts::E.exp()) {
        return Err(Error::Domain(format!("T = {t} must exceed e^e so that log log log T > 0")));
    }
    if !(2.0 < c.k_prime && c.k_prime < c.k) {
        return Err(Error::Domain(format!("need 2 < K' < K, got K = {}, K' = {}", c.k, c.k_prime)));
    }
    let (l2, l3) = (ll(t), lll(t));
    let w = c.k * l3 * l3;
    let x = (t.ln() / (c.k_prime * l3)).exp();
    let y = (t.ln() / (c.k_prime * l2)).exp();
    let sigma0 = 0.5 + w / t.ln();
    let mut flags = Vec::new();
    if l3 <= 1.0 || w / t.ln() > 0.1 {
        flags.push(FLAG_ASYMPTOTIC.to_string());
    }
    let p = ApproxParams {
        t,
        k: c.k,
        k_prime: c.k_prime,
        a: c.a,
        b: c.b,
        w,
        x,
        y,
        sigma0,
        y_override,
        x_override,
        flags,
    };
    p.check_ordering()
}

impl ApproxParams {
    fn check_ordering(mut self) -> Result<Self> {
        let (y, x) = (self.y_eff(), self.x_eff());
        let degenerate = |detail: String| Error::DegenerateParams { t: self.t, detail };
        if self.y_override.is_none() && self.x_override.is_none() {
            if !(13.0 < y && y < x && x < self.t) {
                return Err(degenerate(format!("need 13 < Y < X < T, got Y = {y}, X = {x}")));
            }
        } else {
            // overrides decouple Y, X from T; only their own order is enforced
            if !(13.0 < y && y <= x) {
                return Err(degenerate(format!("need 13 < Y <= X, got Y = {y}, X = {x}")));
            }
            if x >= self.t {
                self.flags.push(FLAG_X_BEYOND_T.to_string());
            }
        }
        Ok(self)
    }

    pub fn y_eff(&self) -> f64 {
        self.y_override.unwrap_or(self.y)
    }

    pub fn x_eff(&self) -> f64 {
        self.x_override.unwrap_or(self.x)
    }

    pub fn ll(&self) -> f64 {
        ll(self.t)
    }

    pub fn lll(&self) -> f64 {
        lll(self.t)
    }

    pub fn is_asymptotically_invalid(&self) -> bool {
        self.flags.iter().any(|f| f == FLAG_ASYMPTOTIC)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_1e50() {
        let p = derive_params(1e50, 10.0, 4.0, 400.0, 80.0).unwrap();
        // ln ln ln 1e50 = ln ln 115.129... = ln 4.7462 = 1.5573
        let l3 = 115.12925464970229f64.ln().ln();
        assert!((p.lll() - l3).abs() < 1e-12);
        assert!((p.w - 10.0 * l3 * l3).abs() < 1e-12);
        assert!((p.w - 24.25).abs() < 0.1);
        assert!((p.sigma0 - 0.7107).abs() < 1e-3);
        assert!(p.is_asymptotically_invalid());
        assert!((p.y - 430.0).abs() < 5.0);
        assert!((p.x - 1.06e8).abs() < 1e6);
    }

    #[test]
    fn defaults() {
        let c = ParamConstants::default();
        assert_eq!((c.a, c.b), (400.0, 80.0));
        assert!(2.0 < c.k_prime && c.k_prime < c.k);
    }

    #[test]
    fn sigma0_tends_to_half() {
        let mut prev = f64::INFINITY;
        for e in [40, 50, 100, 200, 300] {
            let p = derive_params(10f64.powi(e), 10.0, 4.0, 400.0, 80.0).unwrap();
            assert!(p.sigma0 - 0.5 < prev);
            prev = p.sigma0 - 0.5;
        }
    }

    #[test]
    fn desk_scale_needs_overrides() {
        assert!(matches!(
            derive_params(1e5, 10.0, 4.0, 400.0, 80.0),
            Err(Error::DegenerateParams { .. })
        ));
        let p = derive_params_with(1e5, ParamConstants::default(), Some(200.0), Some(1e4)).unwrap();
        assert_eq!(p.y_eff(), 200.0);
        assert!(p.is_asymptotically_invalid());
        let q = derive_params_with(1e5, ParamConstants::default(), Some(1e5), Some(1e5)).unwrap();
        assert!(q.flags.iter().any(|f| f == FLAG_X_BEYOND_T));
        assert!(derive_params_with(1e5, ParamConstants::default(), Some(1e4), Some(10.0)).is_err());
    }

    #[test]
    fn rejects_tiny_t_and_bad_constants() {
        assert!(derive_params(10.0, 10.0, 4.0, 400.0, 80.0).is_err());
        assert!(derive_params(1e50, 4.0, 10.0, 400.0, 80.0).is_err());
        assert!(derive_params(1e50, 10.0, 2.0, 400.0, 80.0).is_err());
    }
}
