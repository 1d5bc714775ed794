use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::batch::Stage;
use crate::characters::{character, CharacterLabel, DirichletCharacter};
use crate::dirichlet_series::params::{derive_params_with, ApproxParams, ParamConstants};
use crate::error::{Error, Result};
use crate::shifts_covariance::ShiftRule;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_FULL_L_BUDGET: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(rename = "K", default = "d_k")]
    pub k: f64,
    #[serde(rename = "K_prime", default = "d_kp")]
    pub k_prime: f64,
    #[serde(rename = "A", default = "d_a")]
    pub a: f64,
    #[serde(rename = "B", default = "d_b")]
    pub b: f64,
    #[serde(rename = "Y_override", default)]
    pub y_override: Option<f64>,
    #[serde(rename = "X_override", default)]
    pub x_override: Option<f64>,
}

fn d_k() -> f64 {
    ParamConstants::default().k
}
fn d_kp() -> f64 {
    ParamConstants::default().k_prime
}
fn d_a() -> f64 {
    ParamConstants::default().a
}
fn d_b() -> f64 {
    ParamConstants::default().b
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig { k: d_k(), k_prime: d_kp(), a: d_a(), b: d_b(), y_override: None, x_override: None }
    }
}

impl ParamsConfig {
    pub fn derive(&self, t: f64) -> Result<ApproxParams> {
        let c = ParamConstants { k: self.k, k_prime: self.k_prime, a: self.a, b: self.b };
        derive_params_with(t, c, self.y_override, self.x_override)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceParams {
    #[serde(rename = "L", default = "one")]
    pub l: f64,
    #[serde(rename = "M", default = "one")]
    pub m: f64,
    /// smoothing radius; log log log T when absent
    #[serde(rename = "R", default)]
    pub r: Option<f64>,
    /// frequency cutoff; (log log log T)^eps1 when absent
    #[serde(rename = "F", default)]
    pub f: Option<f64>,
    #[serde(default = "d_dict")]
    pub dict_size: usize,
    #[serde(default = "d_grid")]
    pub grid_per_axis: usize,
    #[serde(default = "d_eps1")]
    pub eps1: f64,
    #[serde(default = "d_eps2")]
    pub eps2: f64,
    #[serde(default = "d_eps3")]
    pub eps3: f64,
    #[serde(rename = "C2", default = "d_c2")]
    pub c2: f64,
    #[serde(default = "one")]
    pub f_sup: f64,
}

fn one() -> f64 {
    1.0
}
fn d_dict() -> usize {
    200
}
fn d_grid() -> usize {
    21
}
fn d_eps1() -> f64 {
    crate::distance_lab::DEFAULT_EPS1
}
fn d_eps2() -> f64 {
    crate::distance_lab::DEFAULT_EPS2
}
fn d_eps3() -> f64 {
    0.1
}
fn d_c2() -> f64 {
    crate::distance_lab::DEFAULT_C2
}

impl Default for DistanceParams {
    fn default() -> Self {
        DistanceParams {
            l: 1.0,
            m: 1.0,
            r: None,
            f: None,
            dict_size: d_dict(),
            grid_per_axis: d_grid(),
            eps1: d_eps1(),
            eps2: d_eps2(),
            eps3: d_eps3(),
            c2: d_c2(),
            f_sup: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftTolerances {
    /// Δ(T)
    #[serde(default)]
    pub big_delta: f64,
    /// δ(T)
    #[serde(default = "d_delta")]
    pub delta_budget: f64,
    #[serde(default = "d_eps")]
    pub epsilon: f64,
}

fn d_delta() -> f64 {
    1.0
}
fn d_eps() -> f64 {
    0.5
}

impl Default for ShiftTolerances {
    fn default() -> Self {
        ShiftTolerances { big_delta: 0.0, delta_budget: d_delta(), epsilon: d_eps() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    /// weights a_j; all ones when empty
    #[serde(default)]
    pub a: Vec<f64>,
    #[serde(default = "d_kmax")]
    pub k_max: u32,
    /// quadrature nodes; the minimum resolving count when absent
    #[serde(default)]
    pub nodes: Option<usize>,
}

fn d_kmax() -> u32 {
    2
}

impl Default for MomentsConfig {
    fn default() -> Self {
        MomentsConfig { a: Vec::new(), k_max: d_kmax(), nodes: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(rename = "T")]
    pub t: f64,
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// number of coordinates; inferred from `characters` when absent
    #[serde(rename = "N", default)]
    pub n: Option<usize>,
    pub characters: Vec<CharacterLabel>,
    pub shift_rule: ShiftRule,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default = "d_stages")]
    pub stages: Vec<String>,
    #[serde(default)]
    pub distance_params: DistanceParams,
    /// truncation of the L-series in the full-L stages; ⌊T⌋ when absent
    #[serde(rename = "L_cutoff", default)]
    pub l_cutoff: Option<u64>,
    #[serde(default = "d_budget")]
    pub full_l_budget: f64,
    #[serde(default)]
    pub shift_tolerances: ShiftTolerances,
    #[serde(default)]
    pub output_path: Option<String>,
    #[serde(rename = "T_list", default)]
    pub t_list: Vec<f64>,
    #[serde(default)]
    pub moments: MomentsConfig,
    /// (zeta coordinate, L coordinate) pairs; (j, N/2 + j) when empty
    #[serde(default)]
    pub dedekind_pairing: Vec<(usize, usize)>,
    /// stage the Dedekind vectors are built from
    #[serde(default)]
    pub dedekind_stage: Option<String>,
}

fn d_stages() -> Vec<String> {
    ["Q_T", "R_T", "R1_T", "Z_tilde"].iter().map(|s| s.to_string()).collect()
}
fn d_budget() -> f64 {
    DEFAULT_FULL_L_BUDGET
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Self::from_json(&text)
    }

    pub fn dim(&self) -> usize {
        self.characters.len()
    }

    pub fn characters(&self) -> Result<Vec<DirichletCharacter>> {
        self.characters
            .iter()
            .map(|c| character(c.q, c.index).map_err(|e| Error::Config(format!("character ({}, {}): {e}", c.q, c.index))))
            .collect()
    }

    /// Requested stages in chain order.
    pub fn stage_list(&self) -> Result<Vec<Stage>> {
        let mut s: Vec<Stage> = self.stages.iter().map(|x| Stage::parse(x)).collect::<Result<_>>()?;
        s.sort();
        s.dedup();
        Ok(s)
    }

    /// Checks everything that does not need arithmetic at height T.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            return bad(format!("T = {} must be positive and finite", self.t));
        }
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1".into());
        }
        if self.characters.is_empty() {
            return bad("at least one character is required".into());
        }
        if let Some(n) = self.n {
            if n != self.characters.len() {
                return bad(format!("N = {n} but {} characters given", self.characters.len()));
            }
        }
        if self.shift_rule.len() != self.characters.len() {
            return bad(format!("{} shifts for {} characters", self.shift_rule.len(), self.characters.len()));
        }
        self.characters()?;
        let stages = self.stage_list()?;
        if stages.is_empty() {
            return bad("no stages requested".into());
        }
        if stages.contains(&Stage::YT) {
            return bad("Y_T is produced by the dedekind command, not sampled".into());
        }
        let pos: Vec<usize> = stages.iter().map(|s| Stage::CHAIN.iter().position(|c| c == s).expect("chain stage")).collect();
        if pos.windows(2).any(|w| w[1] != w[0] + 1) {
            return bad(format!("stages {:?} are not contiguous in the chain", self.stages));
        }
        if stages.iter().any(|s| s.is_full_l()) {
            for t in std::iter::once(self.t).chain(self.t_list.iter().copied()) {
                if t > self.full_l_budget {
                    return bad(format!("full-L stages need T <= {} (got {t})", self.full_l_budget));
                }
            }
        }
        let d = &self.distance_params;
        if !(d.l >= 0.0 && d.m >= 0.0) || d.dict_size == 0 || d.grid_per_axis == 0 {
            return bad("distance_params need L, M >= 0 and positive dict_size, grid_per_axis".into());
        }
        if !self.moments.a.is_empty() && self.moments.a.len() != self.characters.len() {
            return bad("moments.a must have one weight per character".into());
        }
        if let Some(s) = &self.dedekind_stage {
            Stage::parse(s)?;
        }
        Ok(())
    }

    pub fn with_t(&self, t: f64) -> Self {
        let mut c = self.clone();
        c.t = t;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> String {
        r#"{"schema_version":1,"T":1e5,"n_samples":10,"seed":3,
            "characters":[{"q":5,"index":1},{"q":5,"index":2}],
            "shift_rule":{"rule":"explicit","alphas":[0.0,0.5]},
            "params":{"Y_override":200,"X_override":2000}}"#
            .to_string()
    }

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json(&base()).unwrap();
        assert_eq!(c.dim(), 2);
        assert_eq!(c.stage_list().unwrap(), vec![Stage::QT, Stage::RT, Stage::R1T, Stage::ZTilde]);
        assert_eq!(c.distance_params.l, 1.0);
        assert_eq!(c.params.k, 10.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            base().replace("\"schema_version\":1", "\"schema_version\":2"),
            base().replace("\"n_samples\":10", "\"n_samples\":0"),
            base().replace("[0.0,0.5]", "[0.0]"),
            base().replace("\"index\":2", "\"index\":7"),
            base().replace("\"seed\":3", "\"seed\":3,\"stages\":[\"X_T\",\"Q_T\"]"),
            base().replace("\"T\":1e5", "\"T\":1e7").replace("\"seed\":3", "\"seed\":3,\"stages\":[\"X_T\",\"X0_T\"]"),
            base().replace("\"seed\":3", "\"seed\":3,\"bogus\":1"),
            base().replace("\"seed\":3", "\"seed\":3,\"N\":3"),
        ];
        for c in cases {
            assert!(matches!(ExperimentConfig::from_json(&c), Err(Error::Config(_))), "{c}");
        }
    }
}
