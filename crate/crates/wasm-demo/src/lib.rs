//! Browser bindings: covariance builder, R¹_T histogram and a
//! characteristic-function comparison. Every entry point takes and returns JSON.

use serde::{Deserialize, Serialize};
use serde_json::json;
use wasm_bindgen::prelude::*;

use shifted_clt::batch::Stage;
use shifted_clt::characters::CharacterLabel;
use shifted_clt::distance_lab::{cf_empirical, kolmogorov_std_normal};
use shifted_clt::experiments::{sample_chain, ExperimentConfig, Setup};
use shifted_clt::shifts_covariance::ShiftRule;

#[derive(Deserialize)]
struct Request {
    #[serde(rename = "T")]
    t: f64,
    characters: Vec<CharacterLabel>,
    alphas: Vec<f64>,
    #[serde(rename = "Y")]
    y: f64,
    #[serde(default = "d_n")]
    n_samples: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "d_bins")]
    bins: usize,
}

fn d_n() -> usize {
    2000
}
fn d_bins() -> usize {
    30
}

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn config(r: &Request, stages: &[&str]) -> Result<ExperimentConfig, JsValue> {
    let v = json!({
        "schema_version": 1,
        "T": r.t,
        "n_samples": r.n_samples.clamp(1, 50_000),
        "seed": r.seed,
        "characters": r.characters,
        "shift_rule": ShiftRule::Explicit { alphas: r.alphas.clone() },
        "params": { "Y_override": r.y, "X_override": r.y },
        "stages": stages,
    });
    ExperimentConfig::from_json(&v.to_string()).map_err(err)
}

fn parse(input: &str) -> Result<Request, JsValue> {
    serde_json::from_str(input).map_err(err)
}

#[derive(Serialize)]
struct CovarianceOut {
    k: Vec<Vec<f64>>,
    k_tilde: Vec<Vec<f64>>,
    k_pd: bool,
    k_tilde_pd: bool,
    minors: Vec<f64>,
    sigma0: f64,
    warnings: Vec<String>,
}

/// 𝔎 and 𝔎̃(T) with their positive-definiteness verdicts.
#[wasm_bindgen]
pub fn covariance(input: &str) -> Result<String, JsValue> {
    let r = parse(input)?;
    let cfg = config(&r, &["R1_T"])?;
    let out = match Setup::new(&cfg) {
        Ok(s) => {
            let kt = s.k_tilde.expect("built for R1_T");
            CovarianceOut {
                k: s.k_target.matrix,
                k_pd: s.k_target.pd.pd,
                k_tilde: kt.matrix,
                k_tilde_pd: kt.pd.pd,
                minors: kt.pd.minors,
                sigma0: s.params.sigma0,
                warnings: s.shifts.warnings,
            }
        }
        Err(shifted_clt::Error::NotPositiveDefinite { minors }) => CovarianceOut {
            k: Vec::new(),
            k_tilde: Vec::new(),
            k_pd: false,
            k_tilde_pd: false,
            minors,
            sigma0: f64::NAN,
            warnings: vec!["covariance is not positive definite".into()],
        },
        Err(e) => return Err(err(e)),
    };
    serde_json::to_string(&out).map_err(err)
}

/// Histogram of the first R¹_T coordinate with the standard normal density
/// at bin centres and the KS statistic.
#[wasm_bindgen]
pub fn r1_histogram(input: &str) -> Result<String, JsValue> {
    let r = parse(input)?;
    let cfg = config(&r, &["R1_T"])?;
    let chain = sample_chain(&cfg).map_err(err)?;
    let xs = chain.batches[&Stage::R1T].column(0);
    let bins = r.bins.clamp(5, 200);
    let (lo, hi) = (-4.0, 4.0);
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &xs {
        if (lo..hi).contains(&x) {
            counts[((x - lo) / w) as usize] += 1;
        }
    }
    let n = xs.len() as f64;
    let centers: Vec<f64> = (0..bins).map(|i| lo + (i as f64 + 0.5) * w).collect();
    let density: Vec<f64> = counts.iter().map(|&c| c as f64 / (n * w)).collect();
    let normal: Vec<f64> = centers.iter().map(|x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()).collect();
    let ks = kolmogorov_std_normal(&xs).map_err(err)?;
    Ok(json!({ "centers": centers, "density": density, "normal": normal, "ks": ks, "n": xs.len(), "digest": chain.t_digest }).to_string())
}

/// |φ_emp(u) − e^{−u²/2}| along the first coordinate of R¹_T.
#[wasm_bindgen]
pub fn cf_compare(input: &str) -> Result<String, JsValue> {
    let r = parse(input)?;
    let cfg = config(&r, &["R1_T"])?;
    let chain = sample_chain(&cfg).map_err(err)?;
    let b = &chain.batches[&Stage::R1T];
    let us: Vec<f64> = (0..=80).map(|i| i as f64 * 0.05).collect();
    let mut emp_re = Vec::new();
    let mut emp_im = Vec::new();
    let mut gauss = Vec::new();
    let mut sup = 0.0f64;
    for &u in &us {
        let mut v = vec![0.0; b.dim];
        v[0] = u;
        let e = cf_empirical(b, &v).map_err(err)?;
        let g = (-0.5 * u * u).exp();
        sup = sup.max((e - g).norm());
        emp_re.push(e.re);
        emp_im.push(e.im);
        gauss.push(g);
    }
    Ok(json!({ "u": us, "emp_re": emp_re, "emp_im": emp_im, "gauss": gauss, "sup": sup }).to_string())
}
