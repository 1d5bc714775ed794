use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipeline::{sample_chain, Chain, Setup};
use crate::batch::Stage;
use crate::dirichlet_series::params::{ll, lll};
use crate::distance_lab::{
    abb_certificate, bl_dictionary_lower, cf_sup_on_grid, coupling_l1_upper, kolmogorov_std_normal, BlReference,
    BoundParams, DistanceReport, EstimatorKind, FLAG_UNNORMALIZED,
};
use crate::error::{Error, Result};
use crate::gaussian::{density_diff, two_sided_tail, DensityRegion, GaussianSpec};
use crate::moment_oracle::{quad_moment, required_nodes, MomentReport};

/// Rate shape attached to a consecutive pair of stages.
pub fn theory_shape(a: Stage, b: Stage, t: f64, config: &ExperimentConfig) -> Option<f64> {
    let (l2, l3) = (ll(t), lll(t));
    let d = &config.distance_params;
    let n = config.dim() as f64;
    let ratio = config.params.k / config.params.k_prime;
    let v = match (a, b) {
        (Stage::XT, Stage::X0T) => d.l * n * l3 * l3 / l2.sqrt(),
        (Stage::X0T, Stage::MT) => d.l * n / l2.sqrt() + d.m * n * l2.powf(-ratio),
        (Stage::MT, Stage::QT) => n * (d.l + d.m) * l2.powf(-80.0),
        (Stage::QT, Stage::RT) => d.l * n / l2.sqrt(),
        (Stage::RT, Stage::R1T) => d.l * n.sqrt() * (1.0 + l3).max(0.0).sqrt() / l2.sqrt(),
        (Stage::R1T, Stage::ZTilde) => {
            if l3 <= 0.0 {
                return None;
            }
            let e = d.eps1 + d.eps2;
            d.l / l3.powf(d.eps1) + d.m * l3.powf(n * e) * (-0.5 * l3.powf(e)).exp()
        }
        _ => return None,
    };
    v.is_finite().then_some(v)
}

/// Z̃ against the limiting Gaussian: M (log log T)^{−1+ε+ε₃}.
pub fn gaussian_swap_shape(t: f64, config: &ExperimentConfig) -> f64 {
    config.distance_params.m * ll(t).powf(-1.0 + config.shift_tolerances.epsilon + config.distance_params.eps3)
}

fn tag(mut r: DistanceReport, t: f64, shape: Option<f64>) -> DistanceReport {
    r.t = Some(t);
    r.theory_shape = shape;
    r
}

/// Distance rows for every consecutive stage pair of a sampled chain.
pub fn stage_distance_table(chain: &Chain, config: &ExperimentConfig) -> Result<Vec<DistanceReport>> {
    let stages: Vec<Stage> = chain.batches.keys().copied().collect();
    if stages.len() < 2 {
        return Err(Error::Config("a distance table needs at least two stages".into()));
    }
    let t = config.t;
    let d = &config.distance_params;
    let seed = config.seed;
    let mut out = Vec::new();
    for w in stages.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (xa, xb) = (&chain.batches[&a], &chain.batches[&b]);
        let shape = theory_shape(a, b, t, config);
        if b == Stage::ZTilde {
            out.extend(gaussian_rows(chain, config, xa)?);
            continue;
        }
        out.push(tag(coupling_l1_upper(xa, xb, d.l)?, t, shape));
        out.push(tag(bl_dictionary_lower(xa, BlReference::Batch(xb), d.l, d.m, d.dict_size, seed)?, t, shape));
    }
    if stages.contains(&Stage::ZTilde) {
        out.push(density_row(&chain.setup, config)?);
    }
    for st in &stages {
        let b = &chain.batches[st];
        for j in 0..b.dim {
            let col: Vec<f64> = (0..b.n).filter(|i| !b.flagged.contains(i)).map(|i| b.row(i)[j]).collect();
            if col.is_empty() {
                continue;
            }
            let mut r = DistanceReport::new(&format!("{}[{}]", st.name(), j + 1), "N(0,1)", EstimatorKind::Ks1d, kolmogorov_std_normal(&col)?, 1.36 / (col.len() as f64).sqrt(), seed);
            r.t = Some(t);
            out.push(r);
        }
    }
    Ok(out)
}

/// R¹_T against N(0, 𝔎̃): CF grid, smoothing certificate and cone lower bound.
fn gaussian_rows(chain: &Chain, config: &ExperimentConfig, r1: &crate::batch::SampleBatch) -> Result<Vec<DistanceReport>> {
    let t = config.t;
    let d = &config.distance_params;
    let kt = chain.setup.k_tilde.as_ref().ok_or_else(|| Error::Config("Z_tilde needs the P1 covariance".into()))?;
    let spec = GaussianSpec::new(kt.dmatrix())?;
    let n = r1.dim;
    let l3 = lll(t);
    let bp = BoundParams::new(t, 1.0, d.c2, d.eps1, d.eps2).ok();
    let r = d.r.or(bp.map(|b| b.r_choice())).unwrap_or(1.0);
    let f = d.f.or(bp.map(|b| b.f_choice())).unwrap_or(1.0);
    let shape = theory_shape(r1.stage, Stage::ZTilde, t, config);
    let cf = cf_sup_on_grid(r1, &spec, f, d.grid_per_axis)?;
    let mut rows = Vec::new();
    let mut cfr = DistanceReport::new(r1.stage.name(), Stage::ZTilde.name(), EstimatorKind::CfGrid, cf.sup, 1.0 / (r1.n as f64).sqrt(), config.seed);
    cfr.f = Some(f);
    cfr.flags.push(format!("grid_points={}", cf.grid_points));
    rows.push(tag(cfr, t, shape));
    // tails: empirical P(max_j |x_j| > R) and the Gaussian union bound
    let tail_mu = (0..r1.n).filter(|&i| r1.row(i).iter().any(|x| x.abs() > r)).count() as f64 / r1.n as f64;
    let tail_nu = (n as f64 * two_sided_tail(r)).min(1.0);
    let v = abb_certificate(d.l, d.m, r, f, cf.sup, tail_mu, tail_nu, n as u32)?;
    let mut abb = DistanceReport::new(r1.stage.name(), Stage::ZTilde.name(), EstimatorKind::AbbCertificate, v, 0.0, config.seed);
    abb.l = Some(d.l);
    abb.m = Some(d.m);
    abb.r = Some(r);
    abb.f = Some(f);
    abb.flags.push(FLAG_UNNORMALIZED.to_string());
    if l3 <= 1.0 {
        abb.flags.push("asymptotically-invalid".to_string());
    }
    rows.push(tag(abb, t, shape));
    let bl = bl_dictionary_lower(r1, BlReference::Gaussian { spec: &spec, mean: None, n_ref: r1.n.max(10_000) }, d.l, d.m, d.dict_size, config.seed)?;
    let mut bl = tag(bl, t, shape);
    bl.stage_b = Stage::ZTilde.name().to_string();
    rows.push(bl);
    Ok(rows)
}

fn density_row(setup: &Setup, config: &ExperimentConfig) -> Result<DistanceReport> {
    let t = config.t;
    let c = setup.k_target.dmatrix();
    let kt = setup.k_tilde.as_ref().ok_or_else(|| Error::Config("Z_tilde needs the P1 covariance".into()))?.dmatrix();
    let e = &kt - &c;
    let region = DensityRegion { seed: config.seed, ..Default::default() };
    let mut r = match density_diff(&c, &e, config.distance_params.f_sup, &region) {
        Ok(dd) => {
            let mut r = DistanceReport::new(Stage::ZTilde.name(), "X_tilde", EstimatorKind::DensityDiff, dd.numeric_integral, dd.std_error, config.seed);
            r.flags.push(format!("bound={}", super::io::format_f64(dd.bound_shape)));
            if !dd.bound_valid {
                r.flags.push("bound-outside-validity".into());
            }
            r
        }
        Err(Error::Inadmissible(x)) => {
            let mut r = DistanceReport::new(Stage::ZTilde.name(), "X_tilde", EstimatorKind::DensityDiff, f64::INFINITY, 0.0, config.seed);
            r.flags.push(format!("inadmissible={}", super::io::format_f64(x)));
            r
        }
        Err(e) => return Err(e),
    };
    r.m = Some(config.distance_params.m);
    r.t = Some(t);
    r.theory_shape = Some(gaussian_swap_shape(t, config));
    Ok(r)
}

/// One row of a rate sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub pair_a: String,
    pub pair_b: String,
    pub estimator: String,
    pub value: f64,
    pub uncertainty: f64,
    pub theory_shape: Option<f64>,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub flags: Vec<String>,
}

fn limit_shape_rows(t: f64, config: &ExperimentConfig) -> Vec<RateRow> {
    let d = &config.distance_params;
    let (l2, l3) = (ll(t), lll(t));
    let row = |est: &str, v: f64| RateRow {
        t,
        pair_a: "X_T".into(),
        pair_b: "X_tilde".into(),
        estimator: est.into(),
        value: v,
        uncertainty: 0.0,
        theory_shape: Some(v),
        l: d.l,
        m: d.m,
        n: config.dim(),
        seed: config.seed,
        flags: vec!["theory".into()],
    };
    vec![
        row("theory_lll_pow", l3.powf(-d.eps1)),
        row("theory_exp", (-0.5 * l3.powf(d.eps1 + d.eps2)).exp()),
        row("theory_identity", l3 * l3 / l2.sqrt()),
    ]
}

/// Samples and tabulates every T in turn; failures become status rows.
pub fn rate_sweep(config: &ExperimentConfig, t_list: &[f64]) -> Result<Vec<RateRow>> {
    if t_list.is_empty() {
        return Err(Error::Config("T_list is empty".into()));
    }
    let d = &config.distance_params;
    let mut rows = Vec::new();
    for &t in t_list {
        let c = config.with_t(t);
        let res = sample_chain(&c).and_then(|ch| {
            let mut reps = stage_distance_table(&ch, &c)?;
            let c_flags = ch.setup.shifts.warnings.clone();
            for r in &mut reps {
                r.flags.extend(c_flags.iter().cloned());
            }
            Ok(reps)
        });
        match res {
            Ok(reps) => {
                for r in reps {
                    rows.push(RateRow {
                        t,
                        pair_a: r.stage_a,
                        pair_b: r.stage_b,
                        estimator: r.estimator.name().to_string(),
                        value: r.value,
                        uncertainty: r.uncertainty,
                        theory_shape: r.theory_shape,
                        l: d.l,
                        m: d.m,
                        n: c.dim(),
                        seed: c.seed,
                        flags: r.flags,
                    });
                }
            }
            Err(e) => rows.push(RateRow {
                t,
                pair_a: String::new(),
                pair_b: String::new(),
                estimator: "error".into(),
                value: f64::NAN,
                uncertainty: f64::NAN,
                theory_shape: None,
                l: d.l,
                m: d.m,
                n: c.dim(),
                seed: c.seed,
                flags: vec![format!("status=error: {e}")],
            }),
        }
        rows.extend(limit_shape_rows(t, &c));
    }
    Ok(rows)
}

/// Quadrature moments for all 0 ≤ k, l ≤ k_max at the config's T.
pub fn moment_table(config: &ExperimentConfig) -> Result<Vec<MomentReport>> {
    config.validate()?;
    let t = config.t;
    let params = config.params.derive(t)?;
    let chars = config.characters()?;
    let tol = &config.shift_tolerances;
    let shifts = crate::shifts_covariance::ShiftConfig::new(config.shift_rule.alphas(t), t, tol.big_delta, tol.delta_budget, tol.epsilon)?;
    let a = if config.moments.a.is_empty() { vec![1.0; chars.len()] } else { config.moments.a.clone() };
    let basis = crate::dirichlet_series::poly::PrimeBasis::new(params.y_eff().floor().max(2.0) as u64)?;
    let km = config.moments.k_max;
    let mut out = Vec::new();
    for k in 0..=km {
        for l in 0..=km {
            let nodes = config.moments.nodes.unwrap_or_else(|| required_nodes(t, params.y_eff(), k, l));
            out.push(quad_moment(&basis, &a, &shifts, &chars, &params, k, l, nodes)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"schema_version":1,"T":1e4,"n_samples":300,"seed":5,
            "characters":[{"q":5,"index":1},{"q":5,"index":2}],
            "shift_rule":{"rule":"explicit","alphas":[0.0,0.3]},
            "params":{"Y_override":100,"X_override":1000},
            "L_cutoff":1000,
            "distance_params":{"dict_size":20,"grid_per_axis":5},
            "stages":["X_T","X0_T","M_T","Q_T","R_T","R1_T","Z_tilde"]}"#,
        )
        .unwrap()
    }

    #[test]
    fn table_covers_every_pair() {
        let c = cfg();
        let chain = sample_chain(&c).unwrap();
        let rows = stage_distance_table(&chain, &c).unwrap();
        let has = |a: &str, b: &str, e: EstimatorKind| rows.iter().any(|r| r.stage_a == a && r.stage_b == b && r.estimator == e);
        assert!(has("X_T", "X0_T", EstimatorKind::CouplingL1));
        assert!(has("M_T", "Q_T", EstimatorKind::BlLower));
        assert!(has("R1_T", "Z_tilde", EstimatorKind::AbbCertificate));
        assert!(has("R1_T", "Z_tilde", EstimatorKind::CfGrid));
        assert!(has("Z_tilde", "X_tilde", EstimatorKind::DensityDiff));
        // surrogate M_T equals Q_T, so that pair is exactly zero
        let mq: Vec<_> = rows.iter().filter(|r| r.stage_a == "M_T" && r.stage_b == "Q_T").collect();
        assert!(mq.iter().all(|r| r.value == 0.0));
        for r in &rows {
            assert!(r.value >= 0.0, "{r:?}");
        }
        let qr = rows.iter().find(|r| r.stage_a == "Q_T" && r.estimator == EstimatorKind::CouplingL1).unwrap();
        assert!(qr.value > 0.0 && qr.theory_shape.unwrap() > 0.0);
    }

    #[test]
    fn coupling_adds_over_coordinates() {
        let two = ExperimentConfig { stages: vec!["Q_T".into(), "R_T".into()], ..cfg() };
        let mut one = two.clone();
        one.characters.truncate(1);
        one.shift_rule = crate::shifts_covariance::ShiftRule::Explicit { alphas: vec![0.0] };
        let mut other = two.clone();
        other.characters.remove(0);
        other.shift_rule = crate::shifts_covariance::ShiftRule::Explicit { alphas: vec![0.3] };
        let v = |c: &ExperimentConfig| {
            let ch = sample_chain(c).unwrap();
            stage_distance_table(&ch, c).unwrap().into_iter().find(|r| r.estimator == EstimatorKind::CouplingL1).unwrap().value
        };
        assert!((v(&two) - v(&one) - v(&other)).abs() < 1e-12);
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let c = ExperimentConfig { stages: vec!["Q_T".into(), "R_T".into()], n_samples: 50, ..cfg() };
        let rows = rate_sweep(&c, &[1e4, 10.0, 2e4]).unwrap();
        assert!(rows.iter().any(|r| r.t == 10.0 && r.estimator == "error"));
        assert!(rows.iter().any(|r| r.t == 2e4 && r.estimator == "coupling_l1"));
        assert_eq!(rows.iter().filter(|r| r.estimator == "theory_exp").count(), 3);
    }

    #[test]
    fn moments_zero_zero_is_one() {
        let mut c = cfg();
        c.moments.k_max = 1;
        c.params.y_override = Some(30.0);
        let m = moment_table(&c).unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m[0].quad_re, 1.0);
        for r in &m {
            if r.k == r.l {
                assert!((r.quad_re - r.formula).abs() <= r.budget, "{r:?}");
            }
        }
    }
}
