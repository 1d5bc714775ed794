use std::collections::BTreeMap;

use num_complex::Complex64;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::arith::CompSumC;
use crate::batch::{SampleBatch, Stage};
use crate::characters::DirichletCharacter;
use crate::dirichlet_series::params::ApproxParams;
use crate::dirichlet_series::phase::Height;
use crate::dirichlet_series::poly::{PrimeBasis, TruncatedL};
use crate::error::{Error, Result};
use crate::gaussian::{sample_mvn, GaussianSpec};
use crate::par;
use crate::rng::{stream, PURPOSE_T_DRAWS};
use crate::shifts_covariance::{build_k, build_k_tilde, normalizer, CovarianceSide, Normalizer, ShiftConfig};

/// |L| below this at a draw flags the row.
pub const NEAR_ZERO: f64 = 1e-12;

/// Everything fixed before sampling.
pub struct Setup {
    pub params: ApproxParams,
    pub shifts: ShiftConfig,
    pub chars: Vec<DirichletCharacter>,
    pub basis: PrimeBasis,
    pub stages: Vec<Stage>,
    pub k_target: CovarianceSide,
    pub k_tilde: Option<CovarianceSide>,
    pub normalizers: Vec<Normalizer>,
    pub l_cutoff: u64,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let t = config.t;
        let params = config.params.derive(t)?;
        let chars = config.characters()?;
        let tol = &config.shift_tolerances;
        let shifts = ShiftConfig::new(config.shift_rule.alphas(t), t, tol.big_delta, tol.delta_budget, tol.epsilon)?;
        let stages = config.stage_list()?;
        let k_target = build_k(&shifts, &chars)?;
        if !k_target.pd.pd {
            return Err(Error::NotPositiveDefinite { minors: k_target.pd.minors.clone() });
        }
        let l_cutoff = config.l_cutoff.unwrap_or(t.floor() as u64).max(1);
        let needs = |s: Stage| stages.contains(&s);
        let mut limit = 0.0f64;
        if needs(Stage::XT) || needs(Stage::X0T) {
            limit = limit.max(l_cutoff as f64);
        }
        if needs(Stage::MT) || needs(Stage::QT) || needs(Stage::RT) {
            limit = limit.max(params.x_eff());
        }
        let want_p1 = needs(Stage::R1T) || needs(Stage::ZTilde);
        if want_p1 {
            limit = limit.max(params.y_eff());
        }
        let basis = PrimeBasis::new(limit.floor().max(2.0) as u64)?;
        let (normalizers, k_tilde) = if want_p1 {
            let n: Vec<Normalizer> = chars.iter().map(|c| normalizer(&basis, c, &params)).collect::<Result<_>>()?;
            let kt = build_k_tilde(&basis, &shifts, &chars, &params)?;
            if !kt.pd.pd {
                return Err(Error::NotPositiveDefinite { minors: kt.pd.minors.clone() });
            }
            (n, Some(kt))
        } else {
            (Vec::new(), None)
        };
        Ok(Setup { params, shifts, chars, basis, stages, k_target, k_tilde, normalizers, l_cutoff })
    }
}

pub struct Chain {
    pub batches: BTreeMap<Stage, SampleBatch>,
    /// sha-256 over the t-draws, shared by every stage
    pub t_digest: String,
    pub setup: Setup,
}

/// t_i uniform on [T, 2T), one stream per row.
pub fn t_draws(seed: u64, t: f64, n: usize) -> Result<Vec<Height>> {
    let lo = Height::from_f64(t)?;
    par::map(n, |i| Height::uniform(&lo, &lo, &mut stream(seed, PURPOSE_T_DRAWS, i as u64))).into_iter().collect()
}

pub fn digest(draws: &[Height]) -> String {
    let mut h = Sha256::new();
    for d in draws {
        h.update(d.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// [P₀, P₁, P₂] and 𝒫 over (0, X] at σ + i·s, sharing one set of prime phasors.
pub fn prime_values(
    basis: &PrimeBasis,
    chi: &DirichletCharacter,
    sigma: f64,
    s: &Height,
    params: &ApproxParams,
) -> ([Complex64; 3], Complex64) {
    let y = params.y_eff();
    let x = params.x_eff();
    let mut parts = [CompSumC::new(), CompSumC::new(), CompSumC::new()];
    let mut lam = CompSumC::new();
    for i in basis.table.range(0.0, x) {
        let p = basis.table.primes[i];
        let v = chi.evaluate_u(p);
        if v.re == 0.0 && v.im == 0.0 {
            continue;
        }
        let pf = p as f64;
        let z = v * basis.phasor(i, s) * (-sigma * basis.table.log_p[i]).exp();
        let slot = if pf <= 13.0 {
            0
        } else if pf <= y {
            1
        } else {
            2
        };
        parts[slot].add(z);
        let (mut pk, mut zk, mut k) = (pf, z, 1.0);
        while pk <= x {
            lam.add(zk / k);
            pk *= pf;
            zk *= z;
            k += 1.0;
        }
    }
    ([parts[0].value(), parts[1].value(), parts[2].value()], lam.value())
}

struct RowOut {
    vals: Vec<Vec<f64>>,
    near_zero: bool,
}

pub fn sample_chain(config: &ExperimentConfig) -> Result<Chain> {
    let setup = Setup::new(config)?;
    let n = config.n_samples;
    let dim = config.dim();
    let draws = t_draws(config.seed, config.t, n)?;
    let t_digest = digest(&draws);
    let stages = setup.stages.clone();
    let sampled: Vec<Stage> = stages.iter().copied().filter(|s| *s != Stage::ZTilde).collect();
    let full_l = sampled.iter().any(|s| s.is_full_l());
    let half = (0.5 * setup.params.ll()).sqrt();
    let sigma0 = setup.params.sigma0;
    let tl = if full_l { Some(TruncatedL::new(setup.l_cutoff, &[0.5, sigma0])?) } else { None };
    let need_primes = sampled.iter().any(|s| matches!(s, Stage::MT | Stage::QT | Stage::RT | Stage::R1T));
    let norm1: Vec<f64> = setup.normalizers.iter().map(|m| (0.5 * m.m).sqrt()).collect();
    let s = &setup;
    let rows: Vec<Result<RowOut>> = par::map(n, |i| {
        let mut vals = vec![Vec::with_capacity(dim); sampled.len()];
        let mut near_zero = false;
        let mut scratch = Vec::new();
        for j in 0..dim {
            let h = draws[i].add_f64(s.shifts.alphas[j])?;
            let chi = &s.chars[j];
            let lv = match &tl {
                Some(l) => l.eval(&s.basis, chi, &h, &mut scratch)?,
                None => Vec::new(),
            };
            let pv = if need_primes { Some(prime_values(&s.basis, chi, sigma0, &h, &s.params)) } else { None };
            for (k, st) in sampled.iter().enumerate() {
                let v = match st {
                    Stage::XT | Stage::X0T => {
                        let z = lv[if *st == Stage::XT { 0 } else { 1 }];
                        let mut a = z.norm();
                        if a < NEAR_ZERO {
                            near_zero = true;
                            a = NEAR_ZERO;
                        }
                        a.ln() / half
                    }
                    Stage::MT | Stage::QT => pv.expect("primes").1.re / half,
                    Stage::RT => {
                        let p = pv.expect("primes").0;
                        (p[0].re + p[1].re + p[2].re) / half
                    }
                    Stage::R1T => pv.expect("primes").0[1].re / norm1[j],
                    Stage::ZTilde | Stage::YT => unreachable!(),
                };
                vals[k].push(v);
            }
        }
        Ok(RowOut { vals, near_zero })
    });
    let rows: Vec<RowOut> = rows.into_iter().collect::<Result<_>>()?;
    let flagged: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| r.near_zero).map(|(i, _)| i).collect();
    let meta = |st: Stage| {
        json!({
            "stage": st.name(),
            "T": config.t,
            "N": dim,
            "t_digest": t_digest,
            "sigma0": sigma0,
            "Y": s.params.y_eff(),
            "X": s.params.x_eff(),
        })
    };
    let mut batches = BTreeMap::new();
    for (k, st) in sampled.iter().enumerate() {
        let data: Vec<f64> = rows.iter().flat_map(|r| r.vals[k].iter().copied()).collect();
        let mut b = SampleBatch::new(*st, dim, data, config.seed)?;
        if st.is_full_l() {
            b.flagged = flagged.clone();
        }
        b.meta = meta(*st);
        batches.insert(*st, b);
    }
    if let (Some(m), Some(q)) = (batches.get(&Stage::MT), batches.get(&Stage::QT)) {
        // surrogate mode: both stages are Re 𝒫 / sqrt(½ log log T)
        assert_eq!(m.data, q.data);
    }
    if stages.contains(&Stage::ZTilde) {
        let kt = setup.k_tilde.as_ref().expect("k_tilde computed when Z_tilde requested");
        let spec = GaussianSpec::new(kt.dmatrix())?;
        let mut b = sample_mvn(&spec, n, config.seed)?;
        b.meta = meta(Stage::ZTilde);
        batches.insert(Stage::ZTilde, b);
    }
    Ok(Chain { batches, t_digest, setup })
}

/// Y_j = (x_z + x_L)·sqrt(½ log log T)/sqrt(log log T) for each (z, L) pair.
pub fn dedekind_vectors(batch: &SampleBatch, pairing: &[(usize, usize)]) -> Result<SampleBatch> {
    if pairing.is_empty() {
        return Err(Error::Config("empty Dedekind pairing".into()));
    }
    let mut seen = vec![false; batch.dim];
    for &(a, b) in pairing {
        if a >= batch.dim || b >= batch.dim || a == b || seen[a] || seen[b] {
            return Err(Error::Config(format!("invalid Dedekind pair ({a}, {b}) for {} coordinates", batch.dim)));
        }
        seen[a] = true;
        seen[b] = true;
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut data = Vec::with_capacity(batch.n * pairing.len());
    for i in 0..batch.n {
        let r = batch.row(i);
        data.extend(pairing.iter().map(|&(a, b)| (r[a] + r[b]) * scale));
    }
    let mut out = SampleBatch::new(Stage::YT, pairing.len(), data, batch.seed)?;
    out.flagged = batch.flagged.clone();
    out.meta = json!({ "stage": "Y_T", "from": batch.stage.name(), "pairing": pairing });
    Ok(out)
}

/// Default pairing (j, N + j) after checking principal/quadratic layout and matched shifts.
pub fn dedekind_pairing(setup: &Setup, explicit: &[(usize, usize)]) -> Result<Vec<(usize, usize)>> {
    let dim = setup.chars.len();
    let pairing: Vec<(usize, usize)> = if explicit.is_empty() {
        if dim % 2 != 0 {
            return Err(Error::Config(format!("Dedekind mode needs 2N coordinates, got {dim}")));
        }
        (0..dim / 2).map(|j| (j, dim / 2 + j)).collect()
    } else {
        explicit.to_vec()
    };
    for &(z, l) in &pairing {
        if z >= dim || l >= dim {
            return Err(Error::Config(format!("Dedekind pair ({z}, {l}) out of range")));
        }
        if !setup.chars[z].is_principal() {
            return Err(Error::Config(format!("coordinate {z} must carry a principal character")));
        }
        let c = &setup.chars[l];
        if c.is_principal() || !c.is_real() {
            return Err(Error::Config(format!("coordinate {l} must carry a quadratic character")));
        }
        if setup.shifts.alphas[z] != setup.shifts.alphas[l] {
            return Err(Error::Config(format!("coordinates {z} and {l} need equal shifts")));
        }
    }
    Ok(pairing)
}

/// 𝔔 with unit diagonal and ½c_ij(Δ_ij + 1) off it, Δ_ij = [χ_{K_i} χ̄_{K_j} principal].
pub fn dedekind_covariance(setup: &Setup, pairing: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let n = pairing.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        let (li, lj) = (pairing[i].1, pairing[j].1);
                        let delta = crate::characters::pair_delta(&setup.chars[li], &setup.chars[lj]) as f64;
                        0.5 * setup.shifts.c(pairing[i].0, pairing[j].0) * (delta + 1.0)
                    }
                })
                .collect()
        })
        .collect()
}
