use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pipeline stage tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "X_T")]
    XT,
    #[serde(rename = "X0_T")]
    X0T,
    #[serde(rename = "M_T")]
    MT,
    #[serde(rename = "Q_T")]
    QT,
    #[serde(rename = "R_T")]
    RT,
    #[serde(rename = "R1_T")]
    R1T,
    #[serde(rename = "Z_tilde")]
    ZTilde,
    #[serde(rename = "Y_T")]
    YT,
}

impl Stage {
    pub const CHAIN: [Stage; 7] = [Stage::XT, Stage::X0T, Stage::MT, Stage::QT, Stage::RT, Stage::R1T, Stage::ZTilde];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::XT => "X_T",
            Stage::X0T => "X0_T",
            Stage::MT => "M_T",
            Stage::QT => "Q_T",
            Stage::RT => "R_T",
            Stage::R1T => "R1_T",
            Stage::ZTilde => "Z_tilde",
            Stage::YT => "Y_T",
        }
    }

    pub fn parse(s: &str) -> Result<Stage> {
        Ok(match s {
            "X_T" => Stage::XT,
            "X0_T" => Stage::X0T,
            "M_T" | "M_T_surrogate" => Stage::MT,
            "Q_T" => Stage::QT,
            "R_T" => Stage::RT,
            "R1_T" => Stage::R1T,
            "Z_tilde" => Stage::ZTilde,
            "Y_T" => Stage::YT,
            _ => return Err(Error::Config(format!("unknown stage {s:?}"))),
        })
    }

    pub fn is_full_l(&self) -> bool {
        matches!(self, Stage::XT | Stage::X0T)
    }
}

/// n×N row-major samples of one stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub stage: Stage,
    pub n: usize,
    pub dim: usize,
    pub data: Vec<f64>,
    pub seed: u64,
    /// rows excluded from couplings (e.g. |L| below 1e-12 at the draw)
    #[serde(default)]
    pub flagged: Vec<usize>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl SampleBatch {
    pub fn new(stage: Stage, dim: usize, data: Vec<f64>, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        if data.len() % dim != 0 {
            return Err(Error::Dimension { expected: dim, got: data.len() % dim });
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample {x}")));
        }
        Ok(SampleBatch { stage, n: data.len() / dim, dim, data, seed, flagged: Vec::new(), meta: serde_json::Value::Null })
    }

    pub fn from_rows(stage: Stage, rows: &[Vec<f64>], seed: u64) -> Result<Self> {
        let dim = rows.first().map_or(1, |r| r.len());
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension { expected: dim, got: 0 });
        }
        Self::new(stage, dim, rows.concat(), seed)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.dim + j]).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Sample covariance (divisor n − 1) over unflagged rows.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let rows: Vec<&[f64]> = (0..self.n).filter(|i| !self.flagged.contains(i)).map(|i| self.row(i)).collect();
        let d = self.dim;
        let m = rows.len();
        let mut mean = vec![0.0; d];
        for r in &rows {
            for j in 0..d {
                mean[j] += r[j] / m as f64;
            }
        }
        let mut c = vec![vec![0.0; d]; d];
        for r in &rows {
            for i in 0..d {
                for j in 0..d {
                    c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
                }
            }
        }
        let den = m.saturating_sub(1).max(1) as f64;
        c.iter_mut().flatten().for_each(|x| *x /= den);
        c
    }
}
