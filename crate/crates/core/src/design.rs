//! Designed schemes and their JSON representation.

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::pam::bler_theory;
use crate::scheme::{combiners, powers, Combiners, LinearScheme};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A scheme together with the quantities it was designed for.
#[derive(Clone, Debug)]
pub struct DesignSolution {
    pub cfg: ChannelConfig,
    pub k1: usize,
    pub k2: usize,
    pub scheme: LinearScheme,
    pub combiners: Combiners,
    pub eta1: f64,
    pub eta2: f64,
    pub alpha: f64,
    pub power1: f64,
    pub power2: f64,
    /// Per-user energy budget over the block; N·P unless overridden.
    pub budget: f64,
    pub predicted_bler1: f64,
    pub predicted_bler2: f64,
    pub seed: u64,
}

impl DesignSolution {
    /// Fills in combiners, powers and predicted error rates from the scheme.
    #[allow(clippy::too_many_arguments)]
    pub fn from_scheme(
        cfg: ChannelConfig,
        k1: usize,
        k2: usize,
        scheme: LinearScheme,
        eta1: f64,
        eta2: f64,
        alpha: f64,
        budget: f64,
        seed: u64,
    ) -> Result<Self> {
        let combiners = combiners(&scheme, &cfg)?;
        let (power1, power2) = powers(&scheme, &cfg);
        Ok(Self {
            cfg,
            k1,
            k2,
            scheme,
            combiners,
            eta1,
            eta2,
            alpha,
            power1,
            power2,
            budget,
            predicted_bler1: bler_theory(k1, eta1),
            predicted_bler2: bler_theory(k2, eta2),
            seed,
        })
    }

    pub fn max_power(&self) -> f64 {
        self.power1.max(self.power2)
    }

    pub fn predicted_sum_bler(&self) -> f64 {
        self.predicted_bler1 + self.predicted_bler2
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DesignDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: DesignDoc = serde_json::from_str(s)?;
        doc.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DesignMeta {
    pub tool_version: String,
    pub seed: u64,
}

/// On-disk layout of a design. Floats are written in shortest round-trip form.
#[derive(Debug, Serialize, Deserialize)]
pub struct DesignDoc {
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub p: f64,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub f1_rowmajor: Vec<f64>,
    pub f2_rowmajor: Vec<f64>,
    pub eta1: f64,
    pub eta2: f64,
    pub alpha: f64,
    pub power1: f64,
    pub power2: f64,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default)]
    pub restricted: bool,
    pub meta: DesignMeta,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

impl From<&DesignSolution> for DesignDoc {
    fn from(d: &DesignSolution) -> Self {
        Self {
            n: d.cfg.n,
            k1: d.k1,
            k2: d.k2,
            sigma1_sq: d.cfg.sigma1_sq,
            sigma2_sq: d.cfg.sigma2_sq,
            p: d.cfg.p,
            g1: d.scheme.g1.iter().copied().collect(),
            g2: d.scheme.g2.iter().copied().collect(),
            f1_rowmajor: row_major(&d.scheme.f1),
            f2_rowmajor: row_major(&d.scheme.f2),
            eta1: d.eta1,
            eta2: d.eta2,
            alpha: d.alpha,
            power1: d.power1,
            power2: d.power2,
            w1: d.combiners.w1.iter().copied().collect(),
            w2: d.combiners.w2.iter().copied().collect(),
            budget: Some(d.budget),
            restricted: d.scheme.is_restricted(),
            meta: DesignMeta {
                tool_version: crate::TOOL_VERSION.to_string(),
                seed: d.seed,
            },
        }
    }
}

impl TryFrom<DesignDoc> for DesignSolution {
    type Error = Error;

    fn try_from(doc: DesignDoc) -> Result<Self> {
        let n = doc.n;
        let bad = |what: &str| Error::Data(format!("design field {what} has the wrong length"));
        if doc.g1.len() != n || doc.w1.len() != n {
            return Err(bad("g1/w1"));
        }
        if doc.g2.len() != n || doc.w2.len() != n {
            return Err(bad("g2/w2"));
        }
        if doc.f1_rowmajor.len() != n * n || doc.f2_rowmajor.len() != n * n {
            return Err(bad("f1_rowmajor/f2_rowmajor"));
        }
        if doc.k1 == 0 || doc.k2 == 0 {
            return Err(Error::Data("k1 and k2 must be positive".into()));
        }
        let cfg = ChannelConfig::new(doc.sigma1_sq, doc.sigma2_sq, n, doc.p)
            .map_err(|e| Error::Data(e.to_string()))?;
        let scheme = LinearScheme::new(
            DVector::from_vec(doc.g1),
            DVector::from_vec(doc.g2),
            DMatrix::from_row_slice(n, n, &doc.f1_rowmajor),
            DMatrix::from_row_slice(n, n, &doc.f2_rowmajor),
        )
        .map_err(|e| Error::Data(e.to_string()))?;
        let scheme = if doc.restricted {
            scheme
                .into_restricted()
                .map_err(|e| Error::Data(e.to_string()))?
        } else {
            scheme
        };
        let budget = doc.budget.unwrap_or(n as f64 * doc.p);
        DesignSolution::from_scheme(
            cfg,
            doc.k1,
            doc.k2,
            scheme,
            doc.eta1,
            doc.eta2,
            doc.alpha,
            budget,
            doc.meta.seed,
        )
        .map_err(|e| Error::Data(e.to_string()))
    }
}
