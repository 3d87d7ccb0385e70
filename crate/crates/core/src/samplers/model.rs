use serde::{Deserialize, Serialize};

use super::{attain_kappa, block_spearman_attain, gaussian_factor, sample_gaussian, RngStream, SamplerError};
use crate::bern::BernCertificate;
use crate::block::{expand, BlockSpec};
use crate::hierarchy::{hac_sample, HacModel};
use crate::matrix::{CandidateMatrix, Matrix};
use crate::measure::Measure;
use crate::sample::SampleMatrix;
use crate::transforms::QuantileTransform;

/// Format version written into serialized models.
pub const MODEL_VERSION: u32 = 1;

/// How an [`AttainmentModel`] generates samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Mixture of two-point Bernoulli vectors pushed through `G⁻¹`.
    BernMixture { certificate: BernCertificate, margin: QuantileTransform },
    /// Multivariate normal with covariance `factor · factorᵀ`.
    Gaussian { factor: Matrix },
    /// Grouped construction over an inner Bernoulli certificate for `M`.
    BlockSpearman { spec: BlockSpec, certificate: BernCertificate },
    /// Nested Archimedean copula.
    Hac { model: HacModel },
}

/// A sampler together with the matrix it attains for one measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttainmentModel {
    pub version: u32,
    pub measure: Measure,
    pub target: CandidateMatrix,
    #[serde(flatten)]
    pub kind: ModelKind,
}

impl AttainmentModel {
    pub fn bern_mixture(measure: Measure, certificate: BernCertificate, margin: QuantileTransform) -> Self {
        let target =
            CandidateMatrix::validate(&certificate.reconstruct(), 1e-9).expect("mixture of correlation matrices");
        Self { version: MODEL_VERSION, measure, target, kind: ModelKind::BernMixture { certificate, margin } }
    }

    pub fn gaussian(target: CandidateMatrix) -> Result<Self, SamplerError> {
        let factor = gaussian_factor(&target)?;
        Ok(Self { version: MODEL_VERSION, measure: Measure::Waerden, target, kind: ModelKind::Gaussian { factor } })
    }

    pub fn block_spearman(spec: BlockSpec, certificate: BernCertificate) -> Result<Self, SamplerError> {
        super::check_inner(&spec, &certificate)?;
        super::block_lambdas(&spec)?;
        let target = expand(&spec);
        Ok(Self {
            version: MODEL_VERSION,
            measure: Measure::Spearman,
            target,
            kind: ModelKind::BlockSpearman { spec, certificate },
        })
    }

    pub fn hac(model: HacModel) -> Self {
        let target = model.tree().to_matrix();
        Self { version: MODEL_VERSION, measure: model.measure(), target, kind: ModelKind::Hac { model } }
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn sample(&self, n: usize, rng: &RngStream) -> Result<SampleMatrix, SamplerError> {
        match &self.kind {
            ModelKind::BernMixture { certificate, margin } => attain_kappa(certificate, margin, n, rng),
            ModelKind::Gaussian { factor } => Ok(sample_gaussian(factor, n, rng)),
            ModelKind::BlockSpearman { spec, certificate } => block_spearman_attain(spec, certificate, n, rng),
            ModelKind::Hac { model } => Ok(hac_sample(model, n, rng)),
        }
    }
}
