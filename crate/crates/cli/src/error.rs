use concord::bern::BernError;
use concord::block::BlockError;
use concord::hierarchy::HierarchyError;
use concord::samplers::SamplerError;

/// A failure that ends the command with exit code 2 (usage or input) or 3
/// (numerical).
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }

    pub fn numerical(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 3, error: error.into() }
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<BernError> for CliError {
    fn from(e: BernError) -> Self {
        match e {
            BernError::NumericalFailure(_) => Self::numerical(e),
            _ => Self::usage(e),
        }
    }
}

impl From<BlockError> for CliError {
    fn from(e: BlockError) -> Self {
        match e {
            BlockError::DegenerateSchur { .. } => Self::numerical(e),
            BlockError::Bern(b) => b.into(),
            _ => Self::usage(e),
        }
    }
}

impl From<HierarchyError> for CliError {
    fn from(e: HierarchyError) -> Self {
        match e {
            HierarchyError::BisectionFailure { .. } => Self::numerical(e),
            _ => Self::usage(e),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Hierarchy(h) => h.into(),
            _ => Self::usage(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e)
    }
}
