use std::fs;
use std::io::Read;
use std::path::Path;

use anyhow::Context;
use concord::block::{expand, BlockSpec};
use concord::hierarchy::HierTree;
use concord::{CandidateMatrix, Matrix};

use crate::error::{CliError, CliResult};

/// A structured input file. The kind is detected from the contents: a
/// `sizes=` field marks a block specification, a leading `(` or any `:`
/// marks a tree, and anything else is read as a comma-separated matrix.
pub enum Input {
    Matrix(CandidateMatrix),
    Block(BlockSpec),
    Tree(HierTree),
}

impl Input {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Matrix(_) => "matrix",
            Self::Block(_) => "block",
            Self::Tree(_) => "tree",
        }
    }

    /// The dense matrix described by the input.
    pub fn matrix(&self) -> CandidateMatrix {
        match self {
            Self::Matrix(m) => m.clone(),
            Self::Block(s) => expand(s),
            Self::Tree(t) => t.to_matrix(),
        }
    }
}

/// Reads a file, or standard input for `-`.
pub fn read_text(path: &Path) -> CliResult<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(CliError::usage)
}

pub fn load(path: &Path, tol: f64) -> CliResult<Input> {
    let text = read_text(path)?;
    let body: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    let ctx = |kind: &str| format!("{}: invalid {kind}", path.display());
    if body.iter().any(|l| l.starts_with("sizes")) {
        let spec: BlockSpec =
            body.join("\n").parse().with_context(|| ctx("block specification")).map_err(CliError::usage)?;
        return Ok(Input::Block(spec));
    }
    if body.first().is_some_and(|l| l.starts_with('(')) || body.iter().any(|l| l.contains(':')) {
        let tree: HierTree = text.parse().with_context(|| ctx("tree")).map_err(CliError::usage)?;
        return Ok(Input::Tree(tree));
    }
    Ok(Input::Matrix(load_matrix_text(&body.join("\n"), tol).with_context(|| ctx("matrix")).map_err(CliError::usage)?))
}

fn load_matrix_text(text: &str, tol: f64) -> anyhow::Result<CandidateMatrix> {
    let m = Matrix::parse_text(text)?;
    Ok(CandidateMatrix::validate(&m, tol)?)
}
