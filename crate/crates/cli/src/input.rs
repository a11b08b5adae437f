//! JSON job inputs and their parsing diagnostics.

use std::fs;
use std::io::Read;
use std::path::PathBuf;

use chanent::io::{Entry, MatrixRepr, VectorRepr};
use chanent::{CMatrix, CVector, DensityOperator, Ensemble, PureState, ReductionChannel, SolverConfig, Tolerances};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

/// Where the job JSON comes from.
#[derive(Clone, Debug)]
pub enum Source {
    File(PathBuf),
    Stdin,
    Inline(String),
}

impl Source {
    pub fn label(&self) -> String {
        match self {
            Source::File(p) => p.display().to_string(),
            Source::Stdin => "<stdin>".into(),
            Source::Inline(_) => "<inline>".into(),
        }
    }

    pub fn read(&self) -> Result<String, CliError> {
        match self {
            Source::File(p) => fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
            Source::Stdin => {
                let mut text = String::new();
                std::io::stdin()
                    .read_to_string(&mut text)
                    .map_err(|e| CliError::Io(format!("<stdin>: {e}")))?;
                Ok(text)
            }
            Source::Inline(s) => Ok(s.clone()),
        }
    }
}

/// Parses `text`, reporting the failing field path with line and column.
pub fn parse<T: DeserializeOwned>(text: &str, source: &Source) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Json {
            origin: source.label(),
            path,
            line: inner.line(),
            column: inner.column(),
            message: strip_position(&inner.to_string()),
        }
    })?;
    de.end().map_err(|e| CliError::Json {
        origin: source.label(),
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })?;
    Ok(value)
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// A state given as a density matrix or as a state vector.
///
/// A complex vector `[[re, im], ...]` has the same JSON shape as an `n x 2`
/// real matrix; it is read as a vector whenever that matrix is not square.
/// A two-dimensional complex vector is therefore read as a matrix.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum StateRepr {
    Matrix(MatrixRepr),
    Vector(VectorRepr),
}

impl StateRepr {
    pub fn density(self, tol: &Tolerances) -> Result<DensityOperator, CliError> {
        match self {
            StateRepr::Matrix(m) => match as_complex_vector(&m) {
                Some(v) => Ok(PureState::new(CVector::from(v), tol)?.density()),
                None => Ok(DensityOperator::new(CMatrix::try_from(m)?, tol)?),
            },
            StateRepr::Vector(v) => Ok(PureState::new(CVector::from(v), tol)?.density()),
        }
    }
}

fn as_complex_vector(m: &MatrixRepr) -> Option<VectorRepr> {
    if m.0.len() == 2 {
        return None;
    }
    m.0.iter()
        .map(|row| match row[..] {
            [Entry::Real(re), Entry::Real(im)] => Some(Entry::Complex([re, im])),
            _ => None,
        })
        .collect::<Option<Vec<_>>>()
        .map(VectorRepr)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyJob {
    pub state: StateRepr,
    /// Optional second state for the relative entropy `S(state, reference)`.
    pub reference: Option<StateRepr>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceJob {
    pub state: StateRepr,
    pub channel: ReductionChannel,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleInput {
    pub weights: Vec<f64>,
    pub states: Vec<StateRepr>,
}

impl EnsembleInput {
    pub fn build(self, tol: &Tolerances) -> Result<Ensemble, CliError> {
        let states = self
            .states
            .into_iter()
            .map(|s| s.density(tol))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Ensemble::new(self.weights, states)?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutualJob {
    pub ensemble: EnsembleInput,
    pub channel: ReductionChannel,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoofJob {
    pub state: StateRepr,
    pub channel: ReductionChannel,
    pub solver: Option<SolverConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockJob {
    pub state: StateRepr,
    /// The distinguished unit vector; the channel compresses onto its complement and itself.
    pub psi: VectorRepr,
    pub solver: Option<SolverConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccinfoJob {
    pub state: StateRepr,
    pub projections: Vec<MatrixRepr>,
    pub solver: Option<SolverConfig>,
}

impl AccinfoJob {
    pub fn projections(&self) -> Result<Vec<CMatrix>, CliError> {
        self.projections
            .iter()
            .cloned()
            .map(|m| CMatrix::try_from(m).map_err(CliError::from))
            .collect()
    }
}
