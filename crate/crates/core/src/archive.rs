//! JSON persistence for exploration archives and reduced bases.
//!
//! Both share one document layout; gzip-compressed files are accepted on read.
//! Loading re-checks the model fingerprint and the signal/response pairing.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::arm::{inverse_dynamics, ActuationSignal, ArmModel, JointState, TimeSeries, Trajectory};
use crate::error::{Error, Result};
use crate::exploration::{ExplorationArchive, ExplorationConfig};
use crate::reduction::ProtoTask;
use crate::solver::{BasisKind, BasisSet};

/// Relative sup-norm tolerance for the stored pairing of a reduced basis.
const PAIRING_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub n_pairs: usize,
    pub n_samples: usize,
    pub dim: usize,
    pub dt: f64,
    pub layout: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Document {
    kind: BasisKind,
    header: ArchiveHeader,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<ExplorationConfig>,
    model_fingerprint: String,
    initial_state: JointState,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    proto_tasks: Vec<ProtoTask>,
    signals: Vec<Vec<Vec<f64>>>,
    responses: Vec<Vec<Vec<f64>>>,
}

const LAYOUT: &str = "signals[pair][sample][joint] in N m, responses[pair][sample][joint] in rad";

impl Document {
    fn new(
        kind: BasisKind,
        config: Option<ExplorationConfig>,
        model_fingerprint: String,
        initial_state: JointState,
        proto_tasks: Vec<ProtoTask>,
        signals: &[ActuationSignal],
        responses: &[Trajectory],
    ) -> Result<Self> {
        let first = responses
            .first()
            .ok_or_else(|| Error::Archive("nothing to store".into()))?;
        Ok(Self {
            kind,
            header: ArchiveHeader {
                n_pairs: signals.len(),
                n_samples: first.len(),
                dim: first.dim(),
                dt: first.dt(),
                layout: LAYOUT.into(),
            },
            config,
            model_fingerprint,
            initial_state,
            proto_tasks,
            signals: signals.iter().map(|s| s.series().to_nested()).collect(),
            responses: responses.iter().map(|r| r.positions().to_nested()).collect(),
        })
    }

    fn check_model(&self, model: &ArmModel) -> Result<()> {
        if model.fingerprint() != self.model_fingerprint {
            return Err(Error::FingerprintMismatch {
                archive: self.model_fingerprint.clone(),
                config: model.fingerprint(),
            });
        }
        Ok(())
    }

    fn pairs(&self) -> Result<(Vec<ActuationSignal>, Vec<Trajectory>)> {
        let h = &self.header;
        if self.signals.len() != h.n_pairs || self.responses.len() != h.n_pairs {
            return Err(Error::Archive(format!(
                "header announces {} pairs, found {} signals and {} responses",
                h.n_pairs,
                self.signals.len(),
                self.responses.len()
            )));
        }
        let series = |nested: &Vec<Vec<f64>>| -> Result<TimeSeries> {
            let s = TimeSeries::from_samples(h.dt, nested)?;
            if s.len() != h.n_samples || s.dim() != h.dim {
                return Err(Error::Archive("pair shape differs from the header".into()));
            }
            Ok(s)
        };
        let signals = self
            .signals
            .iter()
            .map(|s| series(s).map(ActuationSignal::new))
            .collect::<Result<Vec<_>>>()?;
        let responses = self
            .responses
            .iter()
            .map(|r| series(r).map(Trajectory::new))
            .collect::<Result<Vec<_>>>()?;
        Ok((signals, responses))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads a file, transparently decompressing gzip content.
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn read_document(path: &Path) -> Result<Document> {
    Ok(serde_json::from_slice(&read_maybe_gzip(path)?)?)
}

pub fn write_archive(path: &Path, archive: &ExplorationArchive) -> Result<()> {
    let doc = Document::new(
        BasisKind::Exploration,
        Some(archive.config.clone()),
        archive.model_fingerprint.clone(),
        archive.config.initial_state.clone(),
        Vec::new(),
        &archive.signals,
        &archive.responses,
    )?;
    write_json(path, &doc)
}

/// Loads an exploration archive and re-integrates every pair to confirm it.
pub fn read_archive(path: &Path, model: &ArmModel) -> Result<ExplorationArchive> {
    let doc = read_document(path)?;
    if doc.kind != BasisKind::Exploration {
        return Err(Error::Archive(format!("expected an exploration archive, found {:?}", doc.kind)));
    }
    doc.check_model(model)?;
    let config = doc
        .config
        .clone()
        .ok_or_else(|| Error::Archive("exploration archive lacks its config".into()))?;
    let (signals, responses) = doc.pairs()?;
    let archive = ExplorationArchive {
        config,
        model_fingerprint: doc.model_fingerprint,
        signals,
        responses,
    };
    archive.verify(model)?;
    Ok(archive)
}

pub fn write_basis(
    path: &Path,
    basis: &BasisSet,
    model: &ArmModel,
    proto_tasks: &[ProtoTask],
) -> Result<()> {
    let doc = Document::new(
        basis.kind(),
        None,
        model.fingerprint(),
        basis.initial_state().clone(),
        proto_tasks.to_vec(),
        basis.synergies(),
        basis.responses(),
    )?;
    write_json(path, &doc)
}

/// Loads a stored basis together with its proto-tasks. Synergies must match
/// the inverse dynamics of the stored responses.
pub fn read_basis(path: &Path, model: &ArmModel) -> Result<(BasisSet, Vec<ProtoTask>)> {
    let doc = read_document(path)?;
    doc.check_model(model)?;
    let (signals, responses) = doc.pairs()?;
    for (i, (phi, theta)) in signals.iter().zip(&responses).enumerate() {
        let again = inverse_dynamics(model, theta)?;
        let scale = phi.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let diff = again.max_abs_diff(phi);
        if diff > PAIRING_TOL * scale {
            return Err(Error::Archive(format!(
                "synergy {i} deviates from the inverse dynamics of its response by {diff:.3e}"
            )));
        }
    }
    let basis = BasisSet::new(doc.kind, signals, responses, doc.initial_state)?;
    Ok((basis, doc.proto_tasks))
}
