//! Voxel file format for coefficient and solution fields.
//!
//! A voxel file is a pair `<name>.json` + `<name>.bin`. The JSON header reads
//!
//! ```text
//! {"dim": 2, "shape": [5, 5], "half_periods": [1.0, 1.0],
//!  "kind": "isotropic", "dtype": "f64le", "order": "row-major-shifted"}
//! ```
//!
//! and the payload holds little-endian `f64` values in grid storage order
//! (row-major, last axis fastest, FFT-shifted so slot 0 is the origin), with
//! all values of one voxel stored consecutively:
//!
//! * `isotropic`: one scalar `a` per voxel, meaning `A = a I`;
//! * `symmetric-tensor`: `d(d+1)/2` packed upper-triangle entries per voxel;
//! * `vector`: `d` components per voxel (solution and flux fields).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::io::write_atomic;
use crate::linalg::packed_len;
use crate::material::CoefficientField;
use crate::transforms::GridField;

pub const DTYPE: &str = "f64le";
pub const ORDER: &str = "row-major-shifted";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoxelKind {
    Isotropic,
    SymmetricTensor,
    Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelHeader {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub half_periods: Vec<f64>,
    pub kind: VoxelKind,
    pub dtype: String,
    pub order: String,
}

impl VoxelHeader {
    fn new(spec: &GridSpec, kind: VoxelKind) -> Self {
        VoxelHeader {
            dim: spec.dim(),
            shape: spec.shape().to_vec(),
            half_periods: spec.half_periods().to_vec(),
            kind,
            dtype: DTYPE.into(),
            order: ORDER.into(),
        }
    }

    /// Values per voxel.
    pub fn values_per_voxel(&self) -> usize {
        match self.kind {
            VoxelKind::Isotropic => 1,
            VoxelKind::SymmetricTensor => packed_len(self.dim),
            VoxelKind::Vector => self.dim,
        }
    }

    /// Grid described by the header; enforces odd shapes.
    pub fn spec(&self) -> Result<GridSpec> {
        if self.shape.len() != self.dim || self.half_periods.len() != self.dim {
            return Err(Error::Format(format!(
                "header declares dim = {} but shape has {} and half_periods {} entries",
                self.dim,
                self.shape.len(),
                self.half_periods.len()
            )));
        }
        GridSpec::new(&self.half_periods, &self.shape)
    }
}

/// Header and payload paths for a voxel file given either file or the
/// common stem.
pub fn voxel_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("bin") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut header = stem.clone().into_os_string();
    header.push(".json");
    let mut payload = stem.into_os_string();
    payload.push(".bin");
    (header.into(), payload.into())
}

fn encode(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn write_pair(path: &Path, header: &VoxelHeader, payload: &[f64]) -> Result<()> {
    let (hp, pp) = voxel_paths(path);
    let text = serde_json::to_string_pretty(header)
        .map_err(|e| Error::Format(format!("cannot serialize voxel header: {e}")))?;
    write_atomic(&pp, &encode(payload))?;
    write_atomic(&hp, text.as_bytes())?;
    Ok(())
}

/// Reads and checks a header and its payload.
pub fn read_voxel(path: &Path) -> Result<(VoxelHeader, Vec<f64>)> {
    let (hp, pp) = voxel_paths(path);
    let text = fs::read_to_string(&hp)
        .map_err(|e| Error::Format(format!("cannot read voxel header {}: {e}", hp.display())))?;
    let header: VoxelHeader = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("malformed voxel header {}: {e}", hp.display())))?;
    if header.dtype != DTYPE {
        return Err(Error::Format(format!("unsupported dtype {:?}, expected {DTYPE:?}", header.dtype)));
    }
    if header.order != ORDER {
        return Err(Error::Format(format!("unsupported order {:?}, expected {ORDER:?}", header.order)));
    }
    let spec = header.spec()?;
    let bytes = fs::read(&pp)
        .map_err(|e| Error::Format(format!("cannot read voxel payload {}: {e}", pp.display())))?;
    let expected = spec.total() * header.values_per_voxel();
    if bytes.len() != 8 * expected {
        return Err(Error::Format(format!(
            "payload {} holds {} bytes, header implies {} values ({} bytes)",
            pp.display(),
            bytes.len(),
            expected,
            8 * expected
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8 bytes")))
        .collect();
    Ok((header, values))
}

/// Loads a coefficient field. `half_periods` replaces the cell size declared
/// in the header when given.
pub fn load_voxel(path: &Path, half_periods: Option<&[f64]>) -> Result<CoefficientField> {
    let (mut header, values) = read_voxel(path)?;
    if let Some(y) = half_periods {
        header.half_periods = y.to_vec();
    }
    let spec = header.spec()?;
    match header.kind {
        VoxelKind::Isotropic => CoefficientField::isotropic(&spec, &values),
        VoxelKind::SymmetricTensor => CoefficientField::from_packed(&spec, values),
        VoxelKind::Vector => Err(Error::Format(format!(
            "{} holds a vector field, not a coefficient field",
            path.display()
        ))),
    }
}

/// Writes a coefficient field, as `isotropic` when every tensor is a
/// multiple of the identity and as `symmetric-tensor` otherwise.
pub fn save_voxel(path: &Path, field: &CoefficientField) -> Result<()> {
    let spec = field.spec();
    if field.is_isotropic() {
        let m = packed_len(spec.dim());
        let values: Vec<f64> = field.packed().chunks(m).map(|t| t[0]).collect();
        write_pair(path, &VoxelHeader::new(spec, VoxelKind::Isotropic), &values)
    } else {
        write_pair(path, &VoxelHeader::new(spec, VoxelKind::SymmetricTensor), field.packed())
    }
}

/// Writes a `d`-vector grid field (kind `vector`).
pub fn save_field(path: &Path, field: &GridField) -> Result<()> {
    let spec = field.spec();
    let d = spec.dim();
    if field.components() != d {
        return Err(Error::Domain(format!(
            "vector voxel files hold {d} components per voxel, field has {}",
            field.components()
        )));
    }
    let n = spec.total();
    let mut values = Vec::with_capacity(d * n);
    for p in 0..n {
        for c in 0..d {
            values.push(field.component(c)[p]);
        }
    }
    write_pair(path, &VoxelHeader::new(spec, VoxelKind::Vector), &values)
}

/// Reads a vector field written by [`save_field`].
pub fn load_field(path: &Path) -> Result<GridField> {
    let (header, values) = read_voxel(path)?;
    if header.kind != VoxelKind::Vector {
        return Err(Error::Format(format!("{} does not hold a vector field", path.display())));
    }
    let spec = header.spec()?;
    let (d, n) = (spec.dim(), spec.total());
    let mut out = vec![0.0; d * n];
    for p in 0..n {
        for c in 0..d {
            out[c * n + p] = values[p * d + c];
        }
    }
    GridField::vector(&spec, out)
}
