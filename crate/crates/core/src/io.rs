//! On-disk formats for trained models and receptive-field exports.
//!
//! A single RBM is a JSON object `{domain, n_visible, n_hidden, b, w, c}`
//! with `w` flattened row-major (visible index major). A stack is a
//! directory holding `manifest.json` plus one `layer_<k>.json` per layer.
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces every parameter bit for bit.

use crate::dnn::{DnnStack, ReceptiveFieldSet};
use crate::error::{Error, Result};
use crate::rbm::RbmParams;
use crate::scalar::Scalar;
use crate::spin::{Lattice, LatticeKind, SpinDomain};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbmModelFile {
    pub domain: SpinDomain,
    pub n_visible: usize,
    pub n_hidden: usize,
    pub b: Vec<f64>,
    pub w: Vec<f64>,
    pub c: Vec<f64>,
}

impl RbmModelFile {
    pub fn from_params<S: Scalar>(params: &RbmParams<S>) -> Self {
        let lossless = |xs: &mut dyn Iterator<Item = &S>| xs.map(|x| x.to_f64_lossy()).collect();
        Self {
            domain: params.domain,
            n_visible: params.n_visible(),
            n_hidden: params.n_hidden(),
            b: lossless(&mut params.hidden_bias.iter()),
            w: lossless(&mut params.weights.iter()),
            c: lossless(&mut params.visible_bias.iter()),
        }
    }

    pub fn into_params<S: Scalar>(self) -> Result<RbmParams<S>> {
        let (n, m) = (self.n_visible, self.n_hidden);
        Error::check_dim("model hidden bias", m, self.b.len())?;
        Error::check_dim("model visible bias", n, self.c.len())?;
        Error::check_dim("model weights", n * m, self.w.len())?;
        if self
            .b
            .iter()
            .chain(&self.w)
            .chain(&self.c)
            .any(|x| !x.is_finite())
        {
            return Err(Error::Format("model parameters must be finite".into()));
        }
        let cast = |xs: Vec<f64>| xs.into_iter().map(S::from_f64_lossy).collect::<Vec<_>>();
        let w = Array2::from_shape_vec((n, m), cast(self.w)).expect("checked length");
        RbmParams::new(
            Array1::from(cast(self.b)),
            w,
            Array1::from(cast(self.c)),
            self.domain,
        )
    }
}

pub fn rbm_to_json<S: Scalar>(params: &RbmParams<S>) -> String {
    serde_json::to_string_pretty(&RbmModelFile::from_params(params)).expect("plain data serializes")
}

pub fn rbm_from_json<S: Scalar>(text: &str) -> Result<RbmParams<S>> {
    serde_json::from_str::<RbmModelFile>(text)?.into_params()
}

pub fn save_rbm<S: Scalar>(params: &RbmParams<S>, path: &Path) -> Result<()> {
    fs::write(path, rbm_to_json(params))?;
    Ok(())
}

pub fn load_rbm<S: Scalar>(path: &Path) -> Result<RbmParams<S>> {
    rbm_from_json(&fs::read_to_string(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackManifest {
    pub layer_sizes: Vec<usize>,
    pub domain: SpinDomain,
    pub layers: Vec<String>,
    /// Lattice of the visible layer, when the stack was trained on one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<Lattice>,
}

/// A stack read back from disk together with its training lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedStack<S> {
    pub stack: DnnStack<S>,
    pub lattice: Option<Lattice>,
}

pub fn save_stack<S: Scalar>(
    stack: &DnnStack<S>,
    lattice: Option<&Lattice>,
    dir: &Path,
) -> Result<()> {
    let domain = stack
        .domain()
        .ok_or_else(|| Error::validation("cannot save an empty stack"))?;
    fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(stack.layers().len());
    for (k, layer) in stack.layers().iter().enumerate() {
        let name = format!("layer_{k}.json");
        save_rbm(layer, &dir.join(&name))?;
        files.push(name);
    }
    let manifest = StackManifest {
        layer_sizes: stack.layer_sizes(),
        domain,
        layers: files,
        lattice: lattice.cloned(),
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn load_stack<S: Scalar>(dir: &Path) -> Result<LoadedStack<S>> {
    let manifest: StackManifest =
        serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if manifest.layers.is_empty() {
        return Err(Error::Format("stack manifest lists no layers".into()));
    }
    let layers = manifest
        .layers
        .iter()
        .map(|f| load_rbm::<S>(&dir.join(f)))
        .collect::<Result<Vec<_>>>()?;
    if layers.iter().any(|l| l.domain != manifest.domain) {
        return Err(Error::Format(
            "layer domain differs from the manifest".into(),
        ));
    }
    let stack = DnnStack::new(layers)?;
    if stack.layer_sizes() != manifest.layer_sizes {
        return Err(Error::Format(format!(
            "manifest layer sizes {:?} do not match the layer files {:?}",
            manifest.layer_sizes,
            stack.layer_sizes()
        )));
    }
    if let Some(lat) = &manifest.lattice {
        Error::check_dim(
            "manifest lattice sites",
            manifest.layer_sizes[0],
            lat.num_sites(),
        )?;
    }
    Ok(LoadedStack {
        stack,
        lattice: manifest.lattice,
    })
}

/// Comma-separated matrix, one row per line.
pub fn matrix_to_csv<S: Scalar>(m: &Array2<S>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|x| x.to_f64_lossy().to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// 8-bit binary PGM of one field laid out on the lattice, min–max
/// normalized. Returns the image bytes and the `(min, max)` used.
pub fn field_to_pgm<S: Scalar>(values: &[S], lattice: &Lattice) -> Result<(Vec<u8>, (f64, f64))> {
    Error::check_dim("field length vs lattice", lattice.num_sites(), values.len())?;
    let (height, width) = match lattice.kind() {
        LatticeKind::Square2D => (lattice.rows(), lattice.cols()),
        LatticeKind::Chain1D => (1, lattice.num_sites()),
    };
    let xs: Vec<f64> = values.iter().map(|x| x.to_f64_lossy()).collect();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(xs.iter().map(|&x| {
        if span > 0.0 {
            ((x - lo) / span * 255.0).round() as u8
        } else {
            128
        }
    }));
    Ok((out, (lo, hi)))
}

/// Writes `layer<l>.csv` (full `r^(l)` matrix) and, per hidden unit,
/// `layer<l>_unit<k>.pgm` with its `min max` range in a `.range` file.
/// Returns the paths written.
pub fn export_receptive_fields<S: Scalar>(
    rf: &ReceptiveFieldSet<S>,
    lattice: &Lattice,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (l, field) in rf.fields.iter().enumerate() {
        let layer = l + 1;
        let csv = dir.join(format!("layer{layer}.csv"));
        fs::write(&csv, matrix_to_csv(field))?;
        written.push(csv);
        for (k, col) in field.columns().into_iter().enumerate() {
            let values: Vec<S> = col.to_vec();
            let (bytes, (lo, hi)) = field_to_pgm(&values, lattice)?;
            let pgm = dir.join(format!("layer{layer}_unit{k}.pgm"));
            fs::File::create(&pgm)?.write_all(&bytes)?;
            let range = dir.join(format!("layer{layer}_unit{k}.range"));
            fs::write(&range, format!("{lo} {hi}\n"))?;
            written.push(pgm);
            written.push(range);
        }
    }
    Ok(written)
}
