//! ESAB weight fixtures: a text manifest beside a flat float32 blob.
//!
//! ```text
//! blob = esab.bin
//! pool = 2
//! # tensor      shape   byte offset
//! theta.weight  32x64   0
//! theta.bias    32      8192
//! ...
//! psi           2       ...        (weight, bias)
//! out.weight    64x32   ...
//! out.bias      64      ...
//! ```
//!
//! Convolution weights are `out × in`, row-major. The blob path is relative
//! to the manifest.

use std::collections::BTreeMap;
use std::path::Path;

use endovo_core::esab::{Conv1x1, EsabWeights, ScalarAffine};

use super::{read_bytes, read_text, write_atomic, IoError};

const CONVS: [&str; 4] = ["theta", "phi", "g", "out"];

struct Entry {
    shape: Vec<usize>,
    offset: usize,
}

pub fn read_esab_weights(manifest: &Path) -> Result<EsabWeights, IoError> {
    let text = read_text(manifest)?;
    let err = |m: String| IoError::parse(manifest, m);
    let mut blob_name = None;
    let mut pool = None;
    let mut entries = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            match key.trim() {
                "blob" => blob_name = Some(value.trim().to_string()),
                "pool" => pool = Some(value.trim().parse::<usize>().map_err(|_| err(format!("line {}: bad pool", n + 1)))?),
                other => return Err(err(format!("line {}: unknown setting {other:?}", n + 1))),
            }
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let [name, shape, offset] = tokens[..] else {
            return Err(err(format!("line {}: expected `name shape offset`", n + 1)));
        };
        let shape = shape
            .split('x')
            .map(|d| d.parse::<usize>().map_err(|_| err(format!("line {}: bad shape {shape:?}", n + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        let offset = offset.parse().map_err(|_| err(format!("line {}: bad offset {offset:?}", n + 1)))?;
        if entries.insert(name.to_string(), Entry { shape, offset }).is_some() {
            return Err(err(format!("line {}: {name} listed twice", n + 1)));
        }
    }
    let blob_name = blob_name.ok_or_else(|| err("missing `blob = ...`".into()))?;
    let blob_path = manifest.parent().unwrap_or(Path::new(".")).join(blob_name);
    let blob = read_bytes(&blob_path)?;

    let mut tensor = |name: &str| -> Result<(Vec<usize>, Vec<f64>), IoError> {
        let e = entries.remove(name).ok_or_else(|| err(format!("missing tensor {name}")))?;
        let len: usize = e.shape.iter().product();
        let bytes = blob
            .get(e.offset..e.offset + 4 * len)
            .ok_or_else(|| IoError::parse(&blob_path, format!("{name} runs past the end of the blob")))?;
        let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
        Ok((e.shape, values))
    };
    let mut convs = Vec::new();
    for name in CONVS {
        let (ws, w) = tensor(&format!("{name}.weight"))?;
        let (bs, b) = tensor(&format!("{name}.bias"))?;
        let (&[out, inp], &[bout]) = (&ws[..], &bs[..]) else {
            return Err(err(format!("{name}: weight must be 2-D and bias 1-D")));
        };
        if bout != out {
            return Err(err(format!("{name}: bias length {bout} differs from {out} outputs")));
        }
        convs.push(Conv1x1::new(inp, out, w, b).map_err(|e| err(format!("{name}: {e}")))?);
    }
    let (ps, psi) = tensor("psi")?;
    if ps != [2] {
        return Err(err("psi must hold exactly (weight, bias)".into()));
    }
    if let Some(extra) = entries.keys().next() {
        return Err(err(format!("unknown tensor {extra}")));
    }
    let mut convs = convs.into_iter();
    let weights = EsabWeights {
        theta: convs.next().expect("four convolutions"),
        phi: convs.next().expect("four convolutions"),
        g: convs.next().expect("four convolutions"),
        out_proj: convs.next().expect("four convolutions"),
        psi: ScalarAffine {
            weight: psi[0],
            bias: psi[1],
        },
        pool: pool.unwrap_or(endovo_core::esab::DEFAULT_POOL),
    };
    weights.validate().map_err(|e| err(e.to_string()))?;
    Ok(weights)
}

/// Writes `manifest` and a blob named after it with a `.bin` extension.
/// Values are stored as float32.
pub fn write_esab_weights(manifest: &Path, weights: &EsabWeights) -> Result<(), IoError> {
    let blob_path = manifest.with_extension("bin");
    let blob_name = blob_path
        .file_name()
        .ok_or_else(|| IoError::parse(manifest, "manifest path has no file name"))?
        .to_string_lossy()
        .into_owned();
    let mut text = format!("blob = {blob_name}\npool = {}\n", weights.pool);
    let mut blob = Vec::new();
    let mut push = |text: &mut String, name: &str, shape: String, values: &[f64]| {
        text.push_str(&format!("{name} {shape} {}\n", blob.len()));
        values.iter().for_each(|v| blob.extend_from_slice(&(*v as f32).to_le_bytes()));
    };
    for (name, conv) in CONVS.iter().zip([&weights.theta, &weights.phi, &weights.g, &weights.out_proj]) {
        let (o, i) = (conv.out_channels(), conv.in_channels());
        push(&mut text, &format!("{name}.weight"), format!("{o}x{i}"), conv.weight());
        push(&mut text, &format!("{name}.bias"), format!("{o}"), conv.bias());
    }
    push(&mut text, "psi", "2".into(), &[weights.psi.weight, weights.psi.bias]);
    write_atomic(&blob_path, &blob)?;
    write_atomic(manifest, text.as_bytes())
}
