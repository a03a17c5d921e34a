use std::path::{Path, PathBuf};

use clap::Args;
use endovo_core::augmentation::AugmentSpec;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{check_input, display_name, invalid, Classify, CliError, Ctx, Outcome};
use crate::io::{list_images, read_depth, read_image, write_atomic, write_image};
use crate::report::{header, to_bytes};

pub const MANIFEST: &str = "augment.json";

#[derive(Debug, Args)]
pub(super) struct AugmentArgs {
    /// Folder of input frames (PNG/PGM/PPM, processed in name order).
    input: PathBuf,
    /// Output folder; created if missing. Frames keep their file names.
    output: PathBuf,
    /// Pipeline, one transform per line, e.g. `blur alpha=2 beta=1.5 gamma=5`.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Depth maps named after the frames (`<stem>.depth` or `<stem>.png`);
    /// required by `dof`.
    #[arg(long, value_name = "DIR")]
    depth_dir: Option<PathBuf>,
}

fn depth_for(dir: &Path, frame: &Path) -> Option<PathBuf> {
    let stem = frame.file_stem()?;
    ["depth", "png"]
        .iter()
        .map(|ext| dir.join(stem).with_extension(ext))
        .find(|p| p.is_file())
}

pub(super) fn augment(a: &AugmentArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    check_input(&a.input)?;
    check_input(&a.spec)?;
    if !a.input.is_dir() {
        return invalid(format!("{}: not a directory", a.input.display()));
    }
    if a.output.exists() && !a.output.is_dir() {
        return invalid(format!("{}: exists and is not a directory", a.output.display()));
    }
    if a.output.canonicalize().ok().is_some_and(|o| a.input.canonicalize().ok() == Some(o)) {
        return invalid("output folder must differ from the input folder");
    }
    let text = crate::io::read_text(&a.spec).invalid()?;
    let spec: AugmentSpec = text.parse().map_err(|e| CliError::Validation(format!("{}: {e}", a.spec.display())))?;
    let frames = list_images(&a.input).invalid()?;
    if frames.is_empty() {
        return invalid(format!("{}: no images found", a.input.display()));
    }
    let selected = spec.selected_frames(frames.len());

    let depths: Vec<Option<PathBuf>> = if spec.needs_depth() {
        let Some(dir) = &a.depth_dir else {
            return invalid("the pipeline contains `dof`, which needs --depth-dir");
        };
        selected
            .iter()
            .map(|&i| {
                depth_for(dir, &frames[i]).map(Some).ok_or_else(|| {
                    CliError::Validation(format!("no depth map for {} in {}", display_name(&frames[i]), dir.display()))
                })
            })
            .collect::<Result<_, _>>()?
    } else {
        vec![None; selected.len()]
    };

    std::fs::create_dir_all(&a.output).map_err(|e| CliError::Compute(format!("{}: {e}", a.output.display())))?;
    ctx.pool.install(|| {
        selected.par_iter().zip(&depths).try_for_each(|(&i, depth)| -> Result<(), CliError> {
            let img = read_image(&frames[i]).invalid()?;
            let depth = depth.as_deref().map(read_depth).transpose().invalid()?;
            let out = spec.apply(&img, depth.as_ref()).failed()?;
            write_image(&a.output.join(frames[i].file_name().expect("listed files have names")), &out).failed()
        })
    })?;

    let pipeline: Vec<Value> = spec.transforms.iter().map(|t| Value::String(t.to_string())).collect();
    let mut r = header("augment");
    r.insert("pipeline".into(), Value::Array(pipeline));
    r.insert("input_frames".into(), json!(frames.len()));
    r.insert(
        "frames".into(),
        Value::Array(
            selected
                .iter()
                .map(|&i| json!({ "index": i, "file": display_name(&frames[i]) }))
                .collect(),
        ),
    );
    write_atomic(&a.output.join(MANIFEST), &to_bytes(&Value::Object(r.clone()))).failed()?;

    let summary = format!(
        "augmented {} of {} frames into {}\n",
        selected.len(),
        frames.len(),
        a.output.display()
    );
    Ok(Outcome { report: r, summary })
}
