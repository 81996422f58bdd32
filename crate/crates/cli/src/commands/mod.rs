pub mod analyze;
pub mod composite;
pub mod eval;
pub mod synth;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::CommonArgs;

pub(crate) fn output_dir(args: &CommonArgs) -> Result<PathBuf> {
    let dir = args.output.clone().context("--output is required")?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub(crate) fn single_input(args: &CommonArgs) -> Result<&Path> {
    match args.input.as_slice() {
        [p] => Ok(p),
        [] => bail!("--input is required"),
        _ => bail!("expected one --input, got {}", args.input.len()),
    }
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}
