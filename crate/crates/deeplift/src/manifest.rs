use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{write_string, Result};

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a T,
}

/// `<output>.manifest`, next to the output file or directory.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

/// Writes the resolved configuration of a run as TOML.
pub fn write_manifest<T: Serialize>(output: &Path, command: &str, config: &T) -> Result<PathBuf> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    let path = manifest_path(output);
    write_string(&path, &text)?;
    Ok(path)
}
