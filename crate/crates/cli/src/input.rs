//! Geometry spec files, grids and tolerance overrides.

use std::path::Path;

use polygeom::geometry::{GeometryConfig, GeometrySpec};
use polygeom::Tolerances;
use serde::Deserialize;

use crate::Failure;

/// Contents of a `--spec` file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub degree: Option<usize>,
    pub padding: Option<usize>,
    pub geometry: GeometryConfig,
}

pub struct LoadedSpec {
    pub degree: Option<usize>,
    pub padding: Option<usize>,
    pub geometry: GeometrySpec,
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))
}

pub fn load_spec(path: &Path) -> Result<LoadedSpec, Failure> {
    let file: SpecFile =
        toml::from_str(&read(path)?).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let geometry =
        GeometrySpec::try_from(file.geometry).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    Ok(LoadedSpec {
        degree: file.degree,
        padding: file.padding,
        geometry,
    })
}

pub fn load_tolerances(path: Option<&Path>) -> Result<Tolerances, Failure> {
    let Some(path) = path else {
        return Ok(Tolerances::default());
    };
    toml::from_str(&read(path)?).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

/// Comma-separated list of finite numbers.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, Failure> {
    let values: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::Invalid(format!("InvalidGrid: cannot parse {s:?} as a finite number")))
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(Failure::Invalid("InvalidGrid: grid is empty".into()));
    }
    Ok(values)
}
