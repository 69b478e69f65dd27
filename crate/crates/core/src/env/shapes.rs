//! Built-in target patterns and fixture loading.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::EnvError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTarget {
    pub name: String,
    pub grid: Grid,
}

const OVAL10: [&str; 10] = [
    "0000000000",
    "0000000000",
    "0001110000",
    "0010001000",
    "0010001000",
    "0010001000",
    "0010001000",
    "0001110000",
    "0000000000",
    "0000000000",
];

const TRIANGLE10: [&str; 10] = [
    "0000000000",
    "0000000000",
    "0000100000",
    "0001010000",
    "0010001000",
    "0100000100",
    "1111111110",
    "0000000000",
    "0000000000",
    "0000000000",
];

const DIAMOND5: [&str; 5] = ["00100", "01010", "10001", "01010", "00100"];
const SQUARE5: [&str; 5] = ["00000", "01110", "01010", "01110", "00000"];
const OVAL5: [&str; 5] = ["00100", "01010", "01010", "00100", "00000"];
const CROSS5: [&str; 5] = ["00100", "00100", "11111", "00100", "00100"];

pub const BUILT_IN: [&str; 6] = ["oval10", "triangle10", "diamond5", "square5", "oval5", "cross5"];

fn rows_for(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "oval10" => &OVAL10,
        "triangle10" => &TRIANGLE10,
        "diamond5" => &DIAMOND5,
        "square5" => &SQUARE5,
        "oval5" => &OVAL5,
        "cross5" => &CROSS5,
        _ => return None,
    })
}

/// Parses the fixture text format: one row per line of `0`/`1` characters.
/// Blank lines and `#` comments are ignored.
pub fn parse_fixture(name: &str, text: &str) -> Result<GridTarget, EnvError> {
    let rows: Vec<Vec<u8>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    other => Err(EnvError::InvalidConfig(format!(
                        "fixture {name:?}: unexpected character {other:?}"
                    ))),
                })
                .collect::<Result<Vec<u8>, _>>()
        })
        .collect::<Result<_, _>>()?;
    if rows.is_empty() {
        return Err(EnvError::InvalidConfig(format!("fixture {name:?} is empty")));
    }
    Ok(GridTarget {
        name: name.to_string(),
        grid: Grid::from_rows(&rows)?,
    })
}

/// Looks up a built-in target and checks it has the requested size.
pub fn target_shape(name: &str, width: usize, height: usize) -> Result<GridTarget, EnvError> {
    let rows = rows_for(name).ok_or_else(|| EnvError::UnknownShape(name.to_string()))?;
    let target = parse_fixture(name, &rows.join("\n"))?;
    if target.grid.width() != width || target.grid.height() != height {
        return Err(EnvError::DimensionMismatch {
            expected_w: width,
            expected_h: height,
            got_w: target.grid.width(),
            got_h: target.grid.height(),
        });
    }
    Ok(target)
}

/// Loads a fixture file; the target is named after the file stem.
pub fn load_fixture(path: &Path) -> Result<GridTarget, EnvError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EnvError::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("fixture");
    parse_fixture(name, &text)
}
