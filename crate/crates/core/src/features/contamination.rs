use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Surface layer reported in a Snowtam, by its single-digit code.
pub fn code_name(code: u8) -> Option<&'static str> {
    Some(match code {
        0 => "Bare and dry",
        1 => "Damp",
        2 => "Wet",
        3 => "Rime or frost",
        4 => "Dry snow",
        5 => "Wet snow",
        6 => "Slush",
        7 => "Ice",
        8 => "Compacted snow",
        9 => "Frozen ruts",
        _ => return None,
    })
}

/// Loose layers sit on top and can be swept away; solid layers are bonded
/// to the pavement. Code 0 is neither.
pub fn is_loose(code: u8) -> bool {
    matches!(code, 1 | 2 | 4 | 5 | 6)
}

pub fn is_solid(code: u8) -> bool {
    matches!(code, 3 | 7 | 8 | 9)
}

/// Layer combinations that get their own indicator column, top layer first.
pub const KNOWN_COMBINATIONS: [&str; 30] = [
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", //
    "27", "28", "29", "47", "48", "49", "57", "58", "59", "67", "68", "69", "78", "79", "89", //
    "478", "479", "489", "578", "579",
];

/// Checks a reported layer stack: one to three codes, top first, at most one
/// loose layer (which must be on top) and at most two solid layers. Code 0
/// can only be reported alone.
pub fn validate_layers(layers: &[u8]) -> Result<()> {
    let bad = |why: &str| Err(Error::invalid(format!("layers {}: {why}", layer_string(layers))));
    if layers.is_empty() || layers.len() > 3 {
        return bad("expected one to three layers");
    }
    if let Some(&c) = layers.iter().find(|&&c| c > 9) {
        return bad(&format!("unknown contamination code {c}"));
    }
    if layers.len() > 1 && layers.contains(&0) {
        return bad("bare and dry cannot be combined with other layers");
    }
    let loose = layers.iter().filter(|&&c| is_loose(c)).count();
    if loose > 1 {
        return bad("more than one loose layer");
    }
    if loose == 1 && !is_loose(layers[0]) {
        return bad("loose layer must be on top");
    }
    if layers.iter().filter(|&&c| is_solid(c)).count() > 2 {
        return bad("more than two solid layers");
    }
    Ok(())
}

pub fn layer_string(layers: &[u8]) -> String {
    layers.iter().map(|c| char::from(b'0' + c.min(&9))).collect()
}

/// Parses concatenated digits such as `479`.
pub fn parse_layers(s: &str) -> Result<Vec<u8>> {
    let s = s.trim();
    let layers: Vec<u8> = s
        .chars()
        .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(|| Error::invalid(format!("bad layer code `{s}`"))))
        .collect::<Result<_>>()?;
    validate_layers(&layers)?;
    Ok(layers)
}

/// Index of the layer stack in [`KNOWN_COMBINATIONS`].
pub fn combination_index(layers: &[u8]) -> Option<usize> {
    let key = layer_string(layers);
    KNOWN_COMBINATIONS.iter().position(|&k| k == key)
}

/// Slipperiness class of a layer stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContaminationGroup {
    Not,
    Dry,
    Wet,
    Solid,
    LooseAndDry,
    SolidBase,
}

impl ContaminationGroup {
    pub const ALL: [ContaminationGroup; 6] = [
        ContaminationGroup::Not,
        ContaminationGroup::Dry,
        ContaminationGroup::Wet,
        ContaminationGroup::Solid,
        ContaminationGroup::LooseAndDry,
        ContaminationGroup::SolidBase,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ContaminationGroup::Not => "not",
            ContaminationGroup::Dry => "dry",
            ContaminationGroup::Wet => "wet",
            ContaminationGroup::Solid => "solid",
            ContaminationGroup::LooseAndDry => "loose_and_dry",
            ContaminationGroup::SolidBase => "solid_base",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&g| g == self).unwrap_or(0)
    }
}

impl fmt::Display for ContaminationGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContaminationGroup::Not => "Not contaminated",
            ContaminationGroup::Dry => "Dry contaminated",
            ContaminationGroup::Wet => "Wet contaminated",
            ContaminationGroup::Solid => "Solid contaminated",
            ContaminationGroup::LooseAndDry => "Loose and dry contaminated",
            ContaminationGroup::SolidBase => "Solid base layer",
        })
    }
}

/// Groups a validated layer stack.
///
/// | stack                         | group          |
/// |-------------------------------|----------------|
/// | 0                             | Not            |
/// | 4                             | Dry            |
/// | 1, 2, 5, 6                    | Wet            |
/// | 3, 7, 8, 9, or solid on solid | Solid          |
/// | 4 over solid                  | LooseAndDry    |
/// | 1, 2, 5, 6 over solid         | SolidBase      |
pub fn contamination_group(layers: &[u8]) -> Result<ContaminationGroup> {
    validate_layers(layers)?;
    let top = layers[0];
    Ok(match (top, layers.len()) {
        (0, _) => ContaminationGroup::Not,
        (4, 1) => ContaminationGroup::Dry,
        (4, _) => ContaminationGroup::LooseAndDry,
        (c, 1) if is_loose(c) => ContaminationGroup::Wet,
        (c, _) if is_loose(c) => ContaminationGroup::SolidBase,
        _ => ContaminationGroup::Solid,
    })
}
