use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of material classes in the default label set.
pub const NUM_CLASSES: usize = 4;

/// Material classes, in label-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Plastic = 0,
    Metal = 1,
    Fabric = 2,
    Wood = 3,
}

impl Material {
    pub const ALL: [Material; NUM_CLASSES] = [Material::Plastic, Material::Metal, Material::Fabric, Material::Wood];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL.get(index).copied().ok_or(Error::Index {
            context: "material class",
            index,
            limit: NUM_CLASSES,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Material::Plastic => "plastic",
            Material::Metal => "metal",
            Material::Fabric => "fabric",
            Material::Wood => "wood",
        }
    }

    /// Display color used by mesh exports.
    pub fn color(self) -> [u8; 3] {
        match self {
            Material::Plastic => [31, 119, 180],
            Material::Metal => [128, 128, 128],
            Material::Fabric => [214, 39, 40],
            Material::Wood => [140, 86, 75],
        }
    }

    pub fn from_color(rgb: [u8; 3]) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.color() == rgb)
    }
}

impl std::fmt::Display for Material {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
