//! Default 10-class knee labeling: background, three bones, their cartilages,
//! and a lesion class per bone.

use serde::{Deserialize, Serialize};

pub const BACKGROUND: u8 = 0;
pub const FEMORAL_BONE: u8 = 1;
pub const FEMORAL_CARTILAGE: u8 = 2;
pub const TIBIAL_BONE: u8 = 3;
pub const TIBIAL_CARTILAGE: u8 = 4;
pub const PATELLAR_BONE: u8 = 5;
pub const PATELLAR_CARTILAGE: u8 = 6;
pub const FEMORAL_LESION: u8 = 7;
pub const TIBIAL_LESION: u8 = 8;
pub const PATELLAR_LESION: u8 = 9;

pub const NUM_CLASSES: usize = 10;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "background",
    "femoral_bone",
    "femoral_cartilage",
    "tibial_bone",
    "tibial_cartilage",
    "patellar_bone",
    "patellar_cartilage",
    "femoral_lesion",
    "tibial_lesion",
    "patellar_lesion",
];

/// The three bones evaluated by bone-wise lesion detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bone {
    Femur,
    Tibia,
    Patella,
}

impl Bone {
    pub const ALL: [Bone; 3] = [Bone::Femur, Bone::Tibia, Bone::Patella];

    pub fn name(self) -> &'static str {
        match self {
            Bone::Femur => "femur",
            Bone::Tibia => "tibia",
            Bone::Patella => "patella",
        }
    }

    pub fn bone_class(self) -> u8 {
        match self {
            Bone::Femur => FEMORAL_BONE,
            Bone::Tibia => TIBIAL_BONE,
            Bone::Patella => PATELLAR_BONE,
        }
    }

    pub fn cartilage_class(self) -> u8 {
        match self {
            Bone::Femur => FEMORAL_CARTILAGE,
            Bone::Tibia => TIBIAL_CARTILAGE,
            Bone::Patella => PATELLAR_CARTILAGE,
        }
    }

    pub fn lesion_class(self) -> u8 {
        match self {
            Bone::Femur => FEMORAL_LESION,
            Bone::Tibia => TIBIAL_LESION,
            Bone::Patella => PATELLAR_LESION,
        }
    }
}

impl std::fmt::Display for Bone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Bone {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "femur" => Ok(Bone::Femur),
            "tibia" => Ok(Bone::Tibia),
            "patella" => Ok(Bone::Patella),
            other => Err(crate::error::Error::InvalidArgument(format!(
                "unknown bone `{other}`"
            ))),
        }
    }
}

/// Bone, cartilage, and lesion classes of the default scheme.
pub fn bone_classes() -> [u8; 3] {
    [FEMORAL_BONE, TIBIAL_BONE, PATELLAR_BONE]
}

pub fn cartilage_classes() -> [u8; 3] {
    [FEMORAL_CARTILAGE, TIBIAL_CARTILAGE, PATELLAR_CARTILAGE]
}

pub fn lesion_classes() -> [u8; 3] {
    [FEMORAL_LESION, TIBIAL_LESION, PATELLAR_LESION]
}
