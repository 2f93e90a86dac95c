//! The 31-entry distortion catalogue with per-level parameters.

use serde::{Deserialize, Serialize};

pub const LEVELS: usize = 7;
pub const DISTORTION_COUNT: u8 = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Photometric,
    Geometric,
    Local,
    Compression,
    External,
}

#[derive(Debug, Clone, Copy)]
pub struct Parameter {
    pub name: &'static str,
    pub values: [f64; LEVELS],
}

#[derive(Debug, Clone, Copy)]
pub struct Descriptor {
    pub id: u8,
    pub name: &'static str,
    pub category: Category,
    /// False when positions are untouched (pure color distortions and
    /// lossless-geometry codecs); geometry metrics do not apply to these.
    pub alters_geometry: bool,
    pub params: &'static [Parameter],
}

impl Descriptor {
    pub fn is_native(&self) -> bool {
        self.category != Category::External
    }

    /// Parameter values at `level` (1-based), in declaration order.
    pub fn level_params(&self, level: u8) -> Vec<(&'static str, f64)> {
        self.params
            .iter()
            .map(|p| (p.name, p.values[level as usize - 1]))
            .collect()
    }
}

const PERCENT_10_70: [f64; 7] = [0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70];
const STEP_10_70: [f64; 7] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0];
const DOWNSAMPLE: [f64; 7] = [0.15, 0.30, 0.45, 0.60, 0.70, 0.80, 0.90];
const ANCHORS: [f64; 7] = [1.0, 2.0, 4.0, 6.0, 9.0, 12.0, 16.0];
const GPCC_LOSSY_QP: [f64; 7] = [27.0, 31.0, 35.0, 39.0, 43.0, 47.0, 51.0];
const AVS_ATTR_QP: [f64; 7] = [8.0, 16.0, 24.0, 32.0, 40.0, 44.0, 48.0];

macro_rules! p {
    ($name:literal, $vals:expr) => {
        Parameter {
            name: $name,
            values: $vals,
        }
    };
}

use Category::*;

#[rustfmt::skip]
static REGISTRY: [Descriptor; 31] = [
    Descriptor { id: 1, name: "ColorNoise", category: Photometric, alters_geometry: false,
        params: &[p!("fraction", PERCENT_10_70), p!("amplitude", STEP_10_70)] },
    Descriptor { id: 2, name: "GaussianNoise", category: Photometric, alters_geometry: false,
        params: &[p!("snr_db", [13.0, 11.0, 9.0, 7.0, 5.0, 3.0, 1.0])] },
    Descriptor { id: 3, name: "HighFrequencyNoise", category: Photometric, alters_geometry: false,
        params: &[p!("variance", [0.001, 0.003, 0.005, 0.0075, 0.01, 0.03, 0.05])] },
    Descriptor { id: 4, name: "QuantizationNoise", category: Photometric, alters_geometry: false,
        params: &[p!("step", [27.0, 33.0, 39.0, 47.0, 55.0, 65.0, 76.0])] },
    Descriptor { id: 5, name: "MeanShift", category: Photometric, alters_geometry: false,
        params: &[p!("shift", STEP_10_70)] },
    Descriptor { id: 6, name: "ContrastChange", category: Photometric, alters_geometry: false,
        params: &[p!("gamma", [1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7])] },
    Descriptor { id: 7, name: "SaturationChange", category: Photometric, alters_geometry: false,
        params: &[p!("delta", [-0.10, -0.25, -0.40, -0.55, -0.70, -0.85, -1.0])] },
    Descriptor { id: 8, name: "CorrelatedGaussianNoise", category: Photometric, alters_geometry: false,
        params: &[p!("sigma", STEP_10_70)] },
    Descriptor { id: 9, name: "MultiplicativeGaussianNoise", category: Photometric, alters_geometry: false,
        params: &[p!("intensity_e4", [1.0, 3.0, 5.5, 8.0, 10.5, 13.0, 15.5])] },
    Descriptor { id: 10, name: "ColorQuantizationDither", category: Photometric, alters_geometry: false,
        params: &[p!("colors", [24.0, 16.0, 12.0, 8.0, 6.0, 4.0, 2.0])] },
    Descriptor { id: 11, name: "DownSample", category: Geometric, alters_geometry: true,
        params: &[p!("removed", DOWNSAMPLE)] },
    Descriptor { id: 12, name: "SaltPepperNoise", category: Photometric, alters_geometry: false,
        params: &[p!("fraction", [0.02, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30])] },
    Descriptor { id: 13, name: "RayleighNoise", category: Photometric, alters_geometry: false,
        params: &[p!("scale", STEP_10_70)] },
    Descriptor { id: 14, name: "GammaNoise", category: Photometric, alters_geometry: false,
        params: &[p!("rate", [0.1, 0.08, 0.07, 0.06, 0.05, 0.04, 0.03])] },
    Descriptor { id: 15, name: "UniformNoise", category: Photometric, alters_geometry: false,
        params: &[p!("amplitude", STEP_10_70)] },
    Descriptor { id: 16, name: "PoissonNoise", category: Photometric, alters_geometry: false,
        params: &[p!("mean", STEP_10_70)] },
    Descriptor { id: 17, name: "GaussianShifting", category: Geometric, alters_geometry: true,
        params: &[p!("sigma_percent", [0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0])] },
    Descriptor { id: 18, name: "UniformShifting", category: Geometric, alters_geometry: true,
        params: &[p!("fraction", PERCENT_10_70), p!("range_percent", [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0])] },
    Descriptor { id: 19, name: "LocalMissing", category: Local, alters_geometry: true,
        params: &[p!("anchors", ANCHORS)] },
    Descriptor { id: 20, name: "LocalOffset", category: Local, alters_geometry: true,
        params: &[p!("anchors", ANCHORS)] },
    Descriptor { id: 21, name: "LocalRotation", category: Local, alters_geometry: true,
        params: &[p!("anchors", ANCHORS), p!("degrees", [20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0])] },
    Descriptor { id: 22, name: "LuminanceNoise", category: Photometric, alters_geometry: false,
        params: &[p!("luma_offset", [20.0, 50.0, 70.0, 90.0, 110.0, 130.0, 150.0])] },
    Descriptor { id: 23, name: "PoissonReconstruction", category: External, alters_geometry: true,
        params: &[p!("removed", DOWNSAMPLE)] },
    Descriptor { id: 24, name: "Octree", category: Compression, alters_geometry: true,
        params: &[p!("resolution", [8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0])] },
    Descriptor { id: 25, name: "GPCC_lossless-geom-lossy-attrs", category: External, alters_geometry: false,
        params: &[p!("qp", GPCC_LOSSY_QP)] },
    Descriptor { id: 26, name: "GPCC_lossless-geom-nearlossless-attrs", category: External, alters_geometry: false,
        params: &[p!("qp", [10.0, 16.0, 22.0, 28.0, 34.0, 40.0, 46.0])] },
    Descriptor { id: 27, name: "GPCC_lossy-geom-lossy-attrs", category: External, alters_geometry: true,
        params: &[p!("positionQuantizationScale", [0.9375, 0.875, 0.75, 0.5, 0.25, 0.125, 0.0625]), p!("qp", GPCC_LOSSY_QP)] },
    Descriptor { id: 28, name: "VPCC_lossy-geom-lossy-attrs", category: External, alters_geometry: true,
        params: &[p!("geometryQP", [16.0, 20.0, 24.0, 28.0, 32.0, 36.0, 40.0]), p!("textureQP", [22.0, 27.0, 32.0, 37.0, 42.0, 47.0, 51.0])] },
    Descriptor { id: 29, name: "AVS_limitlossyG-lossyA", category: External, alters_geometry: true,
        params: &[p!("geom_quant_step", [1.14286, 1.33333, 2.0, 4.0, 8.0, 12.0, 16.0]), p!("attr_quant_param", AVS_ATTR_QP)] },
    Descriptor { id: 30, name: "AVS_losslessG-limitlossyA", category: External, alters_geometry: false,
        params: &[p!("attr_quant_param", AVS_ATTR_QP)] },
    Descriptor { id: 31, name: "AVS_losslessG-lossyA", category: External, alters_geometry: false,
        params: &[p!("attr_quant_param", AVS_ATTR_QP)] },
];

/// Looks up a distortion by its 1-based catalogue id.
pub fn descriptor(id: u8) -> Option<&'static Descriptor> {
    REGISTRY.get((id as usize).checked_sub(1)?)
}

pub fn all() -> &'static [Descriptor] {
    &REGISTRY
}

/// Ids of every distortion generated in-process, in catalogue order.
pub fn native_ids() -> Vec<u8> {
    REGISTRY.iter().filter(|d| d.is_native()).map(|d| d.id).collect()
}
