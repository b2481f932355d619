//! sRGB / CIELAB conversion and set distances in normalized Lab.
//!
//! Colors are stored as normalized CIELAB: `l = L/100`, `a = (a+128)/255`,
//! `b = (b+128)/255`, so every in-gamut sRGB color lands in the unit cube.
//! Conversions use the D65 white point and the CIE 1931 2° observer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// sRGB primaries to XYZ (D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.240_454_2, -1.537_138_5, -0.498_531_4],
    [-0.969_266_0, 1.876_010_8, 0.041_556_0],
    [0.055_643_4, -0.204_025_9, 1.057_225_2],
];

// White point taken as the image of RGB (1,1,1) so neutral grays map to a*=b*=0.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

/// Normalized value of a zero a*/b* channel.
pub const NEUTRAL_AB: f64 = 128.0 / 255.0;

/// A color in normalized CIELAB, each component in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl From<[f64; 3]> for LabColor {
    fn from(v: [f64; 3]) -> Self {
        LabColor::new(v[0], v[1], v[2])
    }
}

impl From<LabColor> for [f64; 3] {
    fn from(c: LabColor) -> Self {
        c.to_array()
    }
}

impl LabColor {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        LabColor { l, a, b }
    }

    /// Builds a color, rejecting components outside `[0, 1]` or non-finite.
    pub fn try_new(l: f64, a: f64, b: f64) -> Result<Self> {
        let c = LabColor::new(l, a, b);
        if c.is_valid() {
            Ok(c)
        } else {
            Err(Error::ColorOutOfRange([l, a, b]))
        }
    }

    /// From raw CIELAB (L in 0..100, a/b roughly -128..127).
    pub fn from_cielab(l: f64, a: f64, b: f64) -> Self {
        LabColor::new(l / 100.0, (a + 128.0) / 255.0, (b + 128.0) / 255.0)
    }

    /// Back to raw CIELAB.
    pub fn to_cielab(self) -> [f64; 3] {
        [self.l * 100.0, self.a * 255.0 - 128.0, self.b * 255.0 - 128.0]
    }

    pub fn is_valid(&self) -> bool {
        self.to_array()
            .iter()
            .all(|v| v.is_finite() && (0.0..=1.0).contains(v))
    }

    pub fn clamped(self) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        LabColor::new(c(self.l), c(self.a), c(self.b))
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.l, self.a, self.b]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        LabColor::new(v[0], v[1], v[2])
    }

    pub fn distance(&self, other: &LabColor) -> f64 {
        color_dist(self, other)
    }

    /// Hue angle in the normalized a/b plane, measured around the neutral axis.
    /// `None` for achromatic colors.
    pub fn hue(&self) -> Option<f64> {
        let da = self.a - NEUTRAL_AB;
        let db = self.b - NEUTRAL_AB;
        if da.hypot(db) < 1e-4 {
            None
        } else {
            Some(db.atan2(da))
        }
    }
}

fn srgb_decode(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn srgb_encode(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let f3 = f * f * f;
    if f3 > EPSILON {
        f3
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// 8-bit sRGB to normalized Lab.
pub fn srgb_to_lab(r: u8, g: u8, b: u8) -> LabColor {
    let lin = [
        srgb_decode(r as f64 / 255.0),
        srgb_decode(g as f64 / 255.0),
        srgb_decode(b as f64 / 255.0),
    ];
    let xyz = mat_vec(&RGB_TO_XYZ, lin);
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    LabColor::from_cielab(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)).clamped()
}

/// Result of converting a Lab color back to 8-bit sRGB.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SrgbConversion {
    pub rgb: [u8; 3],
    /// Set when at least one channel fell outside the sRGB gamut and was clamped.
    pub clamped: bool,
}

pub fn lab_to_srgb_checked(c: LabColor) -> SrgbConversion {
    let [l, a, b] = c.to_cielab();
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;
    let xyz = [
        lab_f_inv(fx) * WHITE[0],
        if l > KAPPA * EPSILON {
            fy * fy * fy
        } else {
            l / KAPPA
        } * WHITE[1],
        lab_f_inv(fz) * WHITE[2],
    ];
    let lin = mat_vec(&XYZ_TO_RGB, xyz);
    let mut clamped = false;
    let mut rgb = [0u8; 3];
    for (out, v) in rgb.iter_mut().zip(lin) {
        let e = srgb_encode(v.max(0.0)) * 255.0;
        if !(-0.5..=255.5).contains(&e) || v < -1e-6 {
            clamped = true;
        }
        *out = e.round().clamp(0.0, 255.0) as u8;
    }
    SrgbConversion { rgb, clamped }
}

/// Normalized Lab to 8-bit sRGB, clamping out-of-gamut channels.
pub fn lab_to_srgb(c: LabColor) -> [u8; 3] {
    lab_to_srgb_checked(c).rgb
}

/// Euclidean distance in normalized Lab.
pub fn color_dist(c1: &LabColor, c2: &LabColor) -> f64 {
    let dl = c1.l - c2.l;
    let da = c1.a - c2.a;
    let db = c1.b - c2.b;
    (dl * dl + da * da + db * db).sqrt()
}

/// Mean distance from each color of `from` to its nearest color in `to`.
pub fn directed_distance(from: &[LabColor], to: &[LabColor]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|p| to.iter().map(|q| color_dist(p, q)).fold(f64::INFINITY, f64::min))
        .sum();
    total / from.len() as f64
}

/// Modified Hausdorff distance between two color sets.
///
/// Each directed term averages over its own source set, so the sets may
/// differ in size.
pub fn mhd(p: &[LabColor], q: &[LabColor]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyColorSet);
    }
    Ok(directed_distance(p, q).max(directed_distance(q, p)))
}
