//! Environment model used as the digital twin: material-tagged planar facets,
//! the base-station placement, and the regions users and targets live in.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ArrayGeometry;
use crate::geometry::Vec3;
use crate::SPEED_OF_LIGHT;

pub const SUPPORTED_VERSION: u32 = 1;

const PLANARITY_TOL_M: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scene: {0}")]
    Invalid(ValidationReport),
    #[error("cannot read scene file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = SceneError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Specular reflection amplitude coefficient in `[0, 1]`.
    pub reflection_amplitude: f64,
    /// Amplitude factor applied once per wall crossing, in `[0, 1]`.
    pub penetration_amplitude: f64,
}

/// Planar parallelogram (normally a rectangle) with a material.
///
/// Facets that share a `wall` tag form one physical slab: a segment crossing
/// several of them is charged a single penetration factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub corners: [Vec3; 4],
    pub material: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall: Option<String>,
}

impl Facet {
    pub fn new(corners: [Vec3; 4], material: impl Into<String>) -> Self {
        Self {
            corners,
            material: material.into(),
            wall: None,
        }
    }

    pub fn with_wall(mut self, wall: impl Into<String>) -> Self {
        self.wall = Some(wall.into());
        self
    }

    /// Unit normal `(c1 - c0) × (c3 - c0)`, `None` if degenerate.
    pub fn normal(&self) -> Option<Vec3> {
        let [c0, c1, _, c3] = self.corners;
        (c1 - c0).cross(c3 - c0).normalized()
    }

    /// Vector area magnitude of the quadrilateral.
    pub fn area(&self) -> f64 {
        let [c0, c1, c2, c3] = self.corners;
        0.5 * (c2 - c0).cross(c3 - c1).norm()
    }

    /// True if any three consecutive corners are collinear.
    pub fn is_degenerate(&self) -> bool {
        (0..4).any(|i| {
            let prev = self.corners[(i + 3) % 4];
            let cur = self.corners[i];
            let next = self.corners[(i + 1) % 4];
            let a = next - cur;
            let b = prev - cur;
            let scale = a.norm() * b.norm();
            scale == 0.0 || a.cross(b).norm() <= 1e-12 * scale
        })
    }

    /// Distance of the third corner from the plane spanned by the others.
    pub fn planarity_error(&self) -> f64 {
        match self.normal() {
            Some(n) => (self.corners[2] - self.corners[0]).dot(n).abs(),
            None => f64::INFINITY,
        }
    }

    /// Distance between `c2` and the parallelogram completion `c1 + c3 - c0`.
    pub fn parallelogram_error(&self) -> f64 {
        let [c0, c1, c2, c3] = self.corners;
        (c1 + c3 - c0 - c2).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomBounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl RoomBounds {
    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

/// Axis-aligned horizontal rectangle at a fixed height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub height: f64,
}

impl Region {
    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            self.height,
        )
    }

    pub fn corners(&self) -> [Vec3; 4] {
        let [x0, y0] = self.min;
        let [x1, y1] = self.max;
        let z = self.height;
        [
            Vec3::new(x0, y0, z),
            Vec3::new(x1, y0, z),
            Vec3::new(x1, y1, z),
            Vec3::new(x0, y1, z),
        ]
    }
}

/// Array layout as written in the scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ArraySpec {
    /// Uniform linear array; element `n` sits at `n · spacing · axis`.
    Ula {
        n_elements: usize,
        spacing_wavelengths: f64,
        axis: Vec3,
    },
    /// Explicit element offsets in wavelengths.
    Custom { element_positions: Vec<Vec3> },
}

impl ArraySpec {
    pub fn half_wave_ula(n_elements: usize, axis: Vec3) -> Self {
        ArraySpec::Ula {
            n_elements,
            spacing_wavelengths: 0.5,
            axis,
        }
    }

    pub fn geometry(&self) -> ArrayGeometry {
        match self {
            ArraySpec::Ula {
                n_elements,
                spacing_wavelengths,
                axis,
            } => ArrayGeometry::ula(*n_elements, *spacing_wavelengths, *axis),
            ArraySpec::Custom { element_positions } => {
                ArrayGeometry::from_positions(element_positions.clone())
            }
        }
    }

    fn check(&self, location: &str, report: &mut ValidationReport) {
        match self {
            ArraySpec::Ula {
                n_elements,
                spacing_wavelengths,
                axis,
            } => {
                if *n_elements == 0 {
                    report.push(location, "array must have at least one element");
                }
                if !spacing_wavelengths.is_finite() || *spacing_wavelengths <= 0.0 {
                    report.push(location, "element spacing must be positive and finite");
                }
                if axis.normalized().is_none() {
                    report.push(location, "array axis must be a nonzero finite vector");
                }
            }
            ArraySpec::Custom { element_positions } => {
                if element_positions.is_empty() {
                    report.push(location, "array must have at least one element");
                }
                if element_positions.iter().any(|p| !p.is_finite()) {
                    report.push(location, "element positions must be finite");
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub position: Vec3,
    pub tx_array: ArraySpec,
    pub rx_array: ArraySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub version: u32,
    pub carrier_frequency_hz: f64,
    pub room: RoomBounds,
    pub bs: BaseStation,
    pub materials: Vec<Material>,
    pub facets: Vec<Facet>,
    pub ue_region: Region,
    pub target_region: Region,
    /// Facet treated as the main reflector by the fixed-reflector strategy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_reflector: Option<usize>,
}

impl Scene {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    pub fn material(&self, name: &str) -> Option<&Material> {
        self.materials.iter().find(|m| m.name == name)
    }

    pub fn facet_material(&self, facet: &Facet) -> Option<&Material> {
        self.material(&facet.material)
    }

    /// Indoor layout with a thick concrete partition and a glass outer wall.
    ///
    /// Room `[0,30] × [0,40] × [0,3]` m, BS at `(15, 1, 2.5)` with two co-located
    /// 16-element half-wavelength ULAs along y. The partition covers
    /// `x ∈ [5, 30]` at `y = 20` (faces at 19.9 and 20.1), leaving a 5 m
    /// opening next to the glass wall at `x = 0`. Targets sit at 1 m height in
    /// `[5,25] × [25,38]`; users cover the room at 1.5 m. Carrier 3.5 GHz.
    pub fn canonical() -> Scene {
        let h = 3.0;
        let wall_face = |y: f64| {
            Facet::new(
                [
                    Vec3::new(5.0, y, 0.0),
                    Vec3::new(30.0, y, 0.0),
                    Vec3::new(30.0, y, h),
                    Vec3::new(5.0, y, h),
                ],
                "concrete",
            )
            .with_wall("interior_wall")
        };
        let glass = Facet::new(
            [
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(0.0, 40.0, 0.0),
                Vec3::new(0.0, 40.0, h),
                Vec3::new(0.0, 0.0, h),
            ],
            "glass",
        );
        Scene {
            version: SUPPORTED_VERSION,
            carrier_frequency_hz: 3.5e9,
            room: RoomBounds {
                min: Vec3::new(0.0, 0.0, 0.0),
                max: Vec3::new(30.0, 40.0, h),
            },
            bs: BaseStation {
                position: Vec3::new(15.0, 1.0, 2.5),
                tx_array: ArraySpec::half_wave_ula(16, Vec3::new(0.0, 1.0, 0.0)),
                rx_array: ArraySpec::half_wave_ula(16, Vec3::new(0.0, 1.0, 0.0)),
            },
            materials: vec![
                Material {
                    name: "concrete".into(),
                    reflection_amplitude: 0.5,
                    penetration_amplitude: 0.18,
                },
                Material {
                    name: "glass".into(),
                    reflection_amplitude: 0.7,
                    penetration_amplitude: 0.6,
                },
            ],
            facets: vec![wall_face(19.9), wall_face(20.1), glass],
            ue_region: Region {
                min: [0.0, 0.0],
                max: [30.0, 40.0],
                height: 1.5,
            },
            target_region: Region {
                min: [5.0, 25.0],
                max: [25.0, 38.0],
                height: 1.0,
            },
            fixed_reflector: Some(2),
        }
    }

    /// Same placements and regions as [`Scene::canonical`] with no facets.
    pub fn free_space() -> Scene {
        Scene {
            facets: Vec::new(),
            fixed_reflector: None,
            ..Scene::canonical()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization cannot fail")
    }
}

/// One finding of [`validate_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Path-like location, e.g. `facets[3]`.
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{}: {}", v.location, v.message)?;
        }
        Ok(())
    }
}

/// Checks every scene invariant without modifying the scene.
pub fn validate_scene(s: &Scene) -> ValidationReport {
    let mut report = ValidationReport::default();

    if s.version != SUPPORTED_VERSION {
        report.push(
            "version",
            format!(
                "unsupported schema version {} (expected {SUPPORTED_VERSION})",
                s.version
            ),
        );
    }
    if !s.carrier_frequency_hz.is_finite() || s.carrier_frequency_hz <= 0.0 {
        report.push("carrier_frequency_hz", "carrier frequency must be positive");
    }

    let room = &s.room;
    if !room.min.is_finite()
        || !room.max.is_finite()
        || room.min.x >= room.max.x
        || room.min.y >= room.max.y
        || room.min.z >= room.max.z
    {
        report.push("room", "room bounds must satisfy min < max on every axis");
    }
    if !s.bs.position.is_finite() || !room.contains(s.bs.position) {
        report.push("bs.position", "base station must lie inside the room");
    }
    s.bs.tx_array.check("bs.tx_array", &mut report);
    s.bs.rx_array.check("bs.rx_array", &mut report);

    let mut names = HashSet::new();
    for (i, m) in s.materials.iter().enumerate() {
        let loc = format!("materials[{i}]");
        if !names.insert(m.name.as_str()) {
            report.push(&loc, format!("duplicate material name '{}'", m.name));
        }
        for (field, value) in [
            ("reflection_amplitude", m.reflection_amplitude),
            ("penetration_amplitude", m.penetration_amplitude),
        ] {
            if !(0.0..=1.0).contains(&value) {
                report.push(&loc, format!("{field} {value} outside [0, 1]"));
            }
        }
    }

    for (i, f) in s.facets.iter().enumerate() {
        let loc = format!("facets[{i}]");
        if s.material(&f.material).is_none() {
            report.push(&loc, format!("unknown material '{}'", f.material));
        }
        if f.corners.iter().any(|c| !c.is_finite()) {
            report.push(&loc, "corners must be finite");
            continue;
        }
        if f.is_degenerate() || f.area() <= 0.0 {
            report.push(&loc, "degenerate facet: collinear corners or zero area");
            continue;
        }
        let planarity = f.planarity_error();
        if planarity > PLANARITY_TOL_M {
            report.push(
                &loc,
                format!("corners not coplanar (off by {planarity:e} m)"),
            );
        }
        let para = f.parallelogram_error();
        if para > PLANARITY_TOL_M {
            report.push(
                &loc,
                format!("corners do not form a rectangle (off by {para:e} m)"),
            );
        }
    }

    for (name, region) in [
        ("ue_region", &s.ue_region),
        ("target_region", &s.target_region),
    ] {
        let finite = region.min.iter().chain(&region.max).all(|v| v.is_finite())
            && region.height.is_finite();
        if !finite || region.min[0] > region.max[0] || region.min[1] > region.max[1] {
            report.push(name, "region must satisfy min <= max");
            continue;
        }
        if region.corners().iter().any(|c| !room.contains(*c)) {
            report.push(name, "region extends outside the room bounds");
        }
    }

    if let Some(idx) = s.fixed_reflector {
        if idx >= s.facets.len() {
            report.push(
                "fixed_reflector",
                format!("facet index {idx} out of range ({} facets)", s.facets.len()),
            );
        }
    }

    report
}

/// Parses and validates a scene document.
pub fn load_scene(document: &str) -> Result<Scene> {
    let scene: Scene = serde_json::from_str(document).map_err(|e| SceneError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let report = validate_scene(&scene);
    if report.is_valid() {
        Ok(scene)
    } else {
        Err(SceneError::Invalid(report))
    }
}

pub fn load_scene_file(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scene(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shipped_scene_path() -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes/indoor_paper.json")
    }

    #[test]
    fn shipped_scene_matches_canonical() {
        let s = load_scene_file(shipped_scene_path()).unwrap();
        assert_eq!(s, Scene::canonical());
        assert_eq!(s.room.max.x - s.room.min.x, 30.0);
        assert_eq!(s.room.max.y - s.room.min.y, 40.0);
        let concrete: Vec<_> = s
            .facets
            .iter()
            .filter(|f| f.material == "concrete")
            .collect();
        assert_eq!(concrete.len(), 2);
        let gap = (concrete[1].corners[0] - concrete[0].corners[0]).norm();
        assert!((gap - 0.2).abs() < 1e-12);
        assert_eq!(s.facets.iter().filter(|f| f.material == "glass").count(), 1);
    }

    #[test]
    fn canonical_is_valid() {
        let report = validate_scene(&Scene::canonical());
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn free_space_is_valid() {
        let s = Scene::free_space();
        assert!(s.facets.is_empty());
        assert!(validate_scene(&s).is_valid());
    }

    #[test]
    fn collinear_corners_are_degenerate() {
        let mut s = Scene::free_space();
        s.facets.push(Facet::new(
            [
                Vec3::new(0.0, 5.0, 0.0),
                Vec3::new(1.0, 5.0, 0.0),
                Vec3::new(2.0, 5.0, 0.0),
                Vec3::new(0.0, 5.0, 1.0),
            ],
            "glass",
        ));
        let err = load_scene(&s.to_json()).unwrap_err();
        match err {
            SceneError::Invalid(r) => {
                assert_eq!(r.violations.len(), 1);
                assert_eq!(r.violations[0].location, "facets[0]");
                assert!(r.violations[0].message.contains("degenerate"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn target_region_outside_room() {
        let mut s = Scene::canonical();
        s.target_region.max = [25.0, 45.0];
        let r = validate_scene(&s);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].location, "target_region");
    }

    #[test]
    fn material_coefficient_out_of_range() {
        let mut s = Scene::canonical();
        s.materials[1].reflection_amplitude = 1.2;
        let r = validate_scene(&s);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].location, "materials[1]");
        assert!(r.violations[0].message.contains("1.2"));
    }

    #[test]
    fn validation_does_not_mutate() {
        let mut s = Scene::canonical();
        s.carrier_frequency_hz = -1.0;
        let before = s.clone();
        let r = validate_scene(&s);
        assert!(!r.is_valid());
        assert_eq!(s, before);
    }

    #[test]
    fn non_coplanar_and_unknown_material() {
        let mut s = Scene::canonical();
        s.facets[0].corners[2].y += 0.01;
        s.facets[1].material = "wood".into();
        let r = validate_scene(&s);
        let locs: Vec<_> = r.violations.iter().map(|v| v.location.as_str()).collect();
        assert!(locs.contains(&"facets[0]"));
        assert!(locs.contains(&"facets[1]"));
    }

    #[test]
    fn parse_error_reports_line() {
        let err = load_scene("{\n  \"version\": 1,\n  oops\n}").unwrap_err();
        match err {
            SceneError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unsupported_version_rejected() {
        let mut s = Scene::canonical();
        s.version = 7;
        assert!(matches!(
            load_scene(&s.to_json()),
            Err(SceneError::Invalid(_))
        ));
    }

    #[test]
    fn round_trip_is_identity() {
        let s = Scene::canonical();
        let again = load_scene(&s.to_json()).unwrap();
        assert_eq!(again, s);
        assert_eq!(load_scene(&again.to_json()).unwrap(), s);
    }
}
