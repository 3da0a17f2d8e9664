//! Image-method ray tracing over a [`Scene`].
//!
//! Paths are the direct segment plus specular reflection chains of up to two
//! bounces. Every segment is tested against all facets; each wall crossed is
//! charged its material's penetration amplitude once. Gains follow free-space
//! spreading `λ/(4π d)` per hop times the interaction amplitudes and the
//! carrier phase `exp(-j 2π f_c τ)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use thiserror::Error;

use crate::format::sig9;
use crate::geometry::Vec3;
use crate::scene::{Facet, Scene};
use crate::SPEED_OF_LIGHT;

/// Deepest reflection chain the tracer enumerates.
pub const MAX_REFLECTIONS: usize = 2;

const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("transmitter and receiver coincide")]
    CoincidentEndpoints,
    #[error("point {0:?} lies outside the room")]
    OutsideRoom(Vec3),
    #[error("at most {MAX_REFLECTIONS} reflections supported, got {0}")]
    TooManyReflections(usize),
    #[error("radar cross section must be positive, got {0}")]
    NonPositiveRcs(f64),
}

pub type Result<T, E = TraceError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionKind {
    Reflection,
    Penetration,
    TargetScatter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub kind: InteractionKind,
    /// Facet index; `None` for the target scatter.
    pub facet: Option<usize>,
    pub point: Vec3,
    /// Amplitude factor of this interaction. Reflection and penetration
    /// factors lie in `[0, 1]`; the target scatter carries `sqrt(4π σ)/λ`.
    pub amplitude_factor: f64,
}

/// Coarse classification used for CSV dumps and area labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Los,
    Reflection,
    Sensing,
}

impl PathKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::Los => "los",
            PathKind::Reflection => "reflection",
            PathKind::Sensing => "sensing",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    pub interactions: Vec<Interaction>,
    /// Free-space hop lengths: one for point-to-point paths, two for
    /// backscatter paths (BS→target, target→BS).
    pub hops_m: Vec<f64>,
    pub total_length_m: f64,
    pub delay_s: f64,
    pub complex_gain: Complex64,
    pub aod_az_rad: f64,
    pub aod_el_rad: f64,
    pub aoa_az_rad: f64,
    pub aoa_el_rad: f64,
}

impl PropagationPath {
    pub fn n_reflections(&self) -> usize {
        self.interactions
            .iter()
            .filter(|i| i.kind == InteractionKind::Reflection)
            .count()
    }

    pub fn kind(&self) -> PathKind {
        if self
            .interactions
            .iter()
            .any(|i| i.kind == InteractionKind::TargetScatter)
        {
            PathKind::Sensing
        } else if self.n_reflections() > 0 {
            PathKind::Reflection
        } else {
            PathKind::Los
        }
    }

    /// `∏_hops λ/(4π d_h) · ∏ amplitude_factors`.
    pub fn closed_form_amplitude(&self, wavelength: f64) -> f64 {
        let spreading: f64 = self
            .hops_m
            .iter()
            .map(|d| wavelength / (4.0 * PI * d))
            .product();
        let factors: f64 = self
            .interactions
            .iter()
            .map(|i| i.amplitude_factor)
            .product();
        spreading * factors
    }

    /// Bare path with only a gain and angles, for channel-synthesis tests.
    pub fn synthetic(gain: Complex64, aod: (f64, f64), aoa: (f64, f64)) -> Self {
        Self {
            interactions: Vec::new(),
            hops_m: Vec::new(),
            total_length_m: 0.0,
            delay_s: 0.0,
            complex_gain: gain,
            aod_az_rad: aod.0,
            aod_el_rad: aod.1,
            aoa_az_rad: aoa.0,
            aoa_el_rad: aoa.1,
        }
    }
}

/// BS→point segment of a sensing path: the gain before the target.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialPath {
    pub beta1: Complex64,
    pub aod_az_rad: f64,
    pub aod_el_rad: f64,
    pub delay_s: f64,
    pub total_length_m: f64,
    pub interactions: Vec<Interaction>,
}

impl PartialPath {
    pub fn is_reflection(&self) -> bool {
        self.interactions
            .iter()
            .any(|i| i.kind == InteractionKind::Reflection)
    }

    fn from_path(p: PropagationPath) -> Self {
        Self {
            beta1: p.complex_gain,
            aod_az_rad: p.aod_az_rad,
            aod_el_rad: p.aod_el_rad,
            delay_s: p.delay_s,
            total_length_m: p.total_length_m,
            interactions: p.interactions,
        }
    }
}

/// Reflection of `p` across the plane of `facet`.
///
/// # Panics
///
/// Panics if the facet is degenerate (no normal).
pub fn mirror_point(p: Vec3, facet: &Facet) -> Vec3 {
    let n = facet
        .normal()
        .expect("mirror_point needs a non-degenerate facet");
    let d = (p - facet.corners[0]).dot(n);
    p - n * (2.0 * d)
}

#[derive(Debug, Clone)]
struct FacetGeom {
    origin: Vec3,
    u: Vec3,
    v: Vec3,
    normal: Vec3,
    // Inverse Gram matrix of (u, v) for in-facet coordinates.
    gram_inv: [[f64; 2]; 2],
    reflection: f64,
    penetration: f64,
    group: usize,
}

impl FacetGeom {
    fn signed_distance(&self, p: Vec3) -> f64 {
        (p - self.origin).dot(self.normal)
    }

    fn contains(&self, p: Vec3) -> bool {
        let w = p - self.origin;
        let (wu, wv) = (w.dot(self.u), w.dot(self.v));
        let s = self.gram_inv[0][0] * wu + self.gram_inv[0][1] * wv;
        let t = self.gram_inv[1][0] * wu + self.gram_inv[1][1] * wv;
        let es = GEOM_EPS / self.u.norm();
        let et = GEOM_EPS / self.v.norm();
        (-es..=1.0 + es).contains(&s) && (-et..=1.0 + et).contains(&t)
    }

    fn mirror(&self, p: Vec3) -> Vec3 {
        p - self.normal * (2.0 * self.signed_distance(p))
    }

    fn same_plane(&self, other: &FacetGeom) -> bool {
        self.normal.cross(other.normal).norm() < 1e-12
            && self.signed_distance(other.origin).abs() < GEOM_EPS
    }
}

/// Tracer bound to one scene with precomputed facet planes.
#[derive(Debug, Clone)]
pub struct RayTracer<'a> {
    scene: &'a Scene,
    facets: Vec<FacetGeom>,
    wavelength: f64,
}

impl<'a> RayTracer<'a> {
    /// The scene must have passed validation.
    pub fn new(scene: &'a Scene) -> Self {
        let mut groups: HashMap<&str, usize> = HashMap::new();
        let n = scene.facets.len();
        let facets = scene
            .facets
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let [c0, c1, _, c3] = f.corners;
                let u = c1 - c0;
                let v = c3 - c0;
                let (uu, uv, vv) = (u.dot(u), u.dot(v), v.dot(v));
                let det = uu * vv - uv * uv;
                let mat = scene.facet_material(f);
                let group = match &f.wall {
                    Some(w) => {
                        let next = n + groups.len();
                        *groups.entry(w.as_str()).or_insert(next)
                    }
                    None => i,
                };
                FacetGeom {
                    origin: c0,
                    u,
                    v,
                    normal: f.normal().unwrap_or(Vec3::ZERO),
                    gram_inv: [[vv / det, -uv / det], [-uv / det, uu / det]],
                    reflection: mat.map_or(0.0, |m| m.reflection_amplitude),
                    penetration: mat.map_or(0.0, |m| m.penetration_amplitude),
                    group,
                }
            })
            .collect();
        Self {
            scene,
            facets,
            wavelength: scene.wavelength(),
        }
    }

    pub fn scene(&self) -> &Scene {
        self.scene
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// All direct and reflected paths from `tx` to `rx`, strongest first.
    pub fn trace_point_to_point(
        &self,
        tx: Vec3,
        rx: Vec3,
        max_reflections: usize,
    ) -> Result<Vec<PropagationPath>> {
        if max_reflections > MAX_REFLECTIONS {
            return Err(TraceError::TooManyReflections(max_reflections));
        }
        for p in [tx, rx] {
            if !p.is_finite() || !self.scene.room.contains(p) {
                return Err(TraceError::OutsideRoom(p));
            }
        }
        if tx.distance(rx) <= GEOM_EPS {
            return Err(TraceError::CoincidentEndpoints);
        }

        let mut paths = Vec::new();
        let mut sequence = Vec::with_capacity(max_reflections);
        self.enumerate(tx, rx, max_reflections, &mut sequence, &mut paths);

        // Stable sort keeps enumeration order as the last tie-break.
        paths.sort_by(|a, b| {
            b.complex_gain
                .norm()
                .total_cmp(&a.complex_gain.norm())
                .then(a.delay_s.total_cmp(&b.delay_s))
        });
        Ok(paths)
    }

    fn enumerate(
        &self,
        tx: Vec3,
        rx: Vec3,
        depth_left: usize,
        sequence: &mut Vec<usize>,
        out: &mut Vec<PropagationPath>,
    ) {
        if let Some(p) = self.build_path(tx, rx, sequence) {
            out.push(p);
        }
        if depth_left == 0 {
            return;
        }
        for f in 0..self.facets.len() {
            if let Some(&last) = sequence.last() {
                if last == f || self.facets[last].same_plane(&self.facets[f]) {
                    continue;
                }
            }
            sequence.push(f);
            self.enumerate(tx, rx, depth_left - 1, sequence, out);
            sequence.pop();
        }
    }

    /// Image-method construction for one reflection sequence.
    fn build_path(&self, tx: Vec3, rx: Vec3, sequence: &[usize]) -> Option<PropagationPath> {
        let mut images = Vec::with_capacity(sequence.len());
        let mut img = tx;
        for &f in sequence {
            img = self.facets[f].mirror(img);
            images.push(img);
        }

        // Walk back from the receiver towards successive images.
        let mut bounce_points = vec![Vec3::ZERO; sequence.len()];
        let mut q = rx;
        for j in (0..sequence.len()).rev() {
            let geom = &self.facets[sequence[j]];
            let dq = geom.signed_distance(q);
            let di = geom.signed_distance(images[j]);
            if !(dq > GEOM_EPS && di < -GEOM_EPS || dq < -GEOM_EPS && di > GEOM_EPS) {
                return None;
            }
            let t = dq / (dq - di);
            let p = q + (images[j] - q) * t;
            if !geom.contains(p) {
                return None;
            }
            bounce_points[j] = p;
            q = p;
        }

        let mut points = Vec::with_capacity(sequence.len() + 2);
        points.push(tx);
        points.extend_from_slice(&bounce_points);
        points.push(rx);

        // Specular validity: neighbours strictly on the same side of the plane.
        for (j, &f) in sequence.iter().enumerate() {
            let geom = &self.facets[f];
            let before = geom.signed_distance(points[j]);
            let after = geom.signed_distance(points[j + 2]);
            if before.abs() <= GEOM_EPS || after.abs() <= GEOM_EPS || before * after < 0.0 {
                return None;
            }
        }

        let mut interactions = Vec::new();
        let mut amplitude = 1.0;
        let mut length = 0.0;
        for (seg, w) in points.windows(2).enumerate() {
            let seg_len = w[0].distance(w[1]);
            if seg_len <= GEOM_EPS {
                return None;
            }
            length += seg_len;
            for (point, f) in self.crossings(w[0], w[1]) {
                let factor = self.facets[f].penetration;
                amplitude *= factor;
                interactions.push(Interaction {
                    kind: InteractionKind::Penetration,
                    facet: Some(f),
                    point,
                    amplitude_factor: factor,
                });
            }
            if seg < sequence.len() {
                let f = sequence[seg];
                let factor = self.facets[f].reflection;
                amplitude *= factor;
                interactions.push(Interaction {
                    kind: InteractionKind::Reflection,
                    facet: Some(f),
                    point: points[seg + 1],
                    amplitude_factor: factor,
                });
            }
        }
        if amplitude <= 0.0 {
            return None;
        }

        let (aod_az, aod_el) = (points[1] - tx).az_el();
        let (aoa_az, aoa_el) = (points[points.len() - 2] - rx).az_el();
        Some(PropagationPath {
            interactions,
            hops_m: vec![length],
            total_length_m: length,
            delay_s: length / SPEED_OF_LIGHT,
            complex_gain: self.free_space_gain(length) * amplitude,
            aod_az_rad: aod_az,
            aod_el_rad: aod_el,
            aoa_az_rad: aoa_az,
            aoa_el_rad: aoa_el,
        })
    }

    /// `λ/(4π d) · exp(-j 2π d/λ)`; the phase uses the fractional wavelength
    /// count to stay accurate at long range.
    fn free_space_gain(&self, length: f64) -> Complex64 {
        let cycles = (length / self.wavelength).fract();
        Complex64::from_polar(self.wavelength / (4.0 * PI * length), -2.0 * PI * cycles)
    }

    /// Facets crossed strictly inside segment `a → b`, one entry per wall
    /// group, ordered along the segment.
    fn crossings(&self, a: Vec3, b: Vec3) -> Vec<(Vec3, usize)> {
        let mut hits: Vec<(f64, Vec3, usize)> = Vec::new();
        for (i, g) in self.facets.iter().enumerate() {
            let da = g.signed_distance(a);
            let db = g.signed_distance(b);
            let crosses = da > GEOM_EPS && db < -GEOM_EPS || da < -GEOM_EPS && db > GEOM_EPS;
            if !crosses {
                continue;
            }
            let t = da / (da - db);
            let p = a + (b - a) * t;
            if g.contains(p) {
                hits.push((t, p, i));
            }
        }
        hits.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(&y.2)));
        let mut seen = Vec::new();
        hits.into_iter()
            .filter(|&(_, _, i)| {
                let g = self.facets[i].group;
                if seen.contains(&g) {
                    false
                } else {
                    seen.push(g);
                    true
                }
            })
            .map(|(_, p, i)| (p, i))
            .collect()
    }

    /// BS-to-point paths with their partial gains; no target factor applied.
    pub fn partial_trace(&self, target: Vec3, max_reflections: usize) -> Result<Vec<PartialPath>> {
        Ok(self
            .trace_point_to_point(self.scene.bs.position, target, max_reflections)?
            .into_iter()
            .map(PartialPath::from_path)
            .collect())
    }

    /// Isotropic point-scatter amplitude `sqrt(4π σ)/λ`, so a LoS round trip
    /// obeys the radar equation `|α|² = σ λ² / ((4π)³ d⁴)`.
    pub fn target_amplitude(&self, rcs_m2: f64) -> f64 {
        (4.0 * PI * rcs_m2).sqrt() / self.wavelength
    }

    /// Two-hop backscatter paths BS → target → BS for every ordered pair of
    /// partial paths. AoD comes from the outbound path, AoA from the return.
    pub fn compose_sensing_paths(
        &self,
        target: Vec3,
        rcs_m2: f64,
        max_reflections: usize,
    ) -> Result<Vec<PropagationPath>> {
        if !(rcs_m2 > 0.0) || !rcs_m2.is_finite() {
            return Err(TraceError::NonPositiveRcs(rcs_m2));
        }
        let partial = self.partial_trace(target, max_reflections)?;
        Ok(compose_pairs(
            &partial,
            target,
            self.target_amplitude(rcs_m2),
        ))
    }

    /// Same as [`RayTracer::compose_sensing_paths`] for already traced
    /// partial paths.
    pub fn compose_from_partial(
        &self,
        partial: &[PartialPath],
        target: Vec3,
        rcs_m2: f64,
    ) -> Result<Vec<PropagationPath>> {
        if !(rcs_m2 > 0.0) || !rcs_m2.is_finite() {
            return Err(TraceError::NonPositiveRcs(rcs_m2));
        }
        Ok(compose_pairs(
            partial,
            target,
            self.target_amplitude(rcs_m2),
        ))
    }
}

fn compose_pairs(partial: &[PartialPath], target: Vec3, alpha: f64) -> Vec<PropagationPath> {
    let mut out = Vec::with_capacity(partial.len() * partial.len());
    for inbound in partial {
        for ret in partial {
            let mut interactions = inbound.interactions.clone();
            interactions.push(Interaction {
                kind: InteractionKind::TargetScatter,
                facet: None,
                point: target,
                amplitude_factor: alpha,
            });
            interactions.extend(ret.interactions.iter().rev().cloned());
            out.push(PropagationPath {
                interactions,
                hops_m: vec![inbound.total_length_m, ret.total_length_m],
                total_length_m: inbound.total_length_m + ret.total_length_m,
                delay_s: inbound.delay_s + ret.delay_s,
                complex_gain: inbound.beta1 * alpha * ret.beta1,
                aod_az_rad: inbound.aod_az_rad,
                aod_el_rad: inbound.aod_el_rad,
                aoa_az_rad: ret.aod_az_rad,
                aoa_el_rad: ret.aod_el_rad,
            });
        }
    }
    out
}

pub fn trace_point_to_point(
    s: &Scene,
    tx: Vec3,
    rx: Vec3,
    max_reflections: usize,
) -> Result<Vec<PropagationPath>> {
    RayTracer::new(s).trace_point_to_point(tx, rx, max_reflections)
}

pub fn partial_trace(s: &Scene, target: Vec3, max_reflections: usize) -> Result<Vec<PartialPath>> {
    RayTracer::new(s).partial_trace(target, max_reflections)
}

pub fn compose_sensing_paths(
    s: &Scene,
    target: Vec3,
    rcs_m2: f64,
    max_reflections: usize,
) -> Result<Vec<PropagationPath>> {
    RayTracer::new(s).compose_sensing_paths(target, rcs_m2, max_reflections)
}

/// One CSV row per path:
/// `type,n_reflections,length_m,delay_ns,gain_db,aod_az_deg,aod_el_deg,aoa_az_deg,aoa_el_deg`.
pub fn write_paths_csv(paths: &[PropagationPath], mut w: impl Write) -> std::io::Result<()> {
    writeln!(
        w,
        "type,n_reflections,length_m,delay_ns,gain_db,aod_az_deg,aod_el_deg,aoa_az_deg,aoa_el_deg"
    )?;
    for p in paths {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            p.kind().as_str(),
            p.n_reflections(),
            sig9(p.total_length_m),
            sig9(p.delay_s * 1e9),
            sig9(20.0 * p.complex_gain.norm().log10()),
            sig9(p.aod_az_rad.to_degrees()),
            sig9(p.aod_el_rad.to_degrees()),
            sig9(p.aoa_az_rad.to_degrees()),
            sig9(p.aoa_el_rad.to_degrees()),
        )?;
    }
    Ok(())
}
