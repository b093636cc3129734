//! Domain types shared across the crate: poses, descriptors, keyframes and
//! the keyframe containers the samplers operate on.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::spatial::GridIndex;
use crate::terms::DescriptorMatrix;

/// Minimum arc-length step between consecutive poses, in meters.
pub const MIN_ARCLENGTH_STEP: f64 = 1e-6;

/// A rigid pose. Only the translation takes part in distance computations;
/// the orientation is carried for I/O fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    /// Builds a pose from a position and an `(x, y, z, w)` quaternion, which
    /// is renormalized.
    pub fn new(position: [f64; 3], quaternion_xyzw: [f64; 4]) -> Result<Self> {
        if position.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pose position".into()));
        }
        if quaternion_xyzw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pose orientation".into()));
        }
        let [x, y, z, w] = quaternion_xyzw;
        let q = Quaternion::new(w, x, y, z);
        if q.norm() < 1e-12 {
            return Err(Error::InvalidParameter("zero-norm quaternion".into()));
        }
        Ok(Pose {
            position: Vector3::from(position),
            orientation: UnitQuaternion::from_quaternion(q),
        })
    }

    /// Pose with identity orientation. Panics on non-finite input.
    pub fn from_position(x: f64, y: f64, z: f64) -> Self {
        assert!(x.is_finite() && y.is_finite() && z.is_finite(), "non-finite position");
        Pose {
            position: Vector3::new(x, y, z),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        let c = self.orientation.coords;
        [c.x, c.y, c.z, c.w]
    }
}

/// Euclidean distance between the translations of two poses.
pub fn pose_distance(a: &Pose, b: &Pose) -> f64 {
    (a.position - b.position).norm()
}

/// Cumulative traveled distance along a pose sequence.
///
/// Each step is at least [`MIN_ARCLENGTH_STEP`], so the result is strictly
/// increasing even when the robot stands still.
pub fn cumulative_arclength(poses: &[Pose]) -> Result<Vec<f64>> {
    let first = poses.first().ok_or(Error::EmptyPoses)?;
    let mut out = Vec::with_capacity(poses.len());
    out.push(0.0);
    let mut acc = 0.0;
    let mut prev = first;
    for p in &poses[1..] {
        acc += pose_distance(prev, p).max(MIN_ARCLENGTH_STEP);
        out.push(acc);
        prev = p;
    }
    Ok(out)
}

/// An M-dimensional place descriptor. Cloning is cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor(Arc<[f64]>);

impl Descriptor {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("descriptor"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("descriptor".into()));
        }
        Ok(Descriptor(values.into()))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// A LiDAR return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
}

impl Point {
    pub fn new(x: f32, y: f32, z: f32) -> Self {
        Point {
            x,
            y,
            z,
            intensity: 0.0,
        }
    }

    /// Distance from the sensor in the horizontal plane.
    pub fn planar_range(&self) -> f64 {
        (self.x as f64).hypot(self.y as f64)
    }

    pub fn range(&self) -> f64 {
        let (x, y, z) = (self.x as f64, self.y as f64, self.z as f64);
        (x * x + y * y + z * z).sqrt()
    }
}

pub type PointCloud = Vec<Point>;

/// Reference to the point cloud a keyframe was built from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScanRef {
    Path(PathBuf),
    Offset { path: PathBuf, offset: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub id: u64,
    pub pose: Pose,
    pub descriptor: Descriptor,
    pub scan_ref: Option<ScanRef>,
}

impl Keyframe {
    pub fn new(id: u64, pose: Pose, descriptor: Descriptor) -> Self {
        Keyframe {
            id,
            pose,
            descriptor,
            scan_ref: None,
        }
    }
}

/// The keyframes currently under optimization.
///
/// `entries[0]` is the anchor. `extension` holds stored keyframes pulled in
/// because they lie near the window (revisited areas).
#[derive(Debug, Clone, Default)]
pub struct KeyframeWindow {
    pub entries: Vec<Keyframe>,
    pub extension: Vec<Keyframe>,
    pub capacity: usize,
}

impl KeyframeWindow {
    pub fn new(capacity: usize) -> Self {
        KeyframeWindow {
            entries: Vec::with_capacity(capacity),
            extension: Vec::new(),
            capacity,
        }
    }

    pub fn anchor(&self) -> Option<&Keyframe> {
        self.entries.first()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Append-only set of accepted keyframes with a spatial index over their
/// positions.
#[derive(Debug, Clone)]
pub struct KeyframeStore {
    keyframes: Vec<Keyframe>,
    by_id: HashMap<u64, usize>,
    index: GridIndex,
}

impl Default for KeyframeStore {
    fn default() -> Self {
        Self::new()
    }
}

impl KeyframeStore {
    pub fn new() -> Self {
        Self::with_cell_size(5.0)
    }

    /// `cell_size` only affects query speed, never results.
    pub fn with_cell_size(cell_size: f64) -> Self {
        KeyframeStore {
            keyframes: Vec::new(),
            by_id: HashMap::new(),
            index: GridIndex::new(cell_size),
        }
    }

    /// Appends `kf` unless a keyframe with the same id is already stored.
    /// Returns whether it was inserted.
    pub fn insert(&mut self, kf: Keyframe) -> bool {
        if self.by_id.contains_key(&kf.id) {
            return false;
        }
        let slot = self.keyframes.len();
        self.index.insert(slot, kf.pose.position);
        self.by_id.insert(kf.id, slot);
        self.keyframes.push(kf);
        true
    }

    pub fn contains(&self, id: u64) -> bool {
        self.by_id.contains_key(&id)
    }

    pub fn get(&self, id: u64) -> Option<&Keyframe> {
        self.by_id.get(&id).map(|&i| &self.keyframes[i])
    }

    pub fn keyframes(&self) -> &[Keyframe] {
        &self.keyframes
    }

    pub fn ids(&self) -> Vec<u64> {
        self.keyframes.iter().map(|k| k.id).collect()
    }

    pub fn len(&self) -> usize {
        self.keyframes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyframes.is_empty()
    }

    /// Ids of all keyframes within `radius` (inclusive) of `center`,
    /// ascending.
    pub fn radius_query(&self, center: &Pose, radius: f64) -> Vec<u64> {
        let mut ids: Vec<u64> = self
            .index
            .within(&center.position, radius, |slot| self.keyframes[slot].pose.position)
            .into_iter()
            .map(|slot| self.keyframes[slot].id)
            .collect();
        ids.sort_unstable();
        ids
    }
}

/// Free-function form of [`KeyframeStore::radius_query`].
pub fn radius_query(store: &KeyframeStore, center: &Pose, radius: f64) -> Vec<u64> {
    store.radius_query(center, radius)
}

/// One recorded sequence: poses plus whatever per-frame data accompanies
/// them.
#[derive(Debug, Clone, Default)]
pub struct Session {
    pub poses: Vec<Pose>,
    pub descriptors: Option<DescriptorMatrix>,
    pub scan_paths: Option<Vec<PathBuf>>,
    pub timestamps: Option<Vec<f64>>,
}

impl Session {
    pub fn new(poses: Vec<Pose>) -> Self {
        Session {
            poses,
            ..Default::default()
        }
    }

    pub fn with_descriptors(mut self, descriptors: DescriptorMatrix) -> Result<Self> {
        if descriptors.rows() != self.poses.len() {
            return Err(Error::CountMismatch {
                expected: self.poses.len(),
                found: descriptors.rows(),
            });
        }
        self.descriptors = Some(descriptors);
        Ok(self)
    }

    pub fn with_scan_paths(mut self, paths: Vec<PathBuf>) -> Result<Self> {
        if paths.len() != self.poses.len() {
            return Err(Error::CountMismatch {
                expected: self.poses.len(),
                found: paths.len(),
            });
        }
        self.scan_paths = Some(paths);
        Ok(self)
    }

    pub fn with_timestamps(mut self, timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.len() != self.poses.len() {
            return Err(Error::CountMismatch {
                expected: self.poses.len(),
                found: timestamps.len(),
            });
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn frame_count(&self) -> usize {
        self.poses.len()
    }

    /// Keyframes for every frame, id = frame index. Requires descriptors.
    pub fn keyframes(&self) -> Result<Vec<Keyframe>> {
        let desc = self
            .descriptors
            .as_ref()
            .ok_or(Error::MissingDescriptors("session keyframes"))?;
        self.poses
            .iter()
            .enumerate()
            .map(|(i, pose)| {
                let mut kf = Keyframe::new(i as u64, *pose, Descriptor::from_slice(desc.row(i))?);
                if let Some(paths) = &self.scan_paths {
                    kf.scan_ref = Some(ScanRef::Path(paths[i].clone()));
                }
                Ok(kf)
            })
            .collect()
    }

    /// Keyframes restricted to `ids` (frame indices), in the given order.
    pub fn keyframes_for(&self, ids: &[u64]) -> Result<Vec<Keyframe>> {
        let all = self.keyframes()?;
        ids.iter()
            .map(|&id| {
                all.get(id as usize).cloned().ok_or_else(|| {
                    Error::InvalidParameter(format!("id {id} out of range for session of {} frames", all.len()))
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64, z: f64) -> Pose {
        Pose::from_position(x, y, z)
    }

    #[test]
    fn pose_distance_examples() {
        let a = at(1.0, 2.0, 3.0);
        assert_eq!(pose_distance(&a, &a), 0.0);
        assert_eq!(pose_distance(&at(0.0, 0.0, 0.0), &at(3.0, 4.0, 0.0)), 5.0);
        let d = pose_distance(&at(1.0, 1.0, 1.0), &at(2.0, 2.0, 2.0));
        assert!((d - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rotation_does_not_affect_distance() {
        let a = Pose::new([0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]).unwrap();
        let b = at(3.0, 4.0, 0.0);
        assert_eq!(pose_distance(&a, &b), 5.0);
    }

    #[test]
    fn quaternion_is_renormalized() {
        let p = Pose::new([0.0; 3], [0.0, 0.0, 2.0, 2.0]).unwrap();
        let q = p.quaternion_xyzw();
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
        assert!(Pose::new([0.0; 3], [0.0; 4]).is_err());
        assert!(Pose::new([f64::NAN, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn arclength_examples() {
        assert!(matches!(cumulative_arclength(&[]), Err(Error::EmptyPoses)));
        assert_eq!(cumulative_arclength(&[at(1.0, 1.0, 1.0)]).unwrap(), vec![0.0]);
        let s = cumulative_arclength(&[at(0.0, 0.0, 0.0), at(1.0, 0.0, 0.0), at(3.0, 0.0, 0.0)]).unwrap();
        assert_eq!(s, vec![0.0, 1.0, 3.0]);
        let s = cumulative_arclength(&[at(2.0, 0.0, 0.0), at(2.0, 0.0, 0.0)]).unwrap();
        assert_eq!(s, vec![0.0, MIN_ARCLENGTH_STEP]);
    }

    #[test]
    fn store_rejects_duplicate_ids() {
        let d = Descriptor::new(vec![1.0]).unwrap();
        let mut store = KeyframeStore::new();
        assert!(store.insert(Keyframe::new(3, at(0.0, 0.0, 0.0), d.clone())));
        assert!(!store.insert(Keyframe::new(3, at(9.0, 0.0, 0.0), d)));
        assert_eq!(store.len(), 1);
        assert_eq!(store.get(3).unwrap().pose.position.x, 0.0);
    }

    #[test]
    fn radius_query_boundary_is_inclusive() {
        let d = Descriptor::new(vec![1.0]).unwrap();
        let mut store = KeyframeStore::new();
        assert!(store.radius_query(&at(0.0, 0.0, 0.0), 1.0).is_empty());
        store.insert(Keyframe::new(7, at(3.0, 4.0, 0.0), d));
        assert_eq!(store.radius_query(&at(0.0, 0.0, 0.0), 5.0), vec![7]);
        assert!(store.radius_query(&at(0.0, 0.0, 0.0), 4.999).is_empty());
    }

    #[test]
    fn descriptor_validation() {
        assert!(Descriptor::new(vec![]).is_err());
        assert!(Descriptor::new(vec![1.0, f64::INFINITY]).is_err());
        assert_eq!(Descriptor::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }

    #[test]
    fn session_length_checks() {
        let s = Session::new(vec![at(0.0, 0.0, 0.0); 3]);
        assert!(s.clone().with_timestamps(vec![0.0, 1.0]).is_err());
        let m = DescriptorMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let s = s.with_descriptors(m).unwrap();
        assert_eq!(s.keyframes().unwrap().len(), 3);
        assert_eq!(s.keyframes_for(&[2, 0]).unwrap()[0].id, 2);
        assert!(s.keyframes_for(&[5]).is_err());
    }
}
