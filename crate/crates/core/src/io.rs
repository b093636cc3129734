//! Dataset ingestion and result emission.
//!
//! Pose text formats: KITTI (12 numbers per line, row-major 3x4 transform)
//! and TUM (`t tx ty tz qx qy qz qw`, quaternion in x, y, z, w order).
//! Point clouds are raw little-endian `f32` quadruples `(x, y, z, intensity)`.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::descriptors::{load_descriptors, SyntheticField, SyntheticFieldConfig};
use crate::error::{Error, Result};
use crate::evaluation::{EvalReport, PrPoint};
use crate::model::{Point, PointCloud, Pose, Session};
use crate::terms::DescriptorMatrix;

const POINT_BYTES: usize = 16;

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_numbers(path: &Path, line: usize, text: &str, count: usize) -> Result<Vec<f64>> {
    let values = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("not a finite number: {t:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != count {
        return Err(parse_err(
            path,
            line,
            format!("expected {count} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

fn pose_from_matrix(r: Matrix3<f64>, t: Vector3<f64>) -> Result<Pose> {
    let rot = Rotation3::from_matrix(&r);
    let q = UnitQuaternion::from_rotation_matrix(&rot);
    Pose::new([t.x, t.y, t.z], [q.i, q.j, q.k, q.w])
}

pub fn parse_kitti_poses(text: &str, path: &Path) -> Result<Vec<Pose>> {
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v = parse_numbers(path, i + 1, line, 12)?;
        let r = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        let t = Vector3::new(v[3], v[7], v[11]);
        poses.push(pose_from_matrix(r, t).map_err(|e| parse_err(path, i + 1, e.to_string()))?);
    }
    Ok(poses)
}

pub fn read_kitti_poses(path: &Path) -> Result<Vec<Pose>> {
    parse_kitti_poses(&read_text(path)?, path)
}

pub fn format_kitti_poses(poses: &[Pose]) -> String {
    let mut out = String::new();
    for p in poses {
        let r = p.orientation.to_rotation_matrix();
        let m = r.matrix();
        let t = p.position;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {} {} {}",
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            t.x,
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            t.y,
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
            t.z
        );
    }
    out
}

pub fn parse_tum_poses(text: &str, path: &Path) -> Result<Vec<(f64, Pose)>> {
    let mut out: Vec<(f64, Pose)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = parse_numbers(path, i + 1, line, 8)?;
        if let Some((last, _)) = out.last() {
            if !(v[0] > *last) {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("timestamp {} does not increase past {last}", v[0]),
                ));
            }
        }
        let pose = Pose::new([v[1], v[2], v[3]], [v[4], v[5], v[6], v[7]])
            .map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        out.push((v[0], pose));
    }
    Ok(out)
}

pub fn read_tum_poses(path: &Path) -> Result<Vec<(f64, Pose)>> {
    parse_tum_poses(&read_text(path)?, path)
}

pub fn format_tum_poses(stamped: &[(f64, Pose)]) -> String {
    let mut out = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for (t, p) in stamped {
        let q = p.quaternion_xyzw();
        let x = p.position;
        let _ = writeln!(out, "{t} {} {} {} {} {} {} {}", x.x, x.y, x.z, q[0], q[1], q[2], q[3]);
    }
    out
}

pub fn write_tum_poses(path: &Path, stamped: &[(f64, Pose)]) -> Result<()> {
    fs::write(path, format_tum_poses(stamped)).map_err(|e| Error::io(path, e))
}

pub fn write_kitti_poses(path: &Path, poses: &[Pose]) -> Result<()> {
    fs::write(path, format_kitti_poses(poses)).map_err(|e| Error::io(path, e))
}

pub fn decode_point_cloud(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    if !bytes.len().is_multiple_of(POINT_BYTES) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("size {} is not a multiple of {POINT_BYTES}", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(POINT_BYTES)
        .map(|c| {
            let f = |k: usize| f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap());
            Point {
                x: f(0),
                y: f(1),
                z: f(2),
                intensity: f(3),
            }
        })
        .collect())
}

pub fn encode_point_cloud(cloud: &[Point]) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * POINT_BYTES);
    for p in cloud {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_point_cloud(&bytes, path)
}

pub fn write_point_cloud(path: &Path, cloud: &[Point]) -> Result<()> {
    fs::write(path, encode_point_cloud(cloud)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseFormat {
    Kitti,
    Tum,
}

/// Where a session's inputs live on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetLayout {
    pub pose_format: PoseFormat,
    pub pose_path: PathBuf,
    pub scan_dir: Option<PathBuf>,
    pub descriptor_path: Option<PathBuf>,
}

impl DatasetLayout {
    /// Guesses the pose format from the extension: `.tum` is TUM,
    /// everything else KITTI.
    pub fn from_pose_path(pose_path: impl Into<PathBuf>) -> Self {
        let pose_path = pose_path.into();
        let pose_format = match pose_path.extension().and_then(|e| e.to_str()) {
            Some("tum") => PoseFormat::Tum,
            _ => PoseFormat::Kitti,
        };
        DatasetLayout {
            pose_format,
            pose_path,
            scan_dir: None,
            descriptor_path: None,
        }
    }
}

/// `.bin` files of a directory in lexicographic order.
pub fn list_scans(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "bin") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn load_session(layout: &DatasetLayout) -> Result<Session> {
    let mut session = match layout.pose_format {
        PoseFormat::Kitti => Session::new(read_kitti_poses(&layout.pose_path)?),
        PoseFormat::Tum => {
            let stamped = read_tum_poses(&layout.pose_path)?;
            let (t, p): (Vec<f64>, Vec<Pose>) = stamped.into_iter().unzip();
            Session::new(p).with_timestamps(t)?
        }
    };
    if let Some(d) = &layout.descriptor_path {
        let n = session.frame_count();
        session = session.with_descriptors(load_descriptors(d, Some(n))?)?;
    }
    if let Some(dir) = &layout.scan_dir {
        session = session.with_scan_paths(list_scans(dir)?)?;
    }
    Ok(session)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Loop,
    FigureEight,
    Line,
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loop" => Ok(Shape::Loop),
            "figure_eight" | "figure-eight" => Ok(Shape::FigureEight),
            "line" => Ok(Shape::Line),
            other => Err(Error::InvalidParameter(format!("unknown shape {other:?}"))),
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Shape::Loop => "loop",
            Shape::FigureEight => "figure_eight",
            Shape::Line => "line",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSessionSpec {
    pub shape: Shape,
    /// Path length of one lap, meters.
    pub length: f64,
    pub frame_spacing: f64,
    pub revisit_laps: usize,
    pub descriptor: SyntheticFieldConfig,
    pub pose_noise_sigma: f64,
    /// Drives pose and descriptor noise. The field is fixed by
    /// `descriptor.seed`.
    pub seed: u64,
    /// Seconds between frames.
    pub frame_period: f64,
}

impl SyntheticSessionSpec {
    /// Noise-free session over a 64-dimensional random field.
    pub fn new(shape: Shape, length: f64, frame_spacing: f64, revisit_laps: usize, seed: u64) -> Result<Self> {
        Ok(SyntheticSessionSpec {
            shape,
            length,
            frame_spacing,
            revisit_laps,
            descriptor: SyntheticFieldConfig::random(64, 0.1, seed)?,
            pose_noise_sigma: 0.0,
            seed,
            frame_period: 0.1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "length must be > 0, got {}",
                self.length
            )));
        }
        if !(self.frame_spacing > 0.0 && self.frame_spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "frame spacing must be > 0, got {}",
                self.frame_spacing
            )));
        }
        if self.revisit_laps == 0 {
            return Err(Error::InvalidParameter("at least one lap is required".into()));
        }
        if !(self.pose_noise_sigma >= 0.0 && self.pose_noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter("pose noise must be >= 0".into()));
        }
        if !(self.frame_period > 0.0) {
            return Err(Error::InvalidParameter("frame period must be > 0".into()));
        }
        self.descriptor.validate()
    }

    /// Frames per lap on closed shapes, segments per pass on a line.
    pub fn frames_per_lap(&self) -> usize {
        ((self.length / self.frame_spacing).round() as usize).max(1)
    }
}

/// Arc-length parametrized figure eight (lemniscate of Gerono) of total
/// length `length`, sampled at `count` equal arc-length steps per lap.
fn figure_eight_points(length: f64, count: usize) -> Vec<(Vector3<f64>, f64)> {
    const DENSE: usize = 20_000;
    let raw = |t: f64| Vector3::new(t.sin(), t.sin() * t.cos(), 0.0);
    let mut cum = vec![0.0; DENSE + 1];
    for i in 1..=DENSE {
        let a = raw(TAU * (i - 1) as f64 / DENSE as f64);
        let b = raw(TAU * i as f64 / DENSE as f64);
        cum[i] = cum[i - 1] + (b - a).norm();
    }
    let scale = length / cum[DENSE];
    (0..count)
        .map(|j| {
            let target = cum[DENSE] * j as f64 / count as f64;
            let k = cum.partition_point(|&c| c <= target).clamp(1, DENSE);
            let frac = (target - cum[k - 1]) / (cum[k] - cum[k - 1]);
            let t = TAU * (k - 1) as f64 / DENSE as f64 + frac * TAU / DENSE as f64;
            let d = Vector3::new(t.cos(), (2.0 * t).cos(), 0.0);
            (raw(t) * scale, d.y.atan2(d.x))
        })
        .collect()
}

/// Positions and headings of the noise-free trajectory.
fn trajectory(spec: &SyntheticSessionSpec) -> Vec<(Vector3<f64>, f64)> {
    let per_lap = spec.frames_per_lap();
    match spec.shape {
        Shape::Loop => {
            let radius = spec.length / TAU;
            (0..per_lap * spec.revisit_laps)
                .map(|j| {
                    let a = TAU * (j % per_lap) as f64 / per_lap as f64;
                    (
                        Vector3::new(radius * a.cos(), radius * a.sin(), 0.0),
                        a + std::f64::consts::FRAC_PI_2,
                    )
                })
                .collect()
        }
        Shape::FigureEight => {
            let lap = figure_eight_points(spec.length, per_lap);
            (0..per_lap * spec.revisit_laps).map(|j| lap[j % per_lap]).collect()
        }
        Shape::Line => {
            let step = spec.length / per_lap as f64;
            let last = per_lap * spec.revisit_laps;
            (0..=last)
                .map(|j| {
                    let (pass, k) = if j == last {
                        (spec.revisit_laps - 1, per_lap)
                    } else {
                        (j / per_lap, j % per_lap)
                    };
                    // passes alternate direction
                    if pass % 2 == 0 {
                        (Vector3::new(step * k as f64, 0.0, 0.0), 0.0)
                    } else {
                        (
                            Vector3::new(step * (per_lap - k) as f64, 0.0, 0.0),
                            std::f64::consts::PI,
                        )
                    }
                })
                .collect()
        }
    }
}

/// Deterministic synthetic session. Closed shapes use `round(length /
/// frame_spacing)` frames per lap, so frame `i` and `i + frames_per_lap`
/// share a nominal position; a line is traversed back and forth.
/// Descriptors are rounded to `f32`, matching what a KDSC file stores.
pub fn generate_synthetic_session(spec: &SyntheticSessionSpec) -> Result<Session> {
    spec.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let noise = (spec.pose_noise_sigma > 0.0).then(|| Normal::new(0.0, spec.pose_noise_sigma).unwrap());
    let mut field = SyntheticField::new(spec.descriptor.clone(), spec.seed.wrapping_add(1))?;
    let mut poses = Vec::new();
    let mut rows = Vec::new();
    for (pos, heading) in trajectory(spec) {
        let mut p = pos;
        if let Some(n) = &noise {
            p.x += n.sample(&mut rng);
            p.y += n.sample(&mut rng);
        }
        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), heading);
        poses.push(Pose::new([p.x, p.y, p.z], [q.i, q.j, q.k, q.w])?);
        rows.push(
            field
                .descriptor(&p)
                .values()
                .iter()
                .map(|&v| v as f32 as f64)
                .collect::<Vec<f64>>(),
        );
    }
    let timestamps = (0..poses.len()).map(|i| i as f64 * spec.frame_period).collect();
    Session::new(poses)
        .with_descriptors(DescriptorMatrix::from_rows(&rows)?)?
        .with_timestamps(timestamps)
}

/// Precision-recall rows, `threshold,precision,recall`.
pub fn format_pr_csv(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold,precision,recall\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.threshold, p.precision, p.recall);
    }
    out
}

pub fn parse_pr_csv(text: &str, path: &Path) -> Result<Vec<PrPoint>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "threshold,precision,recall" => {}
        _ => return Err(parse_err(path, 1, "missing header threshold,precision,recall")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let v = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, i + 1, format!("bad value {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if v.len() != 3 {
            return Err(parse_err(path, i + 1, format!("expected 3 fields, found {}", v.len())));
        }
        out.push(PrPoint {
            threshold: v[0],
            precision: v[1],
            recall: v[2],
        });
    }
    Ok(out)
}

pub fn read_pr_csv(path: &Path) -> Result<Vec<PrPoint>> {
    parse_pr_csv(&read_text(path)?, path)
}

pub const SUMMARY_HEADER: &str = "auc,f1_max,memory_ratio,tp,fp,fn,tn,query_comparisons";

/// One-row summary. Wall time is left out so the file is reproducible.
pub fn format_summary_csv(report: &EvalReport) -> String {
    let c = &report.counts;
    format!(
        "{SUMMARY_HEADER}\n{},{},{},{},{},{},{},{}\n",
        report.auc, report.f1_max, report.memory_ratio, c.tp, c.fp, c.fn_, c.tn, report.query_comparisons
    )
}

/// Standalone SVG plot of precision over recall on unit axes.
pub fn format_svg_plot(points: &[PrPoint]) -> String {
    const SIZE: f64 = 400.0;
    const MARGIN: f64 = 50.0;
    let x = |r: f64| MARGIN + r.clamp(0.0, 1.0) * SIZE;
    let y = |p: f64| MARGIN + (1.0 - p.clamp(0.0, 1.0)) * SIZE;
    let mut sorted: Vec<&PrPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.recall.total_cmp(&b.recall).then(b.precision.total_cmp(&a.precision)));
    let path: Vec<String> = sorted
        .iter()
        .map(|p| format!("{:.3},{:.3}", x(p.recall), y(p.precision)))
        .collect();
    let total = SIZE + 2.0 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(
        svg,
        r#"  <rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"  <rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"  <text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{v}</text>"#,
            x(v),
            MARGIN + SIZE + 18.0
        );
        let _ = writeln!(
            svg,
            r#"  <text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{v}</text>"#,
            MARGIN - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"  <text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">recall</text>"#,
        MARGIN + SIZE / 2.0,
        total - 8.0
    );
    let _ = writeln!(
        svg,
        r#"  <text x="14" y="{:.1}" font-size="14" text-anchor="middle" transform="rotate(-90 14 {:.1})">precision</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    );
    if !path.is_empty() {
        let _ = writeln!(
            svg,
            r#"  <polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
            path.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_svg_plot(points: &[PrPoint], out_path: &Path) -> Result<()> {
    fs::write(out_path, format_svg_plot(points)).map_err(|e| Error::io(out_path, e))
}

/// Writes `pr.csv`, `summary.csv` and `pr.svg` into `out_dir`.
pub fn write_results(report: &EvalReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pr = out_dir.join("pr.csv");
    fs::write(&pr, format_pr_csv(&report.pr_points)).map_err(|e| Error::io(&pr, e))?;
    let summary = out_dir.join("summary.csv");
    fs::write(&summary, format_summary_csv(report)).map_err(|e| Error::io(&summary, e))?;
    write_svg_plot(&report.pr_points, &out_dir.join("pr.svg"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cumulative_arclength;

    fn p() -> &'static Path {
        Path::new("test")
    }

    #[test]
    fn kitti_examples() {
        let poses = parse_kitti_poses("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 1 0 1 0 2 0 0 1 3\n", p()).unwrap();
        assert_eq!(poses[0].position, Vector3::zeros());
        assert_eq!(poses[0].quaternion_xyzw(), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(poses[1].position, Vector3::new(1.0, 2.0, 3.0));
        let rz = parse_kitti_poses("0 -1 0 0 1 0 0 0 0 0 1 0", p()).unwrap();
        let q = rz[0].quaternion_xyzw();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in q.iter().zip([0.0, 0.0, h, h]) {
            assert!((a - b).abs() < 1e-9, "{q:?}");
        }
    }

    #[test]
    fn kitti_errors_name_the_line() {
        let err = parse_kitti_poses("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0\n", p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_kitti_poses("1 0 0 0 0 1 0 0 0 0 1 x\n", p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn kitti_round_trip() {
        let poses = parse_kitti_poses("0 -1 0 4.5 1 0 0 -2 0 0 1 0.25\n", p()).unwrap();
        let back = parse_kitti_poses(&format_kitti_poses(&poses), p()).unwrap();
        assert_eq!(back[0].position, poses[0].position);
        assert!(back[0].orientation.angle_to(&poses[0].orientation) < 1e-12);
    }

    #[test]
    fn tum_examples() {
        let v = parse_tum_poses("0 0 0 0 0 0 0 1\n", p()).unwrap();
        assert_eq!(v[0].0, 0.0);
        assert_eq!(v[0].1.quaternion_xyzw(), [0.0, 0.0, 0.0, 1.0]);
        assert!(parse_tum_poses("# nothing\n# here\n", p()).unwrap().is_empty());
        let err = parse_tum_poses("1 0 0 0 0 0 0 1\n1 0 0 0 0 0 0 1\n", p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let v = parse_tum_poses("0 0 0 0 0 0 0 2\n", p()).unwrap();
        assert_eq!(v[0].1.quaternion_xyzw(), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn tum_round_trip_is_lossless() {
        let stamped: Vec<(f64, Pose)> = (0..50)
            .map(|i| {
                let a = 0.1 * i as f64;
                let q = UnitQuaternion::from_euler_angles(0.3 * a, -0.2, a);
                (
                    1.0e9 + 0.1 * i as f64,
                    Pose::new([a.sin() * 13.7, a.cos(), 1.0 / 3.0], [q.i, q.j, q.k, q.w]).unwrap(),
                )
            })
            .collect();
        let back = parse_tum_poses(&format_tum_poses(&stamped), p()).unwrap();
        for ((t0, p0), (t1, p1)) in stamped.iter().zip(&back) {
            assert_eq!(t0, t1);
            assert!((p0.position - p1.position).norm() < 1e-12);
            let (a, b) = (p0.quaternion_xyzw(), p1.quaternion_xyzw());
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn point_cloud_examples() {
        assert!(decode_point_cloud(&[], p()).unwrap().is_empty());
        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 0.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let cloud = decode_point_cloud(&bytes, p()).unwrap();
        assert_eq!(
            cloud,
            vec![Point {
                x: 1.0,
                y: 2.0,
                z: 3.0,
                intensity: 0.5
            }]
        );
        bytes.push(0);
        assert!(matches!(decode_point_cloud(&bytes, p()), Err(Error::Format { .. })));
    }

    #[test]
    fn synthetic_line_counts() {
        let spec = SyntheticSessionSpec::new(Shape::Line, 10.0, 1.0, 1, 3).unwrap();
        let s = generate_synthetic_session(&spec).unwrap();
        assert_eq!(s.frame_count(), 11);
        let arc = cumulative_arclength(&s.poses).unwrap();
        assert!((arc[10] - 10.0).abs() < 1e-12);

        let spec = SyntheticSessionSpec::new(Shape::Line, 10.0, 1.0, 2, 3).unwrap();
        let s = generate_synthetic_session(&spec).unwrap();
        assert_eq!(s.frame_count(), 21);
        assert_eq!(s.poses[20].position, Vector3::zeros());
        assert_eq!(s.poses[15].position, s.poses[5].position);
    }

    #[test]
    fn synthetic_loop_revisits_within_noise() {
        let mut spec = SyntheticSessionSpec::new(Shape::Loop, 100.0, 0.5, 2, 9).unwrap();
        spec.pose_noise_sigma = 0.05;
        let s = generate_synthetic_session(&spec).unwrap();
        let per = spec.frames_per_lap();
        assert_eq!(s.frame_count(), 2 * per);
        for i in 0..per {
            let d = (s.poses[i].position - s.poses[i + per].position).norm();
            assert!(d < 0.05 * 12.0, "frame {i}: {d}");
        }
        let again = generate_synthetic_session(&spec).unwrap();
        assert_eq!(s.poses, again.poses);
        assert_eq!(s.descriptors, again.descriptors);
    }

    #[test]
    fn figure_eight_is_evenly_spaced() {
        let spec = SyntheticSessionSpec::new(Shape::FigureEight, 200.0, 1.0, 1, 1).unwrap();
        let s = generate_synthetic_session(&spec).unwrap();
        assert_eq!(s.frame_count(), 200);
        for w in s.poses.windows(2) {
            let d = (w[0].position - w[1].position).norm();
            assert!((d - 1.0).abs() < 0.02, "{d}");
        }
    }

    #[test]
    fn pr_csv_round_trip() {
        let pts = vec![
            PrPoint {
                threshold: f64::NEG_INFINITY,
                precision: 1.0,
                recall: 0.0,
            },
            PrPoint {
                threshold: 0.125,
                precision: 2.0 / 3.0,
                recall: 0.1,
            },
            PrPoint {
                threshold: 3.5,
                precision: 0.5,
                recall: 1.0,
            },
        ];
        let text = format_pr_csv(&pts);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(parse_pr_csv(&text, p()).unwrap(), pts);
    }
}
