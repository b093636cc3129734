//! Keyframe samplers behind one interface.
//!
//! The spaciousness and entropy samplers are reimplementations of common
//! baselines at the level needed for comparison, not ports of any
//! particular odometry system.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::read_point_cloud;
use crate::model::{pose_distance, Point, PointCloud, Session};
use crate::window::{finalize, process_frame, CycleRecord, OptimizerState, WindowConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    All,
    Constant,
    Spaciousness,
    Entropy,
    #[default]
    Optimized,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Method::All),
            "constant" => Ok(Method::Constant),
            "spaciousness" => Ok(Method::Spaciousness),
            "entropy" => Ok(Method::Entropy),
            "optimized" => Ok(Method::Optimized),
            other => Err(Error::InvalidParameter(format!("unknown sampling method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::All => "all",
            Method::Constant => "constant",
            Method::Spaciousness => "spaciousness",
            Method::Entropy => "entropy",
            Method::Optimized => "optimized",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub method: Method,
    pub constant_interval: f64,
    /// Ascending band edges of the smoothed spaciousness, meters.
    pub spaciousness_thresholds: [f64; 3],
    /// Sampling interval for each of the four bands, meters.
    pub spaciousness_intervals: [f64; 4],
    pub spaciousness_smoothing: f64,
    pub entropy_threshold: f64,
    pub entropy_bins: usize,
    /// Upper edge of the range histogram; `None` uses each scan's farthest
    /// point.
    pub entropy_max_range: Option<f64>,
    pub window: WindowConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            method: Method::Optimized,
            constant_interval: 1.0,
            spaciousness_thresholds: [5.0, 10.0, 20.0],
            spaciousness_intervals: [0.5, 1.0, 5.0, 10.0],
            spaciousness_smoothing: 0.95,
            entropy_threshold: 0.05,
            entropy_bins: 64,
            entropy_max_range: None,
            window: WindowConfig::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.constant_interval >= 0.0 && self.constant_interval.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "constant interval must be >= 0, got {}",
                self.constant_interval
            )));
        }
        let t = &self.spaciousness_thresholds;
        if !(t[0] < t[1] && t[1] < t[2]) || t.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("spaciousness thresholds must ascend".into()));
        }
        if self.spaciousness_intervals.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(
                "spaciousness intervals must be positive".into(),
            ));
        }
        if !(self.spaciousness_smoothing > 0.0 && self.spaciousness_smoothing < 1.0) {
            return Err(Error::InvalidParameter(
                "spaciousness smoothing must lie in (0, 1)".into(),
            ));
        }
        if !(self.entropy_threshold >= 0.0) || self.entropy_bins == 0 {
            return Err(Error::InvalidParameter(
                "entropy needs threshold >= 0 and bins >= 1".into(),
            ));
        }
        if let Some(r) = self.entropy_max_range {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter("entropy max range must be > 0".into()));
            }
        }
        if self.method == Method::Optimized {
            self.window.validate()?;
        }
        Ok(())
    }

    /// Live interval for a smoothed spaciousness value.
    pub fn spaciousness_interval(&self, m: f64) -> f64 {
        let band = self.spaciousness_thresholds.iter().filter(|&&t| m > t).count();
        self.spaciousness_intervals[band]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SamplerOutput {
    pub selected_ids: Vec<u64>,
    /// Per-frame signal: spaciousness, entropy, or nothing.
    pub per_frame_state: Option<Vec<f64>>,
    pub cycles: Vec<CycleRecord>,
}

impl SamplerOutput {
    fn ids(selected_ids: Vec<u64>) -> Self {
        SamplerOutput {
            selected_ids,
            ..Default::default()
        }
    }
}

pub fn sample_all(session: &Session) -> SamplerOutput {
    SamplerOutput::ids((0..session.frame_count() as u64).collect())
}

/// Keeps frame 0 and every frame whose path length since the last kept
/// frame has reached the live interval.
fn keep_by_path_length(session: &Session, mut interval_at: impl FnMut(usize) -> f64) -> Vec<u64> {
    let poses = &session.poses;
    let mut ids = Vec::new();
    let mut since = 0.0;
    for i in 0..poses.len() {
        if i > 0 {
            since += pose_distance(&poses[i - 1], &poses[i]);
        }
        let interval = interval_at(i);
        if i == 0 || since >= interval {
            ids.push(i as u64);
            since = 0.0;
        }
    }
    ids
}

pub fn sample_constant(session: &Session, interval: f64) -> Result<SamplerOutput> {
    if !(interval >= 0.0 && interval.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "constant interval must be >= 0, got {interval}"
        )));
    }
    Ok(SamplerOutput::ids(keep_by_path_length(session, |_| interval)))
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median point range of a scan; 0 for an empty scan.
pub fn spaciousness_signal(scan: &[Point]) -> f64 {
    median(scan.iter().map(Point::range).filter(|r| r.is_finite()).collect())
}

/// Spaciousness sampling over in-memory scans. The smoothed signal starts
/// at the first scan's median range.
pub fn sample_spaciousness_scans(
    session: &Session,
    scans: &[PointCloud],
    config: &SamplerConfig,
) -> Result<SamplerOutput> {
    config.validate()?;
    if scans.len() != session.frame_count() {
        return Err(Error::CountMismatch {
            expected: session.frame_count(),
            found: scans.len(),
        });
    }
    let a = config.spaciousness_smoothing;
    let mut signal = Vec::with_capacity(scans.len());
    let mut m = 0.0;
    for (i, scan) in scans.iter().enumerate() {
        let raw = spaciousness_signal(scan);
        m = if i == 0 { raw } else { a * m + (1.0 - a) * raw };
        signal.push(m);
    }
    let ids = keep_by_path_length(session, |i| config.spaciousness_interval(signal[i]));
    Ok(SamplerOutput {
        selected_ids: ids,
        per_frame_state: Some(signal),
        cycles: Vec::new(),
    })
}

fn load_scans(session: &Session, err: Error) -> Result<Vec<PointCloud>> {
    let Some(paths) = &session.scan_paths else {
        return Err(err);
    };
    paths.iter().map(|p| read_point_cloud(Path::new(p))).collect()
}

pub fn sample_spaciousness(session: &Session, config: &SamplerConfig) -> Result<SamplerOutput> {
    let scans = load_scans(session, Error::SpaciousnessNeedsScans)?;
    sample_spaciousness_scans(session, &scans, config)
}

/// Shannon entropy (nats) of the point-range histogram with `bins` equal
/// bins over `[0, max_range]`. Ranges beyond `max_range` fall in the last
/// bin. An empty scan has entropy 0.
pub fn scan_entropy(scan: &[Point], bins: usize, max_range: Option<f64>) -> f64 {
    let ranges: Vec<f64> = scan.iter().map(Point::range).filter(|r| r.is_finite()).collect();
    if ranges.is_empty() || bins == 0 {
        return 0.0;
    }
    let top = max_range.unwrap_or_else(|| ranges.iter().copied().fold(0.0, f64::max));
    let mut hist = vec![0usize; bins];
    for r in &ranges {
        let b = if top > 0.0 {
            ((r / top * bins as f64).floor() as usize).min(bins - 1)
        } else {
            0
        };
        hist[b] += 1;
    }
    let n = ranges.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn sample_entropy_scans(session: &Session, scans: &[PointCloud], config: &SamplerConfig) -> Result<SamplerOutput> {
    config.validate()?;
    if scans.len() != session.frame_count() {
        return Err(Error::CountMismatch {
            expected: session.frame_count(),
            found: scans.len(),
        });
    }
    let h: Vec<f64> = scans
        .iter()
        .map(|s| scan_entropy(s, config.entropy_bins, config.entropy_max_range))
        .collect();
    let mut ids = Vec::new();
    let mut last = 0.0;
    for (i, &v) in h.iter().enumerate() {
        if i == 0 || (v - last).abs() >= config.entropy_threshold {
            ids.push(i as u64);
            last = v;
        }
    }
    Ok(SamplerOutput {
        selected_ids: ids,
        per_frame_state: Some(h),
        cycles: Vec::new(),
    })
}

pub fn sample_entropy(session: &Session, config: &SamplerConfig) -> Result<SamplerOutput> {
    let scans = load_scans(session, Error::EntropyNeedsScans)?;
    sample_entropy_scans(session, &scans, config)
}

/// Streams the session through the sliding-window optimizer.
pub fn sample_optimized(session: &Session, config: &WindowConfig) -> Result<SamplerOutput> {
    config.validate()?;
    if session.descriptors.is_none() {
        return Err(Error::MissingDescriptors("optimized sampling"));
    }
    let mut state = OptimizerState::new(config);
    for kf in session.keyframes()? {
        process_frame(&mut state, kf, config)?;
    }
    let cycles = std::mem::take(&mut state.cycles);
    let store = finalize(state, config)?;
    let mut ids = store.ids();
    ids.sort_unstable();
    Ok(SamplerOutput {
        selected_ids: ids,
        per_frame_state: None,
        cycles,
    })
}

pub fn sample(session: &Session, config: &SamplerConfig) -> Result<SamplerOutput> {
    config.validate()?;
    match config.method {
        Method::All => Ok(sample_all(session)),
        Method::Constant => sample_constant(session, config.constant_interval),
        Method::Spaciousness => sample_spaciousness(session, config),
        Method::Entropy => sample_entropy(session, config),
        Method::Optimized => sample_optimized(session, &config.window),
    }
}
