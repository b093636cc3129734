//! Descriptor sources: a simplified scan context, its ring key, a smooth
//! synthetic field, and readers/writers for precomputed descriptor files.

use std::f64::consts::TAU;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal, Uniform};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::model::{Descriptor, Point};
use crate::terms::{l2_distance, DescriptorMatrix};

pub const KDSC_MAGIC: &[u8; 4] = b"KDSC";
pub const KDSC_VERSION: u32 = 1;
const KDSC_HEADER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanContextConfig {
    pub rings: usize,
    pub sectors: usize,
    pub max_range: f64,
}

impl Default for ScanContextConfig {
    fn default() -> Self {
        ScanContextConfig {
            rings: 20,
            sectors: 60,
            max_range: 80.0,
        }
    }
}

impl ScanContextConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rings == 0 || self.sectors == 0 || !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scan context needs rings, sectors >= 1 and max range > 0, got {}x{} / {}",
                self.rings, self.sectors, self.max_range
            )));
        }
        Ok(())
    }

    /// Descriptor length, `rings * sectors`.
    pub fn len(&self) -> usize {
        self.rings * self.sectors
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ring/sector cell of a point, or `None` outside `[0, max_range)`.
fn cell_of(p: &Point, cfg: &ScanContextConfig) -> Option<(usize, usize)> {
    let r = p.planar_range();
    if !(r < cfg.max_range) {
        return None;
    }
    let ring = ((cfg.rings as f64 * r / cfg.max_range).floor() as usize).min(cfg.rings - 1);
    let mut az = (p.y as f64).atan2(p.x as f64);
    if az < 0.0 {
        az += TAU;
    }
    // atan2 of a tiny negative y rounds up to exactly 2π.
    let sector = ((cfg.sectors as f64 * az / TAU).floor() as usize).min(cfg.sectors - 1);
    Some((ring, sector))
}

/// Ring-major polar grid of maximum point height; empty cells are 0.
pub fn scan_context(scan: &[Point], config: &ScanContextConfig) -> Result<Descriptor> {
    config.validate()?;
    let mut cells = vec![f64::NEG_INFINITY; config.len()];
    for p in scan {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            continue;
        }
        if let Some((ring, sector)) = cell_of(p, config) {
            let c = &mut cells[ring * config.sectors + sector];
            *c = c.max(p.z as f64);
        }
    }
    for c in &mut cells {
        if *c == f64::NEG_INFINITY {
            *c = 0.0;
        }
    }
    Descriptor::new(cells)
}

/// Fraction of nonzero cells in each ring. Invariant to yaw.
pub fn ring_key(descriptor: &Descriptor, config: &ScanContextConfig) -> Result<Descriptor> {
    config.validate()?;
    let v = descriptor.values();
    if v.len() != config.len() {
        return Err(Error::DimensionMismatch {
            expected: config.len(),
            found: v.len(),
        });
    }
    let key = v
        .chunks(config.sectors)
        .map(|ring| ring.iter().filter(|&&c| c != 0.0).count() as f64 / config.sectors as f64)
        .collect();
    Descriptor::new(key)
}

/// Euclidean distance minimized over cyclic sector shifts of `b`.
pub fn sector_shift_distance(a: &Descriptor, b: &Descriptor, config: &ScanContextConfig) -> Result<f64> {
    config.validate()?;
    for d in [a, b] {
        if d.dim() != config.len() {
            return Err(Error::DimensionMismatch {
                expected: config.len(),
                found: d.dim(),
            });
        }
    }
    let (a, b) = (a.values(), b.values());
    let s = config.sectors;
    let mut best = f64::INFINITY;
    for shift in 0..s {
        let mut acc = 0.0;
        for r in 0..config.rings {
            let ra = &a[r * s..(r + 1) * s];
            let rb = &b[r * s..(r + 1) * s];
            for k in 0..s {
                let d = ra[k] - rb[(k + shift) % s];
                acc += d * d;
            }
        }
        best = best.min(acc);
    }
    Ok(best.sqrt())
}

/// Descriptor distance used for retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DescriptorMetric {
    #[default]
    Euclidean,
    SectorShift(ScanContextConfig),
}

impl DescriptorMetric {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DescriptorMetric::Euclidean => l2_distance(a, b),
            DescriptorMetric::SectorShift(cfg) => {
                let s = cfg.sectors;
                let mut best = f64::INFINITY;
                for shift in 0..s {
                    let mut acc = 0.0;
                    for (i, x) in a.iter().enumerate() {
                        let (r, k) = (i / s, i % s);
                        let d = x - b[r * s + (k + shift) % s];
                        acc += d * d;
                    }
                    best = best.min(acc);
                }
                best.sqrt()
            }
        }
    }
}

/// A smooth scalar field per descriptor component:
/// `cos(f_m · p + φ_m) + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFieldConfig {
    pub frequencies: Vec<[f64; 3]>,
    pub phases: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticFieldConfig {
    /// Random field of dimension `dimension`: frequencies drawn per axis
    /// from `N(0, frequency_sigma²)` (vertical axis zero), phases uniform.
    pub fn random(dimension: usize, frequency_sigma: f64, seed: u64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("field dimension must be >= 1".into()));
        }
        let normal =
            Normal::new(0.0, frequency_sigma).map_err(|e| Error::InvalidParameter(format!("frequency sigma: {e}")))?;
        let uniform = Uniform::new(0.0, TAU).expect("valid range");
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut frequencies = Vec::with_capacity(dimension);
        let mut phases = Vec::with_capacity(dimension);
        for _ in 0..dimension {
            frequencies.push([normal.sample(&mut rng), normal.sample(&mut rng), 0.0]);
            phases.push(uniform.sample(&mut rng));
        }
        Ok(SyntheticFieldConfig {
            frequencies,
            phases,
            noise_sigma: 0.0,
            seed,
        })
    }

    pub fn dimension(&self) -> usize {
        self.frequencies.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.is_empty() {
            return Err(Error::InvalidParameter("field dimension must be >= 1".into()));
        }
        if self.phases.len() != self.frequencies.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} phases for {} frequencies",
                self.phases.len(),
                self.frequencies.len()
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter("noise sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Noise-free field value.
    pub fn evaluate(&self, position: &Vector3<f64>) -> Vec<f64> {
        self.frequencies
            .iter()
            .zip(&self.phases)
            .map(|(f, phi)| (f[0] * position.x + f[1] * position.y + f[2] * position.z + phi).cos())
            .collect()
    }

    /// Lipschitz bound of the noise-free field: `Σ ‖f_m‖`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.frequencies
            .iter()
            .map(|f| (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt())
            .sum()
    }
}

/// Descriptors of a synthetic field along a path. `config.seed` fixes the
/// field itself; measurement noise comes from a separate `noise_seed`, so
/// several sessions can observe one field with independent noise.
pub struct SyntheticField {
    config: SyntheticFieldConfig,
    rng: Xoshiro256PlusPlus,
    noise: Option<Normal<f64>>,
}

impl SyntheticField {
    pub fn new(config: SyntheticFieldConfig, noise_seed: u64) -> Result<Self> {
        config.validate()?;
        let noise = if config.noise_sigma > 0.0 {
            Some(Normal::new(0.0, config.noise_sigma).expect("validated sigma"))
        } else {
            None
        };
        let rng = Xoshiro256PlusPlus::seed_from_u64(noise_seed);
        Ok(SyntheticField { config, rng, noise })
    }

    pub fn config(&self) -> &SyntheticFieldConfig {
        &self.config
    }

    pub fn descriptor(&mut self, position: &Vector3<f64>) -> Descriptor {
        let mut v = self.config.evaluate(position);
        if let Some(n) = &self.noise {
            for x in &mut v {
                *x += n.sample(&mut self.rng);
            }
        }
        Descriptor::new(v).expect("field values are finite")
    }
}

/// Noise-free synthetic descriptor at `position`.
pub fn synthetic_descriptor(position: &Vector3<f64>, config: &SyntheticFieldConfig) -> Result<Descriptor> {
    config.validate()?;
    Descriptor::new(config.evaluate(position))
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Parses a binary descriptor matrix.
pub fn decode_kdsc(bytes: &[u8], path: &Path) -> Result<DescriptorMatrix> {
    if bytes.len() < KDSC_HEADER || &bytes[..4] != KDSC_MAGIC {
        return Err(format_err(path, "missing KDSC header"));
    }
    let version = read_u32(bytes, 4);
    if version != KDSC_VERSION {
        return Err(format_err(path, format!("unsupported KDSC version {version}")));
    }
    let n = read_u32(bytes, 8) as usize;
    let m = read_u32(bytes, 12) as usize;
    let want = n
        .checked_mul(m)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| format_err(path, "header dimensions overflow"))?;
    let body = &bytes[KDSC_HEADER..];
    if body.len() != want {
        return Err(format_err(
            path,
            format!("expected {want} payload bytes for {n}x{m}, found {}", body.len()),
        ));
    }
    if n > 0 && m == 0 {
        return Err(format_err(path, "zero-width descriptors"));
    }
    let data: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(format_err(path, format!("non-finite value at row {}", i / m)));
    }
    DescriptorMatrix::new(n, m, data)
}

pub fn encode_kdsc(matrix: &DescriptorMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(KDSC_HEADER + 4 * matrix.as_slice().len());
    out.extend_from_slice(KDSC_MAGIC);
    out.extend_from_slice(&KDSC_VERSION.to_le_bytes());
    out.extend_from_slice(&(matrix.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(matrix.cols() as u32).to_le_bytes());
    for v in matrix.as_slice() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

/// Parses comma-separated rows; blank lines and `#` comments are skipped.
pub fn decode_csv(text: &str, path: &Path) -> Result<DescriptorMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let row = line
            .split(',')
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>().map_err(|_| parse_err(format!("not a number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(parse_err("non-finite value".into()));
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(format!("{} columns, expected {}", row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    DescriptorMatrix::from_rows(&rows)
}

/// Loads a KDSC or CSV descriptor file, detected by the magic bytes.
pub fn load_descriptors(path: &Path, expected_count: Option<usize>) -> Result<DescriptorMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let matrix = if bytes.starts_with(KDSC_MAGIC) {
        decode_kdsc(&bytes, path)?
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|_| format_err(path, "neither KDSC nor UTF-8 CSV"))?;
        decode_csv(text, path)?
    };
    if let Some(expected) = expected_count {
        if matrix.rows() != expected {
            return Err(Error::CountMismatch {
                expected,
                found: matrix.rows(),
            });
        }
    }
    Ok(matrix)
}

/// Writes a KDSC file. Values are stored as `f32`.
pub fn write_descriptors_kdsc(path: &Path, matrix: &DescriptorMatrix) -> Result<()> {
    fs::write(path, encode_kdsc(matrix)).map_err(|e| Error::io(path, e))
}

/// Writes one comma-separated row per descriptor using shortest round-trip
/// formatting.
pub fn write_descriptors_csv(path: &Path, matrix: &DescriptorMatrix) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        for i in 0..matrix.rows() {
            let row = matrix.row(i);
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    w.write_all(b",")?;
                }
                write!(w, "{v}")?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}
