//! Retrieval evaluation: global place recognition against a sampled map,
//! loop closure detection within one session, and the PR-curve metrics.

use std::hint::black_box;
use std::time::Instant;

use rayon::prelude::*;

use crate::descriptors::DescriptorMetric;
use crate::error::{Error, Result};
use crate::model::{pose_distance, Keyframe, Session};
use crate::terms::{l2_distance, DescriptorMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Task {
    #[default]
    Gpr,
    Lcd,
}

/// Frames too recent to count as loop-closure candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exclusion {
    Frames(u64),
    Seconds(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub tp_radius: f64,
    pub lcd_k: usize,
    pub lcd_exclusion: Exclusion,
    pub task: Task,
    pub thresholds: usize,
    pub metric: DescriptorMetric,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            tp_radius: 5.0,
            lcd_k: 25,
            lcd_exclusion: Exclusion::Frames(100),
            task: Task::Gpr,
            thresholds: 200,
            metric: DescriptorMetric::Euclidean,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tp_radius > 0.0 && self.tp_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tp radius must be > 0, got {}",
                self.tp_radius
            )));
        }
        if self.lcd_k == 0 {
            return Err(Error::InvalidParameter("lcd k must be >= 1".into()));
        }
        if self.thresholds < 2 {
            return Err(Error::InvalidParameter("at least 2 thresholds are required".into()));
        }
        if let Exclusion::Seconds(s) = self.lcd_exclusion {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter("exclusion window must be >= 0 s".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Sorted by threshold. The first point (threshold `-inf`) is the
    /// zero-prediction operating point.
    pub pr_points: Vec<PrPoint>,
    pub auc: f64,
    pub f1_max: f64,
    pub memory_ratio: f64,
    pub query_wall_time: f64,
    /// Counts at the first threshold attaining `f1_max`.
    pub counts: Counts,
    pub queries: usize,
    pub query_comparisons: u64,
}

/// Top-1 retrieval result of one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryOutcome {
    pub distance: f64,
    /// Retrieved keyframe lies within the true-positive radius.
    pub correct: bool,
    /// Some candidate lies within the true-positive radius.
    pub positive: bool,
}

fn counts_at(outcomes: &[QueryOutcome], theta: f64) -> Counts {
    let mut c = Counts::default();
    for o in outcomes {
        let predicted = o.distance <= theta;
        match (predicted, o.correct) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            _ => {}
        }
        if o.positive && !(predicted && o.correct) {
            c.fn_ += 1;
        }
        if !predicted && !o.positive {
            c.tn += 1;
        }
    }
    c
}

fn precision_recall(c: &Counts) -> (f64, f64) {
    let precision = if c.tp + c.fp == 0 {
        1.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    (precision, recall)
}

/// Linear-interpolation quantile of sorted data, `q` in `[0, 1]`.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Threshold sweep over evenly spaced quantiles of the top-1 distances.
pub fn pr_curve(outcomes: &[QueryOutcome], thresholds: usize) -> Vec<PrPoint> {
    let mut sorted: Vec<f64> = outcomes.iter().map(|o| o.distance).collect();
    sorted.sort_by(f64::total_cmp);
    let mut thetas = vec![f64::NEG_INFINITY];
    if !sorted.is_empty() {
        let t = thresholds.max(2);
        thetas.extend((0..t).map(|j| quantile(&sorted, j as f64 / (t - 1) as f64)));
    }
    thetas
        .into_iter()
        .map(|theta| {
            let (precision, recall) = precision_recall(&counts_at(outcomes, theta));
            PrPoint {
                threshold: theta,
                precision,
                recall,
            }
        })
        .collect()
}

fn f1(p: &PrPoint) -> f64 {
    if p.precision + p.recall > 0.0 {
        2.0 * p.precision * p.recall / (p.precision + p.recall)
    } else {
        0.0
    }
}

/// Maximum harmonic mean of precision and recall over the sweep.
pub fn f1_max(points: &[PrPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("PR points"));
    }
    Ok(points.iter().map(f1).fold(0.0, f64::max))
}

/// Trapezoidal area under precision over recall. Points are sorted by
/// recall and equal recalls collapse to their maximum precision.
pub fn auc(points: &[PrPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::TooFewKeyframes {
            what: "AUC",
            min: 2,
            got: points.len(),
        });
    }
    let mut rp: Vec<(f64, f64)> = points.iter().map(|p| (p.recall, p.precision)).collect();
    rp.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    rp.dedup_by(|next, kept| next.0 == kept.0);
    let area: f64 = rp.windows(2).map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1)).sum();
    Ok(area.clamp(0.0, 1.0))
}

pub fn memory_ratio(selected_count: usize, total_count: usize) -> Result<f64> {
    if total_count == 0 {
        return Err(Error::InvalidParameter("memory ratio of an empty session".into()));
    }
    if selected_count == 0 || selected_count > total_count {
        return Err(Error::InvalidParameter(format!(
            "selected count {selected_count} outside 1..={total_count}"
        )));
    }
    Ok(selected_count as f64 / total_count as f64)
}

fn check_dims(map: &[Keyframe], queries: &[Keyframe]) -> Result<()> {
    let Some(dim) = map.first().map(|k| k.descriptor.dim()) else {
        return Ok(());
    };
    for k in map.iter().chain(queries) {
        if k.descriptor.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: k.descriptor.dim(),
            });
        }
    }
    Ok(())
}

fn report(outcomes: &[QueryOutcome], comparisons: u64, wall: f64, config: &EvalConfig) -> Result<EvalReport> {
    let pr_points = pr_curve(outcomes, config.thresholds);
    let f1_max = f1_max(&pr_points)?;
    let best = pr_points.iter().find(|p| f1(p) == f1_max).expect("max is attained");
    Ok(EvalReport {
        auc: auc(&pr_points).unwrap_or(0.0),
        counts: counts_at(outcomes, best.threshold),
        pr_points,
        f1_max,
        memory_ratio: 1.0,
        query_wall_time: wall,
        queries: outcomes.len(),
        query_comparisons: comparisons,
    })
}

/// Top-1 retrieval of `query` among `candidates`; ties go to the earlier
/// candidate.
fn retrieve(query: &Keyframe, candidates: &[&Keyframe], config: &EvalConfig) -> QueryOutcome {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    let mut positive = false;
    for (i, c) in candidates.iter().enumerate() {
        let d = config.metric.distance(query.descriptor.values(), c.descriptor.values());
        if d < best_d {
            best = i;
            best_d = d;
        }
        positive |= pose_distance(&query.pose, &c.pose) <= config.tp_radius;
    }
    QueryOutcome {
        distance: best_d,
        correct: pose_distance(&query.pose, &candidates[best].pose) <= config.tp_radius,
        positive,
    }
}

/// Global place recognition of every query against the map keyframes.
/// `memory_ratio` is left at 1; callers set it from the sampler output.
pub fn evaluate_gpr(map: &[Keyframe], queries: &[Keyframe], config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    if map.is_empty() {
        return Err(Error::Empty("map keyframes"));
    }
    if queries.is_empty() {
        return Err(Error::Empty("query keyframes"));
    }
    check_dims(map, queries)?;
    let candidates: Vec<&Keyframe> = map.iter().collect();
    let start = Instant::now();
    let outcomes: Vec<QueryOutcome> = queries.par_iter().map(|q| retrieve(q, &candidates, config)).collect();
    let wall = start.elapsed().as_secs_f64();
    report(&outcomes, (map.len() * queries.len()) as u64, wall, config)
}

/// Per-query outcomes of loop closure detection. Frames without any
/// candidate are skipped.
pub fn lcd_outcomes(session: &Session, selected_ids: &[u64], config: &EvalConfig) -> Result<(Vec<QueryOutcome>, u64)> {
    config.validate()?;
    let frames = session.keyframes()?;
    let stamps = match config.lcd_exclusion {
        Exclusion::Seconds(_) => Some(
            session
                .timestamps
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter("time-based exclusion needs timestamps".into()))?,
        ),
        Exclusion::Frames(_) => None,
    };
    let mut kept: Vec<&Keyframe> = Vec::with_capacity(selected_ids.len());
    for &id in selected_ids {
        let k = frames
            .get(id as usize)
            .ok_or_else(|| Error::InvalidParameter(format!("selected id {id} beyond session")))?;
        kept.push(k);
    }
    if kept.windows(2).any(|w| w[1].id <= w[0].id) {
        return Err(Error::InvalidParameter(
            "selected ids must be strictly ascending".into(),
        ));
    }
    let excluded = |q: usize, c: usize| match (config.lcd_exclusion, stamps) {
        (Exclusion::Frames(n), _) => (q - c) < n as usize,
        (Exclusion::Seconds(s), Some(t)) => t[q] - t[c] < s,
        (Exclusion::Seconds(_), None) => unreachable!(),
    };
    let per_query: Vec<Option<(QueryOutcome, u64)>> = frames
        .par_iter()
        .map(|q| {
            let qi = q.id as usize;
            let end = kept.partition_point(|k| (k.id as usize) < qi);
            let pool: Vec<&Keyframe> = kept[..end]
                .iter()
                .copied()
                .filter(|k| !excluded(qi, k.id as usize))
                .collect();
            if pool.is_empty() {
                return None;
            }
            let mut ranked: Vec<(f64, &Keyframe)> = pool
                .iter()
                .map(|k| (config.metric.distance(q.descriptor.values(), k.descriptor.values()), *k))
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
            ranked.truncate(config.lcd_k);
            let top: Vec<&Keyframe> = ranked.iter().map(|r| r.1).collect();
            let best = retrieve(q, &top[..1], config);
            let positive = pool.iter().any(|k| pose_distance(&q.pose, &k.pose) <= config.tp_radius);
            Some((QueryOutcome { positive, ..best }, pool.len() as u64))
        })
        .collect();
    let mut outcomes = Vec::new();
    let mut comparisons = 0;
    for (o, c) in per_query.into_iter().flatten() {
        outcomes.push(o);
        comparisons += c;
    }
    Ok((outcomes, comparisons))
}

/// Loop closure detection within one session: each frame queries the
/// sampled keyframes older than the exclusion window.
pub fn evaluate_lcd(session: &Session, selected_ids: &[u64], config: &EvalConfig) -> Result<EvalReport> {
    if session.descriptors.is_none() {
        return Err(Error::MissingDescriptors("loop closure evaluation"));
    }
    let start = Instant::now();
    let (outcomes, comparisons) = lcd_outcomes(session, selected_ids, config)?;
    let wall = start.elapsed().as_secs_f64();
    let mut r = report(&outcomes, comparisons, wall, config)?;
    r.memory_ratio = memory_ratio(selected_ids.len(), session.frame_count())?;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryBenchmark {
    pub seconds: f64,
    pub comparisons: u64,
    pub map_size: usize,
}

/// Times a full linear sweep of every query against every map descriptor.
pub fn query_benchmark(map: &DescriptorMatrix, queries: &DescriptorMatrix) -> Result<QueryBenchmark> {
    if map.rows() > 0 && queries.rows() > 0 && map.cols() != queries.cols() {
        return Err(Error::DimensionMismatch {
            expected: map.cols(),
            found: queries.cols(),
        });
    }
    let start = Instant::now();
    let mut comparisons = 0u64;
    let mut sink = 0.0;
    for q in 0..queries.rows() {
        let mut best = f64::INFINITY;
        for m in 0..map.rows() {
            best = best.min(l2_distance(black_box(queries.row(q)), map.row(m)));
            comparisons += 1;
        }
        sink += best;
    }
    black_box(sink);
    Ok(QueryBenchmark {
        seconds: start.elapsed().as_secs_f64(),
        comparisons,
        map_size: map.rows(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Descriptor, Pose};

    fn pr(precision: f64, recall: f64) -> PrPoint {
        PrPoint {
            threshold: 0.0,
            precision,
            recall,
        }
    }

    fn kf(id: u64, x: f64, d: Vec<f64>) -> Keyframe {
        Keyframe::new(id, Pose::from_position(x, 0.0, 0.0), Descriptor::new(d).unwrap())
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_max(&[pr(1.0, 1.0)]).unwrap(), 1.0);
        assert_eq!(f1_max(&[pr(1.0, 0.0)]).unwrap(), 0.0);
        assert_eq!(f1_max(&[pr(0.0, 0.0)]).unwrap(), 0.0);
        let v = f1_max(&[pr(0.8, 0.5), pr(0.6, 0.9)]).unwrap();
        assert!((v - 0.72).abs() < 1e-12);
        assert!(f1_max(&[]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[pr(1.0, 0.0), pr(1.0, 1.0)]).unwrap(), 1.0);
        assert_eq!(auc(&[pr(0.5, 0.0), pr(0.5, 1.0)]).unwrap(), 0.5);
        let v = auc(&[pr(1.0, 0.0), pr(1.0, 0.5), pr(0.0, 1.0)]).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
        assert!(auc(&[pr(1.0, 1.0)]).is_err());
        // equal recalls keep the best precision
        let v = auc(&[pr(0.2, 0.0), pr(1.0, 0.0), pr(1.0, 1.0)]).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn memory_ratio_examples() {
        assert_eq!(memory_ratio(100, 100).unwrap(), 1.0);
        assert_eq!(memory_ratio(54, 100).unwrap(), 0.54);
        assert!(memory_ratio(1, 0).is_err());
        assert!(memory_ratio(3, 2).is_err());
    }

    #[test]
    fn identical_map_and_queries_are_perfect() {
        let map: Vec<Keyframe> = (0..20).map(|i| kf(i, i as f64 * 10.0, vec![i as f64, 1.0])).collect();
        let r = evaluate_gpr(&map, &map, &EvalConfig::default()).unwrap();
        assert_eq!(r.f1_max, 1.0);
        assert_eq!(r.auc, 1.0);
        assert_eq!(
            r.counts,
            Counts {
                tp: 20,
                fp: 0,
                fn_: 0,
                tn: 0
            }
        );
        assert_eq!(r.query_comparisons, 400);
    }

    #[test]
    fn distant_map_scores_zero() {
        let map = vec![kf(0, 0.0, vec![0.0]), kf(1, 1.0, vec![1.0])];
        let queries = vec![kf(0, 100.0, vec![0.1]), kf(1, 200.0, vec![0.9])];
        let r = evaluate_gpr(&map, &queries, &EvalConfig::default()).unwrap();
        assert_eq!(r.f1_max, 0.0);
        assert_eq!(r.pr_points[0].precision, 1.0);
        assert!(r.pr_points.iter().all(|p| p.recall == 0.0));
    }

    #[test]
    fn hand_built_six_query_case() {
        // map at x = 0, 100, 200 with descriptors 0, 10, 20
        let map = vec![
            kf(0, 0.0, vec![0.0]),
            kf(1, 100.0, vec![10.0]),
            kf(2, 200.0, vec![20.0]),
        ];
        let queries = vec![
            kf(0, 1.0, vec![0.1]),    // correct, d 0.1
            kf(1, 101.0, vec![10.3]), // correct, d 0.3
            kf(2, 199.0, vec![19.5]), // correct, d 0.5
            kf(3, 2.0, vec![9.8]),    // aliased to map 1, d 0.2, positive
            kf(4, 50.0, vec![20.4]),  // negative, d 0.4
            kf(5, 300.0, vec![4.0]),  // negative, d 4
        ];
        let cfg = EvalConfig {
            thresholds: 6,
            ..Default::default()
        };
        let r = evaluate_gpr(&map, &queries, &cfg).unwrap();
        // quantiles of {0.1, 0.2, 0.3, 0.4, 0.5, 4} at j/5
        let want = [
            (f64::NEG_INFINITY, 1.0, 0.0),
            (0.1, 1.0, 0.25),
            (0.2, 0.5, 0.25),
            (0.3, 2.0 / 3.0, 0.5),
            (0.4, 0.5, 0.5),
            (0.5, 0.6, 0.75),
            (4.0, 0.5, 0.75),
        ];
        assert_eq!(r.pr_points.len(), want.len());
        for (p, w) in r.pr_points.iter().zip(want) {
            assert!((p.threshold - w.0).abs() < 1e-12 || p.threshold == w.0, "{p:?}");
            assert!((p.precision - w.1).abs() < 1e-12, "{p:?}");
            assert!((p.recall - w.2).abs() < 1e-12, "{p:?}");
        }
        assert!((r.f1_max - 2.0 * 0.6 * 0.75 / 1.35).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let map = vec![kf(0, 0.0, vec![0.0])];
        let queries = vec![kf(0, 0.0, vec![0.0, 1.0])];
        assert!(matches!(
            evaluate_gpr(&map, &queries, &EvalConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lcd_respects_exclusion_and_finds_revisits() {
        // out along x then back: frame i at x = i for i < 150, then 300 - i
        let n = 300usize;
        let xs: Vec<f64> = (0..n)
            .map(|i| if i < 150 { i as f64 } else { (300 - i) as f64 })
            .collect();
        let poses: Vec<Pose> = xs.iter().map(|&x| Pose::from_position(x, 0.0, 0.0)).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x.sin(), x.cos(), 0.01 * x]).collect();
        let session = Session::new(poses)
            .with_descriptors(DescriptorMatrix::from_rows(&rows).unwrap())
            .unwrap();
        let ids: Vec<u64> = (0..n as u64).collect();
        let (outcomes, _) = lcd_outcomes(&session, &ids, &EvalConfig::default()).unwrap();
        assert_eq!(outcomes.len(), n - 100);
        let r = evaluate_lcd(&session, &ids, &EvalConfig::default()).unwrap();
        assert!(r.f1_max > 0.9);

        // straight line never revisits
        let poses: Vec<Pose> = (0..n).map(|i| Pose::from_position(i as f64, 0.0, 0.0)).collect();
        let session = Session::new(poses)
            .with_descriptors(DescriptorMatrix::from_rows(&rows).unwrap())
            .unwrap();
        let r = evaluate_lcd(&session, &ids, &EvalConfig::default()).unwrap();
        assert_eq!(r.f1_max, 0.0);
    }

    #[test]
    fn benchmark_counts_comparisons() {
        let map = DescriptorMatrix::new(4, 2, vec![0.0; 8]).unwrap();
        let q = DescriptorMatrix::new(3, 2, vec![1.0; 6]).unwrap();
        assert_eq!(query_benchmark(&map, &q).unwrap().comparisons, 12);
        let empty = DescriptorMatrix::new(0, 2, vec![]).unwrap();
        assert_eq!(query_benchmark(&map, &empty).unwrap().comparisons, 0);
    }
}
