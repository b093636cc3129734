//! Sliding-window keyframe optimization.
//!
//! Frames are buffered into a window of `N` keyframes. Once the window is
//! full it is extended with stored keyframes that lie near it (revisited
//! areas), every subset that keeps the anchor and respects the
//! pose-to-pose distance band is scored, and the best one is merged into
//! the store. The next window starts at the last selected window keyframe,
//! so unselected keyframes after it are evaluated again.

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{pose_distance, Keyframe, KeyframeStore, KeyframeWindow, Pose};
use crate::terms::{combine, l2_distance, preservation_of, DescriptorMatrix, ObjectiveParams};

/// Subsets evaluated serially below this count; rayon overhead dominates.
const PARALLEL_THRESHOLD: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowConfig {
    /// Window size `N`.
    pub window_size: usize,
    /// Minimum distance between consecutive selected keyframes, meters.
    pub delta_lower: f64,
    /// Maximum distance between consecutive selected keyframes, meters.
    /// Also the radius used to find revisit neighbors.
    pub delta_upper: f64,
    pub params: ObjectiveParams,
    /// An extended window holds at most `N + extension_cap_extra` keyframes.
    pub extension_cap_extra: usize,
    /// Optional pre-gate: frames closer than this to the previously
    /// accepted frame are dropped before entering the window.
    pub min_motion: Option<f64>,
    /// Stored keyframes captured less than this traveled distance before
    /// the window anchor are not treated as revisit neighbors.
    pub revisit_min_travel: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_size: 10,
            delta_lower: 1.0,
            delta_upper: 5.0,
            params: ObjectiveParams::default(),
            extension_cap_extra: 5,
            min_motion: None,
            revisit_min_travel: 10.0,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "window size must be >= 2, got {}",
                self.window_size
            )));
        }
        if !(self.delta_lower > 0.0 && self.delta_lower <= self.delta_upper && self.delta_upper.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "distance band must satisfy 0 < lower <= upper, got [{}, {}]",
                self.delta_lower, self.delta_upper
            )));
        }
        if let Some(m) = self.min_motion {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::InvalidParameter(format!("min motion must be >= 0, got {m}")));
            }
        }
        if !(self.revisit_min_travel >= 0.0) {
            return Err(Error::InvalidParameter("revisit travel must be >= 0".into()));
        }
        self.params.validate()
    }
}

/// Result of optimizing one (possibly extended) window.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSelection {
    /// Strictly increasing indices into the candidate order; `indices[0]`
    /// is the anchor.
    pub indices: Vec<usize>,
    /// Indices into the window entries of the selected window keyframes
    /// (revisit neighbors excluded). Always starts with 0.
    pub window_indices: Vec<usize>,
    pub objective_value: f64,
    /// Set when no subset satisfied the distance band and the band was
    /// dropped to guarantee progress.
    pub relaxed: bool,
    /// Number of subsets that were scored.
    pub evaluated: usize,
}

impl SubsetSelection {
    /// 0-based position of the last selected window keyframe.
    pub fn last_window_index(&self) -> usize {
        *self.window_indices.last().expect("selection always holds the anchor")
    }
}

/// Window position where fresh frames start in the next step,
/// `N - (i_n - 1)` for the 1-based index `i_n` of the last selected
/// keyframe. This equals the number of keyframes carried over.
pub fn slide_amount(last_selected: usize, config: &WindowConfig) -> Result<usize> {
    let n = config.window_size;
    if last_selected < 1 || last_selected > n {
        return Err(Error::InvalidParameter(format!(
            "last selected index {last_selected} outside 1..={n}"
        )));
    }
    Ok(n - (last_selected - 1))
}

/// Pairwise pose distances of the candidates, row-major.
fn distance_table(poses: &[Pose]) -> Vec<f64> {
    let n = poses.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = pose_distance(&poses[i], &poses[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Depth-first enumeration of subsets that start at candidate 0, contain at
/// least one further window member and (when `band` is set) keep every
/// consecutive gap inside the band. A chain whose next gap falls outside
/// the band is abandoned: adding later keyframes cannot change that gap.
fn enumerate_chains(poses: &[Pose], is_member: &[bool], band: Option<(f64, f64)>) -> Vec<Vec<usize>> {
    let n = poses.len();
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let dist = distance_table(poses);
    let mut chain = vec![0usize];

    fn walk(
        chain: &mut Vec<usize>,
        has_member: bool,
        n: usize,
        dist: &[f64],
        is_member: &[bool],
        band: Option<(f64, f64)>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let last = *chain.last().unwrap();
        for next in last + 1..n {
            if let Some((lo, hi)) = band {
                let g = dist[last * n + next];
                if g < lo || g > hi {
                    continue;
                }
            }
            chain.push(next);
            let member = has_member || is_member[next];
            if member {
                out.push(chain.clone());
            }
            walk(chain, member, n, dist, is_member, band, out);
            chain.pop();
        }
    }

    walk(&mut chain, false, n, &dist, is_member, band, &mut out);
    out
}

/// All subsets of a plain window that contain the anchor, have at least two
/// keyframes and keep consecutive pose gaps within
/// `[delta_lower, delta_upper]`. Subsets are returned in depth-first order.
pub fn enumerate_feasible_subsets(window: &[Keyframe], config: &WindowConfig) -> Vec<Vec<usize>> {
    let poses: Vec<Pose> = window.iter().map(|k| k.pose).collect();
    let members = vec![true; window.len()];
    enumerate_chains(&poses, &members, Some((config.delta_lower, config.delta_upper)))
}

/// Scores one subset of the candidate set.
fn score_subset(
    poses: &[Pose],
    descriptors: &DescriptorMatrix,
    subset: &[usize],
    params: &ObjectiveParams,
) -> Result<f64> {
    let rho = subset
        .windows(2)
        .map(|w| 1.0 / (1.0 + l2_distance(descriptors.row(w[0]), descriptors.row(w[1]))))
        .sum::<f64>()
        / (subset.len() - 1) as f64;
    let sub_poses: Vec<Pose> = subset.iter().map(|&i| poses[i]).collect();
    let pi = preservation_of(&sub_poses, &descriptors.select_rows(subset))?;
    Ok(combine(rho, pi, params))
}

/// `a` strictly better than `b`: lower objective, then fewer keyframes,
/// then lexicographically smaller indices.
fn better(a: (f64, &[usize]), b: (f64, &[usize])) -> bool {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => match a.1.len().cmp(&b.1.len()) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => a.1 < b.1,
        },
    }
}

/// Optimizes an ordered candidate set. `member_index[i]` is the window
/// position of candidate `i`, or `None` for a revisit neighbor.
fn optimize_candidates(
    candidates: &[&Keyframe],
    member_index: &[Option<usize>],
    config: &WindowConfig,
) -> Result<SubsetSelection> {
    if candidates.len() < 2 {
        return Err(Error::TooFewKeyframes {
            what: "window optimization",
            min: 2,
            got: candidates.len(),
        });
    }
    if !member_index[1..].iter().any(Option::is_some) {
        return Err(Error::InvalidParameter(
            "window needs a keyframe besides the anchor".into(),
        ));
    }
    let poses: Vec<Pose> = candidates.iter().map(|k| k.pose).collect();
    let descriptors = DescriptorMatrix::from_descriptors(candidates.iter().map(|k| &k.descriptor))?;
    let is_member: Vec<bool> = member_index.iter().map(Option::is_some).collect();

    let mut relaxed = false;
    let mut subsets = enumerate_chains(&poses, &is_member, Some((config.delta_lower, config.delta_upper)));
    if subsets.is_empty() {
        relaxed = true;
        subsets = enumerate_chains(&poses, &is_member, None);
    }

    let score = |s: &Vec<usize>| score_subset(&poses, &descriptors, s, &config.params);
    let values: Vec<f64> = if subsets.len() >= PARALLEL_THRESHOLD {
        subsets.par_iter().map(score).collect::<Result<_>>()?
    } else {
        subsets.iter().map(score).collect::<Result<_>>()?
    };

    let mut best = 0;
    for i in 1..subsets.len() {
        if better((values[i], &subsets[i]), (values[best], &subsets[best])) {
            best = i;
        }
    }
    let indices = subsets.swap_remove(best);
    let window_indices = indices.iter().filter_map(|&i| member_index[i]).collect();
    Ok(SubsetSelection {
        indices,
        window_indices,
        objective_value: values[best],
        relaxed,
        evaluated: values.len(),
    })
}

/// Selects the subset of a plain window (no revisit neighbors) with the
/// lowest objective. Ties go to the smaller subset, then to the
/// lexicographically smaller index sequence.
pub fn optimize_window(window: &[Keyframe], config: &WindowConfig) -> Result<SubsetSelection> {
    config.validate()?;
    let candidates: Vec<&Keyframe> = window.iter().collect();
    let members: Vec<Option<usize>> = (0..window.len()).map(Some).collect();
    optimize_candidates(&candidates, &members, config)
}

/// Candidate order of an extended window: each neighbor sits immediately
/// before the window keyframe it is closest to (ties to the lower id);
/// neighbors closest to the anchor go right after it. Neighbors sharing a
/// slot are ordered by id.
pub fn extended_order(window: &KeyframeWindow) -> (Vec<&Keyframe>, Vec<Option<usize>>) {
    let entries = &window.entries;
    let mut slots: Vec<Vec<&Keyframe>> = vec![Vec::new(); entries.len()];
    for nb in &window.extension {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, e) in entries.iter().enumerate() {
            let d = pose_distance(&nb.pose, &e.pose);
            if d < best_d || (d == best_d && e.id < entries[best].id) {
                best = i;
                best_d = d;
            }
        }
        slots[best].push(nb);
    }
    for s in &mut slots {
        s.sort_by_key(|k| k.id);
    }
    let mut order = Vec::with_capacity(entries.len() + window.extension.len());
    let mut member = Vec::with_capacity(order.capacity());
    for (i, e) in entries.iter().enumerate() {
        if i == 0 {
            order.push(e);
            member.push(Some(0));
            for nb in &slots[0] {
                order.push(*nb);
                member.push(None);
            }
        } else {
            for nb in &slots[i] {
                order.push(*nb);
                member.push(None);
            }
            order.push(e);
            member.push(Some(i));
        }
    }
    (order, member)
}

/// Per-cycle bookkeeping, mostly for diagnostics and benchmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub step: usize,
    pub window_len: usize,
    pub neighbors: usize,
    pub deferred: usize,
    pub evaluated: usize,
    pub relaxed: bool,
    pub objective_value: f64,
    pub selected_ids: Vec<u64>,
    pub stored_ids: Vec<u64>,
    pub elapsed: Duration,
}

/// Streaming state of the window optimizer.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub store: KeyframeStore,
    pub window: KeyframeWindow,
    /// Window keyframes held out of the current cycle because the extended
    /// window was over capacity. They lead the next window's new arrivals.
    pub deferred: Vec<Keyframe>,
    pub step: usize,
    pub cycles: Vec<CycleRecord>,
    last_id: Option<u64>,
    last_accepted: Option<Pose>,
    last_seen: Option<Pose>,
    odometer: f64,
    travel: HashMap<u64, f64>,
    dim: Option<usize>,
}

impl OptimizerState {
    pub fn new(config: &WindowConfig) -> Self {
        OptimizerState {
            store: KeyframeStore::with_cell_size(config.delta_upper.max(1e-3)),
            window: KeyframeWindow::new(config.window_size),
            deferred: Vec::new(),
            step: 0,
            cycles: Vec::new(),
            last_id: None,
            last_accepted: None,
            last_seen: None,
            odometer: 0.0,
            travel: HashMap::new(),
            dim: None,
        }
    }

    fn travel_of(&self, id: u64) -> Option<f64> {
        self.travel.get(&id).copied()
    }
}

/// Extends the current window with stored keyframes within `delta_upper`
/// of any window keyframe.
///
/// When the window plus its neighbors exceeds `N + extension_cap_extra`,
/// the last window keyframes are moved to `state.deferred` (at least two
/// window keyframes always remain) and, if still over capacity, only the
/// neighbors closest to the window are kept.
pub fn extend_with_neighbors(state: &mut OptimizerState, config: &WindowConfig) -> KeyframeWindow {
    let entries = &state.window.entries;
    let mut extended = KeyframeWindow {
        entries: entries.clone(),
        extension: Vec::new(),
        capacity: state.window.capacity,
    };
    if entries.is_empty() || state.store.is_empty() {
        return extended;
    }
    let window_ids: BTreeSet<u64> = entries.iter().map(|k| k.id).collect();
    let anchor_travel = state.travel_of(entries[0].id);
    let mut ids = BTreeSet::new();
    for e in entries {
        for id in state.store.radius_query(&e.pose, config.delta_upper) {
            if window_ids.contains(&id) {
                continue;
            }
            if let (Some(at), Some(nt)) = (anchor_travel, state.travel_of(id)) {
                if at - nt < config.revisit_min_travel {
                    continue;
                }
            }
            ids.insert(id);
        }
    }
    if ids.is_empty() {
        return extended;
    }

    let total_cap = config.window_size + config.extension_cap_extra;
    let len = entries.len();
    let mut keep = len;
    if len + ids.len() > total_cap {
        let d = (len + ids.len() - total_cap).min(len.saturating_sub(2));
        keep = len - d;
    }
    let kept = &entries[..keep];
    state.deferred = entries[keep..].to_vec();

    let mut neighbors: Vec<(f64, &Keyframe)> = ids
        .iter()
        .filter_map(|&id| state.store.get(id))
        .map(|k| {
            let d = kept
                .iter()
                .map(|e| pose_distance(&e.pose, &k.pose))
                .fold(f64::INFINITY, f64::min);
            (d, k)
        })
        .filter(|(d, _)| *d <= config.delta_upper)
        .collect();
    let cap = total_cap.saturating_sub(keep);
    if neighbors.len() > cap {
        neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
        neighbors.truncate(cap);
    }
    let mut extension: Vec<Keyframe> = neighbors.into_iter().map(|(_, k)| k.clone()).collect();
    extension.sort_by_key(|k| k.id);

    extended.entries = kept.to_vec();
    extended.extension = extension;
    extended
}

/// Moves the window forward after `selection`: the last selected window
/// keyframe becomes the new anchor, the window keyframes after it (and any
/// deferred ones) are carried over for re-evaluation.
pub fn advance_window(state: &mut OptimizerState, selection: &SubsetSelection) {
    let i_n = selection.last_window_index();
    let mut carried: Vec<Keyframe> = state.window.entries.drain(..).skip(i_n).collect();
    // Deferred keyframes were cut from the end of this window, so they are
    // already part of `carried` in order.
    state.deferred.clear();
    carried.reserve(state.window.capacity.saturating_sub(carried.len()));
    state.window.entries = carried;
    state.window.extension.clear();
    state.step += 1;
}

fn run_cycle(state: &mut OptimizerState, config: &WindowConfig) -> Result<()> {
    let start = Instant::now();
    let extended = extend_with_neighbors(state, config);
    let (order, member) = extended_order(&extended);
    let selection = optimize_candidates(&order, &member, config)?;

    let selected: Vec<&Keyframe> = selection.indices.iter().map(|&i| order[i]).collect();
    let mut stored_ids = Vec::new();
    for kf in &selected {
        if state.store.insert((*kf).clone()) {
            stored_ids.push(kf.id);
        }
    }
    let record = CycleRecord {
        step: state.step,
        window_len: extended.entries.len(),
        neighbors: extended.extension.len(),
        deferred: state.deferred.len(),
        evaluated: selection.evaluated,
        relaxed: selection.relaxed,
        objective_value: selection.objective_value,
        selected_ids: selected.iter().map(|k| k.id).collect(),
        stored_ids,
        elapsed: Duration::ZERO,
    };
    advance_window(state, &selection);
    state.cycles.push(CycleRecord {
        elapsed: start.elapsed(),
        ..record
    });
    Ok(())
}

/// Feeds one frame. Runs an optimization cycle when the window fills.
pub fn process_frame(state: &mut OptimizerState, frame: Keyframe, config: &WindowConfig) -> Result<()> {
    if let Some(last) = state.last_id {
        if frame.id <= last {
            return Err(Error::NonMonotoneId { id: frame.id, last });
        }
    }
    match state.dim {
        Some(d) if d != frame.descriptor.dim() => {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: frame.descriptor.dim(),
            })
        }
        None => state.dim = Some(frame.descriptor.dim()),
        _ => {}
    }
    state.last_id = Some(frame.id);
    if let Some(prev) = state.last_seen {
        state.odometer += pose_distance(&prev, &frame.pose);
    }
    state.last_seen = Some(frame.pose);

    if let (Some(min), Some(prev)) = (config.min_motion, state.last_accepted) {
        if pose_distance(&prev, &frame.pose) < min {
            return Ok(());
        }
    }
    state.last_accepted = Some(frame.pose);
    state.travel.insert(frame.id, state.odometer);
    state.window.entries.push(frame);
    if state.window.entries.len() >= config.window_size {
        run_cycle(state, config)?;
    }
    Ok(())
}

/// Flushes the partially filled last window and returns the store.
pub fn finalize(mut state: OptimizerState, config: &WindowConfig) -> Result<KeyframeStore> {
    match state.window.entries.len() {
        0 => {}
        1 => {
            let kf = state.window.entries.pop().unwrap();
            state.store.insert(kf);
        }
        _ => run_cycle(&mut state, config)?,
    }
    Ok(state.store)
}

/// Runs the optimizer over a whole stream and returns the final state and
/// store.
pub fn run_stream(
    frames: impl IntoIterator<Item = Keyframe>,
    config: &WindowConfig,
) -> Result<(KeyframeStore, Vec<CycleRecord>)> {
    config.validate()?;
    let mut state = OptimizerState::new(config);
    for f in frames {
        process_frame(&mut state, f, config)?;
    }
    let cycles = std::mem::take(&mut state.cycles);
    let store = finalize(state, config)?;
    Ok((store, cycles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Descriptor;

    fn line(xs: &[f64]) -> Vec<Keyframe> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                Keyframe::new(
                    i as u64,
                    Pose::from_position(x, 0.0, 0.0),
                    Descriptor::new(vec![(0.7 * x).sin(), (0.3 * x).cos(), 0.1 * x]).unwrap(),
                )
            })
            .collect()
    }

    fn band(lo: f64, hi: f64) -> WindowConfig {
        WindowConfig {
            delta_lower: lo,
            delta_upper: hi,
            ..Default::default()
        }
    }

    #[test]
    fn enumeration_on_a_line() {
        let w = line(&[0.0, 1.0, 2.0, 3.0]);
        let mut got = enumerate_feasible_subsets(&w, &band(1.0, 2.5));
        got.sort();
        let want: Vec<Vec<usize>> = vec![
            vec![0, 1],
            vec![0, 1, 2],
            vec![0, 1, 2, 3],
            vec![0, 1, 3],
            vec![0, 2],
            vec![0, 2, 3],
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn enumeration_empty_when_gaps_too_small() {
        let w = line(&[0.0, 0.1, 0.2, 0.3]);
        assert!(enumerate_feasible_subsets(&w, &band(1.0, 5.0)).is_empty());
    }

    #[test]
    fn two_keyframes_give_single_candidate() {
        let w = line(&[0.0, 2.0]);
        let sel = optimize_window(&w, &band(1.0, 5.0)).unwrap();
        assert_eq!(sel.indices, vec![0, 1]);
        assert!(!sel.relaxed);
        assert!(optimize_window(&w[..1], &band(1.0, 5.0)).is_err());
    }

    #[test]
    fn relaxed_fallback_fires_on_dense_window() {
        let xs: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
        let sel = optimize_window(&line(&xs), &band(1.0, 5.0)).unwrap();
        assert!(sel.relaxed);
        assert_eq!(sel.indices[0], 0);
        assert!(sel.indices.len() >= 2);
        assert_eq!(sel.evaluated, (1 << 5) - 1);
    }

    #[test]
    fn slide_amount_examples() {
        let c = WindowConfig::default();
        assert_eq!(slide_amount(6, &c).unwrap(), 5);
        assert_eq!(slide_amount(10, &c).unwrap(), 1);
        assert_eq!(slide_amount(1, &c).unwrap(), 10);
        assert!(slide_amount(0, &c).is_err());
        assert!(slide_amount(11, &c).is_err());
    }

    fn selection_ending_at(i_n: usize) -> SubsetSelection {
        SubsetSelection {
            indices: vec![0, i_n],
            window_indices: vec![0, i_n],
            objective_value: -1.0,
            relaxed: false,
            evaluated: 1,
        }
    }

    #[test]
    fn advance_carries_unselected_tail() {
        let cfg = WindowConfig::default();
        let mut st = OptimizerState::new(&cfg);
        st.window.entries = line(&(0..10).map(|i| i as f64).collect::<Vec<_>>());
        // last selected is k6 (1-based), i.e. index 5
        advance_window(&mut st, &selection_ending_at(5));
        let ids: Vec<u64> = st.window.entries.iter().map(|k| k.id).collect();
        assert_eq!(ids, vec![5, 6, 7, 8, 9]);
        assert_eq!(ids.len(), slide_amount(6, &cfg).unwrap());

        st.window.entries = line(&(0..10).map(|i| i as f64).collect::<Vec<_>>());
        advance_window(&mut st, &selection_ending_at(9));
        assert_eq!(st.window.entries.len(), 1);
        assert_eq!(st.window.entries[0].id, 9);
    }

    #[test]
    fn non_monotone_ids_are_rejected() {
        let cfg = WindowConfig::default();
        let mut st = OptimizerState::new(&cfg);
        let w = line(&[0.0, 1.0]);
        process_frame(&mut st, w[1].clone(), &cfg).unwrap();
        let err = process_frame(&mut st, w[0].clone(), &cfg).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneId { id: 0, last: 1 }));
    }

    #[test]
    fn first_frames_only_buffer() {
        let cfg = WindowConfig::default();
        let mut st = OptimizerState::new(&cfg);
        let frames = line(&(0..10).map(|i| i as f64 * 0.6).collect::<Vec<_>>());
        for f in frames.iter().take(9) {
            process_frame(&mut st, f.clone(), &cfg).unwrap();
        }
        assert!(st.store.is_empty());
        assert!(st.cycles.is_empty());
        process_frame(&mut st, frames[9].clone(), &cfg).unwrap();
        assert_eq!(st.cycles.len(), 1);
        assert!(st.store.contains(0));
    }

    #[test]
    fn finalize_rules() {
        let cfg = WindowConfig::default();
        let st = OptimizerState::new(&cfg);
        assert!(finalize(st, &cfg).unwrap().is_empty());

        let mut st = OptimizerState::new(&cfg);
        process_frame(&mut st, line(&[0.0])[0].clone(), &cfg).unwrap();
        let store = finalize(st, &cfg).unwrap();
        assert_eq!(store.ids(), vec![0]);

        let mut st = OptimizerState::new(&cfg);
        for f in line(&[0.0, 1.0, 2.0, 3.0, 4.0]) {
            process_frame(&mut st, f, &cfg).unwrap();
        }
        let store = finalize(st, &cfg).unwrap();
        let want = optimize_window(&line(&[0.0, 1.0, 2.0, 3.0, 4.0]), &cfg).unwrap();
        let want_ids: Vec<u64> = want.indices.iter().map(|&i| i as u64).collect();
        assert_eq!(store.ids(), want_ids);
    }

    #[test]
    fn min_motion_gate_drops_stationary_frames() {
        let cfg = WindowConfig {
            min_motion: Some(0.5),
            ..Default::default()
        };
        let mut st = OptimizerState::new(&cfg);
        for f in line(&[0.0, 0.1, 0.2, 1.0]) {
            process_frame(&mut st, f, &cfg).unwrap();
        }
        let ids: Vec<u64> = st.window.entries.iter().map(|k| k.id).collect();
        assert_eq!(ids, vec![0, 3]);
    }

    #[test]
    fn extended_order_places_neighbors_by_proximity() {
        let mut w = KeyframeWindow::new(4);
        w.entries = line(&[0.0, 2.0, 4.0]);
        let nb = |id: u64, x: f64| {
            Keyframe::new(
                id,
                Pose::from_position(x, 1.0, 0.0),
                Descriptor::new(vec![0.0, 0.0, 0.0]).unwrap(),
            )
        };
        w.extension = vec![nb(100, 3.9), nb(101, 0.2), nb(90, 2.1)];
        let (order, member) = extended_order(&w);
        let ids: Vec<u64> = order.iter().map(|k| k.id).collect();
        assert_eq!(ids, vec![0, 101, 90, 1, 100, 2]);
        assert_eq!(member, vec![Some(0), None, None, Some(1), None, Some(2)]);
    }

    #[test]
    fn config_validation() {
        assert!(WindowConfig::default().validate().is_ok());
        assert!(WindowConfig {
            window_size: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(band(2.0, 1.0).validate().is_err());
        assert!(band(0.0, 1.0).validate().is_err());
    }
}
