//! Command implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use keysample_core::descriptors::{encode_kdsc, DescriptorMetric, ScanContextConfig, SyntheticFieldConfig};
use keysample_core::evaluation::{evaluate_gpr, evaluate_lcd, memory_ratio, query_benchmark, Exclusion, Task};
use keysample_core::io::{
    format_pr_csv, format_summary_csv, format_svg_plot, format_tum_poses, generate_synthetic_session, load_session,
    DatasetLayout, Shape, SyntheticSessionSpec,
};
use keysample_core::window::{process_frame, CycleRecord, OptimizerState};
use keysample_core::{
    preservation, redundancy, DescriptorMatrix, EvalConfig, Keyframe, Method, ObjectiveParams, SamplerConfig, Session,
    WindowConfig,
};

use crate::args::{BenchArgs, Command, EvaluateArgs, QueryArgs, SampleArgs, SessionArgs, SynthArgs, TermsArgs};
use crate::config::ConfigFile;
use crate::output::{write_atomic, Manifest};
use crate::{Cli, CliError};

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Terms(a) => cmd_terms(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

/// Parses a flag given as text so that bad values are usage errors.
fn parse_flag<T>(name: &str, raw: Option<&str>) -> Result<Option<T>, CliError>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    raw.map(|s| s.parse().map_err(|e| CliError::Usage(format!("--{name}: {e}"))))
        .transpose()
}

fn invalid(e: keysample_core::Error) -> CliError {
    CliError::Usage(format!("invalid configuration: {e}"))
}

struct ParsedTask(Task);

impl FromStr for ParsedTask {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gpr" => Ok(ParsedTask(Task::Gpr)),
            "lcd" => Ok(ParsedTask(Task::Lcd)),
            o => Err(format!("unknown task {o:?}, expected gpr or lcd")),
        }
    }
}

struct ParsedExclusion(Exclusion);

impl FromStr for ParsedExclusion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bad exclusion {s:?}, expected frames (`100`) or seconds (`30s`)");
        match s.strip_suffix('s') {
            Some(sec) => sec
                .trim()
                .parse()
                .map(|v| ParsedExclusion(Exclusion::Seconds(v)))
                .map_err(|_| bad()),
            None => s
                .parse()
                .map(|v| ParsedExclusion(Exclusion::Frames(v)))
                .map_err(|_| bad()),
        }
    }
}

struct ParsedMetric(DescriptorMetric);

impl FromStr for ParsedMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "euclidean" => Ok(ParsedMetric(DescriptorMetric::Euclidean)),
            "sector-shift" | "sector_shift" => Ok(ParsedMetric(DescriptorMetric::SectorShift(
                ScanContextConfig::default(),
            ))),
            o => Err(format!("unknown metric {o:?}, expected euclidean or sector-shift")),
        }
    }
}

fn task_name(t: Task) -> &'static str {
    match t {
        Task::Gpr => "gpr",
        Task::Lcd => "lcd",
    }
}

fn exclusion_name(e: Exclusion) -> String {
    match e {
        Exclusion::Frames(n) => n.to_string(),
        Exclusion::Seconds(s) => format!("{s}s"),
    }
}

fn metric_name(m: &DescriptorMetric) -> &'static str {
    match m {
        DescriptorMetric::Euclidean => "euclidean",
        DescriptorMetric::SectorShift(_) => "sector-shift",
    }
}

/// Resolves the files of a session and loads it, recording every input in
/// the manifest under `name`.
fn load_input(
    dir: Option<&Path>,
    poses: Option<&Path>,
    descriptors: Option<&Path>,
    scans: Option<&Path>,
    need_descriptors: bool,
    name: &str,
    manifest: &mut Manifest,
) -> Result<Session, CliError> {
    let pose_path = match (poses, dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) => {
            let kitti = d.join("poses.txt");
            if !d.join("poses.tum").exists() && kitti.exists() {
                kitti
            } else {
                d.join("poses.tum")
            }
        }
        (None, None) => {
            return Err(CliError::Usage(format!(
                "{name}: pass a session directory or a poses file"
            )));
        }
    };
    let descriptor_path = match (descriptors, dir) {
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(d)) => {
            let kdsc = d.join("descriptors.kdsc");
            let csv = d.join("descriptors.csv");
            if kdsc.exists() || need_descriptors && !csv.exists() {
                Some(kdsc)
            } else if csv.exists() {
                Some(csv)
            } else {
                None
            }
        }
        (None, None) => None,
    };
    if need_descriptors && descriptor_path.is_none() {
        return Err(CliError::Usage(format!("{name}: descriptors are required")));
    }
    let scan_dir = match (scans, dir) {
        (Some(s), _) => Some(s.to_path_buf()),
        (None, Some(d)) if d.join("scans").is_dir() => Some(d.join("scans")),
        _ => None,
    };
    let mut layout = DatasetLayout::from_pose_path(&pose_path);
    layout.descriptor_path = descriptor_path.clone();
    layout.scan_dir = scan_dir.clone();
    let session = load_session(&layout)?;

    manifest.input(&format!("{name}.poses"), &pose_path)?;
    if let Some(d) = &descriptor_path {
        manifest.input(&format!("{name}.descriptors"), d)?;
    }
    if let Some(s) = &scan_dir {
        manifest.set(&format!("input.{name}.scans.path"), s.display());
    }
    manifest.set(&format!("input.{name}.frames"), session.frame_count());
    Ok(session)
}

fn load_session_args(a: &SessionArgs, need_descriptors: bool, m: &mut Manifest) -> Result<Session, CliError> {
    load_input(
        a.session.as_deref(),
        a.poses.as_deref(),
        a.descriptors.as_deref(),
        a.scans.as_deref(),
        need_descriptors,
        "map",
        m,
    )
}

fn load_query_args(a: &QueryArgs, m: &mut Manifest) -> Result<Option<Session>, CliError> {
    if a.query_session.is_none() && a.query_poses.is_none() {
        return Ok(None);
    }
    load_input(
        a.query_session.as_deref(),
        a.query_poses.as_deref(),
        a.query_descriptors.as_deref(),
        None,
        true,
        "query",
        m,
    )
    .map(Some)
}

/// Reads selected ids, one per line. They must be strictly increasing and
/// name frames of the session.
pub fn read_ids(path: &Path, frame_count: usize) -> Result<Vec<u64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut ids: Vec<u64> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let parse_err = |message: String| {
            CliError::Core(keysample_core::Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            })
        };
        let id: u64 = t.parse().map_err(|_| parse_err(format!("not an id: {t:?}")))?;
        if id as usize >= frame_count {
            return Err(parse_err(format!("id {id} out of range for {frame_count} frames")));
        }
        if ids.last().is_some_and(|&last| id <= last) {
            return Err(parse_err(format!("id {id} does not increase")));
        }
        ids.push(id);
    }
    Ok(ids)
}

fn resolve_ids(path: Option<&PathBuf>, session: &Session, m: &mut Manifest) -> Result<Vec<u64>, CliError> {
    match path {
        Some(p) => {
            let ids = read_ids(p, session.frame_count())?;
            m.input("ids", p)?;
            Ok(ids)
        }
        None => Ok((0..session.frame_count() as u64).collect()),
    }
}

fn format_ids(ids: &[u64]) -> String {
    ids.iter().map(|i| format!("{i}\n")).collect()
}

fn join_ids(ids: &[u64]) -> String {
    ids.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

/// One row per optimization cycle. Timing is left out so the file is
/// reproducible.
pub fn format_cycles_csv(cycles: &[CycleRecord]) -> String {
    let mut out =
        String::from("step,window_len,neighbors,deferred,evaluated,relaxed,objective,selected_ids,stored_ids\n");
    for c in cycles {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.step,
            c.window_len,
            c.neighbors,
            c.deferred,
            c.evaluated,
            c.relaxed,
            c.objective_value,
            join_ids(&c.selected_ids),
            join_ids(&c.stored_ids)
        );
    }
    out
}

fn write_output(dir: &Path, name: &str, body: &[u8], m: &mut Manifest) -> Result<(), CliError> {
    write_atomic(&dir.join(name), body)?;
    m.output(name, body);
    Ok(())
}

const SAMPLE_KEYS: &[&str] = &[
    "method",
    "interval",
    "alpha",
    "beta",
    "window",
    "dl",
    "du",
    "min_motion",
    "revisit_travel",
    "entropy_threshold",
    "entropy_bins",
    "seed",
];

fn cmd_sample(a: SampleArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let file = ConfigFile::load(a.config.as_deref())?;
    file.check_keys(SAMPLE_KEYS)?;
    let d = SamplerConfig::default();
    let w = WindowConfig::default();
    let method: Method = file.resolve("method", parse_flag("method", a.method.as_deref())?, d.method)?;
    let window = WindowConfig {
        window_size: file.resolve("window", a.window, w.window_size)?,
        delta_lower: file.resolve("dl", a.dl, w.delta_lower)?,
        delta_upper: file.resolve("du", a.du, w.delta_upper)?,
        params: ObjectiveParams {
            alpha: file.resolve("alpha", a.alpha, w.params.alpha)?,
            beta: file.resolve("beta", a.beta, w.params.beta)?,
        },
        min_motion: file.resolve_opt("min_motion", a.min_motion)?,
        revisit_min_travel: file.resolve("revisit_travel", a.revisit_travel, w.revisit_min_travel)?,
        ..w
    };
    let cfg = SamplerConfig {
        method,
        constant_interval: file.resolve("interval", a.interval, d.constant_interval)?,
        entropy_threshold: file.resolve("entropy_threshold", a.entropy_threshold, d.entropy_threshold)?,
        entropy_bins: file.resolve("entropy_bins", a.entropy_bins, d.entropy_bins)?,
        window,
        ..d
    };
    cfg.validate().map_err(invalid)?;
    let seed: u64 = file.resolve("seed", a.seed, 0)?;

    let mut m = Manifest::new("sample");
    if let Some(c) = &a.config {
        m.input("config", c)?;
    }
    m.set("seed", seed);
    m.set("config.method", method);
    m.set("config.interval", cfg.constant_interval);
    m.set("config.alpha", cfg.window.params.alpha);
    m.set("config.beta", cfg.window.params.beta);
    m.set("config.window", cfg.window.window_size);
    m.set("config.dl", cfg.window.delta_lower);
    m.set("config.du", cfg.window.delta_upper);
    m.set("config.extension_cap_extra", cfg.window.extension_cap_extra);
    m.set(
        "config.min_motion",
        cfg.window.min_motion.map_or("none".to_string(), |v| v.to_string()),
    );
    m.set("config.revisit_travel", cfg.window.revisit_min_travel);
    m.set("config.entropy_threshold", cfg.entropy_threshold);
    m.set("config.entropy_bins", cfg.entropy_bins);

    let session = load_session_args(&a.input, method == Method::Optimized, &mut m)?;
    let out = keysample_core::samplers::sample(&session, &cfg)?;
    let n = session.frame_count();

    let mut diagnostics = String::from("frame,kept,signal\n");
    let mut kept = out.selected_ids.iter().peekable();
    for i in 0..n as u64 {
        let k = kept.next_if(|&&id| id == i).is_some();
        let signal = out
            .per_frame_state
            .as_ref()
            .and_then(|s| s.get(i as usize))
            .map_or(String::new(), |v| v.to_string());
        let _ = writeln!(diagnostics, "{i},{},{signal}", u8::from(k));
    }

    write_output(&a.out, "ids.txt", format_ids(&out.selected_ids).as_bytes(), &mut m)?;
    write_output(&a.out, "diagnostics.csv", diagnostics.as_bytes(), &mut m)?;
    if method == Method::Optimized {
        write_output(&a.out, "cycles.csv", format_cycles_csv(&out.cycles).as_bytes(), &mut m)?;
        if !out.cycles.is_empty() {
            let ms: Vec<f64> = out.cycles.iter().map(|c| c.elapsed.as_secs_f64() * 1e3).collect();
            m.timing("window_mean_ms", ms.iter().sum::<f64>() / ms.len() as f64);
            m.timing("window_max_ms", ms.iter().copied().fold(0.0, f64::max));
        }
    }
    m.set("result.frames", n);
    m.set("result.selected", out.selected_ids.len());
    if n > 0 && !out.selected_ids.is_empty() {
        m.set("result.memory_ratio", memory_ratio(out.selected_ids.len(), n)?);
    }
    m.timing("wall_time_s", start.elapsed().as_secs_f64());
    m.write(&a.out)?;
    println!("selected {} of {} frames", out.selected_ids.len(), n);
    Ok(())
}

const EVALUATE_KEYS: &[&str] = &["task", "tp_radius", "k", "exclusion", "thresholds", "metric", "seed"];

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let file = ConfigFile::load(a.config.as_deref())?;
    file.check_keys(EVALUATE_KEYS)?;
    let d = EvalConfig::default();
    let cfg = EvalConfig {
        task: file
            .resolve("task", parse_flag("task", a.task.as_deref())?, ParsedTask(d.task))?
            .0,
        tp_radius: file.resolve("tp_radius", a.tp_radius, d.tp_radius)?,
        lcd_k: file.resolve("k", a.k, d.lcd_k)?,
        lcd_exclusion: file
            .resolve(
                "exclusion",
                parse_flag("exclusion", a.exclusion.as_deref())?,
                ParsedExclusion(d.lcd_exclusion),
            )?
            .0,
        thresholds: file.resolve("thresholds", a.thresholds, d.thresholds)?,
        metric: file
            .resolve(
                "metric",
                parse_flag("metric", a.metric.as_deref())?,
                ParsedMetric(d.metric),
            )?
            .0,
    };
    cfg.validate().map_err(invalid)?;
    let seed: u64 = file.resolve("seed", a.seed, 0)?;

    let mut m = Manifest::new("evaluate");
    if let Some(c) = &a.config {
        m.input("config", c)?;
    }
    m.set("seed", seed);
    m.set("config.task", task_name(cfg.task));
    m.set("config.tp_radius", cfg.tp_radius);
    m.set("config.k", cfg.lcd_k);
    m.set("config.exclusion", exclusion_name(cfg.lcd_exclusion));
    m.set("config.thresholds", cfg.thresholds);
    m.set("config.metric", metric_name(&cfg.metric));

    let session = load_session_args(&a.input, true, &mut m)?;
    let ids = resolve_ids(a.ids.as_ref(), &session, &mut m)?;
    let report = match cfg.task {
        Task::Gpr => {
            let Some(query) = load_query_args(&a.query, &mut m)? else {
                return Err(CliError::Usage(
                    "gpr evaluation needs --query-session or --query-poses".into(),
                ));
            };
            let map = session.keyframes_for(&ids)?;
            let queries: Vec<Keyframe> = query.keyframes()?;
            let mut r = evaluate_gpr(&map, &queries, &cfg)?;
            r.memory_ratio = memory_ratio(ids.len(), session.frame_count())?;
            r
        }
        Task::Lcd => evaluate_lcd(&session, &ids, &cfg)?,
    };

    write_output(&a.out, "pr.csv", format_pr_csv(&report.pr_points).as_bytes(), &mut m)?;
    write_output(&a.out, "summary.csv", format_summary_csv(&report).as_bytes(), &mut m)?;
    write_output(&a.out, "pr.svg", format_svg_plot(&report.pr_points).as_bytes(), &mut m)?;
    m.set("result.auc", report.auc);
    m.set("result.f1_max", report.f1_max);
    m.set("result.memory_ratio", report.memory_ratio);
    m.set("result.queries", report.queries);
    m.timing("query_wall_time_s", report.query_wall_time);
    m.timing("wall_time_s", start.elapsed().as_secs_f64());
    m.write(&a.out)?;
    println!("auc = {}", report.auc);
    println!("f1_max = {}", report.f1_max);
    println!("memory_ratio = {}", report.memory_ratio);
    println!("query_wall_time_s = {}", report.query_wall_time);
    Ok(())
}

/// Redundancy over the whole selection and preservation averaged over
/// every run of `window` consecutive keyframes (the whole selection when
/// it is shorter).
pub fn selection_terms(keyframes: &[Keyframe], window: usize) -> Result<(f64, f64), CliError> {
    if window < 2 {
        return Err(CliError::Usage(format!("--window must be >= 2, got {window}")));
    }
    let rho = redundancy(keyframes)?;
    let pi = if keyframes.len() <= window {
        preservation(keyframes)?
    } else {
        let runs = keyframes.len() - window + 1;
        let mut acc = 0.0;
        for w in keyframes.windows(window) {
            acc += preservation(w)?;
        }
        acc / runs as f64
    };
    Ok((rho, pi))
}

fn cmd_terms(a: TermsArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let window = a.window.unwrap_or(10);
    let mut m = Manifest::new("terms");
    m.set("config.window", window);
    let session = load_session_args(&a.input, true, &mut m)?;
    let ids = resolve_ids(a.ids.as_ref(), &session, &mut m)?;
    let kfs = session.keyframes_for(&ids)?;
    let (rho, pi) = selection_terms(&kfs, window)?;
    let text = format!("rho = {rho}\npi = {pi}\n");
    print!("{text}");
    if let Some(out) = &a.out {
        write_output(out, "terms.txt", text.as_bytes(), &mut m)?;
        m.timing("wall_time_s", start.elapsed().as_secs_f64());
        m.write(out)?;
    }
    Ok(())
}

const SYNTH_KEYS: &[&str] = &[
    "shape",
    "length",
    "spacing",
    "laps",
    "dim",
    "freq_sigma",
    "pose_noise",
    "descriptor_noise",
    "frame_period",
    "seed",
    "field_seed",
];

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let file = ConfigFile::load(a.config.as_deref())?;
    file.check_keys(SYNTH_KEYS)?;
    let shape: Shape = file.resolve("shape", parse_flag("shape", a.shape.as_deref())?, Shape::Loop)?;
    let length = file.resolve("length", a.length, 200.0)?;
    let spacing = file.resolve("spacing", a.spacing, 0.5)?;
    let laps = file.resolve("laps", a.laps, 2usize)?;
    let dim = file.resolve("dim", a.dim, 64usize)?;
    let freq_sigma = file.resolve("freq_sigma", a.freq_sigma, 0.1)?;
    let pose_noise = file.resolve("pose_noise", a.pose_noise, 0.0)?;
    let descriptor_noise = file.resolve("descriptor_noise", a.descriptor_noise, 0.0)?;
    let frame_period = file.resolve("frame_period", a.frame_period, 0.1)?;
    let seed: u64 = file.resolve("seed", a.seed, 0)?;
    let field_seed: u64 = file.resolve("field_seed", a.field_seed, seed)?;

    let mut spec = SyntheticSessionSpec::new(shape, length, spacing, laps, seed).map_err(invalid)?;
    spec.descriptor = SyntheticFieldConfig::random(dim, freq_sigma, field_seed).map_err(invalid)?;
    spec.descriptor.noise_sigma = descriptor_noise;
    spec.pose_noise_sigma = pose_noise;
    spec.frame_period = frame_period;
    spec.validate().map_err(invalid)?;
    let session = generate_synthetic_session(&spec)?;

    let mut m = Manifest::new("synth");
    if let Some(c) = &a.config {
        m.input("config", c)?;
    }
    m.set("seed", seed);
    m.set("config.shape", shape);
    m.set("config.length", length);
    m.set("config.spacing", spacing);
    m.set("config.laps", laps);
    m.set("config.dim", dim);
    m.set("config.freq_sigma", freq_sigma);
    m.set("config.pose_noise", pose_noise);
    m.set("config.descriptor_noise", descriptor_noise);
    m.set("config.frame_period", frame_period);
    m.set("config.field_seed", field_seed);

    let timestamps = session.timestamps.clone().unwrap_or_default();
    let stamped: Vec<_> = timestamps.into_iter().zip(session.poses.iter().cloned()).collect();
    let descriptors = session
        .descriptors
        .as_ref()
        .expect("synthetic sessions carry descriptors");
    write_output(&a.out, "poses.tum", format_tum_poses(&stamped).as_bytes(), &mut m)?;
    write_output(&a.out, "descriptors.kdsc", &encode_kdsc(descriptors), &mut m)?;
    m.set("result.frames", session.frame_count());
    m.timing("wall_time_s", start.elapsed().as_secs_f64());
    m.write(&a.out)?;
    println!("wrote {} frames to {}", session.frame_count(), a.out.display());
    Ok(())
}

/// Per-window optimization times of one streaming run.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTiming {
    pub window: usize,
    pub cycles: usize,
    pub min_ms: f64,
    pub avg_ms: f64,
    pub max_ms: f64,
}

/// Streams the session through the optimizer with window size `window`,
/// stopping after `max_cycles` cycles if given. Returns the timing and the
/// keyframes stored so far.
pub fn time_windows(
    keyframes: &[Keyframe],
    window: usize,
    max_cycles: Option<usize>,
) -> Result<(WindowTiming, Vec<Keyframe>), CliError> {
    let cfg = WindowConfig {
        window_size: window,
        ..WindowConfig::default()
    };
    cfg.validate().map_err(invalid)?;
    let mut state = OptimizerState::new(&cfg);
    for kf in keyframes {
        process_frame(&mut state, kf.clone(), &cfg)?;
        if max_cycles.is_some_and(|mc| state.cycles.len() >= mc) {
            break;
        }
    }
    let ms: Vec<f64> = state.cycles.iter().map(|c| c.elapsed.as_secs_f64() * 1e3).collect();
    let timing = if ms.is_empty() {
        WindowTiming {
            window,
            cycles: 0,
            min_ms: 0.0,
            avg_ms: 0.0,
            max_ms: 0.0,
        }
    } else {
        WindowTiming {
            window,
            cycles: ms.len(),
            min_ms: ms.iter().copied().fold(f64::INFINITY, f64::min),
            avg_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            max_ms: ms.iter().copied().fold(0.0, f64::max),
        }
    };
    Ok((timing, state.store.keyframes().to_vec()))
}

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let windows = a.windows.clone().unwrap_or_else(|| vec![10, 15]);
    if windows.is_empty() {
        return Err(CliError::Usage("--windows is empty".into()));
    }
    let seed = a.seed.unwrap_or(0);
    let mut m = Manifest::new("bench");
    m.set("seed", seed);
    m.set(
        "config.windows",
        windows.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    );
    m.set(
        "config.max_cycles",
        a.max_cycles.map_or("none".to_string(), |v| v.to_string()),
    );

    let session = if a.input.session.is_some() || a.input.poses.is_some() {
        load_session_args(&a.input, true, &mut m)?
    } else {
        let length = a.length.unwrap_or(200.0);
        let spacing = a.spacing.unwrap_or(0.5);
        let laps = a.laps.unwrap_or(2);
        m.set(
            "config.synthetic",
            format!("loop length={length} spacing={spacing} laps={laps}"),
        );
        let spec = SyntheticSessionSpec::new(Shape::Loop, length, spacing, laps, seed).map_err(invalid)?;
        generate_synthetic_session(&spec)?
    };
    let keyframes = session.keyframes()?;

    let mut csv = String::from("window,cycles,min_ms,avg_ms,max_ms\n");
    let mut first_store = None;
    for &w in &windows {
        let (t, store) = time_windows(&keyframes, w, a.max_cycles)?;
        println!(
            "window = {} cycles = {} min_ms = {:.3} avg_ms = {:.3} max_ms = {:.3}",
            t.window, t.cycles, t.min_ms, t.avg_ms, t.max_ms
        );
        let _ = writeln!(csv, "{},{},{},{},{}", t.window, t.cycles, t.min_ms, t.avg_ms, t.max_ms);
        first_store.get_or_insert(store);
    }

    let store = first_store.unwrap_or_default();
    let all = session.descriptors.as_ref().expect("keyframes() checked descriptors");
    let map = if store.is_empty() {
        all.clone()
    } else {
        DescriptorMatrix::from_descriptors(store.iter().map(|k| &k.descriptor))?
    };
    let q = query_benchmark(&map, all)?;
    println!(
        "query_sweep_s = {:.6} map_size = {} comparisons = {}",
        q.seconds, q.map_size, q.comparisons
    );

    if let Some(out) = &a.out {
        let _ = writeln!(
            csv,
            "# query_sweep_s={} map_size={} comparisons={}",
            q.seconds, q.map_size, q.comparisons
        );
        write_atomic(&out.join("bench.csv"), csv.as_bytes())?;
        m.timing("wall_time_s", start.elapsed().as_secs_f64());
        m.write(out)?;
    }
    Ok(())
}
