use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use tpvm::io::{self, Bundle};
use tpvm::{
    alpha_blend_mask, make_concentric_mask, make_region_mask, DualViewOptions, Execution, FusionMode, Image,
    InitStrategy, PinSpec, Region, RingOrder, SolverConfig, TargetSet, WeightVector,
};

use super::{
    ChannelArg, CliError, CovertArgs, DualArgs, ExportUiArgs, FactorizeArgs, InitArg, MaskArgs, MaskKind, MetricsArgs,
    ModeArg, PerceiveArgs, SolverArgs,
};

type Result<T> = std::result::Result<T, CliError>;

fn parse_csv(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("{what}: {s:?} is not a number")))
        })
        .collect()
}

fn parse_fixed<const N: usize>(text: &str, what: &str) -> Result<[f64; N]> {
    let v = parse_csv(text, what)?;
    v.try_into()
        .map_err(|v: Vec<f64>| CliError::usage(format!("{what}: expected {N} numbers, got {}", v.len())))
}

fn mode_of(arg: ModeArg) -> FusionMode {
    match arg {
        ModeArg::Sum => FusionMode::Sum,
        ModeArg::Mean => FusionMode::Mean,
    }
}

fn load_image(path: &Path, channel: Option<ChannelArg>) -> Result<Image> {
    let decoded = io::read_image(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let index = match (channel, &decoded) {
        (None, io::Decoded::Rgb(_)) => {
            return Err(CliError::usage(format!(
                "{} is a color image; choose one with --channel",
                path.display()
            )))
        }
        (None, io::Decoded::Gray(_)) => 0,
        (Some(ChannelArg::R), _) => 0,
        (Some(ChannelArg::G), _) => 1,
        (Some(ChannelArg::B), _) => 2,
    };
    if matches!(decoded, io::Decoded::Gray(_)) && index != 0 {
        return Err(CliError::usage(format!(
            "{} is grayscale; only channel r (0) exists",
            path.display()
        )));
    }
    Ok(decoded.channel(index)?)
}

/// A single directory expands to its PGM/PPM files in name order.
fn expand_targets(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if let [dir] = paths {
        if dir.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"))
                })
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(CliError::usage(format!("no .pgm/.ppm files in {}", dir.display())));
            }
            return Ok(files);
        }
    }
    Ok(paths.to_vec())
}

fn load_targets(paths: &[PathBuf], channel: Option<ChannelArg>) -> Result<TargetSet> {
    let images = expand_targets(paths)?
        .iter()
        .map(|p| load_image(p, channel))
        .collect::<Result<Vec<_>>>()?;
    Ok(TargetSet::new(images)?)
}

fn solver_config(a: &SolverArgs) -> SolverConfig {
    SolverConfig {
        max_iterations: a.iters,
        rel_tolerance: a.tol,
        seed: a.seed,
        restarts: a.restarts,
        init_strategy: match a.init {
            InitArg::Uniform => InitStrategy::SeededUniform,
            InitArg::Replicate => InitStrategy::ReplicateTargets,
        },
        execution: if a.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        ..SolverConfig::default()
    }
}

fn read_bundle(path: &Path) -> Result<Bundle> {
    io::read_bundle(path).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

fn write_bundle(bundle: &Bundle, path: &Path) -> Result<()> {
    io::write_bundle(bundle, path).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

fn termination_name(t: tpvm::Termination) -> &'static str {
    match t {
        tpvm::Termination::NotRun => "not-run",
        tpvm::Termination::Converged => "converged",
        tpvm::Termination::Stalled => "stalled",
        tpvm::Termination::MaxIterations => "max-iterations",
    }
}

pub fn factorize(a: FactorizeArgs) -> Result<()> {
    let targets = load_targets(&a.targets, a.channel)?;
    let cfg = solver_config(&a.solver);
    let pins = a
        .pin_normal_view
        .then(|| PinSpec::new().column(0, &vec![1.0; a.frames]));
    let f = tpvm::factorize(&targets, a.frames, pins.as_ref(), &cfg)?;
    let objective = tpvm::objective(&targets, &f)?;
    write_bundle(&Bundle::from_factorization(&f, mode_of(a.mode)), &a.out)?;
    print_json(&json!({
        "frames": f.frame_count(),
        "viewers": f.viewer_count(),
        "objective": objective,
        "iterations": f.objective_history().len().saturating_sub(1),
        "termination": termination_name(f.termination()),
    }));
    Ok(())
}

pub fn covert(a: CovertArgs) -> Result<()> {
    let secret = load_image(&a.secret, a.channel)?;
    let r = tpvm::design_covert_noise(&secret, a.seed)?;
    write_bundle(&Bundle::from_factorization(&r.factorization, FusionMode::Sum), &a.out)?;
    print_json(&json!({ "leakage": r.leakage, "clamped_pixels": r.clamped_pixels }));
    Ok(())
}

pub fn dual(a: DualArgs) -> Result<()> {
    let default_view = load_image(&a.default_view, a.channel)?;
    let shale = load_image(&a.shale, a.channel)?;
    let opts = DualViewOptions {
        solver: solver_config(&a.solver),
        pin_shale: !a.free_shale,
    };
    let r = tpvm::design_dual_view(&default_view, &shale, &opts)?;
    write_bundle(&Bundle::from_factorization(&r.factorization, FusionMode::Sum), &a.out)?;
    print_json(&json!({
        "normal_rmse": r.view_rmse[0],
        "shale_rmse": r.view_rmse[1],
        "shale_weights": r.factorization.weights().column(tpvm::covert::SHALE_COLUMN),
        "leakage": r.leakage,
        "clamped_pixels": r.clamped_pixels,
    }));
    Ok(())
}

pub fn perceive(a: PerceiveArgs) -> Result<()> {
    let bundle = read_bundle(&a.bundle)?;
    let mode = a.mode.map(mode_of).unwrap_or(bundle.mode);
    let m = bundle.frame_count();
    let out = if let Some(mask_path) = &a.mask_from {
        let mask_bundle = if mask_path == &a.bundle {
            bundle.clone()
        } else {
            read_bundle(mask_path)?
        };
        let mask = mask_bundle
            .mask
            .ok_or_else(|| CliError::usage(format!("{} carries no mask", mask_path.display())))?;
        tpvm::perceive_spatial(&bundle.frames, &mask, mode)?
    } else {
        let w = if let Some(k) = a.viewer {
            if k >= bundle.viewer_count() {
                return Err(CliError::usage(format!(
                    "viewer {k} out of range (bundle has {})",
                    bundle.viewer_count()
                )));
            }
            bundle.weights.weight_vector(k)
        } else if let Some(text) = &a.weights {
            let w = parse_csv(text, "--weights")?;
            if w.len() != m {
                return Err(CliError::usage(format!(
                    "--weights has {} entries, bundle has {m} atom frames",
                    w.len()
                )));
            }
            WeightVector::new(w)?
        } else {
            WeightVector::ones(m)
        };
        tpvm::perceive(&bundle.frames, &w, mode)?
    };
    if a.maxval == 0 {
        return Err(CliError::usage("--maxval must be positive"));
    }
    io::write_pgm(&out.image, &a.out, a.maxval).map_err(|e| CliError::io(format!("{}: {e}", a.out.display())))?;
    if out.overflowed() {
        eprintln!("tpvm: {} pixels exceeded 1 and were clamped", out.overflow_pixels);
    }
    Ok(())
}

pub fn mask(a: MaskArgs) -> Result<()> {
    let io_args = match &a.kind {
        MaskKind::Region { io, .. } | MaskKind::Concentric { io, .. } | MaskKind::Alpha { io, .. } => io,
    };
    let bundle = read_bundle(&io_args.bundle)?;
    let (w, h) = (bundle.width(), bundle.height());
    let mask = match &a.kind {
        MaskKind::Region {
            disk,
            rect,
            inner,
            outer,
            ..
        } => {
            let region = match (disk, rect) {
                (Some(d), _) => {
                    let [cx, cy, radius] = parse_fixed(d, "--disk")?;
                    Region::Disk { cx, cy, radius }
                }
                (None, Some(r)) => {
                    let [x0, y0, x1, y1] = parse_fixed(r, "--rect")?;
                    Region::Rect { x0, y0, x1, y1 }
                }
                (None, None) => return Err(CliError::usage("one of --disk or --rect is required")),
            };
            let inner = WeightVector::new(parse_csv(inner, "--inner")?)?;
            let outer = WeightVector::new(parse_csv(outer, "--outer")?)?;
            make_region_mask(w, h, region, &inner, &outer)?
        }
        MaskKind::Concentric {
            center,
            radii,
            reversed,
            ..
        } => {
            let [cx, cy] = parse_fixed(center, "--center")?;
            let radii = parse_csv(radii, "--radii")?;
            let order = if *reversed {
                RingOrder::Reversed
            } else {
                RingOrder::Identity
            };
            make_concentric_mask(w, h, (cx, cy), &radii, order)?
        }
        MaskKind::Alpha { alphas, .. } => alpha_blend_mask(w, h, &parse_csv(alphas, "--alphas")?)?,
    };
    if mask.frames() != bundle.frame_count() {
        return Err(CliError::usage(format!(
            "mask has {} frames, bundle has {} atom frames",
            mask.frames(),
            bundle.frame_count()
        )));
    }
    let bundle = bundle.with_mask(mask)?;
    write_bundle(&bundle, &io_args.out)
}

pub fn metrics(a: MetricsArgs) -> Result<()> {
    let bundle = read_bundle(&a.bundle)?;
    let targets = load_targets(&a.targets, a.channel)?;
    if targets.width() != bundle.width() || targets.height() != bundle.height() {
        return Err(CliError::usage(format!(
            "dimension mismatch: targets are {}x{}, bundle frames are {}x{}",
            targets.width(),
            targets.height(),
            bundle.width(),
            bundle.height()
        )));
    }
    if targets.len() != bundle.viewer_count() {
        return Err(CliError::usage(format!(
            "dimension mismatch: {} targets, bundle has {} viewers",
            targets.len(),
            bundle.viewer_count()
        )));
    }
    let mode = a.mode.map(mode_of).unwrap_or(bundle.mode);
    let report = tpvm::quality_report(&targets, &bundle.to_factorization(), mode)?;
    print_json(&serde_json::to_value(&report).map_err(|e| CliError::numeric(e.to_string()))?);
    Ok(())
}

pub fn export_ui(a: ExportUiArgs) -> Result<()> {
    let bundle = read_bundle(&a.bundle)?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(format!("{}: {e}", a.out.display())))?;
    let path = a.out.join("bundle.json");
    let golden = io::default_golden(&bundle);
    io::export_ui_bundle(&bundle, &golden, &path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    print_json(&json!({ "path": path, "golden": golden.len() }));
    Ok(())
}
