use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use annocal::geom::RngStream;
use annocal::handeye::{marker_from_base, solve_handeye};
use annocal::io::{self, RunManifest};
use annocal::metrics::{average_precision, comparison_rows, comparison_table, DetectionSet, GroundTruth};
use annocal::pivot::{
    solve_pivot_with, tip_variance, PivotMeasurementSet, PivotOptions, Stacking, REFERENCE_TIP_VARIANCE_MM,
};
use annocal::registration::{
    absolute_orientation, icp_refine, recovery_meshes, run_icp_recovery, IcpBenchConfig, IcpParams,
    REFERENCE_RECOVERY_ERROR,
};
use annocal::sim::{generate_scene, simulate_repeated, NoiseSpec, DEFAULT_DRAWS};
use annocal::{Error, Result};

/// Robot-assisted 6D pose annotation: calibration, registration and
/// annotation-quality simulation.
#[derive(Parser, Debug)]
#[command(name = "annocal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Output {
    /// JSON report with the run manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV report.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Record the wall-clock time in the manifest (breaks byte-identical reruns).
    #[arg(long)]
    timestamp: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tool-tip offset from end-effector poses pivoting about a fixed point.
    PivotCalib {
        poses: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        min_rotation_deg: f64,
        /// Stack every pose pair instead of consecutive pairs.
        #[arg(long)]
        all_pairs: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Camera-to-end-effector transform from marker board observations.
    Handeye {
        board: PathBuf,
        views: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Object pose from keypoint correspondences refined by ICP on tip-measured points.
    Annotate {
        points: PathBuf,
        mesh: PathBuf,
        correspondences: PathBuf,
        /// JSON file of ICP parameters; missing keys keep their defaults.
        #[arg(long)]
        icp_params: Option<PathBuf>,
        /// Flag the result when the final RMS distance exceeds this, mm.
        #[arg(long, default_value_t = 1.0)]
        residual_threshold: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Simulated annotation error of a scene under pose and hand-eye noise.
    Simulate {
        /// Scene JSON; use --template instead to generate one.
        scene: Option<PathBuf>,
        #[arg(long, conflicts_with = "scene")]
        template: Option<String>,
        /// JSON noise specification; missing keys keep their defaults.
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_DRAWS)]
        draws: usize,
        #[command(flatten)]
        output: Output,
    },
    /// ICP recovery experiment on three procedural objects.
    IcpBench {
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Per-category average precision of oriented 3D boxes.
    EvalIou {
        ground_truth: PathBuf,
        predictions: PathBuf,
        #[arg(long)]
        threshold: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Writes a procedural scene.
    GenScene {
        #[arg(long, default_value = "phocal-like")]
        template: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the objects' ground-truth boxes as a detections CSV.
        #[arg(long)]
        boxes: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn seed_or_fresh(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos() as u64);
        let s = RngStream::new(nanos).next_u64();
        eprintln!("no --seed given, using {s}");
        s
    })
}

fn finish<T: serde::Serialize>(
    output: &Output,
    manifest: RunManifest,
    result: &T,
    csv: Option<(&[&str], Vec<Vec<String>>)>,
) -> Result<()> {
    let manifest = if output.timestamp {
        manifest.with_timestamp()
    } else {
        manifest
    };
    if let Some(path) = &output.out {
        io::save_report(path, &manifest, result)?;
    }
    if let Some(path) = &output.csv {
        match csv {
            Some((header, rows)) => io::save_csv(path, header, &rows)?,
            None => return Err(Error::InvalidInput(format!("{} has no CSV report", manifest.command))),
        }
    }
    Ok(())
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = io::read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::PivotCalib {
            poses,
            min_rotation_deg,
            all_pairs,
            output,
        } => {
            let opts = PivotOptions {
                min_rotation_deg,
                stacking: if all_pairs {
                    Stacking::AllPairs
                } else {
                    Stacking::Consecutive
                },
            };
            let set = PivotMeasurementSet::new(io::load_poses(&poses)?)?;
            let result = solve_pivot_with(&set, &opts)?;
            let spread = tip_variance(&set, &result);
            let t = result.tip_offset;
            println!("tip offset (ee frame): {:.4} {:.4} {:.4} mm", t.x, t.y, t.z);
            let p = result.pivot_point;
            println!("pivot point (base):    {:.4} {:.4} {:.4} mm", p.x, p.y, p.z);
            println!("tip spread: {spread:.4} mm (physical setup: {REFERENCE_TIP_VARIANCE_MM} mm)");
            let manifest = RunManifest::new("pivot-calib", json!({ "options": opts })).with_input(&poses)?;
            let report = json!({ "result": result, "tip_variance_mm": spread, "poses": set.poses().len() });
            finish(&output, manifest, &report, None)
        }
        Command::Handeye { board, views, output } => {
            let marker_board = io::load_board(&board)?;
            let obs = io::load_views(&views)?;
            let marker = marker_from_base(&marker_board)?;
            if marker.flagged() {
                eprintln!("warning: board fit residual {:.3} mm", marker.residual_rms);
            }
            let result = solve_handeye(&obs, &marker.pose, &marker_board)?;
            println!("cam_to_ee: {}", result.cam_to_ee);
            println!(
                "evaluation RMSE: {:.4} mm over {} views",
                result.overall_rmse,
                obs.len()
            );
            for &i in &result.flagged_views {
                println!("view {i} disagrees with the mean estimate");
            }
            let manifest = RunManifest::new("handeye", json!({}))
                .with_input(&board)?
                .with_input(&views)?;
            let rows = result
                .per_view_rmse
                .iter()
                .enumerate()
                .map(|(i, v)| vec![i.to_string(), v.to_string()])
                .collect();
            let report = json!({ "marker_base": marker, "result": result });
            finish(&output, manifest, &report, Some((&["view", "rmse_mm"], rows)))
        }
        Command::Annotate {
            points,
            mesh,
            correspondences,
            icp_params,
            residual_threshold,
            output,
        } => {
            let params: IcpParams = match &icp_params {
                Some(p) => load_json(p)?,
                None => IcpParams::default(),
            };
            let measured = io::load_points(&points)?;
            let model = io::load_obj(&mesh)?;
            if model.dropped_triangles() > 0 {
                eprintln!(
                    "warning: dropped {} degenerate triangles from {}",
                    model.dropped_triangles(),
                    mesh.display()
                );
            }
            let keypoints = io::load_correspondences(&correspondences)?;
            let initial = absolute_orientation(&keypoints)?;
            if initial.flagged() {
                eprintln!("warning: keypoint fit residual {:.3} mm", initial.residual_rms);
            }
            let outcome = icp_refine(&measured, &model, &initial.pose, &params)?;
            let suspect = outcome.is_suspect(residual_threshold);
            println!("pose: {}", outcome.pose);
            println!(
                "ICP: {} iterations, converged {}, RMS distance {:.4} mm{}",
                outcome.iterations,
                outcome.converged,
                outcome.rms_distance,
                if suspect { " (suspect)" } else { "" }
            );
            let mut manifest = RunManifest::new(
                "annotate",
                json!({ "icp": params, "residual_threshold_mm": residual_threshold }),
            )
            .with_input(&points)?
            .with_input(&mesh)?
            .with_input(&correspondences)?;
            if let Some(p) = &icp_params {
                manifest = manifest.with_input(p)?;
            }
            let report = json!({ "keypoint_alignment": initial, "icp": outcome, "suspect": suspect });
            finish(&output, manifest, &report, None)
        }
        Command::Simulate {
            scene,
            template,
            noise,
            seed,
            draws,
            output,
        } => {
            let mut spec: NoiseSpec = match &noise {
                Some(p) => load_json(p)?,
                None => NoiseSpec::default(),
            };
            if seed.is_some() || noise.is_none() {
                spec.seed = seed_or_fresh(seed);
            }
            spec.validate()?;
            let mut manifest = RunManifest::new(
                "simulate",
                json!({ "template": template, "draws": draws, "noise": spec }),
            )
            .with_seed(spec.seed);
            let (config, base_dir) = match (&scene, &template) {
                (Some(path), _) => {
                    manifest = manifest.with_input(path)?;
                    (io::load_scene(path)?, path.parent().map(Path::to_path_buf))
                }
                (None, Some(t)) => (generate_scene(t, &mut RngStream::new(spec.seed))?, None),
                (None, None) => return Err(Error::InvalidInput("simulate needs a scene file or --template".into())),
            };
            if let Some(p) = &noise {
                manifest = manifest.with_input(p)?;
            }
            let meshes = config.load_meshes(base_dir.as_deref())?;
            let report = simulate_repeated(&config, &meshes, &spec, draws)?;

            println!(
                "{} objects, {} frames, {} draws, seed {}",
                config.objects.len(),
                config.frame_count(),
                draws,
                spec.seed
            );
            for c in &report.cameras {
                let reference = c.reference_mm.map_or(String::new(), |r| format!(", reference {r:.2}"));
                println!(
                    "{:<13} single draw {:.3} mm, mean {:.3} ± {:.3} mm{reference}",
                    c.camera, c.single_draw_mm, c.mean_mm, c.std_mm
                );
            }
            let simulated: Vec<(String, f64)> = report.cameras.iter().map(|c| (c.camera.clone(), c.mean_mm)).collect();
            print!("\n{}", comparison_table(&comparison_rows(&simulated)));

            let mut rows = Vec::new();
            for c in &report.single.cameras {
                for o in &c.objects {
                    for (f, v) in o.frames.iter().enumerate() {
                        rows.push(vec![c.camera.clone(), o.object.clone(), f.to_string(), v.to_string()]);
                    }
                }
            }
            finish(
                &output,
                manifest,
                &report,
                Some((&["camera", "object", "frame", "rmse_mm"], rows)),
            )
        }
        Command::IcpBench { seed, output } => {
            let config = IcpBenchConfig {
                seed: seed_or_fresh(seed),
                ..IcpBenchConfig::default()
            };
            let report = run_icp_recovery(&recovery_meshes()?, &config)?;
            for t in &report.trials {
                println!(
                    "{:<14} #{}  start {:.2} mm / {:.2}°  ->  {:.3} mm / {:.3}°",
                    t.object,
                    t.trial,
                    t.initial_translation_error_mm,
                    t.initial_rotation_error_deg,
                    t.translation_error_mm,
                    t.rotation_error_deg
                );
            }
            let (rt, rr) = REFERENCE_RECOVERY_ERROR;
            println!(
                "mean recovered error {:.3} mm / {:.3}° (reported: {rt:.2} mm / {rr:.2}°)",
                report.mean_translation_error_mm, report.mean_rotation_error_deg
            );
            let manifest = RunManifest::new("icp-bench", json!({ "config": config })).with_seed(config.seed);
            let rows = report
                .trials
                .iter()
                .map(|t| {
                    vec![
                        t.object.clone(),
                        t.trial.to_string(),
                        t.translation_error_mm.to_string(),
                        t.rotation_error_deg.to_string(),
                        t.iterations.to_string(),
                        t.converged.to_string(),
                    ]
                })
                .collect();
            let header = [
                "object",
                "trial",
                "translation_error_mm",
                "rotation_error_deg",
                "iterations",
                "converged",
            ];
            finish(&output, manifest, &report, Some((&header, rows)))
        }
        Command::EvalIou {
            ground_truth,
            predictions,
            threshold,
            output,
        } => {
            let gt = io::load_detections(&ground_truth)?
                .into_iter()
                .map(|d| GroundTruth {
                    category: d.category,
                    bbox: d.bbox,
                })
                .collect();
            let set = DetectionSet::new(io::load_detections(&predictions)?, gt)?;
            let report = average_precision(&set, threshold)?;
            for c in &report.categories {
                match c.ap {
                    Some(ap) => println!(
                        "{:<12} AP {:.4}  ({} of {} matched)",
                        c.category, ap, c.true_positives, c.ground_truth
                    ),
                    None => println!("{:<12} excluded: no ground truth", c.category),
                }
            }
            match report.mean_ap {
                Some(m) => println!("mAP@{threshold}: {m:.4}"),
                None => println!("mAP@{threshold}: undefined, no ground truth"),
            }
            let manifest = RunManifest::new("eval-iou", json!({ "threshold": threshold }))
                .with_input(&ground_truth)?
                .with_input(&predictions)?;
            let rows = report
                .categories
                .iter()
                .map(|c| {
                    vec![
                        c.category.clone(),
                        c.ap.map_or(String::new(), |v| v.to_string()),
                        c.ground_truth.to_string(),
                        c.predictions.to_string(),
                        c.true_positives.to_string(),
                    ]
                })
                .collect();
            let header = ["category", "ap", "ground_truth", "predictions", "true_positives"];
            finish(&output, manifest, &report, Some((&header, rows)))
        }
        Command::GenScene {
            template,
            seed,
            out,
            boxes,
        } => {
            let seed = seed_or_fresh(seed);
            let scene = generate_scene(&template, &mut RngStream::new(seed))?;
            io::save_scene(&out, &scene)?;
            if let Some(path) = boxes {
                let meshes = scene.load_meshes(None)?;
                let dets: Vec<_> = io::load_ground_truth(&scene, &meshes)?
                    .into_iter()
                    .map(|g| annocal::metrics::Detection {
                        category: g.category,
                        score: 1.0,
                        bbox: g.bbox,
                    })
                    .collect();
                io::save_detections(&path, &dets)?;
            }
            println!(
                "{} objects, {} cameras, {} frames -> {}",
                scene.objects.len(),
                scene.cameras.len(),
                scene.frame_count(),
                out.display()
            );
            Ok(())
        }
    }
}
