use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use semfield::eval::{
    export_mask_image, export_ply, extract_surface, matching_percentage, per_class_accuracy, snapshot, MaterialMap,
    ProjectionAxis,
};
use semfield::mapper::{
    evaluation_points, load_checkpoint, run_with_scene, save_checkpoint, RunConfig, RunReport, StreamSource,
};
use semfield::material::Material;
use semfield::scene::Scene;
use semfield::touchsim::{read_stream, simulate_run, write_stream};
use semfield::Error;

use super::{runtime, usage, Cli, Command, Failure, GlobalArgs};

type CmdResult<T = ()> = std::result::Result<T, Failure>;

const MASK_SIZE: usize = 256;

pub fn dispatch(cli: &Cli) -> CmdResult {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate => simulate(g),
        Command::Train { runs } => train(g, *runs),
        Command::Evaluate {
            checkpoint,
            scene,
            points,
            axis,
        } => evaluate(g, checkpoint, scene.as_deref(), *points, axis),
        Command::Export {
            checkpoint,
            resolution,
            scene,
            axis,
        } => export(g, checkpoint, *resolution, scene.as_deref(), axis),
        Command::Replay { stream } => replay(g, stream),
    }
}

/// Loads and validates the configuration and its scene. Every failure here
/// is a usage error and nothing has been written yet.
fn load_inputs(g: &GlobalArgs) -> CmdResult<(RunConfig, Scene)> {
    let path = g
        .config
        .as_deref()
        .ok_or_else(|| Failure::Usage("this command needs --config PATH".into()))?;
    let mut cfg = RunConfig::load(path).map_err(usage)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    let scene = load_scene(&cfg.scene)?;
    // absolute scene path so the echoed config reruns from anywhere
    cfg.scene = fs::canonicalize(&cfg.scene).unwrap_or(cfg.scene);
    Ok((cfg, scene))
}

fn load_scene(path: &Path) -> CmdResult<Scene> {
    Scene::load(path).map_err(|e| match e {
        Error::Io { .. } => Failure::Usage(format!("cannot read scene file: {e}")),
        other => usage(other),
    })
}

/// Config used by commands where `--config` is optional.
fn optional_config(g: &GlobalArgs, scene: Option<&Path>) -> CmdResult<(RunConfig, Option<Scene>)> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(s) = scene {
        cfg.scene = s.to_path_buf();
    }
    if cfg.scene.as_os_str().is_empty() {
        return Ok((cfg, None));
    }
    let loaded = load_scene(&cfg.scene)?;
    cfg.scene = fs::canonicalize(&cfg.scene).unwrap_or(cfg.scene);
    Ok((cfg, Some(loaded)))
}

fn parse_axis(s: &str) -> CmdResult<ProjectionAxis> {
    s.parse().map_err(usage)
}

fn prepare_out(dir: &Path, cfg: &RunConfig) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| runtime(Error::Io {
        path: dir.to_path_buf(),
        source: e,
    }))?;
    write_text(&dir.join("config.json"), &cfg.to_json_string())
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| runtime(Error::Io {
        path: path.to_path_buf(),
        source: e,
    }))
}

fn simulate(g: &GlobalArgs) -> CmdResult {
    let (cfg, scene) = load_inputs(g)?;
    let batches = simulate_run(&scene, &cfg.sim, cfg.steps, cfg.seed).map_err(runtime)?;
    prepare_out(&g.out, &cfg)?;
    write_stream(g.out.join("stream.sfts"), &batches).map_err(runtime)?;
    let n: usize = batches.iter().map(|b| b.observations.len()).sum();
    println!("records={n}");
    Ok(())
}

fn train(g: &GlobalArgs, runs: u32) -> CmdResult {
    if runs == 0 {
        return Err(Failure::Usage("--runs must be at least 1".into()));
    }
    let (cfg, scene) = load_inputs(g)?;
    if runs == 1 {
        let report = pipeline(&cfg, &scene, StreamSource::Simulate, &g.out, g.quiet)?;
        print_final(&report)?;
        return Ok(());
    }
    let results: Vec<CmdResult<RunReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..runs)
            .map(|i| {
                let mut c = cfg.clone();
                c.seed = cfg.seed.wrapping_add(u64::from(i));
                let out = g.out.join(format!("run_{i}"));
                let scene = &scene;
                s.spawn(move || pipeline(&c, scene, StreamSource::Simulate, &out, true))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Failure::Runtime("training thread panicked".into()))))
            .collect()
    });
    let mut finals = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let report = r?;
        let pct = final_pct(&report)?;
        println!("run={i} seed={} final_matching_pct={pct:.2}", cfg.seed.wrapping_add(i as u64));
        finals.push(pct);
    }
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    println!("mean_matching_pct={mean:.2}");
    Ok(())
}

fn replay(g: &GlobalArgs, stream: &Path) -> CmdResult {
    let (cfg, scene) = load_inputs(g)?;
    let observations = read_stream(stream).map_err(runtime)?;
    if observations.is_empty() {
        return Err(Failure::Runtime(format!("{} contains no records", stream.display())));
    }
    let report = pipeline(&cfg, &scene, StreamSource::Replay(&observations), &g.out, g.quiet)?;
    print_final(&report)
}

fn final_pct(report: &RunReport) -> CmdResult<f64> {
    report
        .final_matching_pct()
        .ok_or_else(|| Failure::Runtime("run produced no snapshot".into()))
}

fn print_final(report: &RunReport) -> CmdResult {
    println!("final_matching_pct={:.2}", final_pct(report)?);
    Ok(())
}

/// One training run with all of its artifacts under `out`.
fn pipeline(cfg: &RunConfig, scene: &Scene, source: StreamSource<'_>, out: &Path, quiet: bool) -> CmdResult<RunReport> {
    prepare_out(out, cfg)?;
    let snap_dir = out.join("snapshots");
    if cfg.export_snapshot_meshes {
        fs::create_dir_all(&snap_dir).map_err(|e| runtime(Error::Io {
            path: snap_dir.clone(),
            source: e,
        }))?;
    }
    let bounds = scene.bounds();
    let mut last_map: Option<MaterialMap> = None;
    let (field, adam, report) = run_with_scene(cfg, scene, source, |row, mapper| {
        if !quiet {
            eprintln!(
                "t={:>5} matching={:6.2}% sdf={:.6} material={:.6}",
                row.timestep, row.matching_pct, row.sdf_loss, row.material_loss
            );
        }
        if cfg.export_snapshot_meshes {
            let surface = extract_surface(mapper.field(), &bounds, cfg.mesh_resolution)?;
            export_ply(&surface, snap_dir.join(format!("t{:05}.ply", row.timestep)))?;
        }
        last_map = Some(mapper.snapshot()?);
        Ok(())
    })
    .map_err(runtime)?;

    write_text(&out.join("report.csv"), &report.to_csv())?;
    save_checkpoint(out.join("final.sfck"), &field, &adam, report.timesteps).map_err(runtime)?;
    let surface = extract_surface(&field, &bounds, cfg.mesh_resolution).map_err(runtime)?;
    export_ply(&surface, out.join("final.ply")).map_err(runtime)?;
    if let Some(map) = &last_map {
        export_mask_image(map, ProjectionAxis::Z, MASK_SIZE, MASK_SIZE, out.join("mask_z.ppm")).map_err(runtime)?;
    }
    Ok(report)
}

fn class_table(map: &MaterialMap) -> String {
    let acc = per_class_accuracy(map);
    let mut s = String::from("class,support,correct,accuracy_pct\n");
    for m in Material::ALL {
        let i = m.index();
        let pct = acc.accuracy[i].map_or_else(String::new, |a| format!("{a:.2}"));
        let _ = writeln!(s, "{m},{},{},{pct}", acc.support[i], acc.correct[i]);
    }
    s
}

fn evaluate(g: &GlobalArgs, checkpoint: &Path, scene: Option<&Path>, points: Option<usize>, axis: &str) -> CmdResult {
    let axis = parse_axis(axis)?;
    let (mut cfg, scene) = optional_config(g, scene)?;
    let scene = scene.ok_or_else(|| Failure::Usage("evaluate needs --scene PATH or a config with a scene".into()))?;
    if let Some(n) = points {
        cfg.eval_points = n;
    }
    if cfg.eval_points == 0 {
        return Err(Failure::Usage("--points must be positive".into()));
    }
    let ck = load_checkpoint(checkpoint).map_err(runtime)?;
    let field_cfg = if g.config.is_some() {
        cfg.field
    } else {
        *ck.field.config()
    };
    ck.ensure_compatible(&field_cfg, &scene.bounds()).map_err(runtime)?;

    let eval = evaluation_points(&scene, cfg.eval_points, cfg.seed).map_err(runtime)?;
    let map = snapshot(&ck.field, &scene, &eval).map_err(runtime)?;
    let pct = matching_percentage(&map).map_err(runtime)?;
    let table = class_table(&map);

    cfg.field = *ck.field.config();
    prepare_out(&g.out, &cfg)?;
    write_text(&g.out.join("evaluation.csv"), &table)?;
    export_mask_image(&map, axis, MASK_SIZE, MASK_SIZE, g.out.join(format!("mask_{}.ppm", axis_name(axis))))
        .map_err(runtime)?;

    println!("matching_pct={pct:.2}");
    if !g.quiet {
        print!("{table}");
    }
    Ok(())
}

fn axis_name(a: ProjectionAxis) -> &'static str {
    match a {
        ProjectionAxis::X => "x",
        ProjectionAxis::Y => "y",
        ProjectionAxis::Z => "z",
    }
}

fn export(
    g: &GlobalArgs,
    checkpoint: &Path,
    resolution: Option<usize>,
    scene: Option<&Path>,
    axis: &str,
) -> CmdResult {
    let axis = parse_axis(axis)?;
    let (mut cfg, scene) = optional_config(g, scene)?;
    if let Some(r) = resolution {
        cfg.mesh_resolution = r;
    }
    if cfg.mesh_resolution < semfield::eval::MIN_RESOLUTION {
        return Err(Failure::Usage(format!(
            "--resolution must be at least {}",
            semfield::eval::MIN_RESOLUTION
        )));
    }
    let ck = load_checkpoint(checkpoint).map_err(runtime)?;
    let bounds = *ck.field.bounds();
    if let Some(s) = &scene {
        ck.ensure_compatible(ck.field.config(), &s.bounds()).map_err(runtime)?;
    }
    let surface = extract_surface(&ck.field, &bounds, cfg.mesh_resolution).map_err(runtime)?;

    cfg.field = *ck.field.config();
    prepare_out(&g.out, &cfg)?;
    export_ply(&surface, g.out.join("mesh.ply")).map_err(runtime)?;
    if let Some(s) = &scene {
        let eval = evaluation_points(s, cfg.eval_points, cfg.seed).map_err(runtime)?;
        let map = snapshot(&ck.field, s, &eval).map_err(runtime)?;
        export_mask_image(&map, axis, MASK_SIZE, MASK_SIZE, g.out.join(format!("mask_{}.ppm", axis_name(axis))))
            .map_err(runtime)?;
    }
    println!("vertices={} triangles={}", surface.vertices.len(), surface.triangles.len());
    Ok(())
}
