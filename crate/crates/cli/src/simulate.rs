use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use slitwave_core::io::{render_svg, write_pattern_csv, ModesUsed, Timing};
use slitwave_core::observables::{fringe_metrics, sweep_grid, uniform_grid};
use slitwave_core::{FarField, PatternKind, PatternSeries, RunConfig, RunManifest};

use crate::{Failure, SimulateArgs};

pub const PATTERN_FILE: &str = "pattern.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";
pub const SVG_FILE: &str = "pattern.svg";

#[derive(Debug)]
pub struct SimulateOutput {
    pub series: PatternSeries,
    pub manifest: RunManifest,
    pub files: Vec<PathBuf>,
}

pub fn run(args: &SimulateArgs) -> Result<SimulateOutput, Failure> {
    let cfg = args.config.resolve()?;
    let started = Instant::now();
    let out = simulate(&cfg, &args.out, args.svg, args.record_timing)?;
    println!(
        "{} angles, {} modes ({} width modes)",
        out.series.len(),
        out.manifest.modes.total_modes,
        out.manifest.modes.width_modes
    );
    if let Some(m) = fringe_metrics(&out.series, PatternKind::Singles) {
        if let Some(s) = m.mean_fringe_spacing {
            println!(
                "mean fringe spacing {:.4} mrad, visibility {:.4}",
                s * 1e3,
                m.visibility
            );
        }
        if let Some(z) = m.first_envelope_zero {
            println!("first envelope zero {:.4} mrad", z * 1e3);
        }
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    println!("finished in {:.2} s", started.elapsed().as_secs_f64());
    Ok(out)
}

/// Evaluates the normalized patterns for `cfg` and writes all run files into `dir`.
///
/// The manifest carries wall time only when `record_timing` is set, so by
/// default a re-run reproduces every file byte for byte.
pub fn simulate(
    cfg: &RunConfig,
    dir: &Path,
    svg: bool,
    record_timing: bool,
) -> Result<SimulateOutput, Failure> {
    let sim = cfg.sim_config();
    let started = Instant::now();
    let far = FarField::new(&sim).map_err(Failure::from_core)?;
    let half = cfg.beta_range();
    let grid = uniform_grid(-half, half, cfg.points);
    let series = sweep_grid(&far, &grid)
        .map_err(Failure::from_core)?
        .normalized();
    let wall_seconds = started.elapsed().as_secs_f64();

    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let mut files = Vec::new();
    let csv_path = dir.join(PATTERN_FILE);
    let file = fs::File::create(&csv_path).map_err(|e| Failure::io(&csv_path, e))?;
    write_pattern_csv(BufWriter::new(file), &series)
        .map_err(|e| Failure::from_core(e).context(csv_path.display()))?;
    files.push(csv_path);

    let toml_path = dir.join(RESOLVED_CONFIG_FILE);
    fs::write(&toml_path, cfg.to_toml_string()).map_err(|e| Failure::io(&toml_path, e))?;
    files.push(toml_path);

    if svg {
        let svg_path = dir.join(SVG_FILE);
        let title = format!("{}-slit pattern, {} nm", cfg.slits, cfg.wavelength_nm);
        fs::write(&svg_path, render_svg(&series, &title)).map_err(|e| Failure::io(&svg_path, e))?;
        files.push(svg_path);
    }

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "simulate".to_string(),
        config: cfg.clone(),
        modes: ModesUsed::from(far.modes()),
        timing: Timing {
            wall_seconds: record_timing.then_some(wall_seconds),
        },
        outputs: files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, manifest.to_json()).map_err(|e| Failure::io(&manifest_path, e))?;
    files.push(manifest_path);

    Ok(SimulateOutput {
        series,
        manifest,
        files,
    })
}
