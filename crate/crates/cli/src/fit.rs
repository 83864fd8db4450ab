use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;

use slitwave_core::io::{load_reference, write_overlay_csv};
use slitwave_core::{fit, FitParameter, FitResult, FitSpec};

use crate::{Failure, FitArgs, EXIT_CONFIG, EXIT_VALIDATION};

pub const OVERLAY_FILE: &str = "fit_overlay.csv";
pub const RESULT_FILE: &str = "fit.json";

#[derive(Debug)]
pub struct FitOutput {
    pub result: FitResult,
    pub files: Vec<PathBuf>,
}

/// Runs the fit and writes the overlay and result files; a fit that does
/// not converge still writes them before reporting failure.
pub fn run(args: &FitArgs) -> Result<FitOutput, Failure> {
    let cfg = args.config.resolve()?;
    let sim = cfg.sim_config();
    let reference = load_reference(&args.reference)
        .map_err(|e| Failure::from_core(e).context(args.reference.display()))?;
    let free = args
        .free
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<FitParameter>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::from_core)?;

    let mut spec = FitSpec::new(&sim, free);
    spec.target = args.target;
    spec.max_evals = args.max_evals;
    spec.tol = args.tol;
    spec.initial.amplitude_scale = args.scale_start;
    if let Some(c1) = args.c1_start {
        if !spec.free.contains(&FitParameter::C1) {
            return Err(Failure::new(
                EXIT_CONFIG,
                "--c1-start needs c1 among the free parameters",
            ));
        }
        spec.initial.set(FitParameter::C1, c1);
    }
    let result = fit(&spec, &reference, &sim).map_err(Failure::from_core)?;

    let p = &result.params;
    println!("c1 = {:.9}", p.c1);
    println!("c2 = {:.9}", p.c2);
    println!("scale = {:.9}", p.amplitude_scale);
    println!("b = {:.9e} m", p.length_b);
    println!("c = {:.9e} m", p.thickness_c);
    println!("rss = {:.6e}", result.rss);
    println!("evaluations = {}", result.evaluations);
    println!("converged = {}", result.converged);

    fs::create_dir_all(&args.out).map_err(|e| Failure::io(&args.out, e))?;
    let overlay = args.out.join(OVERLAY_FILE);
    let file = fs::File::create(&overlay).map_err(|e| Failure::io(&overlay, e))?;
    write_overlay_csv(
        BufWriter::new(file),
        &reference,
        &result.model,
        &result.residuals,
    )
    .map_err(|e| Failure::from_core(e).context(overlay.display()))?;
    let summary = args.out.join(RESULT_FILE);
    let json = serde_json::to_string_pretty(&result).expect("fit result serializes") + "\n";
    fs::write(&summary, json).map_err(|e| Failure::io(&summary, e))?;
    let files = vec![overlay, summary];
    for f in &files {
        println!("wrote {}", f.display());
    }

    if result.converged {
        Ok(FitOutput { result, files })
    } else {
        Err(Failure::new(
            EXIT_VALIDATION,
            format!("fit did not converge within {} evaluations", args.max_evals),
        ))
    }
}
