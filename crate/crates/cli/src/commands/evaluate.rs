//! Benchmark report over predicted mattes.

use std::path::PathBuf;

use unimatte_core::io::{read_alpha, read_trimap};
use unimatte_core::metrics::{aggregate, evaluate_image};
use unimatte_core::report::{to_csv, to_json, to_markdown};
use unimatte_core::semantics::{trimap_from_alpha, DEFAULT_RADIUS};

use super::{load_entries, par_map, write_text};
use crate::args::{EvaluateArgs, Format};
use crate::error::{CliError, CliResult};

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let entries = load_entries(&args.manifest)?;
    let pred_path = |id: &str| -> PathBuf { args.pred_dir.join(format!("{id}.png")) };
    let missing: Vec<String> = entries
        .iter()
        .filter(|e| !pred_path(&e.id).is_file())
        .map(|e| e.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::MissingPredictions { ids: missing });
    }

    let records = par_map(&entries, |e| {
        let gt = e.load_alpha()?;
        let pred = read_alpha(&pred_path(&e.id))?;
        let trimap = match &e.trimap {
            Some(p) => read_trimap(p)?,
            None => trimap_from_alpha(&gt, DEFAULT_RADIUS, DEFAULT_RADIUS),
        };
        Ok(evaluate_image(&e.id, &pred, &gt, &trimap, e.image_type, e.category)?)
    })?;
    if records.is_empty() {
        return Err(CliError::Config(format!("{} lists no images", args.manifest.display())));
    }
    let report = aggregate(records)?;

    let mut formats = args.format.clone();
    formats.sort();
    formats.dedup();
    let markdown = to_markdown(&report, &args.label);
    for f in formats {
        let (name, text) = match f {
            Format::Md => ("report.md", markdown.clone()),
            Format::Csv => ("report.csv", to_csv(&report.records)),
            Format::Json => ("report.json", to_json(&report)?),
        };
        write_text(&args.out_dir.join(name), &text)?;
    }
    print!("{markdown}");
    Ok(())
}
