//! Synthetic training set generation.

use std::fs;
use std::path::PathBuf;

use unimatte_core::datapipe::{
    render, write_manifest, CompositeSpec, CropSize, ManifestEntry, ManifestRecord,
};
use unimatte_core::io::{read_alpha, read_rgb, write_alpha, write_rgb};
use unimatte_core::tensor::SplitMix64;
use unimatte_core::ImageType;

use super::reps::{write_reps, TRIMAP_DIR};
use super::{fnv1a, io_error, load_entries, par_map};
use crate::args::CompositeArgs;
use crate::error::{CliError, CliResult};

const MANIFEST: &str = "manifest.jsonl";

fn background_files(dir: &std::path::Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

fn stem(p: &std::path::Path) -> String {
    p.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

struct Job<'a> {
    entry: &'a ManifestEntry,
    bg: PathBuf,
    spec: CompositeSpec,
}

pub fn composite(args: &CompositeArgs) -> CliResult<()> {
    if args.fanout == 0 {
        return Err(CliError::Config("--fanout must be at least 1".into()));
    }
    if !(args.bokeh_sigma > 0.0 && args.bokeh_sigma.is_finite()) {
        return Err(CliError::Config(format!("--bokeh-sigma {} must be positive", args.bokeh_sigma)));
    }
    let entries = load_entries(&args.manifest)?;
    let bgs = background_files(&args.backgrounds)?;
    if bgs.len() < args.fanout {
        return Err(CliError::Config(format!(
            "--fanout {} needs at least as many backgrounds, found {} in {}",
            args.fanout,
            bgs.len(),
            args.backgrounds.display()
        )));
    }

    // Foreground i takes backgrounds i·k, i·k + 1, ... (mod count).
    let mut jobs = Vec::new();
    for (i, entry) in entries.iter().enumerate() {
        for k in 0..args.fanout {
            let bg = bgs[(i * args.fanout + k) % bgs.len()].clone();
            let bg_id = stem(&bg);
            let seed = args.seed ^ fnv1a(&format!("{}__{bg_id}", entry.id));
            let mut rng = SplitMix64::new(seed);
            let (flip, crop) = if args.augment {
                (rng.coin(), Some(CropSize::ALL[rng.below(3) as usize]))
            } else {
                (false, None)
            };
            let spec = CompositeSpec {
                fg_id: entry.id.clone(),
                bg_id,
                fg_type: entry.image_type,
                bokeh_sigma: (entry.image_type == ImageType::Ns).then_some(args.bokeh_sigma),
                crop,
                flip,
                seed,
            };
            jobs.push(Job { entry, bg, spec });
        }
    }

    let out = &args.out_dir;
    let records = par_map(&jobs, |job| {
        let e = job.entry;
        let fg = read_rgb(e.fg.as_ref().unwrap_or(&e.image))?;
        let alpha = read_alpha(&e.alpha)?;
        let bg = read_rgb(&job.bg)?;
        let sample = render(&job.spec, &fg, &alpha, &bg)?;
        let id = job.spec.output_id();
        let rel = |dir: &str| format!("{dir}/{id}.png");
        write_rgb(&out.join(rel("images")), &sample.image)?;
        write_alpha(&out.join(rel("alphas")), &sample.alpha)?;
        write_rgb(&out.join(rel("fg")), &sample.fg)?;
        write_rgb(&out.join(rel("bg")), &sample.bg)?;
        write_reps(out, &id, &sample.alpha, e.image_type, args.reps)?;
        Ok(ManifestRecord {
            image: rel("images"),
            alpha: rel("alphas"),
            fg: Some(rel("fg")),
            bg: Some(rel("bg")),
            trimap: Some(rel(TRIMAP_DIR)),
            image_type: Some(e.image_type.as_str().to_string()),
            category: e.category.as_str().to_string(),
            split: e.split,
            id,
        })
    })?;
    write_manifest(&out.join(MANIFEST), &records)?;
    log::info!("wrote {} composites to {}", records.len(), out.display());
    Ok(())
}
