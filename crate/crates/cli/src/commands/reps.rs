//! Trimaps and unified representations.

use std::path::Path;

use unimatte_core::io::write_ternary;
use unimatte_core::semantics::{trimap_from_alpha, unify};
use unimatte_core::{AlphaMatte, ImageType};

use super::{load_entries, par_map};
use crate::args::{MakeRepsArgs, RepOptions};
use crate::error::CliResult;

pub const TRIMAP_DIR: &str = "trimaps";
pub const REP_DIR: &str = "reps";

/// Writes `trimaps/<id>.png` and `reps/<id>.png` under `out_dir`.
pub(super) fn write_reps(out_dir: &Path, id: &str, alpha: &AlphaMatte, ty: ImageType, opts: RepOptions) -> CliResult<()> {
    let trimap = trimap_from_alpha(alpha, opts.erode, opts.dilate);
    let rep = unify(&trimap, ty);
    write_ternary(&out_dir.join(TRIMAP_DIR).join(format!("{id}.png")), trimap.plane())?;
    write_ternary(&out_dir.join(REP_DIR).join(format!("{id}.png")), rep.plane())?;
    Ok(())
}

pub fn make_reps(args: &MakeRepsArgs) -> CliResult<()> {
    let entries = load_entries(&args.manifest)?;
    par_map(&entries, |e| write_reps(&args.out_dir, &e.id, &e.load_alpha()?, e.image_type, args.reps))?;
    log::info!("wrote representations for {} entries", entries.len());
    Ok(())
}
