//! Alpha prediction over a manifest.

use std::time::Instant;

use unimatte_core::io::{write_alpha, write_ternary};
use unimatte_core::network::hybrid_inference;

use super::{load_entries, load_network, par_map};
use crate::args::InferArgs;
use crate::error::CliResult;

pub fn infer(args: &InferArgs) -> CliResult<()> {
    let entries = load_entries(&args.manifest)?;
    let net = load_network(&args.source)?;
    let out = &args.out_dir;
    par_map(&entries, |e| {
        let image = e.load_image()?;
        let start = Instant::now();
        let pred = hybrid_inference(&net, &image.to_tensor(), args.scales)?;
        let (h, w) = image.dims();
        log::info!("{}: {h}x{w} in {:.3} s", e.id, start.elapsed().as_secs_f64());
        write_alpha(&out.join(format!("{}.png", e.id)), &pred.alpha)?;
        if args.dump {
            write_ternary(&out.join("unified").join(format!("{}.png", e.id)), &pred.unified)?;
            write_alpha(&out.join("attention").join(format!("{}.png", e.id)), &pred.attention)?;
        }
        Ok(())
    })?;
    log::info!("wrote {} predictions to {}", entries.len(), out.display());
    Ok(())
}
