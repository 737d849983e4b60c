//! Subcommand implementations.

mod audit;
mod composite;
mod evaluate;
mod infer;
mod reps;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use unimatte_core::datapipe::{ingest_manifest, ManifestEntry};
use unimatte_core::network::{build_network, Network, WeightStore};

pub use audit::{audit, init_weights, stats};
pub use composite::composite;
pub use evaluate::evaluate;
pub use infer::infer;
pub use reps::make_reps;

use crate::args::WeightSource;
use crate::error::{CliError, CliResult};

/// Applies `f` to every item on the worker pool and returns results in input
/// order; the first failing item (in input order) decides the error.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> CliResult<R> + Sync + Send) -> CliResult<Vec<R>> {
    let results: Vec<CliResult<R>> = items.par_iter().map(f).collect();
    results.into_iter().collect()
}

/// Manifest entries sorted by id, so outputs do not depend on line order.
fn load_entries(path: &Path) -> CliResult<Vec<ManifestEntry>> {
    let mut entries = ingest_manifest(path)?;
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(entries)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Data(unimatte_core::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_network(source: &WeightSource) -> CliResult<Network> {
    match (&source.weights, source.seed) {
        (Some(dir), None) => {
            let spec = build_network();
            let store = WeightStore::load_for(dir, &spec)?;
            log::info!("loaded {} tensors from {}", store.len(), dir.display());
            Ok(Network::new(spec, store)?)
        }
        (None, Some(seed)) => {
            log::info!("initialising weights from seed {seed}");
            Ok(Network::seeded(seed))
        }
        _ => Err(CliError::Config("give exactly one of --weights and --seed".into())),
    }
}

/// FNV-1a of a string, for per-item seeds that do not depend on ordering.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}
