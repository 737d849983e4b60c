//! Architecture audit, weight initialisation and dataset counts.

use std::fmt::Write as _;

use unimatte_core::datapipe::dataset_stats;
use unimatte_core::network::{build_network, count_macs, Network, NetworkSpec, WeightStore};
use unimatte_core::tensor::Tensor;

use super::load_entries;
use crate::args::{AuditArgs, Format, InitWeightsArgs, StatsArgs};
use crate::error::{CliError, CliResult};

fn layer_table(spec: &NetworkSpec, size: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| Layer | Group | Operation | Output size | Params |");
    let _ = writeln!(out, "| --- | --- | --- | --- | --- |");
    for l in &spec.layers {
        let [_, c, h, w] = l.expected_shape(1, size);
        let _ = writeln!(
            out,
            "| {} | {} | {} | N×{c}×{h}×{w} | {} |",
            l.name,
            l.group,
            l.detail,
            l.parameter_count()
        );
    }
    out
}

pub fn audit(args: &AuditArgs) -> CliResult<()> {
    if args.size == 0 || args.size % 32 != 0 || args.mac_size == 0 || args.mac_size % 32 != 0 {
        return Err(CliError::Config("--size and --mac-size must be positive multiples of 32".into()));
    }
    let spec = build_network();
    let mut out = layer_table(&spec, args.size);
    let params = spec.count_parameters();
    let _ = writeln!(out);
    let _ = writeln!(out, "parameters: {params} ({:.2}M)", params as f64 / 1e6);
    for size in [args.size, args.mac_size] {
        let macs = count_macs(&spec, size);
        let _ = writeln!(out, "MACs at {size}x{size}: {macs} ({:.2}G)", macs as f64 / 1e9);
    }

    if args.verify {
        let net = Network::seeded(args.seed);
        let input = Tensor::full([1, 3, args.size, args.size], 0.5).map_err(|e| CliError::Internal(e.to_string()))?;
        let (_, trace) = net.forward_traced(&input)?;
        let mut bad = Vec::new();
        for l in &spec.layers {
            let want = l.expected_shape(1, args.size);
            match trace.iter().find(|(name, _)| *name == l.name) {
                Some((_, s)) if s.dims() == want => {}
                Some((_, s)) => bad.push(format!("{}: {:?} != {want:?}", l.name, s.dims())),
                None => bad.push(format!("{}: not produced", l.name)),
            }
        }
        let _ = writeln!(
            out,
            "shape check: {}/{} layers match",
            spec.layers.len() - bad.len(),
            spec.layers.len()
        );
        if !bad.is_empty() {
            print!("{out}");
            return Err(CliError::Internal(format!("shape audit failed: {}", bad.join("; "))));
        }
    }
    print!("{out}");
    Ok(())
}

pub fn init_weights(args: &InitWeightsArgs) -> CliResult<()> {
    let spec = build_network();
    let store = WeightStore::init(&spec, args.seed);
    store.save(&args.out_dir)?;
    log::info!(
        "wrote {} tensors ({} parameters) to {}",
        store.len(),
        store.count_parameters(&spec),
        args.out_dir.display()
    );
    Ok(())
}

pub fn stats(args: &StatsArgs) -> CliResult<()> {
    let entries = load_entries(&args.manifest)?;
    let s = dataset_stats(&entries);
    match args.format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&s).map_err(|e| CliError::Internal(e.to_string()))?;
            println!("{text}");
        }
        Format::Md | Format::Csv => print!("{s}"),
    }
    Ok(())
}
