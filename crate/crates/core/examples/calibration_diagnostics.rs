//! CRPS, PIT histogram and spread-skill ratio for three forecasters.
//!
//!     cargo run --example calibration_diagnostics

use decical::diagnostics::{summarize, DiagnosticsConfig};
use decical::grid_store::{align, GridSpec, RegionMask};
use decical::synthetic::{generate, ForecasterKind, ForecasterSpec, SyntheticDgp};

fn sparkline(counts: &[u64]) -> String {
    let bars = ['▁', '▂', '▃', '▄', '▅', '▆', '▇', '█'];
    let max = *counts.iter().max().unwrap_or(&1) as f64;
    counts
        .iter()
        .map(|&c| bars[((c as f64 / max) * 7.0).round() as usize])
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::regular(52.0, 46.0, 0.0, 9.0, 1.5)?;
    let dgp = SyntheticDgp::temperature(grid.clone(), 5);
    let run = generate(&dgp, 80, &[24, 168])?;
    let mask = RegionMask::all(&grid);
    let cfg = DiagnosticsConfig::default();

    for kind in [
        ForecasterKind::Ideal,
        ForecasterKind::Dispersed { s: 0.5 },
        ForecasterKind::Dispersed { s: 1.5 },
    ] {
        let ens = run.latent.forecast(&ForecasterSpec::new(kind, 50))?;
        let view = align(&ens, &run.observations, &mask)?;
        let summary = summarize(&view, &cfg)?;
        println!("{kind}");
        for l in &summary.leads {
            println!(
                "  {:3}h  CRPS {:.3} K  SSR {:.3}  χ² p {:.3}  {}",
                l.lead_hours,
                l.mean_crps,
                l.ssr,
                l.pit.uniformity_p_value(),
                sparkline(l.pit.counts())
            );
        }
    }
    Ok(())
}
