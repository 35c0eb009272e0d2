//! Heat protection in a synthetic summer, with a cold-tail forecaster.
//!
//! Stretching only the cold tail barely touches heat decisions, which depend
//! on the warm side of the forecast.
//!
//!     cargo run --example heat_protection

use decical::decision::{aggregate, evaluate, GroupBy, Weighting};
use decical::grid_store::{align, parse_timestamp, GridSpec, RegionMask};
use decical::synthetic::{generate, ForecasterKind, ForecasterSpec, SyntheticDgp};
use decical::tasks::{heat_crossing, HeatTaskParams, Task};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = HeatTaskParams { theta: 26.0, cost_ratio: 0.6 };
    println!(
        "heat task θ = {} °C, c = {}: actions tie at {:.1} °C",
        params.theta,
        params.cost_ratio,
        heat_crossing(&params)
    );
    let task = Task::Heat(params);
    let cost = task.cost_function()?;

    let grid = GridSpec::regular(46.0, 42.0, 10.0, 14.0, 1.0)?;
    let dgp = SyntheticDgp::temperature(grid.clone(), 11).with_start(parse_timestamp("2021-06-15")?);
    let run = generate(&dgp, 60, &[72])?;
    let mask = RegionMask::all(&grid);

    println!("forecaster          obs.cost  cost gap");
    for kind in [
        ForecasterKind::Ideal,
        ForecasterKind::ShiftedTail { shift: 2.0 },
        ForecasterKind::Biased { b: -1.5 },
    ] {
        let ens = run.latent.forecast(&ForecasterSpec::new(kind, 50))?;
        let view = align(&ens, &run.observations, &mask)?;
        let records = evaluate(&view, &cost, Some(task.transform().as_ref()))?;
        let a = &aggregate(&records, GroupBy::Lead, Weighting::Uniform)?[0];
        println!("{:18} {:9.3} {:9.3}", kind.to_string(), a.mean_observed_cost, a.mean_cost_gap);
    }
    Ok(())
}
