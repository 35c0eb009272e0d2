//! Frost protection on synthetic winter temperatures.
//!
//! Prints the cost curves around the threshold, then decides every case of
//! an ideal and a warm-biased ensemble and reports cost gaps per lead time.
//!
//!     cargo run --example frost_protection

use decical::decision::{aggregate, evaluate, GroupBy, Weighting};
use decical::grid_store::{align, GridSpec, RegionMask};
use decical::synthetic::{generate, ForecasterKind, ForecasterSpec, SyntheticDgp};
use decical::tasks::{frost_crossing, Task, FrostTaskParams, NO_PROTECT, PROTECT};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = FrostTaskParams { theta: 0.0, cost_ratio: 0.7 };
    let task = Task::Frost(params);
    let cost = task.cost_function()?;

    println!("t (°C)   no_protect  protect");
    for t in [-1.0, 0.0, 1.0, 2.1, 3.0, 4.0] {
        println!("{t:6.1} {:11.3} {:8.3}", cost.cost(NO_PROTECT, t)?, cost.cost(PROTECT, t)?);
    }
    println!("curves cross at {:.2} °C\n", frost_crossing(&params));

    let grid = GridSpec::regular(54.0, 48.0, 0.0, 6.0, 1.5)?;
    let dgp = SyntheticDgp::temperature(grid.clone(), 7);
    let run = generate(&dgp, 45, &[24, 120, 240])?;
    let mask = RegionMask::all(&grid);

    for kind in [ForecasterKind::Ideal, ForecasterKind::Biased { b: 2.0 }] {
        let ens = run.latent.forecast(&ForecasterSpec::new(kind, 50))?;
        let view = align(&ens, &run.observations, &mask)?;
        let records = evaluate(&view, &cost, Some(task.transform().as_ref()))?;
        println!("{kind}");
        println!("  lead   cases  protect%  exp.cost  obs.cost  cost gap");
        for a in aggregate(&records, GroupBy::Lead, Weighting::Uniform)? {
            let protect = records
                .iter()
                .filter(|r| r.lead_hours == a.lead_hours && r.action == PROTECT)
                .count();
            println!(
                "  {:3}h  {:6}  {:7.1}  {:8.3}  {:8.3}  {:8.3}",
                a.lead_hours,
                a.count,
                100.0 * protect as f64 / a.count as f64,
                a.mean_expected_cost,
                a.mean_observed_cost,
                a.mean_cost_gap
            );
        }
    }
    Ok(())
}
