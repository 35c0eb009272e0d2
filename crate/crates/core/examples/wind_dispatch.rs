//! Wind power dispatch: speed to power, then how much power to promise.
//!
//!     cargo run --example wind_dispatch

use decical::decision::{bayes_action, decide_case};
use decical::grid_store::{align, GridSpec, RegionMask};
use decical::synthetic::{generate, ForecasterKind, ForecasterSpec, SyntheticDgp};
use decical::tasks::{
    hub_speed_to_power, newsvendor_action, wind_speed_to_hub, Task, WindTaskParams,
    WindTransformParams, TURBINE_OFF,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tp = WindTransformParams::default();
    println!("v10 (m/s)  v_hub   power");
    for v10 in [2.0, 4.0, 6.24, 8.0, 10.0, 12.0, 18.0] {
        let hub = wind_speed_to_hub(v10, &tp)?;
        println!("{v10:9.2} {hub:6.2} {:7.3}", hub_speed_to_power(hub, &tp)?);
    }

    let grid = GridSpec::regular(56.0, 54.0, 4.0, 8.0, 1.0)?;
    let dgp = SyntheticDgp::wind(grid.clone(), 3);
    let run = generate(&dgp, 30, &[48])?;
    let ens = run.latent.forecast(&ForecasterSpec::new(ForecasterKind::Ideal, 50))?;
    let view = align(&ens, &run.observations, &RegionMask::all(&grid))?;

    for u_pen in [2.0, 4.0] {
        let task = Task::Wind { task: WindTaskParams::new(u_pen), transform: tp };
        let cost = task.cost_function()?;
        let transform = task.transform();
        let mut counts = [0usize; 11];
        let (mut gap, mut off_gap, mut agree, mut delivering) = (0.0, 0.0, 0, 0);
        for case in view.iter() {
            let (a, exp, obs) = decide_case(case.members, case.observed, &cost, Some(transform.as_ref()))?;
            counts[a] += 1;
            gap += (exp - obs).abs();
            if a == TURBINE_OFF {
                off_gap += (exp - obs).abs();
            } else {
                let power: Vec<f64> = case
                    .members
                    .iter()
                    .map(|&v| transform.apply(v))
                    .collect::<Result<_, _>>()?;
                delivering += 1;
                agree += usize::from(newsvendor_action(&power, u_pen) == Some(a));
                debug_assert_eq!(bayes_action(&power, &cost)?.0, a);
            }
        }
        println!("\nu_pen = {u_pen}");
        println!("  actions (off, 0.1 … 1.0): {counts:?}");
        println!("  mean cost gap {:.4}, summed gap of off decisions {off_gap}", gap / view.len() as f64);
        println!("  newsvendor rule agrees on {agree}/{delivering} delivering decisions");
    }
    Ok(())
}
