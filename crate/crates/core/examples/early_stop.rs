// Approximate answers: a theta below one lets the query halt early with a
// guarantee, and a stop flag cuts it off from another thread.

use std::sync::atomic::{AtomicBool, Ordering};

use everest::npi::NeuralPartitionIndex;
use everest::nta::{Executor, QuerySpec, RoundEvent};
use everest::source::{SyntheticModel, SyntheticModelSpec};
use everest::verify::uncharged_layer;
use everest::LayerId;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = SyntheticModel::new(SyntheticModelSpec::new(11, vec![48, 64], 8, 3000))?;
    let layer = LayerId(1);
    let idx = NeuralPartitionIndex::build(&uncharged_layer(&model, layer)?, 64)?;
    let spec = QuerySpec::similar(layer, 17, vec![3, 8, 21, 40], 20);

    let exact = Executor::new(&model, &idx).batch_size(16).run(&spec)?;
    let rough = Executor::new(&model, &idx)
        .batch_size(16)
        .run(&spec.clone().with_theta(0.5))?;
    println!("exact: {} inputs run", exact.stats.inputs_run);
    println!(
        "theta 0.5: {} inputs run, achieved {:?}",
        rough.stats.inputs_run, rough.stats.theta_achieved
    );

    // stop after the third round, as a user pressing stop would
    let stop = AtomicBool::new(false);
    let mut watch = |e: &RoundEvent| {
        println!("round {} theta {:?}, {} confirmed", e.round, e.theta, e.confirmed.len());
        if e.round == 2 {
            stop.store(true, Ordering::Relaxed);
        }
    };
    let cut = Executor::new(&model, &idx)
        .batch_size(16)
        .stop_signal(&stop)
        .on_round(&mut watch)
        .run(&spec)?;
    println!(
        "stopped early: {}, theta {:?}",
        cut.stats.stopped_early, cut.stats.theta_achieved
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
