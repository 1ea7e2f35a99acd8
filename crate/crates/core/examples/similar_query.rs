// Two nearest neighbours of `x5` under l1, with the threshold after every
// round. `x0` is never run through the model.

use everest::demo;
use everest::npi::NeuralPartitionIndex;
use everest::nta::{Executor, QuerySpec, RoundEvent};
use everest::source::MatrixSource;
use everest::{ActivationSource, DistanceFn, LayerId};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let acts = demo::partition_example();
    let idx = NeuralPartitionIndex::build_compat(&acts, 3)?;
    let source = MatrixSource::new(vec![acts])?;
    let spec = QuerySpec::similar(LayerId(0), 5, vec![0, 1, 2], 2).with_distance(DistanceFn::L1);

    let mut print = |e: &RoundEvent| {
        println!(
            "round {} threshold {:.3} confirmed {:?}",
            e.round, e.threshold, e.confirmed
        )
    };
    let result = Executor::new(&source, &idx)
        .batch_size(1)
        .on_round(&mut print)
        .run(&spec)?;
    println!("top-2 {:?} at {:?}", result.ids(), result.distances());
    println!(
        "inputs run {}, ledger {:?}",
        result.stats.inputs_run,
        source.ledger().snapshot()
    );
    assert_eq!(result.ids(), vec![5, 4]);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
