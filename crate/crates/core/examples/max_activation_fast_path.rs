// With the top 60% of every neuron kept verbatim, finding the neighbour of
// a strongly activating input needs only two forward passes.

use everest::demo;
use everest::mai::MaximumActivationIndex;
use everest::npi::NeuralPartitionIndex;
use everest::nta::{Executor, QuerySpec};
use everest::source::MatrixSource;
use everest::{DistanceFn, LayerId};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let acts = demo::mai_example();
    let mai = MaximumActivationIndex::build(&acts, 0.6)?;
    // partition 0 of the partition index is exactly the kept entries
    let idx = NeuralPartitionIndex::build_with_head(&acts, 2, mai.entry_count())?;
    let source = MatrixSource::new(vec![acts])?;
    for neuron in 0..3 {
        println!("R{} keeps {:?}", neuron + 1, mai.entries(neuron)?);
    }
    let spec = QuerySpec::similar(LayerId(0), 0, vec![0, 1, 2], 1)
        .with_distance(DistanceFn::L1)
        .excluding_target();
    let with = Executor::new(&source, &idx).mai(Some(&mai)).batch_size(1).run(&spec)?;
    let without = Executor::new(&source, &idx).batch_size(1).run(&spec)?;
    println!("nearest to x0: {:?}", with.ids());
    println!(
        "inputs run with the fast path {}, without {}",
        with.stats.inputs_run, without.stats.inputs_run
    );
    assert_eq!(with.ids(), vec![1]);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
