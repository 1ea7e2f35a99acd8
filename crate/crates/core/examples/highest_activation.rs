// The inputs that fire a group of neurons hardest, on a synthetic network.

use everest::npi::NeuralPartitionIndex;
use everest::nta::{Executor, QuerySpec};
use everest::oracle::brute_force_topk;
use everest::source::{SyntheticModel, SyntheticModelSpec};
use everest::verify::uncharged_layer;
use everest::LayerId;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = SyntheticModel::new(SyntheticModelSpec::new(7, vec![32, 32], 8, 2000))?;
    let layer = LayerId(1);
    let acts = uncharged_layer(&model, layer)?;
    let idx = NeuralPartitionIndex::build(&acts, 32)?;
    let spec = QuerySpec::highest(layer, vec![4, 9], 10);
    let result = Executor::new(&model, &idx).run(&spec)?;
    for e in &result.entries {
        println!("x{:<5} score {:.4}", e.input_id, e.distance);
    }
    println!("ran {} of {} inputs", result.stats.inputs_run, model.spec().n_inputs);
    assert_eq!(result.distances(), brute_force_topk(&spec, &acts)?.distances());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
