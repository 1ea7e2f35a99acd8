// A sequence of queries that each swap one neuron of the group. Rows the
// previous query computed are kept in a most-recently-used-evicting cache,
// so later queries rerun fewer inputs.

use everest::iqa::ActivationCache;
use everest::npi::NeuralPartitionIndex;
use everest::nta::{Executor, QuerySpec};
use everest::source::{SyntheticModel, SyntheticModelSpec};
use everest::verify::uncharged_layer;
use everest::LayerId;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = SyntheticModel::new(SyntheticModelSpec::new(2, vec![64, 64], 8, 3000))?;
    let layer = LayerId(1);
    let idx = NeuralPartitionIndex::build(&uncharged_layer(&model, layer)?, 64)?;
    let mut cache = ActivationCache::new(3000 * 64 * 4 / 10);
    let mut group = vec![1, 2, 3, 4, 5];
    for step in 0..5 {
        let spec = QuerySpec::similar(layer, 42, group.clone(), 20);
        let r = Executor::new(&model, &idx)
            .batch_size(16)
            .cache(&mut cache)
            .run(&spec)?;
        println!(
            "group {group:?}: ran {}, cache hits {}",
            r.stats.inputs_run, r.stats.cache_hits
        );
        group[step] = 10 + step;
    }
    println!("cache holds {} rows, {} bytes", cache.len(), cache.used_bytes());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
