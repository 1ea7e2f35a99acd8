// Builds a 3-partition index over six inputs and prints each neuron's
// partition ids and bounds, then persists it and reads it back. Three is not
// a power of two, so ids take a whole byte here.

use everest::demo;
use everest::npi::{NeuralPartitionIndex, PartitionId};
use everest::storage::{load_npi, persist_npi};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let acts = demo::partition_example();
    let idx = NeuralPartitionIndex::build_compat(&acts, 3)?;
    println!("{} partitions, {} bits per id", idx.n_partitions(), idx.bits_per_pid());
    for neuron in 0..idx.n_neurons() {
        let pids: Vec<u32> = (0..acts.n_inputs() as u32)
            .map(|x| idx.get_pid(neuron, x).map(|p| p.0))
            .collect::<Result<_, _>>()?;
        let bounds: Vec<(f32, f32)> = (0..3)
            .map(|p| idx.bounds(neuron, PartitionId(p)))
            .collect::<Result<_, _>>()?;
        println!("R{} pids {pids:?} bounds {bounds:?}", neuron + 1);
    }
    // x0 has the largest activation of R1, so it sits in partition 0
    assert_eq!(idx.get_pid(0, 0)?, PartitionId(0));

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("demo.npi");
    let bytes = persist_npi(&path, &idx)?;
    assert_eq!(load_npi(&path)?, idx);
    println!("persisted {bytes} bytes");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
