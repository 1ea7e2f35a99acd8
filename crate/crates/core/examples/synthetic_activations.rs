// Generates a seeded network's activations, writes them to an activation
// file and loads them back as a source.

use everest::source::{read_activation_file, write_activation_file, MatrixSource, SyntheticModel, SyntheticModelSpec};
use everest::{ActivationSource, LayerId};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = SyntheticModel::new(SyntheticModelSpec::new(42, vec![16, 32, 8], 4, 200))?;
    let materialized = model.materialize()?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("acts.actv");
    write_activation_file(&path, materialized.layers())?;
    let loaded = MatrixSource::load(&path)?;
    for l in 0..loaded.layer_count() as u32 {
        let m = loaded.layer(LayerId(l))?;
        let zeros = m.values().iter().filter(|v| **v == 0.0).count();
        println!(
            "L{l}: {} x {}, {zeros} zeros, depth {}",
            m.n_inputs(),
            m.n_neurons(),
            loaded.layer_depth(LayerId(l))
        );
    }
    // same seed, same bits
    assert_eq!(read_activation_file(&path)?, materialized.layers());
    let before = model.ledger().snapshot();
    model.infer_layer(LayerId(2), &[0, 1, 2], 64)?;
    println!(
        "3 inputs to L2 cost {} units",
        model.ledger().snapshot().since(&before).unit_cost
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
