// Given a storage budget, pick a partition count and max-activation ratio,
// then let the index manager build layers as queries first touch them.

use everest::nta::QuerySpec;
use everest::source::{SyntheticModel, SyntheticModelSpec};
use everest::storage::{select_configuration, IndexManager, StorageBudget};
use everest::{ActivationSource, LayerId};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // 64 KiB for 1024 inputs x 256 neurons: two partitions, the rest for the max-activation index
    let c = select_configuration(64 * 1024, 1024, 256, 128)?;
    println!("hand-sized: {c:?}");

    let model = SyntheticModel::new(SyntheticModelSpec::new(5, vec![32, 64, 64], 8, 4000))?;
    let budget = StorageBudget::fraction_of(0.2, 160, 4000);
    println!(
        "budget {} of {} bytes",
        budget.total_bytes, budget.full_materialization_bytes
    );
    let dir = tempfile::tempdir()?;
    let mut manager = IndexManager::open(dir.path(), budget.total_bytes, &model, 16)?;
    println!("configuration {:?}", manager.config());

    for (i, layer) in [2u32, 2, 0, 2].into_iter().enumerate() {
        let spec = QuerySpec::similar(LayerId(layer), 9, vec![1, 5, 7], 20);
        let before = model.ledger().snapshot();
        let out = manager.query(&spec, &model, None, None, None)?;
        println!(
            "query {i} on L{layer}: built now {}, cost {} units",
            out.answered_during_build,
            model.ledger().snapshot().since(&before).unit_cost
        );
    }
    println!(
        "{} of {} bytes used",
        manager.catalog().used_bytes(),
        budget.total_bytes
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
