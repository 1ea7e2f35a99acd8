// Random queries checked three ways: full scan, the classic threshold
// algorithm over sorted lists, and the per-neuron access bound `d + 2R`.

use everest::nta::QuerySpec;
use everest::oracle::{brute_force_topk, cta_reference, AbsDiffLists};
use everest::source::{SyntheticModel, SyntheticModelSpec};
use everest::verify::{uncharged_layer, verify};
use everest::LayerId;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = SyntheticModel::new(SyntheticModelSpec::new(1, vec![32, 48], 8, 1000))?;

    let spec = QuerySpec::similar(LayerId(1), 3, vec![0, 10, 20], 5);
    let acts = uncharged_layer(&model, LayerId(1))?;
    let lists = AbsDiffLists::build(&spec, &acts)?;
    let cta = cta_reference(&spec, &lists, spec.k);
    println!("threshold algorithm read {} entries per list", cta.max_depth());
    println!("full scan {:?}", brute_force_topk(&spec, &acts)?.ids());

    let report = verify(&model, 100, 7, 32)?;
    println!(
        "{} queries, {} failures, tightest slack {:?}",
        report.queries,
        report.failures.len(),
        report.max_slack
    );
    assert!(report.passed());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
