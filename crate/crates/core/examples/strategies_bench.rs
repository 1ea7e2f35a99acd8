// Replays one generated workload against every strategy and prints the
// cumulative inference cost of each, plus the CSV the CLI writes.

use everest::baselines::{Runner, Strategy};
use everest::source::{SyntheticModel, SyntheticModelSpec};
use everest::storage::StorageBudget;
use everest::workloads::{generate, run_harness, write_csv, WorkloadKind, WorkloadSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = SyntheticModel::new(SyntheticModelSpec::new(9, vec![32, 48, 64, 64], 8, 1500))?;
    let budget = StorageBudget::fraction_of(0.2, 208, 1500).total_bytes;
    let workload = generate(&WorkloadSpec::new(WorkloadKind::W1, 40, 3), &model)?;
    let strategies = [
        Strategy::ReprocessAll,
        Strategy::PreprocessAll,
        Strategy::LruCache { budget_bytes: budget },
        Strategy::PriorityCache { budget_bytes: budget },
        Strategy::Everest {
            budget_bytes: Some(budget),
            iqa_budget_bytes: 0,
        },
    ];
    let mut runners = strategies
        .into_iter()
        .map(|s| Runner::new(s, &model, 16, None))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = run_harness(&workload.queries, &mut runners)?;
    for r in rows.iter().filter(|r| r.query_idx + 1 == workload.queries.len()) {
        println!(
            "{:<16} total {:>8} units, {:>8} bytes stored",
            r.strategy, r.cumulative_units, r.bytes_stored
        );
    }
    let mut csv = Vec::new();
    write_csv(&rows[..3], &mut csv)?;
    print!("{}", String::from_utf8(csv)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
