use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use everest::baselines::{Runner, Strategy};
use everest::iqa::ActivationCache;
use everest::nta::{QuerySpec, RoundEvent};
use everest::service::{self, ServiceConfig, Session};
use everest::source::{read_activation_file, write_activation_file, MatrixSource, SyntheticModel, SyntheticModelSpec};
use everest::storage::{IndexManager, StorageBudget};
use everest::workloads::{self, WorkloadKind, WorkloadSpec};
use everest::{verify, ActivationMatrix, ActivationSource, DistanceFn, LayerId, QueryMode};

#[derive(Parser)]
#[command(name = "everest", version, about = "Top-k queries over neural network activations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Data {
    /// Directory holding activations.actv and the index catalog.
    #[arg(long, default_value = "everest-data")]
    data: PathBuf,
    /// Index budget; defaults to 20% of storing every activation.
    #[arg(long)]
    budget_bytes: Option<u64>,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
}

impl Data {
    fn source(&self) -> anyhow::Result<MatrixSource> {
        let path = self.data.join("activations.actv");
        MatrixSource::load(&path).with_context(|| format!("loading {}", path.display()))
    }

    fn budget(&self, source: &dyn ActivationSource) -> anyhow::Result<u64> {
        if let Some(b) = self.budget_bytes {
            return Ok(b);
        }
        let neurons = (0..source.layer_count() as u32)
            .map(|l| source.layer_width(LayerId(l)))
            .sum::<everest::Result<usize>>()?;
        Ok(StorageBudget::fraction_of(0.2, neurons, source.n_inputs()).total_bytes)
    }

    fn manager(&self, source: &dyn ActivationSource) -> anyhow::Result<IndexManager> {
        Ok(IndexManager::open(
            &self.data.join("index"),
            self.budget(source)?,
            source,
            self.batch_size,
        )?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the activations of a seeded random ReLU network.
    GenSynthetic {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated layer widths.
        #[arg(long, value_delimiter = ',', required = true)]
        widths: Vec<usize>,
        #[arg(long)]
        inputs: usize,
        #[arg(long, default_value_t = 16)]
        input_dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert CSV (one layer, one input per line) or JSON (array of layers
    /// of rows) files to an activation file. Each `--in` adds layers in order.
    ImportActivations {
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    Query {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        layer: u32,
        #[arg(long, default_value_t = 0)]
        target: u32,
        #[arg(long, value_delimiter = ',', required = true)]
        neurons: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value = "l2")]
        dist: DistanceFn,
        #[arg(long, default_value = "similar")]
        mode: QueryMode,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        exclude_target: bool,
        /// Print one JSON line per round before the result.
        #[arg(long)]
        stream: bool,
        #[arg(long, default_value_t = 0)]
        iqa_budget_bytes: u64,
    },
    /// Build the index of one layer now.
    Index {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        layer: u32,
    },
    IndexStatus {
        #[command(flatten)]
        data: Data,
    },
    /// Replay a generated workload against strategies and write per-query costs as CSV.
    Bench {
        #[command(flatten)]
        data: Data,
        /// reprocess, preprocess, lru:BYTES, priority:BYTES or everest[:BYTES]; repeatable.
        #[arg(long, required = true)]
        strategy: Vec<Strategy>,
        /// w1, w2, w3 or iqa:SIZE,REPLACE
        #[arg(long, default_value = "w1")]
        workload: WorkloadKind,
        #[arg(long, default_value_t = 100)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        iqa_budget_bytes: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check random queries against a full scan and the access bound.
    Verify {
        #[command(flatten)]
        data: Data,
        #[arg(long, default_value_t = 500)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        partitions: usize,
    },
    Serve {
        #[command(flatten)]
        data: Data,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 0)]
        iqa_budget_bytes: u64,
    },
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn import_file(path: &Path, first_layer: u32) -> anyhow::Result<Vec<ActivationMatrix>> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let layers: Vec<Vec<Vec<f32>>> = match ext {
        "csv" => {
            let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
            let rows = rdr
                .deserialize::<Vec<f32>>()
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("reading {}", path.display()))?;
            vec![rows]
        }
        "json" => serde_json::from_reader(io::BufReader::new(File::open(path)?))
            .with_context(|| format!("reading {}", path.display()))?,
        "actv" => return Ok(read_activation_file(path)?),
        _ => bail!("{}: expected a .csv, .json or .actv file", path.display()),
    };
    layers
        .iter()
        .enumerate()
        .map(|(i, rows)| Ok(ActivationMatrix::from_rows(LayerId(first_layer + i as u32), rows)?))
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenSynthetic {
            seed,
            widths,
            inputs,
            input_dim,
            out,
        } => {
            let model = SyntheticModel::new(SyntheticModelSpec::new(seed, widths, input_dim, inputs))?;
            let source = model.materialize()?;
            write_activation_file(&out, source.layers())?;
            eprintln!(
                "wrote {} layers x {inputs} inputs to {}",
                source.layers().len(),
                out.display()
            );
        }
        Command::ImportActivations { inputs, out } => {
            let mut layers = Vec::new();
            for path in &inputs {
                layers.extend(import_file(path, layers.len() as u32)?);
            }
            // relabel so ACTV inputs mixed with others stay dense
            let layers: Vec<ActivationMatrix> = layers
                .into_iter()
                .enumerate()
                .map(|(i, m)| {
                    ActivationMatrix::new(LayerId(i as u32), m.n_inputs(), m.n_neurons(), m.values().to_vec())
                })
                .collect::<everest::Result<_>>()?;
            MatrixSource::new(layers.clone())?;
            write_activation_file(&out, &layers)?;
            eprintln!("wrote {} layers to {}", layers.len(), out.display());
        }
        Command::Query {
            data,
            layer,
            target,
            neurons,
            k,
            dist,
            mode,
            theta,
            exclude_target,
            stream,
            iqa_budget_bytes,
        } => {
            let source = data.source()?;
            let mut manager = data.manager(&source)?;
            let mut spec = match mode {
                QueryMode::MostSimilar => QuerySpec::similar(LayerId(layer), target, neurons, k),
                QueryMode::Highest => QuerySpec::highest(LayerId(layer), neurons, k),
            }
            .with_distance(dist);
            if let Some(t) = theta {
                spec = spec.with_theta(t);
            }
            if exclude_target {
                spec = spec.excluding_target();
            }
            let mut cache = ActivationCache::new(iqa_budget_bytes);
            let mut print_round = |e: &RoundEvent| {
                if let Ok(line) = serde_json::to_string(e) {
                    println!("{line}");
                }
            };
            let observer: Option<&mut dyn FnMut(&RoundEvent)> = if stream { Some(&mut print_round) } else { None };
            let out = manager.query(&spec, &source, Some(&mut cache), None, observer)?;
            if stream {
                println!("{}", serde_json::to_string(&out.result)?);
            } else {
                print_json(&out.result)?;
            }
        }
        Command::Index { data, layer } => {
            let source = data.source()?;
            let mut manager = data.manager(&source)?;
            let outcome = manager.ensure_indexed(LayerId(layer), &source)?;
            if !outcome.persisted && !manager.catalog().is_built(LayerId(layer)) {
                eprintln!("layer {layer} does not fit in the remaining budget");
            }
            print_json(manager.catalog())?;
        }
        Command::IndexStatus { data } => {
            let source = data.source()?;
            print_json(data.manager(&source)?.catalog())?;
        }
        Command::Bench {
            data,
            strategy,
            workload,
            queries,
            seed,
            iqa_budget_bytes,
            out,
        } => {
            let source = data.source()?;
            let budget = data.budget(&source)?;
            let load = workloads::generate(&WorkloadSpec::new(workload, queries, seed), &source)?;
            let mut runners = strategy
                .into_iter()
                .map(|s| {
                    let s = match s.with_default_budget(budget) {
                        Strategy::Everest { budget_bytes, .. } => Strategy::Everest {
                            budget_bytes,
                            iqa_budget_bytes,
                        },
                        s => s,
                    };
                    Runner::new(s, &source, data.batch_size, None)
                })
                .collect::<everest::Result<Vec<_>>>()?;
            let rows = workloads::run_harness(&load.queries, &mut runners)?;
            match out {
                Some(path) => workloads::write_csv(&rows, BufWriter::new(File::create(&path)?))?,
                None => workloads::write_csv(&rows, io::stdout().lock())?,
            }
        }
        Command::Verify {
            data,
            queries,
            seed,
            partitions,
        } => {
            let source = data.source()?;
            let report = verify::verify(&source, queries, seed, partitions)?;
            print_json(&report)?;
            if !report.passed() {
                bail!("{} of {queries} queries failed", report.failures.len());
            }
        }
        Command::Serve {
            data,
            port,
            iqa_budget_bytes,
        } => {
            let source = Arc::new(data.source()?);
            let config = ServiceConfig {
                index_dir: data.data.join("index"),
                budget_bytes: data.budget(&*source)?,
                iqa_budget_bytes,
                batch_size: data.batch_size,
            };
            let session = Arc::new(Session::new(source, &config)?);
            let addr = SocketAddr::from(([127, 0, 0, 1], port));
            eprintln!("listening on http://{addr}");
            tokio::runtime::Runtime::new()?.block_on(service::serve(session, addr))?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
