use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use farkas_core::certificates::{read_certificate, write_certificate};
use farkas_core::error::{CertificateError, WitnessError};
use farkas_core::hardness::{clique_to_witness_instance, UndirectedGraph};
use farkas_core::model::{validate, Direction, PropertySpec};
use farkas_core::scalar::{format_decimal, format_rational, parse_rational};
use farkas_core::treedp::tree_minimal_witness;
use farkas_core::witness::{
    export_milp, reduce_size_to_state, reduce_transition_to_state, BnbOptions, Flavor, Origin, PolytopeSpec,
};
use farkas_core::{generate_certificate, parse_model, reach_probability, serialize_model, verify_certificate, ReachMdp};

#[derive(Parser, Debug)]
#[command(name = "farkas", version, about = "Farkas certificates and witnessing subsystems for MDP reachability")]
struct Cli {
    /// Exchange goal and fail (and the property with them) before anything
    /// else; turns upper-bound properties into lower-bound ones.
    #[arg(long, global = true)]
    swap_goal_fail: bool,

    /// Print values as decimals with this many digits instead of exact
    /// rationals.
    #[arg(long, global = true, value_name = "DIGITS")]
    decimal: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Dir {
    Min,
    Max,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Direction {
        match d {
            Dir::Min => Direction::Min,
            Dir::Max => Direction::Max,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WitnessMethod {
    Qs,
    Exact,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReduceTo {
    StateFromSize,
    StateFromTransition,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal reachability probability from the initial state.
    Probability {
        model: PathBuf,
        #[arg(long, value_enum)]
        dir: Dir,
    },
    /// Write an exactly verified Farkas certificate for a property.
    Certify {
        model: PathBuf,
        #[arg(long)]
        prop: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a certificate in exact arithmetic.
    Verify { model: PathBuf, cert: PathBuf },
    /// Compute a witnessing subsystem for a lower-bound property.
    Witness {
        model: PathBuf,
        #[arg(long)]
        prop: String,
        #[arg(long, value_enum, default_value = "qs")]
        method: WitnessMethod,
        /// Heuristic iterations.
        #[arg(long, default_value_t = 2)]
        iters: usize,
        /// Wall-clock budget of the exact search, in seconds.
        #[arg(long)]
        budget: Option<f64>,
        /// Node limit of the exact search.
        #[arg(long)]
        nodes: Option<usize>,
        /// Polytope to work in; must agree with the property direction.
        #[arg(long, value_enum)]
        flavor: Option<Dir>,
        /// Also write the minimal-witness MILP in LP format.
        #[arg(long, value_name = "FILE")]
        export_milp: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// State-minimal witness of a tree-shaped DTMC.
    TreeWitness {
        model: PathBuf,
        #[arg(long)]
        lambda: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Turn transition- or size-minimality into state-minimality.
    Reduce {
        model: PathBuf,
        #[arg(long, value_enum)]
        to: ReduceTo,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Witness instance of the clique problem for a graph.
    GenClique {
        graph: PathBuf,
        k: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check the model preconditions.
    Validate { model: PathBuf },
}

enum Failure {
    Input(anyhow::Error),
    Rejected,
    PropertyFalse(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn emit(output: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

struct Ctx {
    swap: bool,
    decimal: Option<usize>,
}

impl Ctx {
    fn model(&self, path: &Path) -> anyhow::Result<ReachMdp> {
        let m = parse_model(&read(path)?).with_context(|| format!("in {}", path.display()))?;
        Ok(if self.swap { m.swap_goal_fail() } else { m })
    }

    fn prop(&self, text: &str) -> anyhow::Result<PropertySpec> {
        let p: PropertySpec = text.parse().with_context(|| format!("bad property `{text}`"))?;
        Ok(if self.swap { p.swapped() } else { p })
    }

    fn value(&self, q: &farkas_core::Rational) -> String {
        match self.decimal {
            Some(d) => format_decimal(q, d),
            None => format_rational(q),
        }
    }
}

fn witness_failure(e: WitnessError) -> Failure {
    match e {
        WitnessError::Infeasible => Failure::PropertyFalse(e.to_string()),
        other => Failure::Input(other.into()),
    }
}

fn run(cli: Cli) -> Outcome {
    let ctx = Ctx { swap: cli.swap_goal_fail, decimal: cli.decimal };
    match cli.command {
        Command::Probability { model, dir } => {
            let m = ctx.model(&model)?;
            let p = reach_probability(&m, dir.into()).map_err(anyhow::Error::from)?;
            println!("{}", ctx.value(&p));
        }
        Command::Certify { model, prop, output } => {
            let m = ctx.model(&model)?;
            let prop = ctx.prop(&prop)?;
            let cert = match generate_certificate(&m, &prop) {
                Ok(c) => c,
                Err(e @ (CertificateError::PropertyFalse(_) | CertificateError::StrictInfeasible(_))) => {
                    return Err(Failure::PropertyFalse(e.to_string()))
                }
                Err(e) => return Err(Failure::Input(e.into())),
            };
            emit(&output, &write_certificate(&cert))?;
        }
        Command::Verify { model, cert } => {
            let m = ctx.model(&model)?;
            let cert = read_certificate(&read(&cert)?, &m).with_context(|| format!("in {}", cert.display()))?;
            let report = verify_certificate(&m, &cert).map_err(anyhow::Error::from)?;
            print!("{}", report.render());
            if !report.ok {
                return Err(Failure::Rejected);
            }
        }
        Command::Witness { model, prop, method, iters, budget, nodes, flavor, export_milp: milp, output } => {
            let m = ctx.model(&model)?;
            let prop = ctx.prop(&prop)?;
            let spec = PolytopeSpec::from_property(&prop).map_err(|e| Failure::Input(e.into()))?;
            if let Some(f) = flavor {
                if Flavor::from_direction(f.into()) != spec.flavor {
                    return Err(Failure::Input(anyhow!("--flavor {f:?} does not match the property direction")));
                }
            }
            if let Some(path) = milp {
                let text = export_milp(&m, &spec).map_err(witness_failure)?;
                fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
            }
            let result = match method {
                WitnessMethod::Qs => farkas_core::qs_heuristic::<f64>(&m, &spec, iters),
                WitnessMethod::Exact => {
                    let budget = match budget {
                        Some(s) if !(s.is_finite() && s >= 0.0) => return Err(Failure::Input(anyhow!("bad budget {s}"))),
                        Some(s) => Some(Duration::from_secs_f64(s)),
                        None => None,
                    };
                    farkas_core::exact_minimal_witness(&m, &spec, &BnbOptions { budget, node_limit: nodes })
                }
            }
            .map_err(witness_failure)?;
            emit(&output, &result.to_text(&m))?;
        }
        Command::TreeWitness { model, lambda, output } => {
            let m = ctx.model(&model)?;
            let lambda = parse_rational(&lambda).map_err(|e| Failure::Input(anyhow!("bad threshold: {e}")))?;
            let result = tree_minimal_witness(&m, &lambda).map_err(witness_failure)?;
            emit(&output, &result.to_text(&m))?;
        }
        Command::Reduce { model, to, output } => {
            let m = ctx.model(&model)?;
            let r = match to {
                ReduceTo::StateFromSize => reduce_size_to_state(&m),
                ReduceTo::StateFromTransition => reduce_transition_to_state(&m),
            }
            .map_err(anyhow::Error::from)?;
            let mut text = serialize_model(&r.model);
            for (i, o) in r.origin.iter().enumerate() {
                text += &match o {
                    Origin::State(s) => format!("# origin {i} state {s}\n"),
                    Origin::Transition(s, a, t) => format!("# origin {i} transition {s} {} {t}\n", m.actions(*s)[*a].label),
                };
            }
            emit(&output, &text)?;
        }
        Command::GenClique { graph, k, output } => {
            let g = UndirectedGraph::parse(&read(&graph)?).map_err(anyhow::Error::from)?;
            let inst = clique_to_witness_instance(&g, k).map_err(anyhow::Error::from)?;
            let m = if ctx.swap { inst.model.swap_goal_fail() } else { inst.model };
            let text = format!("{}# lambda {}\n# kprime {}\n", serialize_model(&m), format_rational(&inst.lambda), inst.k_prime);
            emit(&output, &text)?;
        }
        Command::Validate { model } => {
            let m = ctx.model(&model)?;
            let report = validate(&m);
            print!("{}", report.render());
            if !report.ok {
                return Err(Failure::Rejected);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Rejected) => ExitCode::from(2),
        Err(Failure::PropertyFalse(msg)) => {
            eprintln!("property false: {msg}");
            ExitCode::from(3)
        }
    }
}
