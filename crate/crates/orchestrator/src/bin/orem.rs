use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orem_core::Technology;
use orem_degradation::{generate_training_set, train_mlp, FeatureRanges, TrainConfig};
use orem_orchestrator::{
    emit_report, run_remo, sensitivity_sweep, EvaluatorKind, OrchestratorError, Scenario, VariantChoice,
};

#[derive(Parser)]
#[command(name = "orem", version, about = "Offshore microgrid capacity sizing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Size the microgrid with the iterative degradation loop.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "auto")]
        variant: VariantChoice,
        /// Overrides the scenario's usage control factor.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long, value_parser = parse_evaluator)]
        evaluator: Option<EvaluatorKind>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Rerun the loop with one technology's costs scaled down.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = parse_technology)]
        tech: Technology,
        #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.2,0.1,0.05")]
        multipliers: Vec<f64>,
        #[arg(long, default_value = "auto")]
        variant: VariantChoice,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the LCOE screening table.
    Lcoe {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Train the degradation surrogate and save it as JSON.
    TrainDeg {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_technology(s: &str) -> Result<Technology, String> {
    match s.to_ascii_uppercase().as_str() {
        "WEC" => Ok(Technology::Wec),
        "TEC" => Ok(Technology::Tec),
        "OWT" => Ok(Technology::Owt),
        "FPV" => Ok(Technology::Fpv),
        _ => Err(format!("unknown technology `{s}`; expected WEC, TEC, OWT or FPV")),
    }
}

fn parse_evaluator(s: &str) -> Result<EvaluatorKind, String> {
    match s {
        "oracle" => Ok(EvaluatorKind::Oracle),
        "surrogate" => Ok(EvaluatorKind::Surrogate),
        _ => Err(format!("unknown evaluator `{s}`; expected oracle or surrogate")),
    }
}

fn run(cli: Cli) -> Result<(), OrchestratorError> {
    match cli.command {
        Command::Solve { scenario, variant, alpha, max_iters, evaluator, out } => {
            let sc = Scenario::load(&scenario)?;
            let mut h = sc.heuristic;
            if let Some(a) = alpha {
                h.alpha = a;
            }
            if let Some(n) = max_iters {
                h.max_iterations = n;
            }
            if let Some(e) = evaluator {
                h.evaluator = e;
            }
            let report = run_remo(&sc, variant, &h)?;
            let best = report.selected();
            println!(
                "variant {}, {} iterations, stopped: {:?}",
                report.variant.tag(),
                report.iterations.len(),
                report.stop
            );
            println!("iteration  lifetime_cost  degradation_cost  total_cost");
            for it in &report.iterations {
                let mark = if it.iteration == best.iteration { " *" } else { "" };
                println!(
                    "{:>9}  {:>13.0}  {:>16.0}  {:>10.0}{mark}",
                    it.iteration, it.lifetime_cost, it.degradation_cost, it.total_cost
                );
            }
            for u in best.solution.units.iter().filter(|u| u.count > 0) {
                println!("{:>4} x {}", u.count, u.name);
            }
            println!("{:>4} x BESS ({} kWh)", best.solution.bess_units, best.solution.bess_energy_kwh);
            for f in emit_report(&report, &out)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep { scenario, tech, multipliers, variant, out } => {
            let sc = Scenario::load(&scenario)?;
            let table = sensitivity_sweep(&sc, tech, &multipliers, variant, &sc.heuristic)?;
            println!("multiplier  total_cost  {tech}_units  carried_over");
            for r in &table.rows {
                let total = r.total_cost.map_or_else(|| "infeasible".to_string(), |c| format!("{c:.0}"));
                println!("{:>10}  {total:>10}  {:>9}  {}", r.multiplier, r.swept_units, r.carried_over);
            }
            match table.entry_multiplier {
                Some(k) => println!("{tech} enters the fleet at multiplier {k}"),
                None => println!("{tech} does not enter the fleet at any multiplier"),
            }
            for f in emit_report(&table, &out)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Lcoe { scenario } => {
            let sc = Scenario::load(&scenario)?;
            print!("{}", sc.screen()?.report_csv());
        }
        Command::TrainDeg { samples, seed, epochs, out } => {
            let data = generate_training_set(&FeatureRanges::default(), samples, seed)?;
            let mut cfg = TrainConfig { seed, ..TrainConfig::default() };
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            let t = train_mlp(&data, &cfg)?;
            t.model.save(&out)?;
            println!(
                "trained on {} samples, held-out {}: R² {:.5}, loss {:.3e}",
                t.train_size, t.validation_size, t.validation_r2, t.validation_loss
            );
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
