use clap::Parser;

use pmf_cli::args::{Cli, Command};
use pmf_cli::{cmd_bench, cmd_eval, cmd_split, cmd_train, CliError};

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Split(a) => {
            let (train, probe) = cmd_split(&a.input, a.split_ratio, a.seed, &a.out)?;
            println!("{}\n{}", train.display(), probe.display());
        }
        Command::Train(a) => {
            let s = cmd_train(&a.spec())?;
            match s.final_rmse {
                Some(r) => println!("final rmse {r:.6}"),
                None => println!("final rmse -"),
            }
            println!("train time {:.3}s", s.train_seconds);
        }
        Command::Bench(b) => print!("{}", cmd_bench(&b.run.spec(), &b.worker_list)?),
        Command::Eval(a) => println!("{:.6}", cmd_eval(&a.model, &a.probe)?),
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PMF_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("pmf: {e}");
        std::process::exit(e.exit_code());
    }
}
