use dreamnet::cli::{parse_args, run_experiment, CliError};

fn main() {
    let config = match parse_args(std::env::args_os()) {
        Ok(c) => c,
        Err(CliError::Clap(e)) => e.exit(),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    };
    std::process::exit(run_experiment(&config));
}
