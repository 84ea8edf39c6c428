use clap::Parser;
use latent_base::cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = cli::Cli::parse();
    if let Err(err) = cli::run(&args) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
