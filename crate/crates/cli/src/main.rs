use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = neuroconcolic_cli::Cli::parse();
    if let Err(e) = neuroconcolic_cli::run(cli) {
        eprintln!("neuroconcolic: {e}");
        std::process::exit(e.exit_code());
    }
}
