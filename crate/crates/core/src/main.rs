use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    std::process::exit(vismodel::service::cli::run(vismodel::service::cli::Cli::parse()));
}
