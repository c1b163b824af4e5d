use clap::Parser;

fn main() {
    let cfg = qsdlab_cli::RunConfig::parse();
    std::process::exit(qsdlab_cli::execute(&cfg));
}
