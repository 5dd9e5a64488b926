use clap::Parser;

fn main() {
    let cli = curvhom::cli::Cli::parse();
    std::process::exit(curvhom::cli::main_with(cli));
}
