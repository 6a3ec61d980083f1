use clap::Parser;

fn main() {
    let cli = cachesim::Cli::parse();
    let result = cachesim::resolve(&cli).and_then(|cfg| cachesim::run(&cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("cachesim: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
