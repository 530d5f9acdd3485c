fn main() { std::process::exit(porel::io::cli::main_entry()); }
