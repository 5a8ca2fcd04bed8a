fn main() {
    std::process::exit(magspec::cli::main_entry());
}
