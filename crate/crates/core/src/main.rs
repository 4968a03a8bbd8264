fn main() {
    std::process::exit(merton_arena::cli::main_entry());
}
