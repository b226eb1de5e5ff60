fn main() {
    std::process::exit(isingtree_cli::cli::cli_main(std::env::args_os()));
}
