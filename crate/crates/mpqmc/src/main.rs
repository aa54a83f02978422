fn main() {
    std::process::exit(mpqmc::runner::cli_main(std::env::args_os()));
}
