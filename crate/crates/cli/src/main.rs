fn main() {
    std::process::exit(cptmdp_cli::run(std::env::args_os()));
}
