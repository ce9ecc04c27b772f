fn main() {
    env_logger::init();
    std::process::exit(floatfarm::harness::cli::cli_main(std::env::args_os()));
}
