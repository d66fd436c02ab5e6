fn main() {
    std::process::exit(fpctrl_cli::run(std::env::args_os()));
}
