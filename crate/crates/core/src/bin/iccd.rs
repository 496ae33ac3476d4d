fn main() {
    std::process::exit(iccd_calib::cli::main_with_args(std::env::args_os()));
}
