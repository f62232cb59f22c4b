fn main() {
    std::process::exit(spectral_servo::cli::run(std::env::args_os()));
}
