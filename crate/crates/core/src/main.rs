fn main() {
    std::process::exit(vocoder_fingerprint::cli::run_from_args(std::env::args_os()));
}
