fn main() {
    std::process::exit(rfprobe::cli::run());
}
