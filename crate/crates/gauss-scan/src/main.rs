fn main() {
    std::process::exit(gauss_scan::run(std::env::args_os()));
}
