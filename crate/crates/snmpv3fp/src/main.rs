fn main() {
    std::process::exit(snmpv3fp::cli::run(std::env::args_os()));
}
