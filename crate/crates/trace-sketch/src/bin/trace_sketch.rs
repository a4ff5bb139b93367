fn main() {
    let code = trace_sketch::cli::run(std::env::args_os());
    std::process::exit(code);
}
