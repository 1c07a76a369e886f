fn main() {
    std::process::exit(opinionlab::commands::main_with_args(std::env::args_os()));
}
