fn main() {
    hallstokes::cli::main();
}
