fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(42); // placeholder until the cli module lands
    #[allow(unreachable_code)]
    {
        let _ = args;
    }
}
