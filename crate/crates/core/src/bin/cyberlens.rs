fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let env = std::env::vars().collect();
    let code = cyberlens::cli::run(std::env::args_os(), &env, &mut std::io::stdout().lock());
    std::process::exit(code);
}
