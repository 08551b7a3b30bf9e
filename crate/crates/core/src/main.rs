use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("UNIQ_SHAP_LOG")).init();
    ExitCode::from(uniqshap::cli::run())
}
