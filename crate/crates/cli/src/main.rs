fn main() {
    std::process::exit(molcomm_cli::run(std::env::args_os()));
}
