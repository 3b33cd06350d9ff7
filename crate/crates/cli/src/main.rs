use clap::error::ErrorKind;
use clap::Parser;
use radar_depth_cli::{config::one_line, execute, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            eprintln!("{}", one_line(first));
            std::process::exit(2);
        }
    };
    match execute(&cli) {
        Ok(summary) => println!("{summary}"),
        Err(e) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            std::process::exit(e.exit_code());
        }
    }
}
