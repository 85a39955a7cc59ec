//! A run configuration in the flat `key = value` format, checked and then
//! handed to the command-line front end.

use levy_merton::cli::{self, RunConfig};
use levy_merton::Result;

const CONFIG: &str = r#"
# bns-example market with a coarser solver grid
market.preset = "bns-example"
ou.y0 = 0.3
grid.time_steps = 1000
grid.y_steps = 100
"#;

pub fn run_example() -> Result<()> {
    let cfg = RunConfig::parse(CONFIG, &[]).expect("config parses");
    println!("preconditions: {:?}", cfg.check());
    print!("{}", cfg.to_text());

    let dir = std::env::temp_dir().join("levy-merton-examples");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("run.cfg");
    std::fs::write(&path, CONFIG)?;
    let out = dir.join("cli");
    let code = cli::run([
        "levy-merton",
        "solve",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    println!("solve exited with {code}");
    cli::run(["levy-merton", "constants", "--config", path.to_str().unwrap()]);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
