//! A convergence sweep through the harness: WEMsFEM over `H` and `ℓ`,
//! written as CSV to stdout.

use edge_msfem::harness::{run_study, write_csv, StudyConfig};

const CONFIG: &str = r#"
H = [0.125, 0.0625, 0.03125]
fine = 128
methods = ["wemsfem"]
levels = [0, 1, 2]
[field]
preset = "model1-analogue"
"#;

fn main() -> edge_msfem::Result<()> {
    let config = StudyConfig::from_toml_str(CONFIG)?;
    let report = run_study(&config)?;
    write_csv(&report, std::io::stdout())?;
    eprintln!("config {}", &report.config_hash[..12]);
    Ok(())
}
