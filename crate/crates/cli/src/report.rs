use std::path::Path;

use carleman::diagnostics::DiagnosticsReport;

use crate::Failure;

pub fn load(out: &Path) -> Result<DiagnosticsReport, Failure> {
    let path = out.join("diagnostics.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Config(vec![format!("{}: {e}", path.display())]))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(vec![format!("{}: {e}", path.display())]))
}

pub fn print(report: &DiagnosticsReport) {
    for v in &report.verdicts {
        let status = if v.passed { "PASS" } else { "FAIL" };
        println!("{status}  {}: {:e} {} {:e}", v.name, v.value, v.comparison, v.tolerance);
    }
    for (name, table) in &report.sweeps {
        println!("\n{name}:\n{}", table.to_csv());
    }
}

pub fn check(report: &DiagnosticsReport) -> Result<(), Failure> {
    let failed: Vec<&str> = report.verdicts.iter().filter(|v| !v.passed).map(|v| v.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Diagnostic(failed.join("; ")))
    }
}
