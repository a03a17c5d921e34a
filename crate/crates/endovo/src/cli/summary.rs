use std::path::PathBuf;

use clap::Args;
use serde_json::{json, Value};

use super::{check_input, display_name, invalid, Classify, CliError, Ctx, Outcome};
use crate::io::read_text;
use crate::report::{header, SCHEMA_VERSION};

#[derive(Debug, Args)]
pub(super) struct ReportArgs {
    /// JSON reports written by other subcommands.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

/// One-line digest of a report.
fn headline(v: &Value) -> String {
    let f = |ptr: &str| v.pointer(ptr).and_then(Value::as_f64).map_or("-".to_string(), |x| format!("{x:.6}"));
    let i = |ptr: &str| v.pointer(ptr).map_or("-".to_string(), Value::to_string);
    match v["command"].as_str().unwrap_or("") {
        "eval-traj" => format!("ATE rmse {} RPE trans rmse {}", f("/ate/stats/rmse"), f("/rpe/trans/rmse")),
        "sync" => format!("lag={} score {}", i("/lag"), f("/score")),
        "augment" => format!("{} frames", v["frames"].as_array().map_or(0, Vec::len)),
        "loss" => format!("total {}", f("/loss/total")),
        "align" => format!("loss {} -> {}", f("/initial_loss"), f("/final_loss")),
        "stitch" => format!("{} panoramas", v["panoramas"].as_array().map_or(0, Vec::len)),
        "sfs" => format!("{} valid pixels", i("/valid_pixels")),
        "icp" => format!("final RMSE {} cm", f("/final_rmse_cm")),
        other => format!("{other} report"),
    }
}

pub(super) fn report(a: &ReportArgs, _ctx: &Ctx) -> Result<Outcome, CliError> {
    let mut entries = Vec::new();
    let mut summary = String::new();
    for path in &a.reports {
        check_input(path)?;
        let text = read_text(path).invalid()?;
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if v["schema"].as_u64() != Some(SCHEMA_VERSION) {
            return invalid(format!("{}: unsupported report schema {}", path.display(), v["schema"]));
        }
        let Some(command) = v["command"].as_str() else {
            return invalid(format!("{}: report has no command", path.display()));
        };
        summary.push_str(&format!("{}: {command}: {}\n", display_name(path), headline(&v)));
        entries.push(json!({ "file": display_name(path), "report": v }));
    }
    let mut r = header("report");
    r.insert("reports".into(), Value::Array(entries));
    Ok(Outcome { report: r, summary }).and_then(|o| if o.summary.is_empty() { invalid("no reports") } else { Ok(o) })
}
