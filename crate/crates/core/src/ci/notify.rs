use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::config::NotifyConfig;
use super::pipeline::PipelineRun;
use crate::results::now;

pub fn subject(run: &PipelineRun) -> String {
    let c = run.counts.unwrap_or_default();
    format!("[heterotest] vid {}: {}/{}/{}", run.vid, c.passed, c.failed, c.error)
}

/// Writes `vid<N>.eml` into the outbox. An empty recipient list still
/// produces the file.
pub fn write_notification(run: &PipelineRun, cfg: &NotifyConfig, report: Option<&Path>) -> io::Result<PathBuf> {
    fs::create_dir_all(&cfg.outbox)?;
    let to = if cfg.recipients.is_empty() {
        "undisclosed-recipients:;".to_string()
    } else {
        cfg.recipients.join(", ")
    };
    let c = run.counts.unwrap_or_default();
    let tuple = run
        .revisions
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ");
    let mut body = vec![
        format!("Virtual revision {} ({tuple})", run.vid),
        String::new(),
        format!(
            "Tests: {}  passed: {}  failed: {}  errors: {}",
            c.passed + c.failed + c.error,
            c.passed,
            c.failed,
            c.error
        ),
        String::new(),
        "Actions:".to_string(),
    ];
    for a in &run.actions {
        body.push(format!("  {:<9} {:?}", a.action, a.status).to_lowercase());
    }
    body.push(String::new());
    match report {
        Some(p) => body.push(format!("Report: {}", p.display())),
        None => body.push("Report: not generated".into()),
    }
    let headers = [
        "From: heterotest <heterotest@localhost>".to_string(),
        format!("To: {to}"),
        format!("Subject: {}", subject(run)),
        format!("Date: {}", now().to_rfc2822()),
        "MIME-Version: 1.0".to_string(),
        "Content-Type: text/plain; charset=utf-8".to_string(),
    ];
    let msg = format!("{}\r\n\r\n{}\r\n", headers.join("\r\n"), body.join("\r\n"));
    let path = cfg.outbox.join(format!("vid{}.eml", run.vid));
    fs::write(&path, msg)?;
    Ok(path)
}
