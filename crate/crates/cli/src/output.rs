use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use hebb::harness::ScenarioReport;

pub const OUT_DIR_ENV: &str = "HEBB_OUT_DIR";

/// Flag, then environment, then config file, then `results`.
pub fn resolve_out_dir(flag: Option<PathBuf>, config: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    })
    .or(config)
    .unwrap_or_else(|| PathBuf::from("results"))
}

/// Writes through a temporary file in the target directory, then renames it
/// into place.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

/// Method x {overall, new, old} at the final evaluation point, seed means.
pub fn summary_table(reports: &[ScenarioReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.method().len())
        .max()
        .unwrap_or(0)
        .max("method".len());
    let mut s = format!(
        "{:<width$}  {:>8}  {:>8}  {:>8}\n",
        "method", "overall", "new", "old"
    );
    for r in reports {
        let p = r.mean.final_point();
        s.push_str(&format!(
            "{:<width$}  {:>8}  {:>8}  {:>8}\n",
            r.method(),
            cell(p.map(|p| p.acc_overall)),
            cell(p.and_then(|p| p.acc_new)),
            cell(p.and_then(|p| p.acc_old)),
        ));
    }
    s
}
