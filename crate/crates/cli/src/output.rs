//! CSV serialization with atomic file replacement.

use std::io::Write;
use std::path::Path;

use vieq::RunTrace;

/// 17 significant digits, which round-trips every f64.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes `f`'s output to `path` through a temporary file in the same
/// directory, renamed into place on success. Writes to stdout without a
/// path.
pub fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> std::io::Result<()> {
    match path {
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            {
                let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
                f(&mut buf)?;
                buf.flush()?;
            }
            tmp.as_file().sync_all()?;
            tmp.persist(path).map_err(|e| e.error)?;
            Ok(())
        }
    }
}

pub fn write_trace(out: &mut dyn Write, trace: &RunTrace) -> std::io::Result<()> {
    let dim = trace.last().x.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["k", "t", "dist_err", "f_err", "grad_norm"].iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    for r in trace.records() {
        let mut row = vec![r.k.to_string(), num(r.t), opt(r.dist_err), opt(r.f_err), opt(r.grad_norm)];
        row.extend(r.x.as_slice().iter().map(|&v| num(v)));
        w.write_record(&row)?;
    }
    w.flush()
}

/// Writes a table whose first column is an index or time and the rest
/// are floats.
pub fn write_rows<'a>(
    out: &mut dyn Write,
    header: &[String],
    rows: impl Iterator<Item = (String, Vec<f64>)> + 'a,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for (lead, vals) in rows {
        let mut row = vec![lead];
        row.extend(vals.into_iter().map(num));
        w.write_record(&row)?;
    }
    w.flush()
}
