use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::Failure;

pub fn out_dir(flag: Option<&PathBuf>) -> Result<PathBuf, Failure> {
    let dir = flag.cloned().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::usage(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

pub fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::validation(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>, Failure> {
    Ok(csv::Writer::from_writer(create(dir, name)?))
}

pub fn csv_err(e: csv::Error) -> Failure {
    Failure::validation(format!("csv: {e}"))
}

pub fn stage(msg: &str) {
    eprintln!("[mfsde] {msg}");
}
