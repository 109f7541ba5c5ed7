use std::cell::RefCell;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

/// Output directory plus the metadata stamped on every file.
pub struct Output {
    dir: PathBuf,
    meta: Vec<(&'static str, String)>,
    written: RefCell<Vec<String>>,
}

impl Output {
    pub fn new(dir: &Path, command: &str, seed: u64, config_hash: &str) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let meta = vec![
            ("version", format!("rank1-phase {}", env!("CARGO_PKG_VERSION"))),
            ("command", command.to_string()),
            ("seed", seed.to_string()),
            ("config-hash", config_hash.to_string()),
        ];
        Ok(Self { dir: dir.to_path_buf(), meta, written: RefCell::default() })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.borrow_mut().push(name.to_string());
        Ok(BufWriter::new(file))
    }

    /// Plain text file opened after the `#` metadata lines.
    pub fn text(&self, name: &str) -> Result<BufWriter<File>> {
        let mut f = self.create(name)?;
        for (k, v) in &self.meta {
            writeln!(f, "# {k}: {v}")?;
        }
        Ok(f)
    }

    pub fn csv(&self, name: &str, columns: &[&str]) -> Result<Table> {
        let mut w = csv::Writer::from_writer(self.text(name)?);
        w.write_record(columns)?;
        Ok(Table { w, width: columns.len(), name: name.to_string() })
    }

    /// Writes `body` with a `metadata` object added at the top level.
    pub fn json(&self, name: &str, body: Value) -> Result<()> {
        let mut obj = Map::new();
        let meta: Map<String, Value> = self.meta.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        obj.insert("metadata".into(), Value::Object(meta));
        match body {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let mut f = self.create(name)?;
        serde_json::to_writer_pretty(&mut f, &Value::Object(obj))?;
        writeln!(f)?;
        f.flush()?;
        Ok(())
    }

    pub fn files(&self) -> Vec<String> {
        self.written.borrow().clone()
    }
}

pub struct Table {
    w: csv::Writer<BufWriter<File>>,
    width: usize,
    name: String,
}

impl Table {
    pub fn row(&mut self, cells: &[&dyn Cell]) -> Result<()> {
        debug_assert_eq!(cells.len(), self.width, "{}", self.name);
        self.w.write_record(cells.iter().map(|c| c.cell()))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush().with_context(|| format!("writing {}", self.name))?;
        Ok(())
    }
}

/// CSV cell text. Floats use the shortest representation that reads back
/// to the same value; missing values are empty.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for usize {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for u64 {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for bool {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for &str {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for String {
    fn cell(&self) -> String {
        self.clone()
    }
}

impl<T: Cell> Cell for Option<T> {
    fn cell(&self) -> String {
        self.as_ref().map_or_else(String::new, Cell::cell)
    }
}

/// JSON number, or `"inf"`, `"-inf"`, `"nan"` for values JSON cannot hold.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string().to_lowercase())
    }
}

/// The serde name of a unit enum variant.
pub fn label<T: Serialize>(x: &T) -> String {
    match serde_json::to_value(x) {
        Ok(Value::String(s)) => s,
        Ok(v) => v.to_string(),
        Err(_) => String::new(),
    }
}
