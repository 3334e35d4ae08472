//! Result files: 17-significant-digit floats, provenance headers, manifest.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// JSON whose floats carry 17 significant digits.
struct SigFormatter<F>(F);

impl<F: Formatter> Formatter for SigFormatter<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn serialize_with<T: Serialize, F: Formatter>(value: &T, f: F) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFormatter(f));
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serialize_with(value, PrettyFormatter::new());
    out.push(b'\n');
    out
}

/// Single-line JSON.
pub fn to_json_line<T: Serialize>(value: &T) -> String {
    String::from_utf8(serialize_with(value, CompactFormatter)).expect("JSON is UTF-8")
}

/// Identifies the run a result file came from.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub code_version: String,
    pub config_sha256: String,
    pub experiment: String,
    pub seed: Option<u64>,
    pub truncation: Value,
}

impl Provenance {
    fn header(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!(
            "# {} experiment={} config_sha256={} seed={}\n# truncation={}\n",
            self.code_version,
            self.experiment,
            self.config_sha256,
            seed,
            to_json_line(&self.truncation)
        )
    }
}

/// One cell of a CSV row.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    U(usize),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::U(x) => x.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

/// A result file, not yet written.
#[derive(Clone, Debug, PartialEq)]
pub enum Artifact {
    Csv {
        name: String,
        header: Vec<&'static str>,
        rows: Vec<Vec<Cell>>,
    },
    /// CSV text produced by the library, already in 17-digit form.
    CsvText {
        name: String,
        text: String,
    },
    Json {
        name: String,
        value: Value,
    },
}

impl Artifact {
    pub fn name(&self) -> &str {
        match self {
            Artifact::Csv { name, .. } | Artifact::CsvText { name, .. } | Artifact::Json { name, .. } => name,
        }
    }

    /// First non-finite float, if any; such results signal divergence.
    pub fn non_finite(&self) -> Option<String> {
        match self {
            Artifact::Csv { rows, header, name } => rows.iter().enumerate().find_map(|(r, row)| {
                row.iter().enumerate().find_map(|(c, cell)| match cell {
                    Cell::F(x) if !x.is_finite() => Some(format!(
                        "{name}: row {r}, column `{}` is {x}",
                        header.get(c).copied().unwrap_or("?")
                    )),
                    _ => None,
                })
            }),
            Artifact::CsvText { name, text } => text
                .lines()
                .flat_map(|l| l.split(','))
                .find(|f| matches!(f.trim(), "NaN" | "inf" | "-inf"))
                .map(|f| format!("{name}: non-finite value {f}")),
            Artifact::Json { .. } => None,
        }
    }

    pub fn render(&self, prov: &Provenance) -> Vec<u8> {
        match self {
            Artifact::Csv { header, rows, .. } => {
                let mut s = prov.header();
                s.push_str(&header.join(","));
                s.push('\n');
                for row in rows {
                    let cells: Vec<String> = row.iter().map(Cell::render).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                s.into_bytes()
            }
            Artifact::CsvText { text, .. } => {
                let mut s = prov.header();
                s.push_str(text);
                s.into_bytes()
            }
            Artifact::Json { value, .. } => {
                let mut doc = serde_json::Map::new();
                doc.insert(
                    "provenance".into(),
                    serde_json::to_value(prov).expect("provenance serializes"),
                );
                doc.insert("result".into(), value.clone());
                to_json_bytes(&Value::Object(doc))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub spec: Value,
    pub backend: &'static str,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    pub files: Vec<FileEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_floats_use_the_fixed_width() {
        let v = serde_json::json!({"x": 0.1, "n": 3});
        let s = String::from_utf8(to_json_bytes(&v)).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        assert_eq!(to_json_line(&v), r#"{"n":3,"x":1.0000000000000001e-1}"#);
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn non_finite_cells_are_flagged() {
        let a = Artifact::Csv {
            name: "x.csv".into(),
            header: vec!["t", "v"],
            rows: vec![vec![Cell::F(1.0), Cell::F(f64::NAN)]],
        };
        assert!(a.non_finite().unwrap().contains("column `v`"));
    }
}
