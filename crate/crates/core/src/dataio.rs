//! Spectrum files, the bundled field datasets and JSON report envelopes.
//!
//! A spectrum file holds one `i A(i)` pair per line, separated by whitespace
//! or a comma. Blank lines and lines starting with `#` are ignored, except
//! that `# key: value` comments with key `name`, `k`, `p`, `n`, `zero_class`
//! or `note` are read as metadata.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::sampling::FrequencySpectrum;

pub const SCHEMA: &str = "dirichlet-species/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub spectrum: FrequencySpectrum,
    /// True number of classes, when known. Only used to judge estimates.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub known_n: Option<u64>,
    /// Count of unseen classes, when the source records it.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zero_class: Option<u64>,
    pub source_note: String,
}

impl Dataset {
    pub fn k(&self) -> u64 {
        self.spectrum.k()
    }

    pub fn p(&self) -> u64 {
        self.spectrum.p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumFormat {
    /// Whitespace- or comma-separated pairs.
    #[default]
    Pairs,
    /// Comma-separated pairs with an optional header line.
    Csv,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub format: SpectrumFormat,
    /// Accept an `i = 0` row and keep it as metadata.
    pub allow_zero_class: bool,
    /// Name used when the file declares none.
    pub default_name: Option<String>,
}

fn parse_err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, message: message.into() })
}

fn parse_count(field: &str, line: usize, what: &str) -> Result<u64> {
    field
        .parse::<u64>()
        .or_else(|_| parse_err(line, format!("{what} {field:?} is not a nonnegative integer")))
}

/// Parse a spectrum from text.
pub fn parse_spectrum(text: &str, opts: &ParseOptions) -> Result<Dataset> {
    let mut meta: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut pairs: BTreeMap<u64, u64> = BTreeMap::new();
    let mut zero_class = None;
    let mut seen_data = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once(':') {
                let key = key.trim().to_ascii_lowercase();
                if matches!(key.as_str(), "name" | "k" | "p" | "n" | "zero_class" | "note") {
                    meta.insert(key, (line_no, value.trim().to_string()));
                }
            }
            continue;
        }
        let fields: Vec<&str> = match opts.format {
            SpectrumFormat::Pairs => line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect(),
            SpectrumFormat::Csv => line.split(',').map(str::trim).collect(),
        };
        if fields.len() != 2 {
            return parse_err(line_no, format!("expected `i A(i)`, found {line:?}"));
        }
        let is_header = opts.format == SpectrumFormat::Csv
            && !seen_data
            && pairs.is_empty()
            && zero_class.is_none()
            && fields.iter().all(|f| f.parse::<u64>().is_err());
        if is_header {
            seen_data = true;
            continue;
        }
        seen_data = true;
        let i = parse_count(fields[0], line_no, "class")?;
        let a = parse_count(fields[1], line_no, "count")?;
        if i == 0 {
            if !opts.allow_zero_class {
                return parse_err(line_no, "class 0 needs allow_zero_class");
            }
            if zero_class.replace(a).is_some() {
                return Err(Error::Validation(format!("line {line_no}: duplicate class 0")));
            }
            continue;
        }
        if a == 0 {
            return Err(Error::Validation(format!("line {line_no}: zero count for class {i}")));
        }
        if pairs.insert(i, a).is_some() {
            return Err(Error::Validation(format!("line {line_no}: duplicate class {i}")));
        }
    }

    let spectrum = FrequencySpectrum::new(pairs)?;
    let meta_num = |key: &str| -> Result<Option<u64>> {
        match meta.get(key) {
            None => Ok(None),
            Some((line, v)) => parse_count(v, *line, key).map(Some),
        }
    };
    for (key, got) in [("k", spectrum.k()), ("p", spectrum.p())] {
        if let Some(want) = meta_num(key)? {
            if want != got {
                return Err(Error::Validation(format!("declared {key}={want} but the data give {got}")));
            }
        }
    }
    if let Some(z) = meta_num("zero_class")? {
        if zero_class.is_some_and(|x| x != z) {
            return Err(Error::Validation("zero class given twice with different counts".into()));
        }
        zero_class = Some(z);
    }
    let name = meta
        .get("name")
        .map(|(_, v)| v.clone())
        .or_else(|| opts.default_name.clone())
        .unwrap_or_else(|| "unnamed".into());
    Ok(Dataset {
        name,
        spectrum,
        known_n: meta_num("n")?,
        zero_class,
        source_note: meta.get("note").map(|(_, v)| v.clone()).unwrap_or_default(),
    })
}

pub fn read_spectrum(mut reader: impl Read, opts: &ParseOptions) -> Result<Dataset> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_spectrum(&text, opts)
}

pub fn read_spectrum_file(path: &Path, opts: &ParseOptions) -> Result<Dataset> {
    let mut opts = opts.clone();
    if opts.default_name.is_none() {
        opts.default_name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    read_spectrum(std::fs::File::open(path)?, &opts)
}

/// Text form accepted back by [`parse_spectrum`] with default options.
pub fn write_spectrum(d: &Dataset) -> String {
    let mut out = format!("# name: {}\n# k: {}\n# p: {}\n", d.name, d.k(), d.p());
    if let Some(n) = d.known_n {
        out += &format!("# n: {n}\n");
    }
    if let Some(z) = d.zero_class {
        out += &format!("# zero_class: {z}\n");
    }
    if !d.source_note.is_empty() {
        out += &format!("# note: {}\n", d.source_note.replace('\n', " "));
    }
    for (i, a) in d.spectrum.iter() {
        out += &format!("{i} {a}\n");
    }
    out
}

fn dataset(name: &str, pairs: &[(u64, u64)], known_n: Option<u64>, zero: Option<u64>, note: &str) -> Dataset {
    Dataset {
        name: name.into(),
        spectrum: FrequencySpectrum::from_pairs(pairs.iter().copied()).expect("bundled table is valid"),
        known_n,
        zero_class: zero,
        source_note: note.into(),
    }
}

pub const BUNDLED_NAMES: [&str; 5] =
    ["madison", "hamilton", "janzen-1967-day", "janzen-1967-night", "janzen-1968-day"];

/// The five field datasets: Federalist word counts for Madison ('may') and
/// Hamilton ('can') and three Janzen beetle series from Osa secondary forest.
pub fn bundled_datasets() -> Vec<Dataset> {
    let sets = vec![
        dataset(
            "madison",
            &[(1, 63), (2, 29), (3, 8), (4, 4), (5, 1), (6, 1)],
            Some(262),
            Some(156),
            "Federalist papers, Madison, occurrences of 'may' per manuscript",
        ),
        dataset(
            "hamilton",
            &[(1, 60), (2, 20), (3, 5), (4, 2), (5, 2), (6, 1)],
            Some(247),
            Some(157),
            "Federalist papers, Hamilton, occurrences of 'can' per manuscript",
        ),
        dataset(
            "janzen-1967-day",
            &[
                (1, 70), (2, 17), (3, 4), (4, 5), (5, 5), (6, 5), (7, 5), (8, 3), (9, 1), (10, 2),
                (11, 3), (12, 2), (14, 2), (17, 1), (29, 2), (20, 3), (21, 1), (24, 1), (26, 1),
                (40, 1), (57, 2), (60, 1), (64, 1), (71, 1), (77, 1),
            ],
            None,
            None,
            "Janzen beetles, Osa secondary, day, dry season 1967",
        ),
        dataset(
            "janzen-1967-night",
            &[
                (1, 61), (2, 24), (3, 13), (4, 12), (5, 5), (7, 6), (8, 5), (9, 2), (10, 4), (11, 2),
                (12, 3), (13, 1), (15, 1), (17, 1), (18, 2), (19, 2), (26, 1), (30, 1), (33, 1),
                (40, 1), (44, 1), (62, 2),
            ],
            None,
            None,
            "Janzen beetles, Osa secondary, night, dry season 1967",
        ),
        dataset(
            "janzen-1968-day",
            &[
                (1, 85), (2, 12), (3, 10), (4, 4), (5, 6), (6, 3), (7, 5), (9, 1), (10, 2), (11, 1),
                (12, 1), (13, 1), (15, 1), (18, 2), (20, 1), (24, 1), (25, 1), (28, 1), (29, 1),
                (30, 1), (79, 1), (106, 1), (112, 1),
            ],
            None,
            None,
            "Janzen beetles, Osa secondary, day, dry season 1968",
        ),
    ];
    let stated = [(172, 106), (139, 90), (996, 140), (835, 151), (807, 143)];
    for (d, (k, p)) in sets.iter().zip(stated) {
        assert_eq!((d.k(), d.p()), (k, p), "bundled dataset {} is inconsistent", d.name);
    }
    sets
}

pub fn bundled(name: &str) -> Result<Dataset> {
    bundled_datasets()
        .into_iter()
        .find(|d| d.name == name)
        .ok_or_else(|| Error::Validation(format!("no bundled dataset {name:?}; known: {}", BUNDLED_NAMES.join(", "))))
}

/// Versioned wrapper written around every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Echo of the invocation parameters.
    pub inputs: BTreeMap<String, serde_json::Value>,
    pub report: T,
}

impl<T> Envelope<T> {
    pub fn new(command: impl Into<String>, seed: Option<u64>, report: T) -> Self {
        Envelope { schema: SCHEMA.into(), command: command.into(), seed, inputs: BTreeMap::new(), report }
    }

    pub fn with_input(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.inputs.insert(key.into(), v);
        self
    }
}

// Pretty JSON whose floats always carry a '.' or an exponent, with
// scientific notation outside [1e-4, 1e6).
struct SciFormatter(PrettyFormatter<'static>);

impl SciFormatter {
    fn new() -> Self {
        SciFormatter(PrettyFormatter::with_indent(b"  "))
    }
}

pub(crate) fn format_float(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e6).contains(&a) {
        format!("{x:e}")
    } else {
        let s = format!("{x}");
        if s.contains('.') { s } else { s + ".0" }
    }
}

impl Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_float(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialize any report to the pretty JSON report format.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter::new());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<Envelope<T>> {
    let env: Envelope<T> = serde_json::from_str(text)?;
    if env.schema != SCHEMA {
        return Err(Error::Validation(format!("unknown report schema {:?}", env.schema)));
    }
    Ok(env)
}

/// Write a report to `destination`, or to stdout when `None`.
pub fn write_report<T: Serialize>(envelope: &Envelope<T>, destination: Option<&Path>) -> Result<()> {
    let text = to_json(envelope)?;
    match destination {
        Some(path) => std::fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
