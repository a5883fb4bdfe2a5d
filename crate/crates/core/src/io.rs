//! Instance and result persistence: JSON instances, TSPLIB `EUC_2D` files
//! and version-stamped CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

use crate::problems::{BppInstance, CvrpInstance, DistanceMode, Instance, Point, SmtwtpInstance, TspInstance};

/// First line of every CSV written by this crate.
pub const CSV_VERSION: &str = "v1";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error at `{path}`: {msg}")]
    Schema { path: String, msg: String },
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn schema(path: impl Into<String>, msg: impl Into<String>) -> IoError {
    IoError::Schema { path: path.into(), msg: msg.into() }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    let wrap = |source| IoError::File { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(wrap)?;
    }
    std::fs::write(path, text).map_err(wrap)
}

// ---------------------------------------------------------------- JSON

/// An instance together with the seed it was generated from, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDoc {
    pub instance: Instance,
    pub seed: Option<u64>,
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn get(&self, key: &str) -> Result<&'a Value, IoError> {
        self.obj.get(key).ok_or_else(|| schema(key, "missing field"))
    }

    fn f64(v: &Value, path: &str) -> Result<f64, IoError> {
        v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| schema(path, format!("expected a finite number, got {v}")))
    }

    fn u32(v: &Value, path: &str) -> Result<u32, IoError> {
        v.as_u64()
            .and_then(|x| u32::try_from(x).ok())
            .ok_or_else(|| schema(path, format!("expected an unsigned 32-bit integer, got {v}")))
    }

    fn array(&self, key: &str) -> Result<&'a Vec<Value>, IoError> {
        self.get(key)?.as_array().ok_or_else(|| schema(key, "expected an array"))
    }

    fn point(v: &Value, path: &str) -> Result<Point, IoError> {
        match v.as_array().map(Vec::as_slice) {
            Some([x, y]) => Ok([Self::f64(x, &format!("{path}[0]"))?, Self::f64(y, &format!("{path}[1]"))?]),
            _ => Err(schema(path, "expected [x, y]")),
        }
    }

    fn points(&self, key: &str) -> Result<Vec<Point>, IoError> {
        self.array(key)?.iter().enumerate().map(|(i, v)| Self::point(v, &format!("{key}[{i}]"))).collect()
    }

    fn reals(&self, key: &str) -> Result<Vec<f64>, IoError> {
        self.array(key)?.iter().enumerate().map(|(i, v)| Self::f64(v, &format!("{key}[{i}]"))).collect()
    }

    fn ints(&self, key: &str) -> Result<Vec<u32>, IoError> {
        self.array(key)?.iter().enumerate().map(|(i, v)| Self::u32(v, &format!("{key}[{i}]"))).collect()
    }

    fn int(&self, key: &str) -> Result<u32, IoError> {
        Self::u32(self.get(key)?, key)
    }

    fn only(&self, allowed: &[&str]) -> Result<(), IoError> {
        match self.obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(schema(k.as_str(), "unexpected field for this kind")),
            None => Ok(()),
        }
    }
}

/// Decodes the instance schema
/// `{"kind", "coords", "depot", "demands", "capacity", "due", "weight",
/// "proc", "sizes", "bin_capacity", "seed"}` with per-kind fields.
pub fn instance_from_value(v: &Value) -> Result<InstanceDoc, IoError> {
    let obj = v.as_object().ok_or_else(|| schema("$", "expected an object"))?;
    let f = Fields { obj };
    let kind = f.get("kind")?.as_str().ok_or_else(|| schema("kind", "expected a string"))?;
    let seed = match obj.get("seed") {
        None | Some(Value::Null) => None,
        Some(s) => Some(s.as_u64().ok_or_else(|| schema("seed", "expected an unsigned integer"))?),
    };
    let base = ["kind", "seed"];
    let allow = |extra: &[&str]| f.only(&[&base[..], extra].concat());
    let instance = match kind {
        "tsp" => {
            allow(&["coords", "distance"])?;
            let distance = match obj.get("distance").map(|d| d.as_str()) {
                None => DistanceMode::Exact,
                Some(Some("exact")) => DistanceMode::Exact,
                Some(Some("euc2d_rounded")) => DistanceMode::Euc2dRounded,
                Some(_) => return Err(schema("distance", "expected \"exact\" or \"euc2d_rounded\"")),
            };
            let mut p = TspInstance::new(f.points("coords")?).map_err(|e| schema("coords", e.to_string()))?;
            p.distance = distance;
            Instance::Tsp(p)
        }
        "cvrp" => {
            allow(&["depot", "coords", "demands", "capacity"])?;
            let depot = Fields::point(f.get("depot")?, "depot")?;
            CvrpInstance::new(depot, f.points("coords")?, f.ints("demands")?, f.int("capacity")?)
                .map(Instance::Cvrp)
                .map_err(|e| schema("$", e.to_string()))?
        }
        "smtwtp" => {
            allow(&["due", "weight", "proc"])?;
            SmtwtpInstance::new(f.reals("due")?, f.reals("weight")?, f.reals("proc")?)
                .map(Instance::Smtwtp)
                .map_err(|e| schema("$", e.to_string()))?
        }
        "bpp" => {
            allow(&["sizes", "bin_capacity"])?;
            BppInstance::new(f.ints("sizes")?, f.int("bin_capacity")?)
                .map(Instance::Bpp)
                .map_err(|e| schema("$", e.to_string()))?
        }
        other => return Err(schema("kind", format!("unknown kind `{other}` (expected tsp, cvrp, smtwtp or bpp)"))),
    };
    Ok(InstanceDoc { instance, seed })
}

pub fn instance_to_value(inst: &Instance, seed: Option<u64>) -> Value {
    let mut m = Map::new();
    m.insert("kind".into(), inst.kind().as_str().into());
    let pts = |p: &[Point]| Value::from(p.iter().map(|q| Value::from(q.to_vec())).collect::<Vec<_>>());
    match inst {
        Instance::Tsp(p) => {
            m.insert("coords".into(), pts(&p.coords));
            if p.distance == DistanceMode::Euc2dRounded {
                m.insert("distance".into(), "euc2d_rounded".into());
            }
        }
        Instance::Cvrp(p) => {
            m.insert("depot".into(), p.depot.to_vec().into());
            m.insert("coords".into(), pts(&p.coords));
            m.insert("demands".into(), p.demands.clone().into());
            m.insert("capacity".into(), p.capacity.into());
        }
        Instance::Smtwtp(p) => {
            m.insert("due".into(), p.due.clone().into());
            m.insert("weight".into(), p.weight.clone().into());
            m.insert("proc".into(), p.proc.clone().into());
        }
        Instance::Bpp(p) => {
            m.insert("sizes".into(), p.sizes.clone().into());
            m.insert("bin_capacity".into(), p.bin_capacity.into());
        }
    }
    if let Some(s) = seed {
        m.insert("seed".into(), s.into());
    }
    Value::Object(m)
}

pub fn parse_instance_json(text: &str) -> Result<InstanceDoc, IoError> {
    instance_from_value(&serde_json::from_str(text)?)
}

pub fn instance_to_json(inst: &Instance, seed: Option<u64>) -> String {
    serde_json::to_string_pretty(&instance_to_value(inst, seed)).expect("JSON values always serialize")
}

pub fn read_instance(path: &Path) -> Result<Instance, IoError> {
    Ok(parse_instance_json(&read_text(path)?)?.instance)
}

pub fn write_instance(path: &Path, inst: &Instance) -> Result<(), IoError> {
    write_text(path, &instance_to_json(inst, None))
}

// ---------------------------------------------------------------- TSPLIB

/// Reads a TSPLIB `TYPE: TSP` file with `EDGE_WEIGHT_TYPE: EUC_2D`.
/// Coordinates are kept verbatim; `rounded` selects the nearest-integer
/// distance convention.
pub fn parse_tsplib(text: &str, rounded: bool) -> Result<TspInstance, IoError> {
    let mut dimension: Option<usize> = None;
    let mut weight_type: Option<String> = None;
    let mut coords: Vec<Option<Point>> = Vec::new();
    let mut in_coords = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        let perr = |msg: String| IoError::Parse { line: line_no, msg };
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        if in_coords && line.split_whitespace().next().is_some_and(|t| t.parse::<usize>().is_ok()) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(perr(format!("expected `id x y`, got `{line}`")));
            }
            let id: usize = parts[0].parse().map_err(|_| perr(format!("bad node id `{}`", parts[0])))?;
            let x: f64 = parts[1].parse().map_err(|_| perr(format!("bad coordinate `{}`", parts[1])))?;
            let y: f64 = parts[2].parse().map_err(|_| perr(format!("bad coordinate `{}`", parts[2])))?;
            let n = dimension.expect("checked when the section opened");
            if id == 0 || id > n {
                return Err(perr(format!("node id {id} outside 1..={n}")));
            }
            if coords[id - 1].replace([x, y]).is_some() {
                return Err(perr(format!("node {id} listed twice")));
            }
            continue;
        }
        in_coords = false;
        if line.ends_with("_SECTION") {
            if line != "NODE_COORD_SECTION" {
                return Err(IoError::Unsupported(format!("section {line}")));
            }
            if weight_type.as_deref() != Some("EUC_2D") {
                return Err(IoError::Unsupported(format!(
                    "EDGE_WEIGHT_TYPE {}",
                    weight_type.as_deref().unwrap_or("(missing)")
                )));
            }
            let n = dimension.ok_or_else(|| perr("NODE_COORD_SECTION before DIMENSION".into()))?;
            coords = vec![None; n];
            in_coords = true;
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(perr(format!("expected `KEY : VALUE`, got `{line}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "TYPE" if value != "TSP" => return Err(IoError::Unsupported(format!("TYPE {value}"))),
            "DIMENSION" => {
                dimension = Some(value.parse().map_err(|_| perr(format!("bad DIMENSION `{value}`")))?);
            }
            "EDGE_WEIGHT_TYPE" => {
                if value != "EUC_2D" {
                    return Err(IoError::Unsupported(format!("EDGE_WEIGHT_TYPE {value}")));
                }
                weight_type = Some(value.to_string());
            }
            _ => {}
        }
    }
    let last = text.lines().count();
    if coords.is_empty() {
        return Err(IoError::Parse { line: last, msg: "missing NODE_COORD_SECTION".into() });
    }
    let pts = coords
        .iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| IoError::Parse { line: last, msg: format!("node {} has no coordinates", i + 1) }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut inst = TspInstance::new(pts).map_err(|e| IoError::Parse { line: last, msg: e.to_string() })?;
    if rounded {
        inst.distance = DistanceMode::Euc2dRounded;
    }
    Ok(inst)
}

pub fn write_tsplib(inst: &TspInstance, name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NAME : {name}");
    let _ = writeln!(s, "TYPE : TSP");
    let _ = writeln!(s, "DIMENSION : {}", inst.len());
    let _ = writeln!(s, "EDGE_WEIGHT_TYPE : EUC_2D");
    let _ = writeln!(s, "NODE_COORD_SECTION");
    for (i, p) in inst.coords.iter().enumerate() {
        let _ = writeln!(s, "{} {:?} {:?}", i + 1, p[0], p[1]);
    }
    s.push_str("EOF\n");
    s
}

// ---------------------------------------------------------------- CSV

/// Renders a CSV table whose first line is `# gfacs <table> v1`.
pub fn csv_table(table: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of UTF-8 fields");
    format!("# gfacs {table} {CSV_VERSION}\n{body}")
}
