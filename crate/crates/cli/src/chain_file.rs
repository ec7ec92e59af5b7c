//! Versioned JSON chain files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "points": ["0", "1"],
//!   "metric": {"type": "graph", "payload": [["0", "1", 1.0]]},
//!   "kernel": [{"point": "0", "row": [["0", "0.5"], ["1", "0.5"]]}, ...],
//!   "dt": null
//! }
//! ```
//!
//! A `matrix` metric carries the full distance table as rows of numbers; a
//! `graph` metric carries weighted edges and means the shortest-path metric.
//! Probabilities are decimal strings so that they survive a round trip
//! bit-for-bit.

use std::collections::HashMap;
use std::path::Path;

use ricci_core::chain::{build_chain, ChainError, Row};
use ricci_core::metric::FiniteMetricSpace;
use ricci_core::Chain;
use serde_json::{json, Map, Number, Value};
use thiserror::Error;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ChainFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field(field: impl Into<String>, message: impl Into<String>) -> ChainFileError {
    ChainFileError::Field {
        field: field.into(),
        message: message.into(),
    }
}

pub fn read(path: &Path) -> Result<Chain, ChainFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ChainFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}

pub fn write(path: &Path, chain: &Chain) -> Result<(), ChainFileError> {
    std::fs::write(path, to_string(chain)).map_err(|source| ChainFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse(text: &str) -> Result<Chain, ChainFileError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ChainFileError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let top = doc
        .as_object()
        .ok_or_else(|| field("$", "expected an object"))?;

    let version = top
        .get("format_version")
        .ok_or_else(|| field("format_version", "missing"))?;
    if version.as_u64() != Some(FORMAT_VERSION) {
        return Err(field(
            "format_version",
            format!("unsupported version {version}, expected {FORMAT_VERSION}"),
        ));
    }

    let points: Vec<String> = array(top, "points", "points")?
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.as_str()
                .map(str::to_owned)
                .ok_or_else(|| field(format!("points[{i}]"), "expected a string id"))
        })
        .collect::<Result<_, _>>()?;
    let mut index = HashMap::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if index.insert(p.as_str(), i).is_some() {
            return Err(field(format!("points[{i}]"), format!("duplicate id {p:?}")));
        }
    }
    let lookup = |v: &Value, at: String| -> Result<usize, ChainFileError> {
        let id = v
            .as_str()
            .ok_or_else(|| field(at.clone(), "expected a point id string"))?;
        index
            .get(id)
            .copied()
            .ok_or_else(|| field(at, format!("unknown point {id:?}")))
    };

    let metric = top
        .get("metric")
        .and_then(Value::as_object)
        .ok_or_else(|| field("metric", "expected an object"))?;
    let kind = metric
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| field("metric.type", "expected \"matrix\" or \"graph\""))?;
    let payload = metric
        .get("payload")
        .and_then(Value::as_array)
        .ok_or_else(|| field("metric.payload", "expected an array"))?;
    let space = match kind {
        "matrix" => {
            let mut rows = Vec::with_capacity(payload.len());
            for (i, row) in payload.iter().enumerate() {
                let row = row
                    .as_array()
                    .ok_or_else(|| field(format!("metric.payload[{i}]"), "expected an array"))?;
                let row = row
                    .iter()
                    .enumerate()
                    .map(|(j, v)| number(v, format!("metric.payload[{i}][{j}]")))
                    .collect::<Result<Vec<f64>, _>>()?;
                rows.push(row);
            }
            FiniteMetricSpace::from_matrix(points.clone(), rows)
                .map_err(|e| field("metric.payload", e.to_string()))?
        }
        "graph" => {
            let mut edges = Vec::with_capacity(payload.len());
            for (k, e) in payload.iter().enumerate() {
                let at = format!("metric.payload[{k}]");
                let e = e
                    .as_array()
                    .filter(|e| e.len() == 3)
                    .ok_or_else(|| field(at.clone(), "expected [id, id, weight]"))?;
                edges.push((
                    lookup(&e[0], format!("{at}[0]"))?,
                    lookup(&e[1], format!("{at}[1]"))?,
                    number(&e[2], format!("{at}[2]"))?,
                ));
            }
            FiniteMetricSpace::from_edges(points.clone(), &edges)
                .map_err(|e| field("metric.payload", e.to_string()))?
        }
        other => {
            return Err(field(
                "metric.type",
                format!("unknown metric type {other:?}"),
            ))
        }
    };

    let kernel = array(top, "kernel", "kernel")?;
    let mut rows: Vec<Option<Row>> = vec![None; points.len()];
    for (i, entry) in kernel.iter().enumerate() {
        let at = format!("kernel[{i}]");
        let entry = entry
            .as_object()
            .ok_or_else(|| field(at.clone(), "expected an object"))?;
        let x = lookup(
            entry.get("point").unwrap_or(&Value::Null),
            format!("{at}.point"),
        )?;
        if rows[x].is_some() {
            return Err(field(
                format!("{at}.point"),
                format!("second row for point {:?}", points[x]),
            ));
        }
        let row = array(entry, "row", &format!("{at}.row"))?;
        let mut parsed = Vec::with_capacity(row.len());
        for (j, pair) in row.iter().enumerate() {
            let pat = format!("{at}.row[{j}]");
            let pair = pair
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| field(pat.clone(), "expected [id, \"probability\"]"))?;
            let y = lookup(&pair[0], format!("{pat}[0]"))?;
            let p = probability(&pair[1], format!("{pat}[1]"))?;
            parsed.push((y, p));
        }
        rows[x] = Some(parsed);
    }
    let rows: Vec<Row> = rows
        .into_iter()
        .enumerate()
        .map(|(x, r)| r.ok_or_else(|| field("kernel", format!("no row for point {:?}", points[x]))))
        .collect::<Result<_, _>>()?;
    let position: Vec<usize> = {
        let mut pos = vec![0; points.len()];
        for (i, entry) in kernel.iter().enumerate() {
            if let Some(x) = entry
                .get("point")
                .and_then(Value::as_str)
                .and_then(|id| index.get(id))
            {
                pos[*x] = i;
            }
        }
        pos
    };

    let dt = match top.get("dt") {
        None | Some(Value::Null) => None,
        Some(v) => Some(number(v, "dt".into())?),
    };

    build_chain(space, rows, dt).map_err(|e| match e {
        ChainError::RowNotStochastic { point, .. }
        | ChainError::NegativeProbability { point, .. } => {
            field(format!("kernel[{}].row", position[point]), e.to_string())
        }
        ChainError::InvalidDt(_) => field("dt", e.to_string()),
        other => field("kernel", other.to_string()),
    })
}

fn array<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    at: &str,
) -> Result<&'a Vec<Value>, ChainFileError> {
    obj.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| field(at, "expected an array"))
}

fn number(v: &Value, at: String) -> Result<f64, ChainFileError> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| field(at, format!("expected a finite number, got {v}")))
}

fn probability(v: &Value, at: String) -> Result<f64, ChainFileError> {
    let s = v
        .as_str()
        .ok_or_else(|| field(at.clone(), format!("expected a decimal string, got {v}")))?;
    let p: f64 = s
        .trim()
        .parse()
        .map_err(|_| field(at.clone(), format!("{s:?} is not a decimal number")))?;
    if !p.is_finite() {
        return Err(field(at, format!("{s:?} is not finite")));
    }
    Ok(p)
}

fn float(x: f64) -> Value {
    Value::Number(Number::from_f64(x).expect("finite distance"))
}

/// Edges between points no farther apart than the space's geodesic step, when
/// their shortest-path metric reproduces every distance exactly.
fn graph_payload(space: &FiniteMetricSpace) -> Option<Vec<(usize, usize, f64)>> {
    let step = space.geodesic_hint()?;
    let n = space.len();
    let edges: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, space.dist(i, j)))
        .filter(|e| e.2 <= step)
        .collect();
    let rebuilt = FiniteMetricSpace::from_edges(space.points().to_vec(), &edges).ok()?;
    (&rebuilt == space).then_some(edges)
}

pub fn to_value(chain: &Chain) -> Value {
    let space = chain.space();
    let id = |i: usize| Value::String(space.point(i).to_owned());
    let metric = match graph_payload(space) {
        Some(edges) => json!({
            "type": "graph",
            "payload": edges.iter().map(|&(i, j, w)| json!([id(i), id(j), float(w)])).collect::<Vec<_>>(),
        }),
        None => json!({
            "type": "matrix",
            "payload": (0..space.len())
                .map(|i| Value::Array((0..space.len()).map(|j| float(space.dist(i, j))).collect()))
                .collect::<Vec<_>>(),
        }),
    };
    let kernel: Vec<Value> = chain
        .rows()
        .iter()
        .enumerate()
        .map(|(x, row)| {
            json!({
                "point": id(x),
                "row": row.iter().map(|&(y, p)| json!([id(y), p.to_string()])).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "format_version": FORMAT_VERSION,
        "points": space.points(),
        "metric": metric,
        "kernel": kernel,
        "dt": chain.dt().map(float),
    })
}

pub fn to_string(chain: &Chain) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(chain)).expect("serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ricci_core::gallery::{generate, Preset};

    fn same(a: &Chain, b: &Chain) -> bool {
        a.space() == b.space()
            && a.dt().map(f64::to_bits) == b.dt().map(f64::to_bits)
            && a.rows().len() == b.rows().len()
            && a.rows().iter().zip(b.rows()).all(|(r, s)| {
                r.len() == s.len()
                    && r.iter()
                        .zip(s)
                        .all(|(u, v)| u.0 == v.0 && u.1.to_bits() == v.1.to_bits())
            })
    }

    #[test]
    fn presets_round_trip_exactly() {
        for p in [
            Preset::Cube { n: 3 },
            Preset::Multinomial { n: 3, d: 2 },
            Preset::MmInfty {
                lambda: 3.0,
                mu: 1.0,
                dt: Some(1e-3),
                k: 30,
            },
            Preset::Binomial { n: 7, p: 0.3 },
        ] {
            let c = generate(&p).unwrap();
            let back = parse(&to_string(&c)).unwrap();
            assert!(same(&c, &back), "{p:?}");
        }
    }

    #[test]
    fn lattice_spaces_are_written_as_graphs() {
        let c = generate(&Preset::Cube { n: 3 }).unwrap();
        assert_eq!(to_value(&c)["metric"]["type"], "graph");
    }

    fn error_of(text: &str) -> String {
        parse(text).unwrap_err().to_string()
    }

    #[test]
    fn errors_name_the_field() {
        let base = r#"{"format_version": 1, "points": ["a", "b"],
            "metric": {"type": "matrix", "payload": [[0, 1], [1, 0]]},
            "kernel": [{"point": "a", "row": [["a", "0.5"], ["b", "0.5"]]},
                       {"point": "b", "row": [["a", "0.5"], ["b", "x"]]}]}"#;
        assert!(
            error_of(base).starts_with("kernel[1].row[1][1]:"),
            "{}",
            error_of(base)
        );
        let bad_sum = base.replace(r#"["b", "x"]"#, r#"["b", "0.6"]"#);
        assert!(
            error_of(&bad_sum).starts_with("kernel[1].row:"),
            "{}",
            error_of(&bad_sum)
        );
        let unknown = base.replace(r#"["b", "x"]"#, r#"["c", "0.5"]"#);
        assert!(error_of(&unknown).contains("unknown point \"c\""));
        assert!(
            error_of(&base.replace("\"format_version\": 1", "\"format_version\": 2"))
                .starts_with("format_version")
        );
        assert!(error_of("{\n  \"points\": [,]\n}").starts_with("line 2"));
        let missing = base.replace(
            r#",
                       {"point": "b", "row": [["a", "0.5"], ["b", "x"]]}"#,
            "",
        );
        assert!(error_of(&missing).contains("no row for point \"b\""));
    }
}
