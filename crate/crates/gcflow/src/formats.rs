//! CSV formats. Fields carry `# key=value` header lines followed by
//! `i,j,x,y,value` rows for interior nodes and the exterior ring around
//! them (stored as 0). Values use 17 significant digits, so a field read
//! back is bitwise identical.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use gcflow_core::radial::RadialProfile;
use gcflow_core::selfsim::LemmaRecord;
use gcflow_core::{Domain, DomainKind, FlowParams, RateSeries, ScalarField};

use crate::error::{AppError, AppResult};

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| AppError::format(path, "not a file path"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).map_err(|e| AppError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| AppError::io(&tmp, e))?;
    f.sync_all().map_err(|e| AppError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| AppError::io(path, e))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_bytes(
    path: &Path,
    header: &str,
    columns: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> AppResult<Vec<u8>> {
    let mut out = header.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let fail = |e: csv::Error| AppError::format(path, e.to_string());
        w.write_record(columns).map_err(fail)?;
        for r in rows {
            w.write_record(&r).map_err(fail)?;
        }
        w.flush().map_err(|e| AppError::io(path, e))?;
    }
    Ok(out)
}

/// Domain spec as header pairs.
pub fn domain_pairs(kind: &DomainKind, h: f64) -> Vec<(&'static str, String)> {
    let mut v = match *kind {
        DomainKind::Disc { radius } => {
            vec![("kind", "disc".to_string()), ("radius", radius.to_string())]
        }
        DomainKind::Ellipse { a, b } => vec![
            ("kind", "ellipse".to_string()),
            ("a", a.to_string()),
            ("b", b.to_string()),
        ],
        DomainKind::Superellipse { a, b, p } => vec![
            ("kind", "superellipse".to_string()),
            ("a", a.to_string()),
            ("b", b.to_string()),
            ("p", p.to_string()),
        ],
    };
    v.push(("h", h.to_string()));
    v
}

fn params_pairs(params: &FlowParams) -> Vec<(&'static str, String)> {
    vec![
        ("n", params.n().to_string()),
        ("alpha", params.alpha().to_string()),
        ("beta", params.beta().to_string()),
    ]
}

fn header_text(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

/// Metadata of a field file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub kind: DomainKind,
    pub h: f64,
    pub params: Option<FlowParams>,
    pub t: f64,
}

/// Grid indices of the interior nodes and the exterior nodes touching them.
fn stored_nodes(domain: &Domain) -> impl Iterator<Item = usize> + '_ {
    (0..domain.grid_len()).filter(move |&g| {
        if domain.is_interior(g) {
            return true;
        }
        let (i, j) = domain.grid_coords(g);
        (-1..=1).any(|di| {
            (-1..=1).any(|dj| {
                domain
                    .grid_index(i + di, j + dj)
                    .is_some_and(|q| domain.is_interior(q))
            })
        })
    })
}

pub fn write_field(path: &Path, field: &ScalarField, params: Option<&FlowParams>) -> AppResult<()> {
    let d = field.domain();
    let mut pairs = params.map(params_pairs).unwrap_or_default();
    pairs.extend(domain_pairs(&d.kind(), d.h()));
    pairs.push(("t", field.time().to_string()));
    let v = field.values();
    let rows = stored_nodes(d).map(|g| {
        let (i, j) = d.grid_coords(g);
        let (x, y) = d.position(g);
        vec![i.to_string(), j.to_string(), num(x), num(y), num(v[g])]
    });
    let bytes = csv_bytes(
        path,
        &header_text(&pairs),
        &["i", "j", "x", "y", "value"],
        rows,
    )?;
    write_atomic(path, &bytes)
}

fn split_header(path: &Path, text: &str) -> AppResult<(Vec<(String, String)>, String)> {
    let mut pairs = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest
                .trim()
                .split_once('=')
                .ok_or_else(|| AppError::format(path, format!("bad header line `{line}`")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    Ok((pairs, body))
}

fn lookup<'a>(path: &Path, pairs: &'a [(String, String)], key: &str) -> AppResult<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| AppError::format(path, format!("missing header `{key}`")))
}

fn parse_f64(path: &Path, key: &str, s: &str) -> AppResult<f64> {
    s.parse()
        .map_err(|_| AppError::format(path, format!("`{key}`: not a number: `{s}`")))
}

fn parse_header(path: &Path, pairs: &[(String, String)]) -> AppResult<FieldHeader> {
    let get = |k: &str| parse_f64(path, k, lookup(path, pairs, k)?);
    let kind = match lookup(path, pairs, "kind")? {
        "disc" => DomainKind::Disc {
            radius: get("radius")?,
        },
        "ellipse" => DomainKind::Ellipse {
            a: get("a")?,
            b: get("b")?,
        },
        "superellipse" => DomainKind::Superellipse {
            a: get("a")?,
            b: get("b")?,
            p: get("p")?,
        },
        other => {
            return Err(AppError::format(
                path,
                format!("unknown domain kind `{other}`"),
            ))
        }
    };
    let params = if pairs.iter().any(|(k, _)| k == "alpha") {
        let n = lookup(path, pairs, "n")?
            .parse()
            .map_err(|_| AppError::format(path, "`n`: not an integer"))?;
        Some(FlowParams::new(n, get("alpha")?, get("beta")?)?)
    } else {
        None
    };
    Ok(FieldHeader {
        kind,
        h: get("h")?,
        params,
        t: get("t")?,
    })
}

/// Reads a field onto `domain`, or onto a fresh domain built from the header.
pub fn read_field(
    path: &Path,
    domain: Option<&Arc<Domain>>,
) -> AppResult<(FieldHeader, ScalarField)> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let (pairs, body) = split_header(path, &text)?;
    let header = parse_header(path, &pairs)?;
    let domain = match domain {
        Some(d) => {
            if d.kind() != header.kind || d.h() != header.h {
                return Err(AppError::format(
                    path,
                    "field was written on a different domain",
                ));
            }
            Arc::clone(d)
        }
        None => Arc::new(Domain::new(header.kind, header.h)?),
    };
    let mut values = vec![0.0; domain.grid_len()];
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AppError::format(path, e.to_string()))?;
        if rec.len() != 5 {
            return Err(AppError::format(
                path,
                format!("expected 5 columns, got {}", rec.len()),
            ));
        }
        let int = |k: usize| {
            rec[k]
                .parse::<i32>()
                .map_err(|_| AppError::format(path, format!("bad index `{}`", &rec[k])))
        };
        let (i, j) = (int(0)?, int(1)?);
        let g = domain
            .grid_index(i, j)
            .ok_or_else(|| AppError::format(path, format!("node ({i}, {j}) is off the grid")))?;
        values[g] = parse_f64(path, "value", &rec[4])?;
    }
    let field = ScalarField::from_values(&domain, values, header.t)?;
    Ok((header, field))
}

/// Every grid node with its interior flag.
pub fn write_mask(path: &Path, domain: &Domain, params: Option<&FlowParams>) -> AppResult<()> {
    let mut pairs = params.map(params_pairs).unwrap_or_default();
    pairs.extend(domain_pairs(&domain.kind(), domain.h()));
    let rows = (0..domain.grid_len()).map(|g| {
        let (i, j) = domain.grid_coords(g);
        let (x, y) = domain.position(g);
        vec![
            i.to_string(),
            j.to_string(),
            num(x),
            num(y),
            u8::from(domain.is_interior(g)).to_string(),
        ]
    });
    let bytes = csv_bytes(
        path,
        &header_text(&pairs),
        &["i", "j", "x", "y", "interior"],
        rows,
    )?;
    write_atomic(path, &bytes)
}

pub fn write_radial(path: &Path, profile: &RadialProfile, params: &FlowParams) -> AppResult<()> {
    let mut pairs = params_pairs(params);
    pairs.push(("radius", profile.radius.to_string()));
    pairs.push(("depth", profile.depth.to_string()));
    let rows = profile
        .samples
        .iter()
        .map(|&(r, psi, _)| vec![num(r), num(psi)]);
    let bytes = csv_bytes(path, &header_text(&pairs), &["r", "psi"], rows)?;
    write_atomic(path, &bytes)
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_trajectory(path: &Path, series: &RateSeries, params: &FlowParams) -> AppResult<()> {
    let rows = series.samples().iter().map(|s| {
        vec![
            num(s.t),
            num(s.sup_abs_u),
            num(s.grad_sup),
            num(s.deviation_sup),
            opt(s.symmetry_defect),
            num(s.g_current),
            num(s.injected_mu),
        ]
    });
    let columns = [
        "t",
        "sup_abs_u",
        "grad_sup",
        "deviation_sup",
        "symmetry_defect",
        "G_current",
        "injected_mu",
    ];
    let bytes = csv_bytes(path, &header_text(&params_pairs(params)), &columns, rows)?;
    write_atomic(path, &bytes)
}

pub fn write_lemma(path: &Path, records: &[LemmaRecord], n: u32, seed: u64) -> AppResult<()> {
    let pairs = [("n", n.to_string()), ("seed", seed.to_string())];
    let rows = records.iter().map(|r| {
        vec![
            num(r.s),
            num(r.t),
            num(r.alpha),
            num(r.f),
            num(r.bound.bound),
            r.bound.case.label().to_string(),
            num(r.bound.margin),
        ]
    });
    let columns = ["s", "t", "alpha", "F", "bound", "case", "margin"];
    let bytes = csv_bytes(path, &header_text(&pairs), &columns, rows)?;
    write_atomic(path, &bytes)
}
