//! JSON encodings of matrices, subspaces, germs and reports.
//!
//! Real matrices are nested arrays of rows. Complex entries are objects
//! `{"re": …, "im": …}`. Floats are written with 17 significant digits so
//! every value reads back bit for bit.

use std::io;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::angles::{ComplexSubspace, RealSubspace};
use crate::error::{ForgeError, Result};
use crate::fibration::GermSpec;
use crate::numeric::{CMatrix, RealLinearMap};

/// Pretty JSON formatter writing every `f64` as `{:.16e}`.
pub struct ExactFloatFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Default for ExactFloatFormatter<'_> {
    fn default() -> Self {
        Self {
            inner: PrettyFormatter::with_indent(b"  "),
        }
    }
}

impl Formatter for ExactFloatFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn end_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_key(w)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Pretty JSON with exact floats and a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloatFormatter::default());
    value
        .serialize(&mut ser)
        .expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn bad(msg: impl Into<String>) -> ForgeError {
    ForgeError::InvalidInput(msg.into())
}

fn as_f64(v: &Value, what: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(format!("{what}: expected a finite number, got {v}")))
}

fn as_complex(v: &Value, what: &str) -> Result<Complex64> {
    match v {
        Value::Number(_) => Ok(Complex64::new(as_f64(v, what)?, 0.0)),
        Value::Object(map) => {
            if map.keys().any(|k| k != "re" && k != "im") {
                return Err(bad(format!("{what}: complex entries take only \"re\" and \"im\"")));
            }
            let re = map.get("re").map(|x| as_f64(x, what)).transpose()?.unwrap_or(0.0);
            let im = map.get("im").map(|x| as_f64(x, what)).transpose()?.unwrap_or(0.0);
            Ok(Complex64::new(re, im))
        }
        _ => Err(bad(format!("{what}: expected a number or {{\"re\", \"im\"}}, got {v}"))),
    }
}

fn rows_of<'a>(v: &'a Value, what: &str) -> Result<Vec<&'a Vec<Value>>> {
    let rows = v
        .as_array()
        .ok_or_else(|| bad(format!("{what}: expected an array of rows")))?;
    if rows.is_empty() {
        return Err(bad(format!("{what}: matrix has no rows")));
    }
    let rows: Vec<&Vec<Value>> = rows
        .iter()
        .map(|r| r.as_array().ok_or_else(|| bad(format!("{what}: each row must be an array"))))
        .collect::<Result<_>>()?;
    let width = rows[0].len();
    if width == 0 || rows.iter().any(|r| r.len() != width) {
        return Err(bad(format!("{what}: rows must be nonempty and of equal length")));
    }
    Ok(rows)
}

/// Real matrix from an array of rows.
pub fn real_matrix_from_value(v: &Value, what: &str) -> Result<DMatrix<f64>> {
    let rows = rows_of(v, what)?;
    let (m, k) = (rows.len(), rows[0].len());
    let mut out = DMatrix::zeros(m, k);
    for (i, r) in rows.iter().enumerate() {
        for (j, e) in r.iter().enumerate() {
            out[(i, j)] = as_f64(e, what)?;
        }
    }
    Ok(out)
}

pub fn complex_matrix_from_value(v: &Value, what: &str) -> Result<CMatrix> {
    let rows = rows_of(v, what)?;
    let (m, k) = (rows.len(), rows[0].len());
    let mut out = CMatrix::zeros(m, k);
    for (i, r) in rows.iter().enumerate() {
        for (j, e) in r.iter().enumerate() {
            out[(i, j)] = as_complex(e, what)?;
        }
    }
    Ok(out)
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Serialize)]
pub struct ComplexEntry {
    pub re: f64,
    pub im: f64,
}

pub fn complex_rows(m: &CMatrix) -> Vec<Vec<ComplexEntry>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| ComplexEntry { re: z.re, im: z.im }).collect())
        .collect()
}

fn parse(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| bad(format!("malformed JSON: {e}")))
}

/// A linear map given either as an array of rows or as an object with the
/// rows under `"A"` or `"matrix"`.
pub fn parse_linear_map(text: &str) -> Result<RealLinearMap> {
    let v = parse(text)?;
    let rows = match &v {
        Value::Array(_) => &v,
        Value::Object(map) => map
            .get("A")
            .or_else(|| map.get("matrix"))
            .ok_or_else(|| bad("matrix object needs an \"A\" or \"matrix\" field"))?,
        _ => return Err(bad("expected a matrix")),
    };
    RealLinearMap::new(real_matrix_from_value(rows, "matrix")?)
}

#[derive(Debug, Clone)]
pub enum Subspace {
    Real(RealSubspace),
    Complex(ComplexSubspace),
}

fn object<'a>(v: &'a Value, allowed: &[&str], what: &str) -> Result<&'a serde_json::Map<String, Value>> {
    let map = v
        .as_object()
        .ok_or_else(|| bad(format!("{what}: expected a JSON object")))?;
    if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(bad(format!("{what}: unknown field \"{k}\"")));
    }
    Ok(map)
}

fn field<'a>(map: &'a serde_json::Map<String, Value>, key: &str, what: &str) -> Result<&'a Value> {
    map.get(key)
        .ok_or_else(|| bad(format!("{what}: missing field \"{key}\"")))
}

fn as_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| bad(format!("{what}: expected a nonnegative integer, got {v}")))
}

/// `{"ambient": m, "complex": bool, "basis": m × k rows}`; the basis is
/// orthonormalized.
pub fn parse_subspace(text: &str) -> Result<Subspace> {
    let v = parse(text)?;
    let map = object(&v, &["ambient", "complex", "basis"], "subspace")?;
    let ambient = as_usize(field(map, "ambient", "subspace")?, "ambient")?;
    let complex = field(map, "complex", "subspace")?
        .as_bool()
        .ok_or_else(|| bad("subspace: \"complex\" must be a boolean"))?;
    let basis = field(map, "basis", "subspace")?;
    let sub = if complex {
        let b = complex_matrix_from_value(basis, "basis")?;
        check_ambient(b.nrows(), ambient)?;
        Subspace::Complex(ComplexSubspace::spanned_by(&b)?)
    } else {
        let b = real_matrix_from_value(basis, "basis")?;
        check_ambient(b.nrows(), ambient)?;
        Subspace::Real(RealSubspace::spanned_by(&b)?)
    };
    Ok(sub)
}

fn check_ambient(rows: usize, ambient: usize) -> Result<()> {
    if rows != ambient {
        return Err(bad(format!("basis has {rows} rows but ambient is {ambient}")));
    }
    Ok(())
}

/// `{"n", "degree", "coeffs": [C₁, …, C_degree], "valid_radius"}` with
/// `C_d` a `2n × (2n)^d` array of rows.
pub fn parse_germ(text: &str) -> Result<GermSpec> {
    let v = parse(text)?;
    let map = object(&v, &["n", "degree", "coeffs", "valid_radius"], "germ")?;
    let n = as_usize(field(map, "n", "germ")?, "n")?;
    let degree = as_usize(field(map, "degree", "germ")?, "degree")?;
    let coeffs = field(map, "coeffs", "germ")?
        .as_array()
        .ok_or_else(|| bad("germ: \"coeffs\" must be an array"))?;
    if coeffs.len() != degree {
        return Err(bad(format!(
            "germ: degree is {degree} but {} coefficient tensors were given",
            coeffs.len()
        )));
    }
    let coeffs = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| real_matrix_from_value(c, &format!("coeffs[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    let radius = as_f64(field(map, "valid_radius", "germ")?, "valid_radius")?;
    GermSpec::new(n, coeffs, radius)
}

#[derive(Serialize)]
struct GermJson {
    n: usize,
    degree: usize,
    coeffs: Vec<Vec<Vec<f64>>>,
    valid_radius: f64,
}

pub fn germ_to_json(g: &GermSpec) -> String {
    to_json_string(&GermJson {
        n: g.n(),
        degree: g.degree(),
        coeffs: g.coeffs().iter().map(matrix_rows).collect(),
        valid_radius: g.valid_radius(),
    })
}
