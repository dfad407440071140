//! `ccx/1` files: JSON envelopes for artifacts, the space and path schemas,
//! and CSV matrix dumps that convert back to the same JSON bytes.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::convexity::ConvexityCertificate;
use crate::error::{CcxError, Result};
use crate::metric::{FiniteMetricSpace, PointId};
use crate::path::{DiscretePath, PathKind};
use crate::system::GeodesicSystem;

pub const FORMAT: &str = "ccx/1";

fn schema(msg: impl Into<String>) -> CcxError {
    CcxError::Schema(msg.into())
}

fn check_format(f: &str) -> Result<()> {
    if f != FORMAT {
        return Err(schema(format!("unsupported format tag {f:?}, expected {FORMAT:?}")));
    }
    Ok(())
}

/// Artifact wrapper. `kind` names the payload type.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub format: String,
    pub kind: String,
    pub body: T,
}

/// Pretty JSON with a trailing newline. Field order is fixed by the types,
/// so equal values give equal bytes.
pub fn to_canonical<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| schema(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn envelope<T: Serialize>(kind: &str, body: &T) -> Result<String> {
    to_canonical(&Envelope { format: FORMAT.into(), kind: kind.into(), body })
}

pub fn open_envelope<T: DeserializeOwned>(text: &str, kind: &str) -> Result<T> {
    let env: Envelope<serde_json::Value> = serde_json::from_str(text).map_err(parse_err)?;
    check_format(&env.format)?;
    if env.kind != kind {
        return Err(schema(format!("expected a {kind} artifact, found {}", env.kind)));
    }
    serde_json::from_value(env.body).map_err(parse_err)
}

/// Kind tag of an envelope without decoding its body.
pub fn peek_kind(text: &str) -> Result<String> {
    #[derive(Deserialize)]
    struct Head {
        format: String,
        kind: String,
    }
    let h: Head = serde_json::from_str(text).map_err(parse_err)?;
    check_format(&h.format)?;
    Ok(h.kind)
}

fn parse_err(e: serde_json::Error) -> CcxError {
    CcxError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub format: String,
    pub points: Vec<u64>,
    pub dist: Vec<Vec<f64>>,
    pub base: u64,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<[f64; 2]>>,
}

impl SpaceFile {
    pub fn from_space(space: &FiniteMetricSpace) -> Self {
        SpaceFile {
            format: FORMAT.into(),
            points: space.ids.clone(),
            dist: space.dense_matrix(),
            base: space.ids[space.base as usize],
            label: space.label.clone(),
            coords: space.coords.clone(),
        }
    }

    pub fn into_space(self) -> Result<FiniteMetricSpace> {
        check_format(&self.format)?;
        let coords = self.coords;
        if coords.as_ref().is_some_and(|c| c.len() != self.points.len()) {
            return Err(schema("coords length differs from points"));
        }
        let mut s = FiniteMetricSpace::from_matrix(self.points, self.dist, self.base, &self.label)?;
        s.coords = coords;
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: SpaceFile = serde_json::from_str(text).map_err(parse_err)?;
        check_format(&f.format)?;
        Ok(f)
    }

    pub fn to_json(&self) -> Result<String> {
        to_canonical(self)
    }

    /// Matrix dump: metadata rows, then one row per point led by its id.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
        let e = crate::products::csv_err;
        out.write_record(["format", &self.format]).map_err(e)?;
        out.write_record(["label", &self.label]).map_err(e)?;
        out.write_record(["base", &self.base.to_string()]).map_err(e)?;
        if let Some(c) = &self.coords {
            let mut xs = vec!["x".to_string()];
            let mut ys = vec!["y".to_string()];
            for p in c {
                xs.push(p[0].to_string());
                ys.push(p[1].to_string());
            }
            out.write_record(&xs).map_err(e)?;
            out.write_record(&ys).map_err(e)?;
        }
        let mut head = vec!["id".to_string()];
        head.extend(self.points.iter().map(|p| p.to_string()));
        out.write_record(&head).map_err(e)?;
        for (id, row) in self.points.iter().zip(&self.dist) {
            let mut rec = vec![id.to_string()];
            rec.extend(row.iter().map(|x| x.to_string()));
            out.write_record(&rec).map_err(e)?;
        }
        out.flush().map_err(CcxError::Io)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
        let mut meta: HashMap<String, Vec<String>> = HashMap::new();
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut in_matrix = false;
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| CcxError::Parse { line: line + 1, column: 0, message: e.to_string() })?;
            let f: Vec<String> = rec.iter().map(str::to_string).collect();
            if f.is_empty() {
                continue;
            }
            if in_matrix {
                rows.push(f);
            } else if f[0] == "id" {
                in_matrix = true;
                rows.push(f);
            } else {
                meta.insert(f[0].clone(), f[1..].to_vec());
            }
        }
        let one = |k: &str| -> Result<String> {
            meta.get(k).and_then(|v| v.first().cloned()).ok_or_else(|| schema(format!("missing {k} row")))
        };
        let format = one("format")?;
        check_format(&format)?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| schema(format!("bad number {s:?}")));
        let id = |s: &str| s.parse::<u64>().map_err(|_| schema(format!("bad id {s:?}")));
        let head = rows.first().ok_or_else(|| schema("missing id row"))?;
        let points = head[1..].iter().map(|s| id(s)).collect::<Result<Vec<_>>>()?;
        let mut dist = Vec::new();
        for (i, r) in rows[1..].iter().enumerate() {
            if i >= points.len() || id(&r[0])? != points[i] {
                return Err(schema(format!("matrix row {i} does not match the id header")));
            }
            dist.push(r[1..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?);
        }
        let coords = match (meta.get("x"), meta.get("y")) {
            (Some(xs), Some(ys)) => Some(
                xs.iter().zip(ys).map(|(x, y)| Ok([num(x)?, num(y)?])).collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };
        Ok(SpaceFile { format, points, dist, base: id(&one("base")?)?, label: one("label")?, coords })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireKind {
    Segment,
    Ray(f64),
}

/// Path with external point ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathFile {
    pub format: String,
    pub step: f64,
    pub values: Vec<u64>,
    pub lambda: f64,
    pub k: f64,
    pub kind: WireKind,
}

impl PathFile {
    pub fn from_path(p: &DiscretePath, space: &FiniteMetricSpace) -> Self {
        PathFile {
            format: FORMAT.into(),
            step: p.step,
            values: p.values.iter().map(|&v| space.ids[v as usize]).collect(),
            lambda: p.lambda,
            k: p.k,
            kind: match p.kind {
                PathKind::Segment => WireKind::Segment,
                PathKind::Ray { horizon } => WireKind::Ray(horizon),
            },
        }
    }

    pub fn into_path(self, space: &FiniteMetricSpace) -> Result<DiscretePath> {
        check_format(&self.format)?;
        let index: HashMap<u64, PointId> = space.ids.iter().enumerate().map(|(i, &p)| (p, i as PointId)).collect();
        let values = self
            .values
            .iter()
            .map(|v| index.get(v).copied().ok_or_else(|| schema(format!("path visits unknown point {v}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() || self.step.is_nan() || self.step <= 0.0 {
            return Err(schema("path needs a positive step and at least one value"));
        }
        let kind = match self.kind {
            WireKind::Segment => PathKind::Segment,
            WireKind::Ray(horizon) => PathKind::Ray { horizon },
        };
        Ok(DiscretePath { step: self.step, values, lambda: self.lambda, k: self.k, kind })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub format: String,
    pub segments: Vec<PathFile>,
    pub rays: Vec<PathFile>,
}

impl SystemFile {
    pub fn from_system(sys: &GeodesicSystem, space: &FiniteMetricSpace) -> Self {
        SystemFile {
            format: FORMAT.into(),
            segments: sys.segments.iter().map(|p| PathFile::from_path(p, space)).collect(),
            rays: sys.rays.iter().map(|p| PathFile::from_path(p, space)).collect(),
        }
    }

    pub fn into_system(self, space: &FiniteMetricSpace) -> Result<GeodesicSystem> {
        check_format(&self.format)?;
        let seg = self.segments.into_iter().map(|p| p.into_path(space)).collect::<Result<Vec<_>>>()?;
        let rays = self.rays.into_iter().map(|p| p.into_path(space)).collect::<Result<Vec<_>>>()?;
        Ok(GeodesicSystem::new(seg, rays))
    }
}

/// Plain-text rendering of a certificate and its derived constants.
pub fn certificate_table(cert: &ConvexityCertificate) -> String {
    let t = &cert.derived;
    let mut rows: Vec<(&str, String)> = vec![
        ("lambda", cert.lambda.to_string()),
        ("k", cert.k.to_string()),
        ("E", cert.e.to_string()),
        ("C", cert.c.to_string()),
        ("theta(0)", cert.theta.eval(0.0).to_string()),
    ];
    if let Some((a, b)) = cert.affine_theta {
        rows.push(("theta affine", format!("{a} t + {b}")));
    }
    rows.extend([
        ("k1", t.k1.to_string()),
        ("D", t.d.to_string()),
        ("D1", t.d1.to_string()),
        ("D2", t.d2.to_string()),
        ("D2'", t.d2p.to_string()),
        ("D3", t.d3.to_string()),
        ("D4", t.d4.to_string()),
        ("D5", t.d5.to_string()),
        ("D6", t.d6.to_string()),
        ("epsilon", t.epsilon.to_string()),
        ("epsilon_max", t.epsilon_max.to_string()),
        ("K", t.big_k.to_string()),
        ("seed", cert.seed.map_or("-".into(), |s| s.to_string())),
    ]);
    let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let mut out = format!("format {FORMAT}\n");
    for (k, v) in rows {
        out.push_str(&format!("{k:<w$}  {v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{gen_space, GeodesicPolicy, SpaceKind, SpaceRecipe};

    #[test]
    fn space_csv_roundtrip_is_bytewise() {
        let (s, _) = gen_space(&SpaceRecipe::new(SpaceKind::EuclideanL2Disc, 2, GeodesicPolicy::Affine)).unwrap();
        let f = SpaceFile::from_space(&s);
        let json = f.to_json().unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = SpaceFile::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn path_kind_wire_shape() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 2, GeodesicPolicy::Canonical)).unwrap();
        let seg = PathFile::from_path(&l.segments[0], &s);
        assert!(serde_json::to_string(&seg).unwrap().contains("\"kind\":\"segment\""));
        let ray = PathFile::from_path(&l.rays[0], &s);
        assert!(serde_json::to_string(&ray).unwrap().contains("\"kind\":{\"ray\":2.0}"));
        assert_eq!(ray.into_path(&s).unwrap(), l.rays[0]);
    }

    #[test]
    fn wrong_tag_rejected() {
        let text = r#"{"format":"ccx/2","points":[0],"dist":[[0]],"base":0,"label":"x"}"#;
        assert!(matches!(SpaceFile::parse(text), Err(CcxError::Schema(_))));
        assert!(matches!(SpaceFile::parse("{"), Err(CcxError::Parse { .. })));
    }

    #[test]
    fn envelope_kind_checked() {
        let s = envelope("thing", &3u32).unwrap();
        assert_eq!(peek_kind(&s).unwrap(), "thing");
        assert_eq!(open_envelope::<u32>(&s, "thing").unwrap(), 3);
        assert!(open_envelope::<u32>(&s, "other").is_err());
    }
}
