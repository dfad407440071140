//! Serde adapters for `f64` fields that may hold infinities or NaN. JSON has
//! no such numbers and serde_json writes them as `null`, which then fails to
//! read back. These write `"inf"`, `"-inf"` or `"nan"` instead.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Wire {
    Num(f64),
    Tag(String),
}

fn to_wire(v: f64) -> Wire {
    if v.is_finite() {
        Wire::Num(v)
    } else if v.is_nan() {
        Wire::Tag("nan".into())
    } else if v > 0.0 {
        Wire::Tag("inf".into())
    } else {
        Wire::Tag("-inf".into())
    }
}

fn from_wire<E: serde::de::Error>(w: Wire) -> Result<f64, E> {
    match w {
        Wire::Num(v) => Ok(v),
        Wire::Tag(s) => match s.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            _ => Err(E::custom(format!("expected a number, \"inf\", \"-inf\" or \"nan\", got {s:?}"))),
        },
    }
}

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    to_wire(*v).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    from_wire(Wire::deserialize(d)?)
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&x| to_wire(x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Wire>::deserialize(d)?.into_iter().map(from_wire).collect()
    }
}

pub mod pairs {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[[f64; 2]], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|p| [to_wire(p[0]), to_wire(p[1])]))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<[f64; 2]>, D::Error> {
        Vec::<[Wire; 2]>::deserialize(d)?
            .into_iter()
            .map(|[a, b]| Ok([from_wire(a)?, from_wire(b)?]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    #[derive(serde::Serialize, serde::Deserialize, Debug)]
    struct T {
        #[serde(with = "super")]
        x: f64,
        #[serde(with = "super::vec")]
        v: Vec<f64>,
    }

    #[test]
    fn non_finite_values_survive_json() {
        let t = T { x: f64::NEG_INFINITY, v: vec![1.5, f64::INFINITY, f64::NAN] };
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"x":"-inf","v":[1.5,"inf","nan"]}"#);
        let back: T = serde_json::from_str(&s).unwrap();
        assert_eq!(back.x, f64::NEG_INFINITY);
        assert_eq!(back.v[..2], [1.5, f64::INFINITY]);
        assert!(back.v[2].is_nan());
        assert!(serde_json::from_str::<T>(r#"{"x":"big","v":[]}"#).is_err());
    }
}
