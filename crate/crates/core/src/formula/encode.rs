//! Canonical byte encoding and JSON form of formulas.
//!
//! Byte encoding (prefix code, bit-exact):
//!
//! ```text
//! formula := 0x00 formula                 ¬f
//!          | 0x01 formula formula         f ∧ g
//!          | 0x02 formula formula         f ∨ g
//!          | 0x03 varint(pred) varint(len) letter{len}
//! letter  := 0x00                          x
//!          | 0x01                          y
//!          | 0x02 varint(index)            constant
//! ```
//!
//! `varint` is unsigned LEB128. JSON form:
//! `{"atom": {"pred": "P", "term": ["x", {"const": 3}]}}`, `{"not": f}`,
//! `{"and": [f, g]}`, `{"or": [f, g]}`.

use serde_json::{json, Value};

use super::{Formula, Letter, Term, Var};
use crate::error::{Error, Result};
use crate::semigroup::Element;

const NOT: u8 = 0x00;
const AND: u8 = 0x01;
const OR: u8 = 0x02;
const ATOM: u8 = 0x03;
const LETTER_X: u8 = 0x00;
const LETTER_Y: u8 = 0x01;
const LETTER_CONST: u8 = 0x02;

pub(crate) fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

pub(crate) fn varint_len(v: u64) -> usize {
    let mut out = Vec::new();
    write_varint(&mut out, v);
    out.len()
}

fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    let mut v: u64 = 0;
    let mut shift = 0;
    loop {
        let b = *bytes.get(*pos).ok_or_else(|| Error::Decode("truncated varint".into()))?;
        *pos += 1;
        if shift >= 64 || (shift == 63 && b > 1) {
            return Err(Error::Decode("varint overflow".into()));
        }
        v |= u64::from(b & 0x7f) << shift;
        if b & 0x80 == 0 {
            // reject non-minimal encodings so every formula has one byte string
            if b == 0 && shift > 0 {
                return Err(Error::Decode("non-minimal varint".into()));
            }
            return Ok(v);
        }
        shift += 7;
    }
}

fn encode_into(f: &Formula, out: &mut Vec<u8>) {
    match f {
        Formula::Not(g) => {
            out.push(NOT);
            encode_into(g, out);
        }
        Formula::And(a, b) => {
            out.push(AND);
            encode_into(a, out);
            encode_into(b, out);
        }
        Formula::Or(a, b) => {
            out.push(OR);
            encode_into(a, out);
            encode_into(b, out);
        }
        Formula::Atom { pred, term } => {
            out.push(ATOM);
            write_varint(out, *pred as u64);
            write_varint(out, term.letters().len() as u64);
            for l in term.letters() {
                match l {
                    Letter::Var(Var::X) => out.push(LETTER_X),
                    Letter::Var(Var::Y) => out.push(LETTER_Y),
                    Letter::Const(e) => {
                        out.push(LETTER_CONST);
                        write_varint(out, e.0);
                    }
                }
            }
        }
    }
}

pub fn encode(f: &Formula) -> Vec<u8> {
    let mut out = Vec::new();
    encode_into(f, &mut out);
    out
}

fn decode_at(bytes: &[u8], pos: &mut usize) -> Result<Formula> {
    let tag = *bytes.get(*pos).ok_or_else(|| Error::Decode("truncated formula".into()))?;
    *pos += 1;
    match tag {
        NOT => Ok(decode_at(bytes, pos)?.not()),
        AND => {
            let a = decode_at(bytes, pos)?;
            Ok(a.and(decode_at(bytes, pos)?))
        }
        OR => {
            let a = decode_at(bytes, pos)?;
            Ok(a.or(decode_at(bytes, pos)?))
        }
        ATOM => {
            let pred = read_varint(bytes, pos)? as usize;
            let len = read_varint(bytes, pos)?;
            if len == 0 || len > bytes.len() as u64 {
                return Err(Error::Decode(format!("bad term length {len}")));
            }
            let mut letters = Vec::with_capacity(len as usize);
            for _ in 0..len {
                let l = *bytes.get(*pos).ok_or_else(|| Error::Decode("truncated term".into()))?;
                *pos += 1;
                letters.push(match l {
                    LETTER_X => Letter::Var(Var::X),
                    LETTER_Y => Letter::Var(Var::Y),
                    LETTER_CONST => Letter::Const(Element(read_varint(bytes, pos)?)),
                    other => return Err(Error::Decode(format!("bad letter tag {other:#04x}"))),
                });
            }
            Ok(Formula::atom(pred, Term::new(letters)))
        }
        other => Err(Error::Decode(format!("bad formula tag {other:#04x}"))),
    }
}

/// Decodes a complete byte string; trailing bytes are an error.
pub fn decode(bytes: &[u8]) -> Result<Formula> {
    let mut pos = 0;
    let f = decode_at(bytes, &mut pos)?;
    if pos != bytes.len() {
        return Err(Error::Decode(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok(f)
}

pub fn to_json(f: &Formula, names: &[String]) -> Value {
    match f {
        Formula::Atom { pred, term } => {
            let letters: Vec<Value> = term
                .letters()
                .iter()
                .map(|l| match l {
                    Letter::Var(v) => json!(v.to_string()),
                    Letter::Const(e) => json!({ "const": e.0 }),
                })
                .collect();
            let name = names.get(*pred).cloned().unwrap_or_else(|| format!("#{pred}"));
            json!({ "atom": { "pred": name, "term": letters } })
        }
        Formula::Not(g) => json!({ "not": to_json(g, names) }),
        Formula::And(a, b) => json!({ "and": [to_json(a, names), to_json(b, names)] }),
        Formula::Or(a, b) => json!({ "or": [to_json(a, names), to_json(b, names)] }),
    }
}

pub fn from_json(v: &Value, names: &[String]) -> Result<Formula> {
    let bad = |m: &str| Error::Spec(format!("formula JSON: {m}: {v}"));
    let obj = v.as_object().ok_or_else(|| bad("expected an object"))?;
    if obj.len() != 1 {
        return Err(bad("expected exactly one key"));
    }
    let (key, body) = obj.iter().next().unwrap();
    let pair = |body: &Value| -> Result<(Formula, Formula)> {
        let arr = body.as_array().filter(|a| a.len() == 2).ok_or_else(|| bad("expected a pair"))?;
        Ok((from_json(&arr[0], names)?, from_json(&arr[1], names)?))
    };
    match key.as_str() {
        "not" => Ok(from_json(body, names)?.not()),
        "and" => pair(body).map(|(a, b)| a.and(b)),
        "or" => pair(body).map(|(a, b)| a.or(b)),
        "atom" => {
            let name = body.get("pred").and_then(Value::as_str).ok_or_else(|| bad("missing pred"))?;
            let pred = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Spec(format!("unknown predicate {name:?}")))?;
            let letters = body
                .get("term")
                .and_then(Value::as_array)
                .filter(|t| !t.is_empty())
                .ok_or_else(|| bad("term must be a nonempty array"))?
                .iter()
                .map(|l| match l {
                    Value::String(s) if s == "x" => Ok(Letter::Var(Var::X)),
                    Value::String(s) if s == "y" => Ok(Letter::Var(Var::Y)),
                    other => other
                        .get("const")
                        .and_then(Value::as_u64)
                        .map(|i| Letter::Const(Element(i)))
                        .ok_or_else(|| bad("bad letter")),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Formula::atom(pred, Term::new(letters)))
        }
        _ => Err(bad("unknown connective")),
    }
}
