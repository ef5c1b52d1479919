//! JSON-lines transcripts of forge runs and their replay verifier.
//!
//! Line 1 is a header carrying everything needed to rebuild the run; each
//! further line records one stage. Replaying re-runs every step and compares
//! records byte for byte, then re-checks invariant flags and claim pairs by
//! direct evaluation.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{verify_claim_pair, ClaimOutcome, Forge, ForgeConfig, ForgeState, StageRecord};
use crate::error::{Error, Result};
use crate::formula::{from_json, to_json, Formula, StructureContext};
use crate::spec::StructureSpec;
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub schema: String,
    pub record: String,
    pub structure: StructureSpec,
    pub x: Value,
    pub config: ForgeConfig,
    pub stages: usize,
}

impl TranscriptHeader {
    pub fn new(structure: StructureSpec, ctx: &StructureContext, x: &Formula, config: ForgeConfig, stages: usize) -> Self {
        TranscriptHeader {
            schema: SCHEMA_VERSION.into(),
            record: "header".into(),
            structure,
            x: to_json(x, ctx.names()),
            config,
            stages,
        }
    }

    /// Rebuilds the forge described by the header.
    pub fn forge(&self) -> Result<Forge> {
        if self.schema != SCHEMA_VERSION || self.record != "header" {
            return Err(Error::Transcript(format!("unsupported header {:?}/{:?}", self.schema, self.record)));
        }
        let ctx = self.structure.build()?;
        let x = from_json(&self.x, ctx.names())?;
        Forge::new(ctx, x, self.config)
    }
}

pub fn record_json(ctx: &StructureContext, rec: &StageRecord) -> Value {
    let names = ctx.names();
    let claim = match rec.claim {
        Some(ClaimOutcome::Pair { u, v }) => json!([u, v]),
        Some(ClaimOutcome::Exhausted) => json!("exhausted"),
        None => Value::Null,
    };
    let invariants = match &rec.invariants {
        Some(r) => json!({ "pass": r.all_pass(), "conditions": r.conditions }),
        None => Value::Null,
    };
    json!({
        "record": "stage",
        "stage": rec.stage,
        "phi": {
            "index": rec.phi.index,
            "formula": to_json(&rec.phi.formula, names),
            "positive": rec.phi.positive,
            "at_bounds": rec.phi.at_bounds,
        },
        "psi": {
            "index": rec.psi.index,
            "formula": to_json(&rec.psi.formula, names),
            "accepted": rec.psi.accepted,
            "witness_u": rec.psi.witness_u,
            "at_bounds": rec.psi.at_bounds,
        },
        "J": rec.j,
        "claim_witness": claim,
        "invariants": invariants,
    })
}

pub fn write_transcript(header: &TranscriptHeader, ctx: &StructureContext, records: &[StageRecord]) -> Result<String> {
    let mut out = serde_json::to_string(header)?;
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(&record_json(ctx, r))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_transcript(text: &str) -> Result<(TranscriptHeader, Vec<Value>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines.next().ok_or_else(|| Error::Transcript("empty transcript".into()))?;
    let header: TranscriptHeader =
        serde_json::from_str(first).map_err(|e| Error::Transcript(format!("bad header: {e}")))?;
    let records = lines
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Transcript(format!("line {}: {e}", i + 2))))
        .collect::<Result<Vec<Value>>>()?;
    Ok((header, records))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub stages: usize,
    pub failures: Vec<String>,
}

/// Replays a transcript, returning the rebuilt forge and final state with the report.
pub fn verify_transcript(text: &str) -> Result<(Forge, ForgeState, VerifyReport)> {
    let (header, records) = read_transcript(text)?;
    let forge = header.forge()?;
    let ctx = forge.context().clone();
    let mut state = forge.init()?;
    let mut failures = Vec::new();
    if records.len() != header.stages {
        failures.push(format!("header announces {} stages, found {}", header.stages, records.len()));
    }
    for (i, recorded) in records.iter().enumerate() {
        state = forge.advance(&state)?;
        let rec = state.records.last().expect("advance records the stage");
        if record_json(&ctx, rec) != *recorded {
            failures.push(format!("stage {}: record differs from replay", i + 1));
        }
        if recorded["invariants"]["pass"] != Value::Bool(true) {
            failures.push(format!("stage {}: recorded invariants do not pass", i + 1));
        }
        // claim pairs are re-checked against the recorded sets, not the replay
        if let Some(pair) = recorded["claim_witness"].as_array() {
            let (u, v) = match (pair.first().and_then(Value::as_u64), pair.get(1).and_then(Value::as_u64)) {
                (Some(u), Some(v)) => (u, v),
                _ => {
                    failures.push(format!("stage {}: malformed claim witness", i + 1));
                    continue;
                }
            };
            let a: Vec<Formula> = state.a_formulas().cloned().collect();
            let ok = verify_claim_pair(&ctx, &a, &state.b, crate::Element(u), crate::Element(v))?;
            if !ok {
                failures.push(format!("stage {}: claim pair ({u}, {v}) fails evaluation", i + 1));
            }
        }
    }
    let report = VerifyReport { ok: failures.is_empty(), stages: records.len(), failures };
    Ok((forge, state, report))
}
