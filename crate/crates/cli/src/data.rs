//! Data files and input resolution.

use std::fs;
use std::path::Path;

use qcausal::scenario::{
    cell_index, exact_probabilities, partial_swap_scenario, swap_mixture_scenario, CountTableJson,
    Tuple,
};
use qcausal::serial::OperatorJson;
use qcausal::{CausalMap, CountTable, Distribution, Outcome, PauliIndex, Scheme};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::failure::{library, Classify, Failure, Kind};
use crate::manifest::Manifest;
use crate::{CmdResult, InputArgs, ScenarioKind, SchemeArg};

pub const DEFAULT_EXACT_N: u64 = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactEntry {
    pub s: u8,
    pub t: Option<u8>,
    pub u: u8,
    pub l: Option<i8>,
    pub k: i8,
    pub m: i8,
    pub probability: f64,
}

/// Analytic probabilities in the layout of a count table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactFile {
    pub scheme: Scheme,
    #[serde(rename = "N")]
    pub n: u64,
    pub entries: Vec<ExactEntry>,
}

impl ExactFile {
    pub fn from_distribution(dist: &Distribution, n: u64) -> Self {
        let mut entries = Vec::with_capacity(dist.probs().len());
        for tuple in dist.scheme().tuples() {
            for k in Outcome::BOTH {
                for m in Outcome::BOTH {
                    entries.push(ExactEntry {
                        s: tuple.s.value(),
                        t: tuple.t.map(|t| t.value()),
                        u: tuple.u.value(),
                        l: tuple.l.map(|l| l.value()),
                        k: k.value(),
                        m: m.value(),
                        probability: dist.get(&tuple, k, m),
                    });
                }
            }
        }
        Self {
            scheme: dist.scheme(),
            n,
            entries,
        }
    }

    pub fn to_distribution(&self) -> qcausal::Result<Distribution> {
        let bad = |msg: String| qcausal::Error::Format(msg);
        let mut probs = vec![None; self.scheme.cell_count()];
        for e in &self.entries {
            let tuple = match (self.scheme, e.t, e.l) {
                (Scheme::Interventionist, Some(t), Some(l)) => Tuple::intervention(
                    PauliIndex::new(e.s)?,
                    PauliIndex::new(t)?,
                    PauliIndex::new(e.u)?,
                    Outcome::new(l)?,
                ),
                (Scheme::Passive, None, None) => {
                    Tuple::passive(PauliIndex::new(e.s)?, PauliIndex::new(e.u)?)
                }
                _ => return Err(bad(format!("entry {e:?} does not match the scheme"))),
            };
            let idx = cell_index(&tuple, Outcome::new(e.k)?, Outcome::new(e.m)?);
            if probs[idx].replace(e.probability).is_some() {
                return Err(bad(format!("duplicate entry {e:?}")));
            }
        }
        let probs = probs
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad("missing entries".into()))?;
        Distribution::new(self.scheme, probs)
    }
}

#[derive(Clone, Debug)]
pub enum Stats {
    Counts(CountTable),
    Exact { dist: Distribution, n: u64 },
}

#[derive(Clone, Debug)]
pub struct Data {
    pub stats: Stats,
    /// Scenario behind the data, when known
    pub scenario: Option<(ScenarioKind, f64)>,
}

impl Data {
    pub fn scheme(&self) -> Scheme {
        match &self.stats {
            Stats::Counts(t) => t.scheme(),
            Stats::Exact { dist, .. } => dist.scheme(),
        }
    }

    pub fn shots(&self) -> u64 {
        match &self.stats {
            Stats::Counts(t) => t.shots(),
            Stats::Exact { n, .. } => *n,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.stats, Stats::Exact { .. })
    }
}

pub fn scenario_map(kind: ScenarioKind, param: f64) -> CmdResult<CausalMap> {
    if !param.is_finite() {
        return Err(Failure::msg(Kind::Usage, "--param must be finite"));
    }
    match kind {
        ScenarioKind::SwapMix => {
            if !(0.0..=1.0).contains(&param) {
                return Err(Failure::msg(
                    Kind::Usage,
                    format!("swap-mix needs p in [0, 1], got {param}"),
                ));
            }
            swap_mixture_scenario(param).map_err(library)
        }
        ScenarioKind::PartialSwap => partial_swap_scenario(param).map_err(library),
    }
}

pub fn read_json(path: &Path) -> CmdResult<Value> {
    let text = fs::read_to_string(path)
        .or_fail_with(Kind::Io, || format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text)
        .or_fail_with(Kind::Parse, || format!("{} is not JSON", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).or_fail_with(Kind::Io, || format!("cannot write {}", path.display()))
}

/// Pretty JSON with the manifest under a top-level "manifest" key.
pub fn write_with_manifest(path: &Path, manifest: &Manifest, body: impl Serialize) -> CmdResult {
    let mut value = serde_json::to_value(body).expect("plain data");
    let obj = value.as_object_mut().expect("object body");
    obj.insert(
        "manifest".into(),
        serde_json::to_value(manifest).expect("plain data"),
    );
    let mut text = serde_json::to_string_pretty(&value).expect("plain data");
    text.push('\n');
    write_text(path, &text)
}

fn manifest_of(v: &Value) -> Option<Manifest> {
    serde_json::from_value(v.get("manifest")?.clone()).ok()
}

/// Scenario, parameter and scheme recorded by `simulate`.
fn recorded_scenario(m: &Manifest) -> (Option<ScenarioKind>, Option<f64>, Option<SchemeArg>) {
    let p = &m.parameters;
    let kind = p
        .get("scenario")
        .and_then(|v| serde_json::from_value(v.clone()).ok());
    let param = p.get("param").and_then(Value::as_f64);
    let scheme = p.get("scheme").and_then(|v| match v.as_str()? {
        "interventionist" => Some(SchemeArg::Interventionist),
        "passive" => Some(SchemeArg::Passive),
        _ => None,
    });
    (kind, param, scheme)
}

pub fn load_data_file(path: &Path) -> CmdResult<(Data, Option<Manifest>)> {
    let v = read_json(path)?;
    let manifest = manifest_of(&v);
    let is_exact = v
        .get("entries")
        .and_then(|e| e.get(0))
        .is_some_and(|e| e.get("probability").is_some());
    let stats = if is_exact {
        let f: ExactFile = serde_json::from_value(v).or_fail_with(Kind::Parse, || {
            format!("malformed distribution {}", path.display())
        })?;
        let dist = f
            .to_distribution()
            .map_err(|e| Failure::new(Kind::Parse, e))?;
        Stats::Exact { dist, n: f.n }
    } else {
        let j: CountTableJson = serde_json::from_value(v).or_fail_with(Kind::Parse, || {
            format!("malformed count table {}", path.display())
        })?;
        Stats::Counts(CountTable::from_json_value(&j).map_err(|e| Failure::new(Kind::Parse, e))?)
    };
    let scenario = manifest.as_ref().and_then(|m| match recorded_scenario(m) {
        (Some(k), Some(p), _) => Some((k, p)),
        _ => None,
    });
    Ok((Data { stats, scenario }, manifest))
}

/// Statistics for a consumer command. With `--exact` the scenario comes
/// from the flags, falling back to the manifest of `--in`.
pub fn resolve(input: &InputArgs) -> CmdResult<Data> {
    if !input.exact {
        let path = input
            .input
            .as_ref()
            .ok_or_else(|| Failure::msg(Kind::Usage, "--in is required unless --exact is given"))?;
        return Ok(load_data_file(path)?.0);
    }
    let (mut kind, mut param, mut scheme, mut n) =
        (input.scenario, input.param, input.scheme, input.n);
    if let Some(path) = &input.input {
        let (data, manifest) = load_data_file(path)?;
        if let Some(m) = &manifest {
            let (k, p, s) = recorded_scenario(m);
            kind = kind.or(k);
            param = param.or(p);
            scheme = scheme.or(s);
        }
        scheme = scheme.or(Some(match data.scheme() {
            Scheme::Interventionist => SchemeArg::Interventionist,
            Scheme::Passive => SchemeArg::Passive,
        }));
        n = n.or(Some(data.shots()));
    }
    let missing = |what: &str| {
        Failure::msg(
            Kind::Usage,
            format!("--exact needs {what} (on the command line or in the manifest of --in)"),
        )
    };
    let kind = kind.ok_or_else(|| missing("--scenario"))?;
    let param = param.ok_or_else(|| missing("--param"))?;
    let scheme: Scheme = scheme.ok_or_else(|| missing("--scheme"))?.into();
    let n = n.unwrap_or(DEFAULT_EXACT_N);
    if n == 0 {
        return Err(Failure::msg(Kind::Usage, "N must be positive"));
    }
    let dist = exact_probabilities(&scenario_map(kind, param)?, scheme).map_err(library)?;
    Ok(Data {
        stats: Stats::Exact { dist, n },
        scenario: Some((kind, param)),
    })
}

/// A causal map JSON: either an operator object or a file with a "map" key.
pub fn load_map(path: &Path) -> CmdResult<CausalMap> {
    let v = read_json(path)?;
    let op = v.get("map").cloned().unwrap_or(v);
    let op: OperatorJson = serde_json::from_value(op).or_fail_with(Kind::Parse, || {
        format!("{} is not an operator", path.display())
    })?;
    CausalMap::try_from(&op).map_err(|e| Failure::new(Kind::Validation, e))
}

/// `lo:hi:step` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> CmdResult<Vec<f64>> {
    let bad = || Failure::msg(Kind::Usage, format!("bad grid {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        // multiply rather than accumulate so grid values are exact decimals
        // whenever the step is
        (0..=count)
            .map(|i| {
                let v = lo + i as f64 * step;
                (v * 1e12).round() / 1e12
            })
            .collect()
    } else {
        spec.split(',').map(num).collect::<CmdResult<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Failure::msg(
            Kind::Usage,
            format!("grid {spec:?} must be non-empty and inside [0, 1]"),
        ));
    }
    Ok(grid)
}
