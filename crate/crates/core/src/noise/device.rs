//! Device models: coupling map, calibrated error rates, relaxation times,
//! readout confusion and gate durations, loaded from a sectioned text file.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::qstate::GateKind;
use crate::textio::{key_value, parse_f64, parse_usize, split_sections};

const DEFAULT_DURATION_1Q: f64 = 35e-9;
const DEFAULT_DURATION_2Q: f64 = 300e-9;
const DEFAULT_DURATION_MEASURE: f64 = 1000e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
enum QubitPat {
    Any,
    Only(usize),
}

impl QubitPat {
    fn matches(self, q: usize) -> bool {
        match self {
            QubitPat::Any => true,
            QubitPat::Only(x) => x == q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum KindPat {
    Any,
    Only(GateKind),
}

impl KindPat {
    fn matches(self, k: GateKind) -> bool {
        match self {
            KindPat::Any => true,
            KindPat::Only(x) => x == k,
        }
    }
}

/// Calibration data for one device. Later rules in a section override earlier
/// ones when both match.
#[derive(Debug, Clone)]
pub struct DeviceModel {
    pub n_physical: usize,
    pub coupling: BTreeSet<(usize, usize)>,
    rules_1q: Vec<(QubitPat, KindPat, f64)>,
    rules_2q: Vec<(QubitPat, QubitPat, f64)>,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    /// per-qubit `[P(1|0), P(0|1)]`
    readout: Vec<[f64; 2]>,
    dur_1q: f64,
    dur_2q: f64,
    pub dur_measure: f64,
    dur_kind: Vec<(GateKind, f64)>,
}

impl DeviceModel {
    /// A device with no noise at all: errors 0, infinite coherence, exact
    /// readout.
    pub fn noiseless(n_physical: usize, coupling: impl IntoIterator<Item = (usize, usize)>) -> Self {
        DeviceModel {
            n_physical,
            coupling: coupling.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect(),
            rules_1q: Vec::new(),
            rules_2q: Vec::new(),
            t1: vec![f64::INFINITY; n_physical],
            t2: vec![f64::INFINITY; n_physical],
            readout: vec![[0.0, 0.0]; n_physical],
            dur_1q: DEFAULT_DURATION_1Q,
            dur_2q: DEFAULT_DURATION_2Q,
            dur_measure: DEFAULT_DURATION_MEASURE,
            dur_kind: Vec::new(),
        }
    }

    pub fn coupled(&self, a: usize, b: usize) -> bool {
        self.coupling.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .coupling
            .iter()
            .filter_map(|&(a, b)| {
                if a == q {
                    Some(b)
                } else if b == q {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn err_1q(&self, qubit: usize, kind: GateKind) -> f64 {
        let mut e = 0.0;
        for &(qp, kp, v) in &self.rules_1q {
            if qp.matches(qubit) && kp.matches(kind) {
                e = v;
            }
        }
        e
    }

    pub fn err_2q(&self, a: usize, b: usize) -> f64 {
        let mut e = 0.0;
        for &(pa, pb, v) in &self.rules_2q {
            if (pa.matches(a) && pb.matches(b)) || (pa.matches(b) && pb.matches(a)) {
                e = v;
            }
        }
        e
    }

    /// 2×2 confusion matrix; rows = true state, columns = reported.
    pub fn confusion(&self, qubit: usize) -> [[f64; 2]; 2] {
        let [p10, p01] = self.readout[qubit];
        [[1.0 - p10, p10], [p01, 1.0 - p01]]
    }

    pub fn duration(&self, kind: GateKind) -> f64 {
        for &(k, d) in &self.dur_kind {
            if k == kind {
                return d;
            }
        }
        if kind.arity() == 2 { self.dur_2q } else { self.dur_1q }
    }

    pub fn validate(&self) -> Result<()> {
        for &(a, b) in &self.coupling {
            if a >= self.n_physical || b >= self.n_physical {
                return Err(Error::Validation(format!(
                    "topology: edge ({a},{b}) outside {} qubits",
                    self.n_physical
                )));
            }
            if a == b {
                return Err(Error::Validation(format!("topology: self-edge on qubit {a}")));
            }
        }
        for &(_, _, p) in &self.rules_1q {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("errors_1q: probability {p} outside [0,1]")));
            }
        }
        for &(_, _, p) in &self.rules_2q {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("errors_2q: probability {p} outside [0,1]")));
            }
        }
        for q in 0..self.n_physical {
            let (t1, t2) = (self.t1[q], self.t2[q]);
            if t1 <= 0.0 || t2 <= 0.0 {
                return Err(Error::Validation(format!("relaxation: non-positive time on qubit {q}")));
            }
            if t2 > 2.0 * t1 + 1e-12 {
                return Err(Error::Validation(format!(
                    "relaxation: t2 ({t2}) exceeds 2·t1 ({}) on qubit {q}",
                    2.0 * t1
                )));
            }
            let m = self.confusion(q);
            for (r, row) in m.iter().enumerate() {
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::Validation(format!(
                        "readout: probability outside [0,1] on qubit {q}"
                    )));
                }
                if (row[0] + row[1] - 1.0).abs() > 1e-9 {
                    return Err(Error::Validation(format!(
                        "readout: row {r} of qubit {q} does not sum to 1"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let sections = split_sections(text)?;
        let mut n_physical = None;
        let mut coupling = BTreeSet::new();
        let mut rules_1q = Vec::new();
        let mut rules_2q = Vec::new();
        let mut relax_rules: Vec<(QubitPat, f64, f64)> = Vec::new();
        let mut readout_rules: Vec<(QubitPat, f64, f64)> = Vec::new();
        let mut dur_1q = DEFAULT_DURATION_1Q;
        let mut dur_2q = DEFAULT_DURATION_2Q;
        let mut dur_measure = DEFAULT_DURATION_MEASURE;
        let mut dur_kind = Vec::new();

        let parse_qpat = |s: &str| -> Result<QubitPat> {
            if s == "*" { Ok(QubitPat::Any) } else { Ok(QubitPat::Only(parse_usize(s)?)) }
        };
        let parse_kpat = |s: &str| -> Result<KindPat> {
            if s == "*" {
                Ok(KindPat::Any)
            } else {
                GateKind::from_name(s)
                    .map(KindPat::Only)
                    .ok_or_else(|| Error::Parse(format!("errors_1q: unknown gate kind `{s}`")))
            }
        };

        for sec in &sections {
            match sec.name.as_str() {
                "topology" => {
                    for line in &sec.lines {
                        if line.contains('=') {
                            let (k, v) = key_value(line)?;
                            if k != "qubits" {
                                return Err(Error::Parse(format!("topology: unknown field `{k}`")));
                            }
                            n_physical = Some(parse_usize(v)?);
                        } else {
                            let mut it = line.split_whitespace();
                            let a = parse_usize(it.next().unwrap_or(""))?;
                            let b = parse_usize(
                                it.next().ok_or_else(|| Error::Parse("topology: edge needs two qubits".into()))?,
                            )?;
                            coupling.insert((a.min(b), a.max(b)));
                        }
                    }
                }
                "errors_1q" => {
                    for line in &sec.lines {
                        let f: Vec<&str> = line.split_whitespace().collect();
                        if f.len() != 3 {
                            return Err(Error::Parse(format!("errors_1q: expected `qubit kind prob`, got `{line}`")));
                        }
                        rules_1q.push((parse_qpat(f[0])?, parse_kpat(f[1])?, parse_f64(f[2])?));
                    }
                }
                "errors_2q" => {
                    for line in &sec.lines {
                        let f: Vec<&str> = line.split_whitespace().collect();
                        if f.len() != 3 {
                            return Err(Error::Parse(format!("errors_2q: expected `qubit qubit prob`, got `{line}`")));
                        }
                        rules_2q.push((parse_qpat(f[0])?, parse_qpat(f[1])?, parse_f64(f[2])?));
                    }
                }
                "relaxation" => {
                    for line in &sec.lines {
                        let f: Vec<&str> = line.split_whitespace().collect();
                        if f.len() != 3 {
                            return Err(Error::Parse(format!("relaxation: expected `qubit t1 t2`, got `{line}`")));
                        }
                        relax_rules.push((parse_qpat(f[0])?, parse_f64(f[1])?, parse_f64(f[2])?));
                    }
                }
                "readout" => {
                    for line in &sec.lines {
                        let f: Vec<&str> = line.split_whitespace().collect();
                        if f.len() != 3 {
                            return Err(Error::Parse(format!("readout: expected `qubit p10 p01`, got `{line}`")));
                        }
                        readout_rules.push((parse_qpat(f[0])?, parse_f64(f[1])?, parse_f64(f[2])?));
                    }
                }
                "durations" => {
                    for line in &sec.lines {
                        let f: Vec<&str> = line.split_whitespace().collect();
                        if f.len() != 2 {
                            return Err(Error::Parse(format!("durations: expected `kind seconds`, got `{line}`")));
                        }
                        let d = parse_f64(f[1])?;
                        match f[0] {
                            "1q" => dur_1q = d,
                            "2q" => dur_2q = d,
                            "measure" => dur_measure = d,
                            name => {
                                let kind = GateKind::from_name(name).ok_or_else(|| {
                                    Error::Parse(format!("durations: unknown gate kind `{name}`"))
                                })?;
                                dur_kind.push((kind, d));
                            }
                        }
                    }
                }
                other => return Err(Error::Parse(format!("unknown device section `{other}`"))),
            }
        }

        let n_physical = match n_physical {
            Some(n) => n,
            None => coupling.iter().map(|&(_, b)| b + 1).max().unwrap_or(0),
        };
        if n_physical == 0 {
            return Err(Error::Validation("topology: device has no qubits".into()));
        }

        let mut t1 = vec![f64::INFINITY; n_physical];
        let mut t2 = vec![f64::INFINITY; n_physical];
        for &(pat, a, b) in &relax_rules {
            for (q, (x, y)) in t1.iter_mut().zip(t2.iter_mut()).enumerate() {
                if pat.matches(q) {
                    *x = a;
                    *y = b;
                }
            }
        }
        let mut readout = vec![[0.0, 0.0]; n_physical];
        for &(pat, p10, p01) in &readout_rules {
            for (q, r) in readout.iter_mut().enumerate() {
                if pat.matches(q) {
                    *r = [p10, p01];
                }
            }
        }

        let model = DeviceModel {
            n_physical,
            coupling,
            rules_1q,
            rules_2q,
            t1,
            t2,
            readout,
            dur_1q,
            dur_2q,
            dur_measure,
            dur_kind,
        };
        model.validate()?;
        Ok(model)
    }
}

pub fn load_device_model(path: &Path) -> Result<DeviceModel> {
    let text = std::fs::read_to_string(path)?;
    DeviceModel::from_text(&text)
}

#[cfg(test)]
pub(crate) fn t_topology_fixture(err_1q: f64, err_2q: f64) -> String {
    format!(
        "[topology]\nqubits = 5\n0 1\n1 2\n1 3\n3 4\n\
         [errors_1q]\n* * {err_1q}\n* RZ 0\n\
         [errors_2q]\n* * {err_2q}\n\
         [relaxation]\n* 80e-6 100e-6\n\
         [readout]\n* 0.02 0.03\n\
         [durations]\n1q 35e-9\n2q 300e-9\nmeasure 1000e-9\nRZ 0\n"
    )
}
