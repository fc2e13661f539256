//! Plain-text profile and tensor files, the flow CSV, and JSON reports.

use std::fmt::Write as _;

use kfl_core::flow::{Sample, TimeSeries};
use kfl_core::geometry::{CurvatureTensor, MomentumProfile};
use kfl_core::linalg::CMatrix;
use kfl_core::C64;
use sha1::{Digest, Sha1};

use crate::error::HarnessError;

/// Column order of the flow CSV.
pub const FLOW_COLUMNS: [&str; 13] = [
    "t",
    "sup_u",
    "sup_grad_u",
    "sup_R",
    "sup_ric_minus_g",
    "int_R_minus_n_sq",
    "Y",
    "Z",
    "lambda",
    "futaki_proj",
    "chen_margin",
    "griffiths_margin",
    "soliton_residual",
];

fn header_fields<'a>(line: &'a str, tag: &str) -> Option<impl Iterator<Item = (&'a str, &'a str)>> {
    let rest = line.strip_prefix('#')?.trim_start().strip_prefix(tag)?;
    Some(rest.split_whitespace().filter_map(|kv| kv.split_once('=')))
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T, HarnessError> {
    s.parse().map_err(|_| HarnessError::Format(format!("line {line}: cannot parse {what} `{s}`")))
}

/// Serializes a profile as `# momentum-profile n=<n> m=<m>` followed by one θ per line.
pub fn write_profile(p: &MomentumProfile) -> String {
    let mut s = format!("# momentum-profile n={} m={}\n", p.n(), p.len());
    for v in p.theta() {
        let _ = writeln!(s, "{v}");
    }
    s
}

pub fn parse_profile(text: &str) -> Result<MomentumProfile, HarnessError> {
    let mut lines = text.lines().enumerate();
    let (n, m) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(HarnessError::Format("empty profile file".into()));
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields = header_fields(line, "momentum-profile")
            .ok_or_else(|| HarnessError::Format(format!("line {}: expected `# momentum-profile` header", i + 1)))?;
        let (mut n, mut m) = (None, None);
        for (k, v) in fields {
            match k {
                "n" => n = Some(parse_num::<usize>(v, "n", i + 1)?),
                "m" => m = Some(parse_num::<usize>(v, "m", i + 1)?),
                _ => {}
            }
        }
        match (n, m) {
            (Some(n), Some(m)) => break (n, m),
            _ => return Err(HarnessError::Format("profile header needs n= and m=".into())),
        }
    };
    let mut theta = Vec::with_capacity(m);
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = parse_num(line, "theta", i + 1)?;
        if !v.is_finite() {
            return Err(HarnessError::Format(format!("line {}: non-finite theta", i + 1)));
        }
        theta.push(v);
    }
    if theta.len() != m {
        return Err(HarnessError::Format(format!("header says m={m} but found {} values", theta.len())));
    }
    Ok(MomentumProfile::new(n, theta)?)
}

/// Serializes a tensor: header, optional `metric r c re im` lines, then `j i l k re im`.
pub fn write_tensor(t: &CurvatureTensor) -> String {
    let n = t.n();
    let mut s = format!("# curvature n={n}\n");
    for r in 0..n {
        for c in 0..n {
            let v = t.metric[(r, c)];
            let _ = writeln!(s, "metric {r} {c} {} {}", v.re, v.im);
        }
    }
    for j in 0..n {
        for i in 0..n {
            for l in 0..n {
                for k in 0..n {
                    let v = t.get(j, i, l, k);
                    let _ = writeln!(s, "{j} {i} {l} {k} {} {}", v.re, v.im);
                }
            }
        }
    }
    s
}

/// Parses a tensor file. Components not listed are zero; the metric defaults to
/// the identity.
pub fn parse_tensor(text: &str) -> Result<CurvatureTensor, HarnessError> {
    let mut n = None;
    let mut metric: Vec<(usize, usize, C64)> = Vec::new();
    let mut comps: Vec<([usize; 4], C64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(fields) = header_fields(line, "curvature") {
                for (k, v) in fields {
                    if k == "n" {
                        n = Some(parse_num::<usize>(v, "n", i + 1)?);
                    }
                }
            }
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.first() == Some(&"metric") {
            if tok.len() != 5 {
                return Err(HarnessError::Format(format!("line {}: metric line needs `metric r c re im`", i + 1)));
            }
            let z = C64::new(parse_num(tok[3], "re", i + 1)?, parse_num(tok[4], "im", i + 1)?);
            metric.push((parse_num(tok[1], "row", i + 1)?, parse_num(tok[2], "col", i + 1)?, z));
            continue;
        }
        if tok.len() != 6 {
            return Err(HarnessError::Format(format!("line {}: expected `j i l k re im`", i + 1)));
        }
        let mut idx = [0usize; 4];
        for (d, slot) in idx.iter_mut().enumerate() {
            *slot = parse_num(tok[d], "index", i + 1)?;
        }
        let z = C64::new(parse_num(tok[4], "re", i + 1)?, parse_num(tok[5], "im", i + 1)?);
        comps.push((idx, z));
    }
    let n = n.ok_or_else(|| HarnessError::Format("missing `# curvature n=` header".into()))?;
    if n == 0 {
        return Err(HarnessError::Format("dimension must be positive".into()));
    }
    let oob = |v: usize| v >= n;
    let mut g = CMatrix::identity(n);
    for (r, c, z) in metric {
        if oob(r) || oob(c) {
            return Err(HarnessError::Format(format!("metric index ({r}, {c}) out of range for n={n}")));
        }
        g[(r, c)] = z;
    }
    let mut t = CurvatureTensor::zeros(n, g);
    for (idx, z) in comps {
        if idx.iter().any(|&v| oob(v)) {
            return Err(HarnessError::Format(format!("component index {idx:?} out of range for n={n}")));
        }
        t.set(idx[0], idx[1], idx[2], idx[3], z);
    }
    Ok(t)
}

fn field(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(out, "{v}");
    }
}

fn row(s: &Sample) -> [Option<f64>; 13] {
    [
        Some(s.t),
        Some(s.sup_u),
        Some(s.sup_grad_u),
        Some(s.sup_r),
        Some(s.sup_ric_minus_g),
        Some(s.int_r_minus_n_sq),
        Some(s.y),
        Some(s.z),
        s.lambda,
        Some(s.futaki_proj),
        s.chen_margin,
        Some(s.griffiths_margin),
        Some(s.soliton_residual),
    ]
}

/// Flow CSV: one header line, missing expensive monitors left empty.
pub fn series_csv(series: &TimeSeries) -> String {
    let mut out = FLOW_COLUMNS.join(",");
    out.push('\n');
    for s in &series.samples {
        for (k, v) in row(s).into_iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            field(&mut out, v);
        }
        out.push('\n');
    }
    out
}

/// Content hash in the form git uses for blobs: `sha1("blob <len>\0" ++ bytes)`.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use kfl_core::geometry::{fubini_study_profile_on, frame_model_tensor};

    #[test]
    fn profile_round_trips_exactly() {
        let p = kfl_core::geometry::perturbed_profile(1, 33, 0.8, 0.1).unwrap();
        let q = parse_profile(&write_profile(&p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn profile_errors() {
        assert!(parse_profile("").is_err());
        assert!(parse_profile("0\n0.1\n").is_err());
        assert!(parse_profile("# momentum-profile n=1 m=3\n0\n0.25\n").is_err());
        assert!(parse_profile("# momentum-profile n=1 m=3\n0\nabc\n0\n").is_err());
        assert!(parse_profile("# momentum-profile n=1 m=3\n0\nNaN\n0\n").is_err());
        let fs = write_profile(&fubini_study_profile_on(2, 9).unwrap());
        assert_eq!(parse_profile(&fs).unwrap().n(), 2);
    }

    #[test]
    fn tensor_round_trips_exactly() {
        let t = frame_model_tensor(2, 0.7, 0.2, 0.55);
        let u = parse_tensor(&write_tensor(&t)).unwrap();
        assert_eq!(t.components(), u.components());
        assert!(parse_tensor("# curvature n=2\n0 0 0 2 1 0\n").is_err());
        assert!(parse_tensor("0 0 0 0 1 0\n").is_err());
    }

    #[test]
    fn git_hash_matches_known_blob() {
        // Values from `git hash-object --stdin`.
        assert_eq!(git_blob_hash(b"hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
        assert_eq!(git_blob_hash(b""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    }

    #[test]
    fn csv_leaves_missing_monitors_empty() {
        let s = Sample {
            t: 0.5,
            step: 1,
            sup_u: 1.0,
            sup_grad_u: 2.0,
            sup_r: 3.0,
            sup_r_minus_n: 0.0,
            sup_ric_minus_g: 4.0,
            int_r_minus_n_sq: 5.0,
            y: 6.0,
            z: 7.0,
            lambda: None,
            lambda_tilde: None,
            refinement_error: None,
            futaki_proj: 8.0,
            chen_margin: None,
            griffiths_margin: 9.0,
            soliton_residual: 10.0,
            osc_u: 0.0,
            nu: 1.0,
            volume_proxy: 1.0,
            volume_correction: 0.0,
        };
        let csv = series_csv(&TimeSeries { n: 1, grid_points: 3, samples: vec![s] });
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), 13);
        assert_eq!(lines.next().unwrap(), "0.5,1,2,3,4,5,6,7,,8,,9,10");
    }
}
