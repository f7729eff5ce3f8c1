//! Per-stage checkpoint files.
//!
//! ```text
//! ahlfors-checkpoint 1
//! stage 2
//! radius 0x1p+1
//! epsilon 0x1.5p-8
//! margin 0x1p-1
//! disc 0x0p+0 0x0p+0 0x1p+1 1 3
//! c 0 <re> <im> <im> ...   (one line per coordinate: index, then re/im pairs)
//! row t1.eps_halving <lhs> <bound> 1
//! end
//! ```
//!
//! Floats are C99 hexadecimal so that a reload is bit-identical.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::disc::LiftedDisc;
use crate::error::{Error, Result};
use crate::hexfloat;
use crate::pipeline::{LedgerRow, StageCheckpoint};

pub const HEADER: &str = "ahlfors-checkpoint 1";

pub fn encode(cp: &StageCheckpoint) -> String {
    let h = hexfloat::format;
    let d = &cp.disc;
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str(&format!("stage {}\n", cp.stage));
    out.push_str(&format!("radius {}\n", h(cp.radius)));
    out.push_str(&format!("epsilon {}\n", h(cp.epsilon)));
    out.push_str(&format!("margin {}\n", h(cp.margin)));
    let coeffs = d.scaled_coeffs();
    out.push_str(&format!(
        "disc {} {} {} {} {}\n",
        h(d.center().re),
        h(d.center().im),
        h(d.radius()),
        d.dim(),
        coeffs.first().map_or(0, Vec::len)
    ));
    for (a, c) in coeffs.iter().enumerate() {
        out.push_str(&format!("c {a}"));
        for v in c {
            out.push_str(&format!(" {} {}", h(v.re), h(v.im)));
        }
        out.push('\n');
    }
    for r in &cp.rows {
        out.push_str(&format!("row {} {} {} {}\n", r.slot, h(r.lhs), h(r.bound), u8::from(r.pass)));
    }
    out.push_str("end\n");
    out
}

pub fn decode(text: &str) -> Result<StageCheckpoint> {
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, msg: &str| Error::Checkpoint(format!("line {}: {msg}", line + 1));
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((_, other)) if other.starts_with("ahlfors-checkpoint ") => {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {other:?}")));
        }
        _ => return Err(Error::Checkpoint("missing checkpoint header".into())),
    }
    let mut field = |name: &str| -> Result<(usize, Vec<String>)> {
        let (i, line) = lines.next().ok_or_else(|| Error::Checkpoint(format!("missing {name} line")))?;
        let mut parts = line.split_whitespace().map(str::to_string);
        if parts.next().as_deref() != Some(name) {
            return Err(bad(i, &format!("expected {name}")));
        }
        Ok((i, parts.collect()))
    };
    let one = |(i, v): (usize, Vec<String>)| -> Result<(usize, String)> {
        match v.as_slice() {
            [x] => Ok((i, x.clone())),
            _ => Err(bad(i, "expected one value")),
        }
    };
    let (i, s) = one(field("stage")?)?;
    let stage: usize = s.parse().map_err(|_| bad(i, "stage is not an integer"))?;
    let radius = hexfloat::parse(&one(field("radius")?)?.1)?;
    let epsilon = hexfloat::parse(&one(field("epsilon")?)?.1)?;
    let margin = hexfloat::parse(&one(field("margin")?)?.1)?;
    let (i, disc) = field("disc")?;
    if disc.len() != 5 {
        return Err(bad(i, "disc line needs center re/im, radius, dim and length"));
    }
    let center = Complex64::new(hexfloat::parse(&disc[0])?, hexfloat::parse(&disc[1])?);
    let disc_radius = hexfloat::parse(&disc[2])?;
    let dim: usize = disc[3].parse().map_err(|_| bad(i, "dimension is not an integer"))?;
    let len: usize = disc[4].parse().map_err(|_| bad(i, "length is not an integer"))?;
    let mut coeffs = Vec::with_capacity(dim);
    for a in 0..dim {
        let (i, v) = field("c")?;
        if v.first().map(String::as_str) != Some(&a.to_string()) || v.len() != 1 + 2 * len {
            return Err(bad(i, &format!("coefficient line {a} malformed")));
        }
        let vals = v[1..]
            .chunks(2)
            .map(|p| Ok(Complex64::new(hexfloat::parse(&p[0])?, hexfloat::parse(&p[1])?)))
            .collect::<Result<Vec<_>>>()?;
        coeffs.push(vals);
    }
    let mut rows = Vec::new();
    loop {
        let (i, line) = lines.next().ok_or_else(|| Error::Checkpoint("missing end line".into()))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["end"] => break,
            ["row", slot, lhs, bound, pass] => rows.push(LedgerRow {
                stage,
                slot: slot.to_string(),
                lhs: hexfloat::parse(lhs)?,
                bound: hexfloat::parse(bound)?,
                pass: match *pass {
                    "1" => true,
                    "0" => false,
                    _ => return Err(bad(i, "pass flag must be 0 or 1")),
                },
            }),
            _ => return Err(bad(i, "expected a ledger row or end")),
        }
    }
    if lines.any(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::Checkpoint("trailing content after end".into()));
    }
    let disc = LiftedDisc::from_scaled(center, disc_radius, coeffs)?;
    Ok(StageCheckpoint { stage, radius, epsilon, margin, disc, rows })
}

pub fn file_name(stage: usize) -> String {
    format!("stage_{stage:03}.ckpt")
}

/// Writes `cp` into `dir` through a temporary file and a rename.
pub fn write(dir: &Path, cp: &StageCheckpoint) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(file_name(cp.stage));
    let tmp = dir.join(format!(".{}.tmp", file_name(cp.stage)));
    fs::write(&tmp, encode(cp))?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

pub fn read(path: &Path) -> Result<StageCheckpoint> {
    decode(&fs::read_to_string(path)?)
}

/// All `stage_*.ckpt` files in `dir`, ordered by stage.
pub fn read_all(dir: &Path) -> Result<Vec<StageCheckpoint>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("stage_") && n.ends_with(".ckpt"))
        })
        .collect();
    paths.sort();
    let mut out: Vec<StageCheckpoint> = paths.iter().map(|p| read(p)).collect::<Result<_>>()?;
    out.sort_by_key(|c| c.stage);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(coeffs: Vec<Vec<Complex64>>) -> StageCheckpoint {
        StageCheckpoint {
            stage: 2,
            radius: 2.0,
            epsilon: 0.1f64.powi(3) / 3.0,
            margin: 0.5,
            disc: LiftedDisc::from_scaled(Complex64::new(0.0, 0.0), 2.0, coeffs).unwrap(),
            rows: vec![
                LedgerRow { stage: 2, slot: "t2.extend_sup".into(), lhs: 0.0, bound: 1e-4, pass: true },
                LedgerRow { stage: 2, slot: "t3.ratio".into(), lhs: 0.3, bound: 0.25, pass: false },
            ],
        }
    }

    #[test]
    fn round_trip_and_rejections() {
        let cp = sample(vec![vec![Complex64::new(0.1, -0.2), Complex64::new(1.0 / 3.0, 0.0)]]);
        let text = encode(&cp);
        assert!(text.starts_with(HEADER));
        assert_eq!(decode(&text).unwrap(), cp);
        assert!(decode(&text.replace(HEADER, "ahlfors-checkpoint 2")).is_err());
        assert!(decode(&text.replace("end\n", "")).is_err());
        assert!(decode(&text.replace("stage 2", "stage x")).is_err());
    }

    #[test]
    fn files_are_found_in_stage_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = sample(vec![vec![Complex64::new(1.0, 0.0)]]);
        a.stage = 10;
        a.rows.clear();
        let mut b = a.clone();
        b.stage = 9;
        write(dir.path(), &a).unwrap();
        write(dir.path(), &b).unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let all = read_all(dir.path()).unwrap();
        assert_eq!(all.iter().map(|c| c.stage).collect::<Vec<_>>(), vec![9, 10]);
    }

    proptest! {
        #[test]
        fn coefficients_survive_bit_exactly(re in proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..12)) {
            let c: Vec<Complex64> = re.iter().map(|&x| Complex64::new(x, -x / 7.0)).collect();
            let cp = sample(vec![c.clone(), c]);
            let back = decode(&encode(&cp)).unwrap();
            for (u, v) in back.disc.scaled_coeffs()[0].iter().zip(&cp.disc.scaled_coeffs()[0]) {
                prop_assert_eq!(u.re.to_bits(), v.re.to_bits());
                prop_assert_eq!(u.im.to_bits(), v.im.to_bits());
            }
        }
    }
}
