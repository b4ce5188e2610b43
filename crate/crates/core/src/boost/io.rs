//! Versioned text serialization of boosting models.
//!
//! The format is line oriented and self-describing: a header with the model
//! parameters, the per-round normalizers, then each tree as a preorder list
//! of `s <feature>` / `l <prediction>` lines. Floats are written with 17
//! fractional digits of scientific notation, which round-trips f64 exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::{BoostError, BoostMeta, BoostModel};
use crate::weaklearn::{TreeNode, WeakTree};
use crate::FeatureId;

const MAGIC: &str = "spamboost-model";
const VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("model file line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("unsupported model format: expected `{MAGIC} {VERSION}`, found `{found}`")]
    VersionMismatch { found: String },
    #[error("inconsistent model: {0}")]
    Inconsistent(#[from] BoostError),
}

pub fn save(model: &BoostModel, path: &Path) -> Result<(), ModelIoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<BoostModel, ModelIoError> {
    read_model(BufReader::new(File::open(path)?))
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn write_model<W: Write>(model: &BoostModel, w: &mut W) -> Result<(), ModelIoError> {
    let meta = model.meta();
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(w, "depth {}", meta.depth)?;
    writeln!(w, "rounds {}", meta.rounds)?;
    writeln!(w, "epsilon {}", fmt_f64(meta.epsilon))?;
    writeln!(w, "features {}", meta.num_features)?;
    match meta.vocab_fingerprint {
        Some(fp) => writeln!(w, "vocab_fingerprint {fp:016x}")?,
        None => writeln!(w, "vocab_fingerprint none")?,
    }
    write!(w, "z_history")?;
    for z in model.z_history() {
        write!(w, " {}", fmt_f64(*z))?;
    }
    writeln!(w)?;
    for (t, tree) in model.trees().iter().enumerate() {
        writeln!(w, "tree {t}")?;
        write_node(tree.root(), w)?;
        writeln!(w, "end")?;
    }
    Ok(())
}

fn write_node<W: Write>(node: &TreeNode, w: &mut W) -> Result<(), ModelIoError> {
    match node {
        TreeNode::Leaf { prediction } => writeln!(w, "l {}", fmt_f64(*prediction))?,
        TreeNode::Split { feature, holds, not } => {
            writeln!(w, "s {feature}")?;
            write_node(holds, w)?;
            write_node(not, w)?;
        }
    }
    Ok(())
}

struct Lines<B> {
    inner: B,
    lineno: usize,
}

impl<B: BufRead> Lines<B> {
    fn next_line(&mut self) -> Result<Option<String>, ModelIoError> {
        let mut buf = String::new();
        let n = self.inner.read_line(&mut buf)?;
        if n == 0 {
            return Ok(None);
        }
        self.lineno += 1;
        Ok(Some(buf.trim_end_matches(['\n', '\r']).to_owned()))
    }

    fn expect_line(&mut self) -> Result<String, ModelIoError> {
        self.next_line()?.ok_or(ModelIoError::Malformed {
            line: self.lineno + 1,
            msg: "unexpected end of file".into(),
        })
    }

    fn err(&self, msg: impl Into<String>) -> ModelIoError {
        ModelIoError::Malformed {
            line: self.lineno,
            msg: msg.into(),
        }
    }

    fn field<'a>(&self, line: &'a str, key: &str) -> Result<&'a str, ModelIoError> {
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| self.err(format!("expected `{key} <value>`, found `{line}`")))
    }
}

pub fn read_model<B: BufRead>(r: B) -> Result<BoostModel, ModelIoError> {
    let mut lines = Lines { inner: r, lineno: 0 };

    let header = lines.expect_line()?;
    if header != format!("{MAGIC} {VERSION}") {
        return Err(ModelIoError::VersionMismatch { found: header });
    }

    let line = lines.expect_line()?;
    let depth: usize = parse(&lines, lines.field(&line, "depth")?)?;
    let line = lines.expect_line()?;
    let rounds: usize = parse(&lines, lines.field(&line, "rounds")?)?;
    let line = lines.expect_line()?;
    let epsilon: f64 = parse(&lines, lines.field(&line, "epsilon")?)?;
    let line = lines.expect_line()?;
    let num_features: usize = parse(&lines, lines.field(&line, "features")?)?;
    let line = lines.expect_line()?;
    let fp_field = lines.field(&line, "vocab_fingerprint")?;
    let vocab_fingerprint = if fp_field == "none" {
        None
    } else {
        Some(
            u64::from_str_radix(fp_field, 16)
                .map_err(|_| lines.err(format!("bad fingerprint `{fp_field}`")))?,
        )
    };

    let line = lines.expect_line()?;
    let zs = lines.field(&line, "z_history").or_else(|_| {
        if line == "z_history" {
            Ok("")
        } else {
            Err(lines.err(format!("expected z_history, found `{line}`")))
        }
    })?;
    let mut z_history = Vec::with_capacity(rounds);
    for field in zs.split_whitespace() {
        z_history.push(parse::<f64, _>(&lines, field)?);
    }
    if z_history.len() != rounds {
        return Err(lines.err(format!(
            "z_history has {} entries for {} rounds",
            z_history.len(),
            rounds
        )));
    }

    let mut trees = Vec::with_capacity(rounds);
    for t in 0..rounds {
        let line = lines.expect_line()?;
        let idx: usize = parse(&lines, lines.field(&line, "tree")?)?;
        if idx != t {
            return Err(lines.err(format!("expected tree {t}, found tree {idx}")));
        }
        let root = read_node(&mut lines)?;
        let end = lines.expect_line()?;
        if end != "end" {
            return Err(lines.err(format!("expected `end`, found `{end}`")));
        }
        trees.push(WeakTree::from_root(root).map_err(|_| lines.err("tree root must be a split"))?);
    }

    let meta = BoostMeta {
        depth,
        rounds,
        epsilon,
        num_features,
        vocab_fingerprint,
    };
    Ok(BoostModel::from_parts(trees, z_history, meta)?)
}

fn read_node<B: BufRead>(lines: &mut Lines<B>) -> Result<TreeNode, ModelIoError> {
    let line = lines.expect_line()?;
    if let Some(rest) = line.strip_prefix("l ") {
        return Ok(TreeNode::Leaf {
            prediction: parse(lines, rest)?,
        });
    }
    if let Some(rest) = line.strip_prefix("s ") {
        let feature: FeatureId = parse(lines, rest)?;
        let holds = read_node(lines)?;
        let not = read_node(lines)?;
        return Ok(TreeNode::Split {
            feature,
            holds: Box::new(holds),
            not: Box::new(not),
        });
    }
    Err(lines.err(format!("expected `s <feature>` or `l <prediction>`, found `{line}`")))
}

fn parse<T: std::str::FromStr, B>(lines: &Lines<B>, field: &str) -> Result<T, ModelIoError> {
    field.trim().parse().map_err(|_| ModelIoError::Malformed {
        line: lines.lineno,
        msg: format!("cannot parse `{field}`"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::{train, TrainParams};
    use crate::dataset::synthesize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_preserves_scores_exactly() {
        let ds = synthesize(60, 12, 0.2, 6);
        let model = train(&ds, &TrainParams::new(10, 3))
            .unwrap()
            .with_vocab_fingerprint(0xdead_beef_0123_4567);

        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let loaded = read_model(buf.as_slice()).unwrap();

        assert_eq!(loaded.meta(), model.meta());
        assert_eq!(loaded.z_history(), model.z_history());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let row: Vec<FeatureId> = (0..12).filter(|_| rng.gen_bool(0.5)).collect();
            let a = model.score(&row);
            let b = loaded.score(&row);
            assert!((a - b).abs() <= 1e-12);
            assert_eq!(a.to_bits(), b.to_bits(), "text round trip must be exact");
        }
    }

    #[test]
    fn save_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let ds = synthesize(30, 6, 0.1, 2);
        let model = train(&ds, &TrainParams::new(4, 1)).unwrap();
        save(&model, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded.meta().depth, 1);
        assert_eq!(loaded.meta().rounds, model.rounds());
    }

    #[test]
    fn truncated_and_corrupt_files_fail() {
        let ds = synthesize(30, 6, 0.1, 2);
        let model = train(&ds, &TrainParams::new(4, 1)).unwrap();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();

        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            read_model(truncated.as_bytes()),
            Err(ModelIoError::Malformed { .. })
        ));

        let wrong_version = text.replacen("v1", "v9", 1);
        assert!(matches!(
            read_model(wrong_version.as_bytes()),
            Err(ModelIoError::VersionMismatch { .. })
        ));

        let garbled = text.replacen("s ", "q ", 1);
        assert!(read_model(garbled.as_bytes()).is_err());
    }
}
