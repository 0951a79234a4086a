//! Ensemble description read by the `bounds` command.
//!
//! ```text
//! # lines starting with '#' are comments
//! states 3
//! target
//! 0.5 0.3 0.2
//! 0.1 0.6 0.3
//! 0.3 0.2 0.5
//! chains 18 target init=stationary
//! chains 2 init=uniform
//! 0.4 0.3 0.3
//! 0.3 0.4 0.3
//! 0.3 0.3 0.4
//! corrupted 1
//! ```
//!
//! `clean <count>` is shorthand for `chains <count> target init=stationary`.
//! A `chains` line without `target` is followed by its own matrix. `init`
//! accepts `uniform`, `stationary` (the default) or `point:i`.

use mce_core::bounds::ChainModel;
use mce_core::spectral::{pseudo_spectral_gap_with, stationary_distribution};
use mce_core::{Distribution, Error, InitPolicy, Result, StochasticMatrix};

#[derive(Debug, Clone)]
pub struct ModelBlock {
    pub count: usize,
    pub transition: StochasticMatrix,
    pub init: InitPolicy,
}

#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub target: StochasticMatrix,
    pub blocks: Vec<ModelBlock>,
    pub corrupted: usize,
}

impl EnsembleModel {
    pub fn clean_chains(&self) -> usize {
        self.blocks.iter().map(|b| b.count).sum()
    }

    pub fn total_chains(&self) -> usize {
        self.clean_chains() + self.corrupted
    }

    /// One [`ChainModel`] per clean chain, with stationary laws and gaps
    /// computed once per block.
    pub fn chain_models(&self) -> Result<Vec<ChainModel>> {
        let mut out = Vec::with_capacity(self.clean_chains());
        for b in &self.blocks {
            let stationary = stationary_distribution(&b.transition)?;
            let gamma = pseudo_spectral_gap_with(&b.transition, &stationary)?.gamma;
            let initial = match b.init {
                InitPolicy::Stationary => stationary.clone(),
                other => other.resolve(&b.transition)?,
            };
            let model = ChainModel::new(b.transition.clone(), stationary, initial).with_gamma(gamma);
            out.extend(std::iter::repeat_n(model, b.count));
        }
        Ok(out)
    }

    pub fn target_stationary(&self) -> Result<Distribution> {
        stationary_distribution(&self.target)
    }
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn read_matrix<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, size: usize, at: usize) -> Result<StochasticMatrix> {
    let mut data = Vec::with_capacity(size * size);
    for _ in 0..size {
        let (ln, line) = lines.next().ok_or_else(|| err(at, "matrix ended early"))?;
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(ln, format!("invalid value {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != size {
            return Err(err(ln, format!("expected {size} values, found {}", row.len())));
        }
        data.extend(row);
    }
    StochasticMatrix::from_row_major(size, data)
}

pub fn parse_model(text: &str) -> Result<EnsembleModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, first) = lines.next().ok_or_else(|| err(1, "empty model file"))?;
    let size = first
        .strip_prefix("states")
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&s| s > 0)
        .ok_or_else(|| err(ln, "first line must be `states <count>`"))?;
    let (ln, line) = lines.next().ok_or_else(|| err(ln, "missing target block"))?;
    if line != "target" {
        return Err(err(ln, "expected `target`"));
    }
    let target = read_matrix(&mut lines, size, ln)?;
    let mut model = EnsembleModel { target, blocks: Vec::new(), corrupted: 0 };
    while let Some((ln, line)) = lines.next() {
        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap_or_default();
        let count = words
            .next()
            .and_then(|c| c.parse::<usize>().ok())
            .ok_or_else(|| err(ln, format!("`{keyword}` needs a chain count")))?;
        let mut use_target = keyword == "clean";
        let mut init = InitPolicy::Stationary;
        for w in words {
            match w {
                "target" => use_target = true,
                _ => match w.strip_prefix("init=") {
                    Some(v) => init = v.parse().map_err(|_| err(ln, format!("invalid init {v:?}")))?,
                    None => return Err(err(ln, format!("unexpected word {w:?}"))),
                },
            }
        }
        match keyword {
            "corrupted" => model.corrupted += count,
            "clean" | "chains" => {
                let transition = if use_target { model.target.clone() } else { read_matrix(&mut lines, size, ln)? };
                if let InitPolicy::Point(i) = init {
                    if i >= size {
                        return Err(err(ln, format!("init state {i} outside 0..{size}")));
                    }
                }
                model.blocks.push(ModelBlock { count, transition, init });
            }
            _ => return Err(err(ln, format!("unknown block {keyword:?}"))),
        }
    }
    if model.clean_chains() == 0 {
        return Err(Error::Domain("model has no uncorrupted chains".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# demo\nstates 2\ntarget\n0.9 0.1\n0.2 0.8\n\nchains 3 target\nchains 1 init=point:1\n0.5 0.5\n0.5 0.5\ncorrupted 2\nclean 4\n";

    #[test]
    fn parses_blocks() {
        let m = parse_model(SAMPLE).unwrap();
        assert_eq!(m.blocks.len(), 3);
        assert_eq!((m.clean_chains(), m.corrupted, m.total_chains()), (8, 2, 10));
        assert_eq!(m.blocks[1].init, InitPolicy::Point(1));
        assert_eq!(m.blocks[1].transition.get(0, 0), 0.5);
        assert_eq!(m.blocks[2].transition, m.target);
        let models = m.chain_models().unwrap();
        assert_eq!(models.len(), 8);
        assert_eq!(models[3].initial.as_slice(), &[0.0, 1.0]);
        assert_eq!(models[0].initial, models[0].stationary);
    }

    #[test]
    fn reports_line_numbers() {
        let line = |t: &str| match parse_model(t) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line(""), 1);
        assert_eq!(line("states x\n"), 1);
        assert_eq!(line("states 2\nmatrix\n"), 2);
        assert_eq!(line("states 2\ntarget\n1 0\n0 1 0\n"), 4);
        assert_eq!(line("states 2\ntarget\n1 0\n0 1\nchains\n"), 5);
        assert_eq!(line("states 2\ntarget\n1 0\n0 1\nchains 2 target init=warm\n"), 5);
        assert_eq!(line("states 2\ntarget\n1 0\n0 1\nextra 2\n"), 5);
        assert!(matches!(parse_model("states 2\ntarget\n1 0\n0 1\ncorrupted 3\n"), Err(Error::Domain(_))));
    }
}
