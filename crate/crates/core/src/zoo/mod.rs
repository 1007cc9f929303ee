//! Named portfolios: generators, direct weight rules and rank rules.

mod decompose;
mod generators;
mod rules;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use decompose::{book_value_log_decomposition, LogDecomposition};
pub use generators::{
    BookValueGenerator, LogarithmicGenerator, ModifiedBookValueGenerator, ModifiedMtbGenerator,
    MtbGenerator,
};
pub use rules::{DiversityGenerator, GeneratedRule};

use crate::error::{Error, Result};
use crate::fgp::{GeneratorSpec, StrategyKind};
use crate::market::{min_beta, rho_bounds, WeightPath, DEFAULT_RHO_SAFETY};
use crate::rank::ConstantRebalanced;

/// Which vector the rank rules sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankBy {
    Rho,
    Size,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RankChoice {
    Explicit(Vec<f64>),
    Top(usize),
    Bottom(usize),
    TopOne,
    BottomOne,
}

impl RankChoice {
    /// The rank weights c for `d` stocks.
    pub fn composition(&self, d: usize) -> Result<Vec<f64>> {
        let block = |l: usize, top: bool| -> Result<Vec<f64>> {
            if l == 0 || l > d {
                return Err(Error::BadParameter(format!("group size {l} outside 1..={d}")));
            }
            let mut c = vec![0.0; d];
            let range = if top { 0..l } else { d - l..d };
            for k in range {
                c[k] = 1.0 / l as f64;
            }
            Ok(c)
        };
        let c = match self {
            RankChoice::Explicit(c) => {
                if c.len() != d {
                    return Err(Error::LengthMismatch(format!(
                        "rank weights have {} entries for {d} stocks",
                        c.len()
                    )));
                }
                c.clone()
            }
            RankChoice::Top(l) => block(*l, true)?,
            RankChoice::Bottom(l) => block(*l, false)?,
            RankChoice::TopOne => block(1, true)?,
            RankChoice::BottomOne => block(1, false)?,
        };
        ConstantRebalanced::new(c.clone())?;
        Ok(c)
    }
}

/// Generators available to backtests, with parameters left open when they
/// default to values read off the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeneratorChoice {
    BookValue,
    ModifiedBookValue {
        m: Option<f64>,
        big_m: Option<f64>,
    },
    ModifiedMtb {
        p: f64,
        delta: Option<f64>,
    },
    Logarithmic {
        m: Option<f64>,
        big_m: Option<f64>,
        delta: Option<f64>,
    },
}

/// Data-driven defaults for (m, M, δ).
pub fn default_bounds(path: &WeightPath) -> (f64, f64, f64) {
    let (m, big_m) = rho_bounds(path, DEFAULT_RHO_SAFETY);
    (m, big_m, min_beta(path) / DEFAULT_RHO_SAFETY)
}

impl GeneratorChoice {
    pub fn build(&self, path: &WeightPath) -> Result<Box<dyn GeneratorSpec>> {
        let (dm, dbig, ddelta) = default_bounds(path);
        Ok(match *self {
            GeneratorChoice::BookValue => Box::new(BookValueGenerator::normalized_on(path)),
            GeneratorChoice::ModifiedBookValue { m, big_m } => Box::new(
                ModifiedBookValueGenerator::new(m.unwrap_or(dm), big_m.unwrap_or(dbig))?,
            ),
            GeneratorChoice::ModifiedMtb { p, delta } => {
                Box::new(ModifiedMtbGenerator::new(p, delta.unwrap_or(ddelta))?)
            }
            GeneratorChoice::Logarithmic { m, big_m, delta } => Box::new(LogarithmicGenerator::new(
                m.unwrap_or(dm),
                big_m.unwrap_or(dbig),
                delta.unwrap_or(ddelta),
            )?),
        })
    }
}

/// How an entry turns market data into weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Rule {
    Market,
    EqualWeight,
    /// β(t−).
    BookValue,
    MtbWeighted { p: f64 },
    DiversityWeighted { p: f64 },
    Rank { by: RankBy, choice: RankChoice },
    Generated { generator: GeneratorChoice, kind: StrategyKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZooEntry {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub description: String,
    pub rule: Rule,
}

impl ZooEntry {
    fn new(name: &str, description: &str, rule: Rule) -> Self {
        ZooEntry {
            name: name.to_string(),
            params: BTreeMap::new(),
            description: description.to_string(),
            rule,
        }
    }

    fn param(mut self, key: &str, v: f64) -> Self {
        self.params.insert(key.to_string(), v);
        self
    }

    /// A label including parameters, e.g. `mtb_weighted(p=0.5)`.
    pub fn label(&self) -> String {
        if self.params.is_empty() {
            return self.name.clone();
        }
        let inner: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.name, inner.join(","))
    }
}

pub fn market_portfolio() -> ZooEntry {
    ZooEntry::new("market", "capitalization weights μ", Rule::Market)
}

pub fn equal_weight() -> ZooEntry {
    ZooEntry::new("equal_weight", "1/d in every stock", Rule::EqualWeight)
}

/// Multiplicatively generated from Π ρ_i^{β_i}; holds β(t−).
pub fn book_value_portfolio() -> ZooEntry {
    ZooEntry::new(
        "book_value",
        "weights in proportion to relative book values, generated by Π ρ^β",
        Rule::BookValue,
    )
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(Error::BadParameter(format!("p must be finite, got {p}")))
    }
}

/// ρ(t−)^p / Σ ρ(t−)^p; p = 0 is equal weighting.
pub fn mtb_weighted_portfolio(p: f64) -> Result<ZooEntry> {
    check_p(p)?;
    Ok(ZooEntry::new(
        "mtb_weighted",
        "market-to-book ratio weighted, generator (Σ ρ^p)^{1/p}",
        Rule::MtbWeighted { p },
    )
    .param("p", p))
}

/// μ^p / Σ μ^p; p = 0 is equal weighting.
pub fn diversity_weighted_portfolio(p: f64) -> Result<ZooEntry> {
    check_p(p)?;
    Ok(ZooEntry::new(
        "diversity_weighted",
        "diversity-weighted, generator (Σ μ^p)^{1/p}",
        Rule::DiversityWeighted { p },
    )
    .param("p", p))
}

pub fn modified_book_value_generator(m: Option<f64>, big_m: Option<f64>) -> Result<ZooEntry> {
    if let (Some(m), Some(big_m)) = (m, big_m) {
        ModifiedBookValueGenerator::new(m, big_m)?;
    }
    let mut e = ZooEntry::new(
        "modified_book_value",
        "additive, interpolates between β(t−) and μ",
        Rule::Generated {
            generator: GeneratorChoice::ModifiedBookValue { m, big_m },
            kind: StrategyKind::Additive,
        },
    );
    if let Some(m) = m {
        e = e.param("m", m);
    }
    if let Some(big_m) = big_m {
        e = e.param("M", big_m);
    }
    Ok(e)
}

pub fn modified_mtb_generator(p: f64, delta: Option<f64>) -> Result<ZooEntry> {
    ModifiedMtbGenerator::new(p, delta.unwrap_or(1.0))?;
    let mut e = ZooEntry::new(
        "modified_mtb",
        "additive, interpolates between μ and π̂ ∝ (ρ g e^{−h/δ})^p",
        Rule::Generated {
            generator: GeneratorChoice::ModifiedMtb { p, delta },
            kind: StrategyKind::Additive,
        },
    )
    .param("p", p);
    if let Some(delta) = delta {
        e = e.param("delta", delta);
    }
    Ok(e)
}

pub fn logarithmic_generator(m: Option<f64>, big_m: Option<f64>, delta: Option<f64>) -> Result<ZooEntry> {
    if let (Some(m), Some(big_m)) = (m, big_m) {
        LogarithmicGenerator::new(m, big_m, delta.unwrap_or(1.0))?;
    }
    let mut e = ZooEntry::new(
        "logarithmic",
        "additive, G = Σ log(1 + ρ) e^{−h/(δκ)}",
        Rule::Generated {
            generator: GeneratorChoice::Logarithmic { m, big_m, delta },
            kind: StrategyKind::Additive,
        },
    );
    for (k, v) in [("m", m), ("M", big_m), ("delta", delta)] {
        if let Some(v) = v {
            e = e.param(k, v);
        }
    }
    Ok(e)
}

/// Constant weights c_k on the k-th largest ρ.
pub fn rank_constant_rebalanced(c: Vec<f64>) -> Result<ZooEntry> {
    ConstantRebalanced::new(c.clone())?;
    let mut e = ZooEntry::new(
        "rank_cr",
        "constant proportion c_k in the stock of k-th largest market-to-book ratio",
        Rule::Rank {
            by: RankBy::Rho,
            choice: RankChoice::Explicit(c.clone()),
        },
    );
    for (k, v) in c.iter().enumerate() {
        e = e.param(&format!("c{}", k + 1), *v);
    }
    Ok(e)
}

fn rank_entry(name: &str, by: RankBy, choice: RankChoice, l: Option<usize>) -> ZooEntry {
    let what = match by {
        RankBy::Rho => "market-to-book ratio",
        RankBy::Size => "capitalization",
    };
    let e = ZooEntry::new(name, &format!("equal weights on a rank group by {what}"), Rule::Rank { by, choice });
    match l {
        Some(l) => e.param("l", l as f64),
        None => e,
    }
}

pub fn ew_top(l: usize) -> ZooEntry {
    rank_entry("ew_top", RankBy::Rho, RankChoice::Top(l), Some(l))
}

pub fn ew_bottom(l: usize) -> ZooEntry {
    rank_entry("ew_bottom", RankBy::Rho, RankChoice::Bottom(l), Some(l))
}

pub fn top_one() -> ZooEntry {
    rank_entry("top_one", RankBy::Rho, RankChoice::TopOne, None)
}

pub fn bottom_one() -> ZooEntry {
    rank_entry("bottom_one", RankBy::Rho, RankChoice::BottomOne, None)
}

pub fn ew_top_size(l: usize) -> ZooEntry {
    rank_entry("ew_top_size", RankBy::Size, RankChoice::Top(l), Some(l))
}

pub fn ew_bottom_size(l: usize) -> ZooEntry {
    rank_entry("ew_bottom_size", RankBy::Size, RankChoice::Bottom(l), Some(l))
}

/// Parameters as given on the command line or in a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    pub positional: Vec<f64>,
    pub named: BTreeMap<String, f64>,
}

impl Params {
    /// Parses `a,b,key=value,...`.
    pub fn parse(s: &str) -> Result<Params> {
        let mut out = Params::default();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let num = |v: &str| -> Result<f64> {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::BadParameter(format!("not a number: '{v}'")))
            };
            match tok.split_once('=') {
                Some((k, v)) => {
                    out.named.insert(k.trim().to_string(), num(v)?);
                }
                None => out.positional.push(num(tok)?),
            }
        }
        Ok(out)
    }

    fn get(&self, key: &str, pos: usize) -> Option<f64> {
        self.named.get(key).copied().or_else(|| self.positional.get(pos).copied())
    }

    fn require(&self, name: &str, key: &str, pos: usize) -> Result<f64> {
        self.get(key, pos)
            .ok_or_else(|| Error::BadParameter(format!("{name} needs parameter '{key}'")))
    }

    fn size(&self, name: &str) -> Result<usize> {
        let l = self.require(name, "l", 0)?;
        if l >= 1.0 && l.fract() == 0.0 {
            Ok(l as usize)
        } else {
            Err(Error::BadParameter(format!("{name}: l must be a positive integer, got {l}")))
        }
    }

    fn vector(&self, key: &str) -> Vec<f64> {
        if !self.positional.is_empty() {
            return self.positional.clone();
        }
        // c1, c2, ... in index order
        let mut v = Vec::new();
        while let Some(x) = self.named.get(&format!("{key}{}", v.len() + 1)) {
            v.push(*x);
        }
        v
    }
}

/// Resolves a portfolio by name.
pub fn lookup(name: &str, params: &Params) -> Result<ZooEntry> {
    match name {
        "market" => Ok(market_portfolio()),
        "equal_weight" => Ok(equal_weight()),
        "book_value" => Ok(book_value_portfolio()),
        "mtb_weighted" => mtb_weighted_portfolio(params.require(name, "p", 0)?),
        "diversity_weighted" => diversity_weighted_portfolio(params.require(name, "p", 0)?),
        "modified_book_value" => {
            modified_book_value_generator(params.get("m", 0), params.get("M", 1))
        }
        "modified_mtb" => modified_mtb_generator(params.get("p", 0).unwrap_or(1.0), params.get("delta", 1)),
        "logarithmic" => {
            logarithmic_generator(params.get("m", 0), params.get("M", 1), params.get("delta", 2))
        }
        "ew_top" => Ok(ew_top(params.size(name)?)),
        "ew_bottom" => Ok(ew_bottom(params.size(name)?)),
        "top_one" => Ok(top_one()),
        "bottom_one" => Ok(bottom_one()),
        "ew_top_size" => Ok(ew_top_size(params.size(name)?)),
        "ew_bottom_size" => Ok(ew_bottom_size(params.size(name)?)),
        "rank_cr" => rank_constant_rebalanced(params.vector("c")),
        other => Err(Error::UnknownPortfolio(other.to_string())),
    }
}

/// Parses `NAME[:params]`.
pub fn parse_portfolio(arg: &str) -> Result<ZooEntry> {
    let (name, rest) = arg.split_once(':').unwrap_or((arg, ""));
    lookup(name.trim(), &Params::parse(rest)?)
}

/// Every shipped name, for help output.
pub const PORTFOLIO_NAMES: &[&str] = &[
    "market",
    "equal_weight",
    "book_value",
    "mtb_weighted",
    "diversity_weighted",
    "modified_book_value",
    "modified_mtb",
    "logarithmic",
    "ew_top",
    "ew_bottom",
    "top_one",
    "bottom_one",
    "rank_cr",
    "ew_top_size",
    "ew_bottom_size",
];

/// A parameter value in a config file: a number or a list of numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
}

/// One `[[portfolio]]` table of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

impl PortfolioConfig {
    pub fn resolve(&self) -> Result<ZooEntry> {
        let mut p = Params::default();
        for (k, v) in &self.params {
            match v {
                ParamValue::Number(x) => {
                    p.named.insert(k.clone(), *x);
                }
                ParamValue::List(xs) => p.positional.extend_from_slice(xs),
            }
        }
        lookup(&self.name, &p)
    }
}

/// Direct weights ρ^p / Σ ρ^p, computed in log space.
pub fn mtb_weights(rho: &[f64], p: f64) -> Vec<f64> {
    power_normalize(rho, p)
}

/// Direct weights μ^p / Σ μ^p.
pub fn diversity_weights(mu: &[f64], p: f64) -> Vec<f64> {
    power_normalize(mu, p)
}

fn power_normalize(x: &[f64], p: f64) -> Vec<f64> {
    if p == 0.0 {
        return vec![1.0 / x.len() as f64; x.len()];
    }
    let logs: Vec<f64> = x.iter().map(|v| p * v.ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
