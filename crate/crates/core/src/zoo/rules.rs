use super::{diversity_weights, mtb_weights, RankBy, Rule, ZooEntry};
use crate::backtest::{MarketView, WeightRule};
use crate::error::{Error, Result};
use crate::fgp::{continuous_increment, GeneratorSpec, StrategyKind};
use crate::market::{State, WeightPath};
use crate::rank::{rank_vector, rank_weights};

/// (Σ μ_i^p)^{1/p}; generates μ^p / Σ μ^p. p = 0 is the geometric mean.
#[derive(Debug, Clone)]
pub struct DiversityGenerator {
    pub p: f64,
}

impl DiversityGenerator {
    fn parts(&self, s: &State) -> (f64, Vec<f64>) {
        let d = s.dim() as f64;
        if self.p == 0.0 {
            let lg: f64 = s.mu.iter().map(|m| m.ln()).sum::<f64>() / d;
            return (lg.exp(), vec![1.0 / d; s.dim()]);
        }
        let pi = diversity_weights(s.mu, self.p);
        let lt: f64 = s.mu.iter().map(|m| m.powf(self.p)).sum::<f64>().ln();
        ((lt / self.p).exp(), pi)
    }
}

impl GeneratorSpec for DiversityGenerator {
    fn name(&self) -> String {
        format!("diversity_weighted({})", self.p)
    }

    fn value(&self, s: &State) -> f64 {
        self.parts(s).0
    }

    fn grad_mu(&self, s: &State) -> Vec<f64> {
        let (g, pi) = self.parts(s);
        (0..s.dim()).map(|i| g * pi[i] / s.mu[i]).collect()
    }

    fn hess_mu(&self, s: &State) -> Option<Vec<f64>> {
        let (g, pi) = self.parts(s);
        let d = s.dim();
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let kron = if i == j { pi[i] } else { 0.0 };
                h[i * d + j] = (1.0 - self.p) * g / (s.mu[i] * s.mu[j]) * (pi[i] * pi[j] - kron);
            }
        }
        Some(h)
    }

    fn is_balanced(&self) -> bool {
        true
    }
}

/// Weights of a generated strategy read off the generator at the
/// rebalancing time.
///
/// Multiplicative: π_i = (D_iG − C)μ_i / G. Additive: π_i = (D_iG − C + Γ^c)μ_i
/// / (G + Γ^c), with Γ^c accumulated from the data seen so far.
pub struct GeneratedRule {
    pub spec: Box<dyn GeneratorSpec>,
    pub kind: StrategyKind,
    label: String,
    gamma_c: f64,
    seen: usize,
}

impl GeneratedRule {
    pub fn new(label: String, spec: Box<dyn GeneratorSpec>, kind: StrategyKind) -> Self {
        GeneratedRule {
            spec,
            kind,
            label,
            gamma_c: 0.0,
            seen: 0,
        }
    }

    /// Γ^c accumulated through the last call.
    pub fn gamma_continuous(&self) -> f64 {
        self.gamma_c
    }
}

impl WeightRule for GeneratedRule {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn weights(&mut self, view: &MarketView) -> Result<Vec<f64>> {
        let now = view.now();
        if self.kind == StrategyKind::Additive {
            while self.seen < now {
                let m = self.seen + 1;
                let inc = continuous_increment(
                    &self.spec,
                    &view.state(m - 1)?,
                    &view.state(m)?,
                    view.is_jump(m)?,
                )
                .ok_or(Error::NumericalFailure { step: m })?;
                self.gamma_c += inc.iter().sum::<f64>();
                self.seen = m;
            }
        }
        let s = view.state(now)?;
        let g = self.spec.value(&s);
        let grad = self.spec.grad_mu(&s);
        let c: f64 = grad.iter().zip(s.mu).map(|(a, m)| a * m).sum::<f64>() - g;
        let extra = match self.kind {
            StrategyKind::Additive => self.gamma_c,
            StrategyKind::Multiplicative => 0.0,
        };
        let total = g + extra;
        if !(total.abs() > 0.0) || !total.is_finite() {
            return Err(Error::ZeroWealth { step: now });
        }
        Ok((0..s.dim())
            .map(|i| (grad[i] - c + extra) * s.mu[i] / total)
            .collect())
    }
}

struct DirectRule {
    label: String,
    rule: Rule,
    composition: Option<Vec<f64>>,
}

impl WeightRule for DirectRule {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn weights(&mut self, view: &MarketView) -> Result<Vec<f64>> {
        let now = view.now();
        let d = view.n_stocks();
        Ok(match &self.rule {
            Rule::Market => view.mu(now)?.to_vec(),
            Rule::EqualWeight => vec![1.0 / d as f64; d],
            Rule::BookValue => view.beta(now)?.to_vec(),
            Rule::MtbWeighted { p } => mtb_weights(view.rho(now)?, *p),
            Rule::DiversityWeighted { p } => diversity_weights(view.mu(now)?, *p),
            Rule::Rank { by, .. } => {
                let v = match by {
                    RankBy::Rho => view.rho(now)?,
                    RankBy::Size => view.mu(now)?,
                };
                let c = self.composition.as_ref().expect("composition resolved");
                rank_weights(c, &rank_vector(v))
            }
            Rule::Generated { .. } => unreachable!("generated rules use GeneratedRule"),
        })
    }
}

impl ZooEntry {
    /// A backtest rule for this entry. Generator constants left open are
    /// fixed from `path` before the run.
    pub fn weight_rule(&self, path: &WeightPath) -> Result<Box<dyn WeightRule>> {
        let label = self.label();
        match &self.rule {
            Rule::Generated { generator, kind } => {
                let spec = generator.build(path)?;
                if path.has_jumps() && (!spec.is_balanced() || spec.requires_continuous_aux()) {
                    return Err(if spec.requires_continuous_aux() {
                        Error::JumpsNotSupported
                    } else {
                        Error::UnbalancedWithJumps
                    });
                }
                spec.validate_path(path)?;
                Ok(Box::new(GeneratedRule::new(label, spec, *kind)))
            }
            Rule::Rank { choice, .. } => Ok(Box::new(DirectRule {
                label,
                rule: self.rule.clone(),
                composition: Some(choice.composition(path.n_stocks())?),
            })),
            other => Ok(Box::new(DirectRule {
                label,
                rule: other.clone(),
                composition: None,
            })),
        }
    }

    /// The generator behind a multiplicative entry, where one exists, for
    /// closed-form comparisons.
    pub fn multiplicative_generator(&self, path: &WeightPath) -> Result<Option<Box<dyn GeneratorSpec>>> {
        Ok(match &self.rule {
            Rule::Market => Some(Box::new(crate::fgp::ConstantGenerator(1.0))),
            Rule::BookValue => Some(Box::new(super::BookValueGenerator::normalized_on(path))),
            Rule::MtbWeighted { p } => Some(Box::new(super::MtbGenerator::normalized_on(*p, path))),
            Rule::DiversityWeighted { p } => {
                let raw = DiversityGenerator { p: *p };
                Some(Box::new(crate::fgp::Normalized::on_path(raw, path)?))
            }
            Rule::EqualWeight => {
                let raw = DiversityGenerator { p: 0.0 };
                Some(Box::new(crate::fgp::Normalized::on_path(raw, path)?))
            }
            Rule::Generated {
                generator,
                kind: StrategyKind::Multiplicative,
            } => Some(generator.build(path)?),
            _ => None,
        })
    }
}
