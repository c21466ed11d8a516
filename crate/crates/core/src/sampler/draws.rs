use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::SamplerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerWarning {
    /// A block accepted fewer than 1% of kept proposals.
    StuckChain { chain: usize, block: usize, accept_rate: f64 },
    /// Too few kept draws for the interval diagnostic.
    FewDraws { per_chain: usize },
}

impl fmt::Display for SamplerWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerWarning::StuckChain {
                chain,
                block,
                accept_rate,
            } => write!(f, "chain {chain} block {block} is stuck (acceptance {accept_rate:.4})"),
            SamplerWarning::FewDraws { per_chain } => {
                write!(f, "only {per_chain} kept draws per chain; diagnostics unavailable")
            }
        }
    }
}

/// Output of one chain, kept iterations only.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// `[iteration][parameter]` on the reported scale.
    pub draws: Vec<Vec<f64>>,
    /// `[iteration][observation]`, empty for targets without data.
    pub loglik: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
    /// Per block, over kept iterations.
    pub accept_rates: Vec<f64>,
    /// `[iteration][block]` proposal multipliers, then one step size per
    /// scale move.
    pub proposal_scales: Vec<Vec<f64>>,
    pub warnings: Vec<SamplerWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub param_names: Vec<String>,
    /// `[chain][iteration][parameter]`.
    pub draws: Vec<Vec<Vec<f64>>>,
    /// `[chain][iteration][observation]`.
    pub loglik_pointwise: Vec<Vec<Vec<f64>>>,
    /// `[chain][block]`.
    pub accept_rates: Vec<Vec<f64>>,
    /// `[chain][iteration][block]`.
    pub proposal_scales: Vec<Vec<Vec<f64>>>,
    /// `[chain][iteration]` log-density on the sampling scale.
    pub log_density: Vec<Vec<f64>>,
    pub warnings: Vec<SamplerWarning>,
}

impl PosteriorDraws {
    pub fn from_chains(param_names: Vec<String>, chains: Vec<ChainDraws>) -> Self {
        let mut out = Self {
            param_names,
            draws: Vec::new(),
            loglik_pointwise: Vec::new(),
            accept_rates: Vec::new(),
            proposal_scales: Vec::new(),
            log_density: Vec::new(),
            warnings: Vec::new(),
        };
        for c in chains {
            out.draws.push(c.draws);
            out.loglik_pointwise.push(c.loglik);
            out.accept_rates.push(c.accept_rates);
            out.proposal_scales.push(c.proposal_scales);
            out.log_density.push(c.log_density);
            out.warnings.extend(c.warnings);
        }
        let per_chain = out.n_keep();
        if per_chain < super::MIN_DRAWS_PER_CHAIN {
            out.warnings.push(SamplerWarning::FewDraws { per_chain });
        }
        out
    }

    /// Draws only, e.g. read back from a trace or built by hand.
    pub fn from_draws(param_names: Vec<String>, draws: Vec<Vec<Vec<f64>>>) -> Self {
        let chains = draws
            .into_iter()
            .map(|d| ChainDraws {
                log_density: Vec::new(),
                draws: d,
                loglik: Vec::new(),
                accept_rates: Vec::new(),
                proposal_scales: Vec::new(),
                warnings: Vec::new(),
            })
            .collect();
        Self::from_chains(param_names, chains)
    }

    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    /// Kept draws in the shortest chain.
    pub fn n_keep(&self) -> usize {
        self.draws.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn n_total(&self) -> usize {
        self.draws.iter().map(Vec::len).sum()
    }

    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn n_obs(&self) -> usize {
        self.loglik_pointwise
            .first()
            .and_then(|c| c.first())
            .map_or(0, Vec::len)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    /// One vector per chain for parameter `p`.
    pub fn param_chains(&self, p: usize) -> Vec<Vec<f64>> {
        self.draws
            .iter()
            .map(|c| c.iter().map(|d| d[p]).collect())
            .collect()
    }

    pub fn pooled(&self, p: usize) -> Vec<f64> {
        self.draws.iter().flatten().map(|d| d[p]).collect()
    }

    /// `[draw][observation]` with chains concatenated.
    pub fn pooled_loglik(&self) -> Vec<Vec<f64>> {
        self.loglik_pointwise.iter().flatten().cloned().collect()
    }

    /// CSV trace: optional `# ` header lines, then
    /// `chain,iteration,<param names...>`.
    pub fn write_trace<W: Write>(&self, mut w: W, header: &[String]) -> Result<(), SamplerError> {
        let io = |e: std::io::Error| SamplerError::Trace(e.to_string());
        for h in header {
            writeln!(w, "# {h}").map_err(io)?;
        }
        let mut cw = csv::Writer::from_writer(w);
        let mut head = vec!["chain".to_string(), "iteration".to_string()];
        head.extend(self.param_names.iter().cloned());
        let csv_err = |e: csv::Error| SamplerError::Trace(e.to_string());
        cw.write_record(&head).map_err(csv_err)?;
        for (c, chain) in self.draws.iter().enumerate() {
            for (i, d) in chain.iter().enumerate() {
                let mut rec = vec![c.to_string(), i.to_string()];
                rec.extend(d.iter().map(|v| v.to_string()));
                cw.write_record(&rec).map_err(csv_err)?;
            }
        }
        cw.flush().map_err(io)?;
        Ok(())
    }

    /// Inverse of [`PosteriorDraws::write_trace`] for the draws themselves.
    pub fn read_trace<R: BufRead>(r: R) -> Result<Self, SamplerError> {
        let body: String = r
            .lines()
            .map(|l| l.map_err(|e| SamplerError::Trace(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l + "\n")
            .collect();
        let mut cr = csv::Reader::from_reader(body.as_bytes());
        let bad = |m: String| SamplerError::Trace(m);
        let headers = cr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.len() < 2 || &headers[0] != "chain" || &headers[1] != "iteration" {
            return Err(bad("trace must start with chain,iteration columns".into()));
        }
        let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let mut draws: Vec<Vec<Vec<f64>>> = Vec::new();
        for rec in cr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let c: usize = rec[0].parse().map_err(|_| bad(format!("bad chain index `{}`", &rec[0])))?;
            if c > draws.len() {
                return Err(bad("chains must appear in order".into()));
            }
            if c == draws.len() {
                draws.push(Vec::new());
            }
            let row = rec
                .iter()
                .skip(2)
                .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad value `{v}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            draws[c].push(row);
        }
        Ok(Self::from_draws(names, draws))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_roundtrip() {
        let d = PosteriorDraws::from_draws(
            vec!["a".into(), "b[x]".into()],
            vec![vec![vec![0.1, -2.5e-7]; 3], vec![vec![1.0 / 3.0, 4.0]; 3]],
        );
        let mut buf = Vec::new();
        d.write_trace(&mut buf, &["seed: 1".into()]).unwrap();
        let back = PosteriorDraws::read_trace(buf.as_slice()).unwrap();
        assert_eq!(back.draws, d.draws);
        assert_eq!(back.param_names, d.param_names);
        assert!(back.warnings.contains(&SamplerWarning::FewDraws { per_chain: 3 }));
    }
}
