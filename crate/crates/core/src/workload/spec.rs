use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Shape of a synthetic key distribution over keys `1..=K`.
#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    /// Each message draws `x ~ LogNormal(mu, sigma)` and takes key
    /// `round(x) + 1`; values at or beyond `K - 1` fold into key `K`.
    LogNormalRounded {
        mu: f64,
        sigma: f64,
        keys: u64,
    },
    /// `p_k` proportional to `K` i.i.d. `LogNormal(mu, sigma)` weights drawn
    /// once per workload seed.
    LogNormal {
        mu: f64,
        sigma: f64,
        keys: u64,
    },
    /// `p_k` proportional to `k^-exponent`.
    Zipf {
        exponent: f64,
        keys: u64,
    },
    Uniform {
        keys: u64,
    },
    /// Key 1 has probability `p1`; the rest is uniform over keys `2..=K`.
    HeavyKey {
        p1: f64,
        keys: u64,
    },
}

impl Distribution {
    pub fn keys(&self) -> u64 {
        match *self {
            Distribution::LogNormalRounded { keys, .. }
            | Distribution::LogNormal { keys, .. }
            | Distribution::Zipf { keys, .. }
            | Distribution::Uniform { keys }
            | Distribution::HeavyKey { keys, .. } => keys,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.keys() == 0 {
            return Err(Error::usage("key count K must be at least 1"));
        }
        match *self {
            Distribution::LogNormalRounded { mu, sigma, .. }
            | Distribution::LogNormal { mu, sigma, .. } => {
                if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
                    return Err(Error::usage(format!(
                        "log-normal needs finite mu and sigma > 0, got ({mu}, {sigma})"
                    )));
                }
            }
            Distribution::Zipf { exponent, .. } => {
                if !exponent.is_finite() || exponent < 0.0 {
                    return Err(Error::usage(format!(
                        "zipf exponent must be finite and >= 0, got {exponent}"
                    )));
                }
            }
            Distribution::Uniform { .. } => {}
            Distribution::HeavyKey { p1, keys } => {
                if !(p1 > 0.0 && p1 <= 1.0) {
                    return Err(Error::usage(format!("p1 must be in (0, 1], got {p1}")));
                }
                if keys == 1 && p1 < 1.0 {
                    return Err(Error::usage(
                        "heavy key with K = 1 leaves residual mass nowhere; use p1 = 1",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// How a text file is turned into messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IngestMode {
    /// One message per non-empty line; the whole line is the key.
    KeyPerLine,
    /// One message per whitespace-separated token.
    TokenizedText,
    /// `src dst` integer pairs; the worker key is `dst`, the source key `src`.
    EdgeListInverted,
}

impl FromStr for IngestMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lines" | "key-per-line" => Ok(IngestMode::KeyPerLine),
            "text" | "tokenized" => Ok(IngestMode::TokenizedText),
            "edges" | "edge-list-inverted" => Ok(IngestMode::EdgeListInverted),
            _ => Err(Error::usage(format!("unknown ingest mode '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorkloadKind {
    Synthetic {
        distribution: Distribution,
        messages: u64,
    },
    /// Rotates key ids by a seeded random shift every `epoch` messages.
    Drift {
        inner: Box<WorkloadKind>,
        epoch: u64,
    },
    File {
        path: PathBuf,
        mode: IngestMode,
    },
}

impl WorkloadKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            WorkloadKind::Synthetic {
                distribution,
                messages,
            } => {
                distribution.validate()?;
                if *messages == 0 {
                    return Err(Error::usage("message count m must be at least 1"));
                }
                Ok(())
            }
            WorkloadKind::Drift { inner, epoch } => {
                if *epoch == 0 {
                    return Err(Error::usage("drift epoch must be at least 1"));
                }
                if matches!(**inner, WorkloadKind::File { .. }) {
                    return Err(Error::usage("drift wraps synthetic workloads only"));
                }
                inner.validate()
            }
            WorkloadKind::File { .. } => Ok(()),
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkloadKind::Synthetic {
                distribution,
                messages: m,
            } => match distribution {
                Distribution::LogNormalRounded { mu, sigma, keys } => {
                    write!(f, "lognormal-rounded:{mu},{sigma},{keys},{m}")
                }
                Distribution::LogNormal { mu, sigma, keys } => {
                    write!(f, "lognormal:{mu},{sigma},{keys},{m}")
                }
                Distribution::Zipf { exponent, keys } => write!(f, "zipf:{exponent},{keys},{m}"),
                Distribution::Uniform { keys } => write!(f, "uniform:{keys},{m}"),
                Distribution::HeavyKey { p1, keys } => write!(f, "heavykey:{p1},{keys},{m}"),
            },
            WorkloadKind::Drift { inner, epoch } => write!(f, "drift:{epoch}:({inner})"),
            WorkloadKind::File { path, .. } => write!(f, "file:{}", path.display()),
        }
    }
}

fn parse_args<'a, const N: usize>(name: &str, args: &'a str) -> Result<[&'a str; N]> {
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    parts.try_into().map_err(|p: Vec<&str>| {
        Error::usage(format!(
            "{name} takes {N} comma-separated arguments, got {}",
            p.len()
        ))
    })
}

fn num<T: FromStr>(what: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::usage(format!("invalid {what} '{s}'")))
}

/// Parses the workload mini-grammar:
/// `lognormal:MU,SIGMA,K,M`, `lognormal-rounded:MU,SIGMA,K,M`, `zipf:S,K,M`, `uniform:K,M`, `heavykey:P1,K,M`
/// and `drift:EPOCH:(INNER)` (parentheses optional).
impl FromStr for WorkloadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::usage(format!("workload spec '{s}' lacks ':'")))?;
        let kind = match name {
            "lognormal-rounded" => {
                let [mu, sigma, k, m] = parse_args::<4>(name, rest)?;
                WorkloadKind::Synthetic {
                    distribution: Distribution::LogNormalRounded {
                        mu: num("mu", mu)?,
                        sigma: num("sigma", sigma)?,
                        keys: num("K", k)?,
                    },
                    messages: num("m", m)?,
                }
            }
            "lognormal" => {
                let [mu, sigma, k, m] = parse_args::<4>(name, rest)?;
                WorkloadKind::Synthetic {
                    distribution: Distribution::LogNormal {
                        mu: num("mu", mu)?,
                        sigma: num("sigma", sigma)?,
                        keys: num("K", k)?,
                    },
                    messages: num("m", m)?,
                }
            }
            "zipf" => {
                let [e, k, m] = parse_args::<3>(name, rest)?;
                WorkloadKind::Synthetic {
                    distribution: Distribution::Zipf {
                        exponent: num("exponent", e)?,
                        keys: num("K", k)?,
                    },
                    messages: num("m", m)?,
                }
            }
            "uniform" => {
                let [k, m] = parse_args::<2>(name, rest)?;
                WorkloadKind::Synthetic {
                    distribution: Distribution::Uniform { keys: num("K", k)? },
                    messages: num("m", m)?,
                }
            }
            "heavykey" => {
                let [p1, k, m] = parse_args::<3>(name, rest)?;
                WorkloadKind::Synthetic {
                    distribution: Distribution::HeavyKey {
                        p1: num("p1", p1)?,
                        keys: num("K", k)?,
                    },
                    messages: num("m", m)?,
                }
            }
            "drift" => {
                let (epoch, inner) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::usage("drift spec is drift:EPOCH:(INNER)"))?;
                let inner = inner.trim();
                let inner = inner
                    .strip_prefix('(')
                    .and_then(|i| i.strip_suffix(')'))
                    .unwrap_or(inner);
                WorkloadKind::Drift {
                    inner: Box::new(inner.parse()?),
                    epoch: num("epoch", epoch.trim())?,
                }
            }
            other => return Err(Error::usage(format!("unknown workload kind '{other}'"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// A workload description plus the seed its random draws use.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn new(kind: WorkloadKind, seed: u64) -> Self {
        WorkloadSpec { kind, seed }
    }

    pub fn parse(spec: &str, seed: u64) -> Result<Self> {
        Ok(WorkloadSpec::new(spec.parse()?, seed))
    }

    pub fn synthetic(distribution: Distribution, messages: u64, seed: u64) -> Self {
        WorkloadSpec::new(
            WorkloadKind::Synthetic {
                distribution,
                messages,
            },
            seed,
        )
    }

    pub fn drift(self, epoch: u64) -> Self {
        WorkloadSpec {
            kind: WorkloadKind::Drift {
                inner: Box::new(self.kind),
                epoch,
            },
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grammar() {
        let k: WorkloadKind = "lognormal:1.789,2.366,16384,1000000".parse().unwrap();
        assert_eq!(
            k,
            WorkloadKind::Synthetic {
                distribution: Distribution::LogNormal {
                    mu: 1.789,
                    sigma: 2.366,
                    keys: 16384
                },
                messages: 1_000_000
            }
        );
        assert!("zipf:1.1,100,500".parse::<WorkloadKind>().is_ok());
        assert!("uniform:8,1000".parse::<WorkloadKind>().is_ok());
        assert!("heavykey:0.5,10,100000".parse::<WorkloadKind>().is_ok());
        let d: WorkloadKind = "drift:500:(uniform:8,1000)".parse().unwrap();
        assert_eq!(d.to_string(), "drift:500:(uniform:8,1000)");
        let bare: WorkloadKind = "drift:500:uniform:8,1000".parse().unwrap();
        assert_eq!(bare, d);
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "lognormal:1.789,2.366,16384,1000000",
            "lognormal-rounded:2.245,1.133,1000,50",
            "zipf:1.1,100,500",
            "heavykey:0.5,10,100000",
            "drift:7:(drift:3:(uniform:4,9))",
        ] {
            let k: WorkloadKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
    }

    #[test]
    fn rejects_invalid() {
        for bad in [
            "uniform:0,10",
            "uniform:5,0",
            "uniform:5",
            "heavykey:0,10,10",
            "heavykey:1.5,10,10",
            "heavykey:0.5,1,10",
            "lognormal:1,0,10,10",
            "zipf:-1,10,10",
            "drift:0:(uniform:2,2)",
            "gaussian:1,2",
            "uniform",
            "uniform:x,10",
        ] {
            assert!(bad.parse::<WorkloadKind>().is_err(), "{bad} accepted");
        }
        assert!("heavykey:1,1,10".parse::<WorkloadKind>().is_ok());
    }

    #[test]
    fn ingest_modes() {
        assert_eq!(
            "lines".parse::<IngestMode>().unwrap(),
            IngestMode::KeyPerLine
        );
        assert_eq!(
            "text".parse::<IngestMode>().unwrap(),
            IngestMode::TokenizedText
        );
        assert_eq!(
            "edges".parse::<IngestMode>().unwrap(),
            IngestMode::EdgeListInverted
        );
        assert!("csv".parse::<IngestMode>().is_err());
    }
}
