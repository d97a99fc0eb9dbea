//! `key = value` configuration files and their merge with command-line values.

use crate::builder::{AptbConfig, Delta, SonSetMode};
use crate::dp::Epsilon;
use crate::error::{Error, Result};

/// Partially specified configuration. Unset fields keep the defaults of
/// [`AptbConfig::new`]; `eps`, `h` and `seed` have no default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub eps: Option<f64>,
    pub h: Option<usize>,
    pub pre_fraction: Option<f64>,
    pub delta: Option<Delta>,
    pub theta_floor: Option<f64>,
    pub theta: Option<f64>,
    pub split_rank: Option<f64>,
    pub split_select: Option<f64>,
    pub split_count: Option<f64>,
    pub seed: Option<u64>,
    pub sonset: Option<SonSetMode>,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::param("config", format!("line {line}: {msg}"))
}

fn number<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| bad(line, format!("invalid value {value:?} for {key}")))
}

pub fn parse_delta(value: &str) -> Option<Delta> {
    if value.eq_ignore_ascii_case("auto") {
        Some(Delta::Auto)
    } else {
        value.parse().ok().map(Delta::Fixed)
    }
}

pub fn parse_sonset(value: &str) -> Option<SonSetMode> {
    match value {
        "universe" => Some(SonSetMode::Universe),
        "observed" => Some(SonSetMode::Observed),
        _ => None,
    }
}

impl ConfigOverrides {
    /// Parses `key = value` lines. `#` starts a comment; blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| bad(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "eps" | "total_eps" => cfg.eps = Some(number(line, key, value)?),
                "h" | "h_user" => cfg.h = Some(number(line, key, value)?),
                "pre_fraction" => cfg.pre_fraction = Some(number(line, key, value)?),
                "delta" => {
                    cfg.delta = Some(parse_delta(value).ok_or_else(|| bad(line, format!("invalid delta {value:?}")))?)
                }
                "theta_floor" => cfg.theta_floor = Some(number(line, key, value)?),
                "theta" | "theta_override" => cfg.theta = Some(number(line, key, value)?),
                "split_rank" => cfg.split_rank = Some(number(line, key, value)?),
                "split_select" => cfg.split_select = Some(number(line, key, value)?),
                "split_count" => cfg.split_count = Some(number(line, key, value)?),
                "seed" => cfg.seed = Some(number(line, key, value)?),
                "sonset" => {
                    cfg.sonset = Some(parse_sonset(value).ok_or_else(|| bad(line, format!("invalid sonset {value:?}")))?)
                }
                other => return Err(bad(line, format!("unknown key {other:?}"))),
            }
        }
        Ok(cfg)
    }

    /// Fields set in `over` replace those of `self`.
    pub fn merge(self, over: &ConfigOverrides) -> Self {
        Self {
            eps: over.eps.or(self.eps),
            h: over.h.or(self.h),
            pre_fraction: over.pre_fraction.or(self.pre_fraction),
            delta: over.delta.or(self.delta),
            theta_floor: over.theta_floor.or(self.theta_floor),
            theta: over.theta.or(self.theta),
            split_rank: over.split_rank.or(self.split_rank),
            split_select: over.split_select.or(self.split_select),
            split_count: over.split_count.or(self.split_count),
            seed: over.seed.or(self.seed),
            sonset: over.sonset.or(self.sonset),
        }
    }

    pub fn resolve(&self) -> Result<AptbConfig> {
        let eps = self.eps.ok_or_else(|| Error::param("eps", "is required"))?;
        let eps = Epsilon::new(eps)?;
        let h = self.h.ok_or_else(|| Error::param("h", "is required"))?;
        let seed = self.seed.ok_or_else(|| Error::param("seed", "is required"))?;
        let mut cfg = AptbConfig::new(eps, h, seed);
        if let Some(v) = self.pre_fraction {
            cfg.pre_fraction = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.theta_floor {
            cfg.theta_floor = v;
        }
        cfg.theta_override = self.theta;
        if let Some(v) = self.split_rank {
            cfg.split_rank = v;
        }
        if let Some(v) = self.split_select {
            cfg.split_select = v;
        }
        if let Some(v) = self.split_count {
            cfg.split_count = v;
        }
        if let Some(v) = self.sonset {
            cfg.sonset = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Canonical `key = value` text of a resolved configuration; parsing it back
/// yields the same configuration.
pub fn config_snapshot(cfg: &AptbConfig) -> String {
    let delta = match cfg.delta {
        Delta::Auto => "auto".to_string(),
        Delta::Fixed(d) => d.to_string(),
    };
    let theta = cfg.theta_override.map_or("none".to_string(), |t| t.to_string());
    let sonset = match cfg.sonset {
        SonSetMode::Universe => "universe",
        SonSetMode::Observed => "observed",
    };
    let mut s = String::new();
    s.push_str(&format!("eps = {}\n", cfg.total_eps));
    s.push_str(&format!("h = {}\n", cfg.h_user));
    s.push_str(&format!("pre_fraction = {}\n", cfg.pre_fraction));
    s.push_str(&format!("delta = {delta}\n"));
    s.push_str(&format!("theta_floor = {}\n", cfg.theta_floor));
    if cfg.theta_override.is_some() {
        s.push_str(&format!("theta = {theta}\n"));
    }
    s.push_str(&format!("split_rank = {}\n", cfg.split_rank));
    s.push_str(&format!("split_select = {}\n", cfg.split_select));
    s.push_str(&format!("split_count = {}\n", cfg.split_count));
    s.push_str(&format!("seed = {}\n", cfg.seed));
    s.push_str(&format!("sonset = {sonset}\n"));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_merge_resolve() {
        let file = ConfigOverrides::parse("# run\neps = 0.5\nh=3\n\ndelta = auto\ntheta = 2 # fixed\nseed = 11\n").unwrap();
        let flags = ConfigOverrides {
            eps: Some(1.0),
            ..Default::default()
        };
        let cfg = file.merge(&flags).resolve().unwrap();
        assert_eq!(cfg.total_eps.value(), 1.0);
        assert_eq!(cfg.h_user, 3);
        assert_eq!(cfg.theta_override, Some(2.0));
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.delta, Delta::Auto);
    }

    #[test]
    fn errors_name_the_problem() {
        let e = ConfigOverrides::parse("eps 1").unwrap_err().to_string();
        assert!(e.contains("line 1"), "{e}");
        assert!(ConfigOverrides::parse("colour = red").unwrap_err().to_string().contains("colour"));
        assert!(ConfigOverrides::parse("delta = wide").is_err());
        let e = ConfigOverrides {
            eps: Some(0.0),
            h: Some(2),
            seed: Some(1),
            ..Default::default()
        }
        .resolve()
        .unwrap_err()
        .to_string();
        assert!(e.contains("eps") || e.contains("epsilon"), "{e}");
        assert!(ConfigOverrides { eps: Some(1.0), h: Some(2), ..Default::default() }.resolve().is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = AptbConfig::new(Epsilon::new(0.7).unwrap(), 4, 99);
        cfg.delta = Delta::Fixed(1.5);
        cfg.theta_override = Some(2.0);
        cfg.sonset = SonSetMode::Observed;
        let text = config_snapshot(&cfg);
        let back = ConfigOverrides::parse(&text).unwrap().resolve().unwrap();
        assert_eq!(back, cfg);
        assert_eq!(config_snapshot(&back), text);
    }
}
