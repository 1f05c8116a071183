use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Options shared by all subcommands; every flag may also be given in the
/// config file under the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// TOML file with default values for the flags below
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub nt: Option<usize>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// Spatial interval as `A,B`
    #[arg(long, allow_hyphen_values = true, value_parser = parse_domain)]
    pub domain: Option<(f64, f64)>,
    #[arg(long)]
    pub omega: Option<f64>,
    /// Index of the oscillator eigenstate
    #[arg(long)]
    pub hermite: Option<usize>,
    /// Comma-separated parameter values (rho, or mu_w for wave-check)
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list::<f64>)]
    pub rho: Option<::std::vec::Vec<f64>>,
    /// Comma-separated sizes, levels or ratios, depending on the experiment
    #[arg(long, value_parser = parse_list::<usize>)]
    pub sizes: Option<::std::vec::Vec<usize>>,
    /// Output CSV file; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileOptions {
    degree: Option<usize>,
    nt: Option<usize>,
    nx: Option<usize>,
    t_final: Option<f64>,
    domain: Option<Listish<f64>>,
    omega: Option<f64>,
    hermite: Option<usize>,
    rho: Option<Listish<f64>>,
    sizes: Option<Listish<usize>>,
    out: Option<PathBuf>,
}

/// A list written either as a TOML array or as a comma-separated string.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Listish<T> {
    Array(Vec<T>),
    Text(String),
}

impl<T: std::str::FromStr> Listish<T>
where
    T::Err: std::fmt::Display,
{
    fn into_vec(self) -> Result<Vec<T>> {
        match self {
            Listish::Array(v) => Ok(v),
            Listish::Text(s) => parse_list(&s).map_err(anyhow::Error::msg),
        }
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|item| item.trim().parse::<T>().map_err(|e| format!("bad list entry '{item}': {e}")))
        .collect()
}

fn parse_domain(s: &str) -> std::result::Result<(f64, f64), String> {
    match parse_list::<f64>(s)?.as_slice() {
        &[a, b] => Ok((a, b)),
        _ => Err(format!("domain '{s}' must have the form A,B")),
    }
}

impl Options {
    /// Fills unset flags from the config file, if one is given.
    pub fn resolve(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = read_file(&path)?;
        self.degree = self.degree.or(file.degree);
        self.nt = self.nt.or(file.nt);
        self.nx = self.nx.or(file.nx);
        self.t_final = self.t_final.or(file.t_final);
        self.omega = self.omega.or(file.omega);
        self.hermite = self.hermite.or(file.hermite);
        self.out = self.out.or(file.out);
        if self.domain.is_none() {
            if let Some(d) = file.domain {
                match d.into_vec()?.as_slice() {
                    &[a, b] => self.domain = Some((a, b)),
                    _ => bail!("domain in {} must have two entries", path.display()),
                }
            }
        }
        if self.rho.is_none() {
            self.rho = file.rho.map(Listish::into_vec).transpose()?;
        }
        if self.sizes.is_none() {
            self.sizes = file.sizes.map(Listish::into_vec).transpose()?;
        }
        Ok(self)
    }
}

fn read_file(path: &Path) -> Result<FileOptions> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
