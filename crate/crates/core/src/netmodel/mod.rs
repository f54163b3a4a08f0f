//! Network-level planning and evaluation.
//!
//! A network is an ordered list of convolution layers. Layers are cut into
//! channel blocks and row tiles ([`plan_blocks`]), kernels above 7x7 are
//! split into supported sub-kernels ([`split_kernel`]), partial sums of input
//! blocks are added off-chip ([`offchip_accumulate`]) and whole networks are
//! evaluated analytically at an operating point ([`evaluate_network`]).
//!
//! Network fixtures are line-oriented text:
//!
//! ```text
//! network <name>
//! input <channels> <height> <width>
//! <layer name> <n_in> <n_out> <h_im> <w_im> <h_k> <same|valid>
//! ```

mod eval;
mod exec;
mod plan;
mod split;

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::golden::Padding;
use crate::metrics::LayerSpec;

pub use eval::{evaluate_layer, evaluate_network, format_csv, format_table, LayerPerf, PerfReport};
pub use exec::{offchip_accumulate, simulate_layer, LayerRun};
pub use plan::{plan_blocks, BlockEntry, BlockPlan};
pub use split::{split_kernel, KernelSplit, SubKernel, MAX_SPLIT_KERNEL};

const BUILTIN: &[(&str, &str)] = &[
    ("bc-cifar10", include_str!("../../fixtures/networks/bc-cifar10.net")),
    ("bc-svhn", include_str!("../../fixtures/networks/bc-svhn.net")),
    ("alexnet", include_str!("../../fixtures/networks/alexnet.net")),
    ("resnet18", include_str!("../../fixtures/networks/resnet18.net")),
    ("resnet34", include_str!("../../fixtures/networks/resnet34.net")),
    ("vgg13", include_str!("../../fixtures/networks/vgg13.net")),
    ("vgg19", include_str!("../../fixtures/networks/vgg19.net")),
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NetLayer {
    pub name: String,
    pub spec: LayerSpec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NetworkSpec {
    pub name: String,
    /// (channels, height, width)
    pub input: (usize, usize, usize),
    pub layers: Vec<NetLayer>,
}

impl NetworkSpec {
    /// Checks that channel counts chain from the input through every layer.
    pub fn new(name: impl Into<String>, input: (usize, usize, usize), layers: Vec<NetLayer>) -> Result<Self> {
        let net = NetworkSpec {
            name: name.into(),
            input,
            layers,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ch = self.input.0;
        for l in &self.layers {
            l.spec.validate()?;
            if l.spec.n_in != ch {
                return Err(Error::config(format!(
                    "{}: layer {} takes {} channels, previous stage gives {}",
                    self.name, l.name, l.spec.n_in, ch
                )));
            }
            ch = l.spec.n_out;
        }
        Ok(())
    }

    pub fn builtin_names() -> Vec<&'static str> {
        BUILTIN.iter().map(|(n, _)| *n).collect()
    }

    pub fn builtin(name: &str) -> Option<NetworkSpec> {
        BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| NetworkSpec::parse(text).expect("shipped network parses"))
    }

    /// A builtin name, or else a fixture path.
    pub fn resolve(name_or_path: &str) -> Result<NetworkSpec> {
        if let Some(n) = NetworkSpec::builtin(name_or_path) {
            return Ok(n);
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            return NetworkSpec::load(path);
        }
        Err(Error::config(format!(
            "unknown network {name_or_path:?} (builtin: {})",
            NetworkSpec::builtin_names().join(", ")
        )))
    }

    pub fn load(path: &Path) -> Result<NetworkSpec> {
        NetworkSpec::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<NetworkSpec> {
        let mut name = None;
        let mut input = None;
        let mut layers = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = l.split_whitespace().collect();
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(line, format!("bad number {s:?}")))
            };
            match f[0] {
                "network" if f.len() == 2 => name = Some(f[1].to_string()),
                "input" if f.len() == 4 => input = Some((num(f[1])?, num(f[2])?, num(f[3])?)),
                "network" | "input" => return Err(Error::parse(line, format!("malformed `{}` record", f[0]))),
                _ => {
                    if f.len() != 7 {
                        return Err(Error::parse(
                            line,
                            "layer record needs name n_in n_out h_im w_im h_k padding",
                        ));
                    }
                    let padding: Padding = f[6].parse().map_err(|e: Error| Error::parse(line, e.to_string()))?;
                    let spec = LayerSpec::new(num(f[1])?, num(f[2])?, num(f[3])?, num(f[4])?, num(f[5])?, padding);
                    spec.validate().map_err(|e| Error::parse(line, e.to_string()))?;
                    layers.push(NetLayer {
                        name: f[0].to_string(),
                        spec,
                    });
                }
            }
        }
        let name = name.ok_or_else(|| Error::parse(1, "missing `network` record"))?;
        let input = match input {
            Some(i) => i,
            None => layers
                .first()
                .map(|l| (l.spec.n_in, l.spec.h_im, l.spec.w_im))
                .ok_or_else(|| Error::parse(1, "missing `input` record"))?,
        };
        NetworkSpec::new(name, input, layers)
    }

    pub fn format(&self) -> String {
        let mut s = format!(
            "network {}\ninput {} {} {}\n",
            self.name, self.input.0, self.input.1, self.input.2
        );
        for l in &self.layers {
            let p = match l.spec.padding {
                Padding::ZeroPad => "same",
                Padding::Valid => "valid",
            };
            writeln!(
                s,
                "{} {} {} {} {} {} {}",
                l.name, l.spec.n_in, l.spec.n_out, l.spec.h_im, l.spec.w_im, l.spec.h_k, p
            )
            .unwrap();
        }
        s
    }

    /// Same layers with every spatial size divided by `factor` (at least the
    /// kernel size), for bit-true runs.
    pub fn downscaled(&self, factor: usize) -> NetworkSpec {
        let f = factor.max(1);
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let min = if l.spec.padding == Padding::Valid { l.spec.h_k } else { 1 };
                NetLayer {
                    name: l.name.clone(),
                    spec: LayerSpec {
                        h_im: (l.spec.h_im / f).max(min),
                        w_im: (l.spec.w_im / f).max(min),
                        ..l.spec
                    },
                }
            })
            .collect();
        NetworkSpec {
            name: self.name.clone(),
            input: (self.input.0, (self.input.1 / f).max(1), (self.input.2 / f).max(1)),
            layers,
        }
    }

    /// Operations per frame with the output-size convention.
    pub fn ops(&self) -> u64 {
        self.layers
            .iter()
            .map(|l| crate::metrics::count_ops(&l.spec, crate::metrics::OpCount::OutputSize))
            .sum()
    }
}
