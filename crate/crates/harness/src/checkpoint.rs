//! Checkpoint directory: `config.toml` (the resolved configuration),
//! `state.json` (optimizer state and history) and, for LABO, `mlp.bin`
//! (network weights and Adam moments).
//!
//! `mlp.bin` layout, little-endian:
//!
//! ```text
//! magic "LABONETS"  u32 version  u32 network_count
//! per network (encoder, decoder, predictor):
//!     u32 layers, per layer: u32 n_in, u32 n_out, u8 activation
//!     f64 parameters (per layer: weights column-major, then bias)
//!     f64 lr, beta1, beta2, eps; u64 t; f64 first moments; f64 second moments
//! u64 trailer_len, trailer_len bytes of JSON {"config": .., "n_tasks": ..}
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context};
use byteorder::{ReadBytesExt, WriteBytesExt, LE};
use labo_core::baselines::{CmaesSearch, RawBo, UniformSearch};
use labo_core::labo::{AnyOptimizer, Labo, LaboState};
use labo_core::nn::{Activation, Adam, Mlp, NnConfig, RepModel};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 8] = b"LABONETS";
pub const FORMAT_VERSION: u32 = 1;

pub const CONFIG_FILE: &str = "config.toml";
pub const STATE_FILE: &str = "state.json";
pub const NETS_FILE: &str = "mlp.bin";

#[derive(Serialize, Deserialize)]
#[serde(tag = "method", content = "state", rename_all = "snake_case")]
enum SavedState {
    Labo(LaboState),
    RawBo(RawBo),
    Cmaes(CmaesSearch),
    Uniform(UniformSearch),
}

#[derive(Serialize, Deserialize)]
struct Trailer {
    config: NnConfig,
    n_tasks: usize,
}

fn act_code(a: Activation) -> u8 {
    match a {
        Activation::Identity => 0,
        Activation::Relu => 1,
        Activation::Sigmoid => 2,
    }
}

fn act_from(c: u8) -> anyhow::Result<Activation> {
    Ok(match c {
        0 => Activation::Identity,
        1 => Activation::Relu,
        2 => Activation::Sigmoid,
        _ => bail!("unknown activation code {c}"),
    })
}

fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> io::Result<()> {
    xs.iter().try_for_each(|&x| w.write_f64::<LE>(x))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f64>> {
    let mut v = vec![0.0; n];
    r.read_f64_into::<LE>(&mut v)?;
    Ok(v)
}

fn write_net<W: Write>(w: &mut W, net: &Mlp, adam: &Adam) -> io::Result<()> {
    w.write_u32::<LE>(net.layers.len() as u32)?;
    for l in &net.layers {
        w.write_u32::<LE>(l.n_in as u32)?;
        w.write_u32::<LE>(l.n_out as u32)?;
        w.write_u8(act_code(l.act))?;
    }
    write_f64s(w, &net.flat_params())?;
    write_f64s(w, &[adam.lr, adam.beta1, adam.beta2, adam.eps])?;
    w.write_u64::<LE>(adam.t)?;
    for m in adam.m.iter().chain(&adam.v) {
        write_f64s(w, m)?;
    }
    Ok(())
}

fn read_net<R: Read>(r: &mut R) -> anyhow::Result<(Mlp, Adam)> {
    let n_layers = r.read_u32::<LE>()? as usize;
    ensure!((1..=64).contains(&n_layers), "implausible layer count {n_layers}");
    let mut widths = Vec::with_capacity(n_layers + 1);
    let mut acts = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let (n_in, n_out) = (r.read_u32::<LE>()? as usize, r.read_u32::<LE>()? as usize);
        if i == 0 {
            widths.push(n_in);
        }
        ensure!(widths[i] == n_in, "layer {i} input width {n_in} does not chain");
        widths.push(n_out);
        acts.push(act_from(r.read_u8()?)?);
    }
    let mut net = Mlp::zeros(&widths, &acts);
    net.set_flat_params(&read_f64s(r, net.n_params())?);
    let h = read_f64s(r, 4)?;
    let t = r.read_u64::<LE>()?;
    let lens = net.tensor_lens();
    let mut moments = Vec::with_capacity(2 * lens.len());
    for &n in lens.iter().chain(&lens) {
        moments.push(read_f64s(r, n)?);
    }
    let v = moments.split_off(lens.len());
    let adam = Adam {
        lr: h[0],
        beta1: h[1],
        beta2: h[2],
        eps: h[3],
        t,
        m: moments,
        v,
    };
    Ok((net, adam))
}

pub fn write_model<W: Write>(w: &mut W, m: &RepModel) -> anyhow::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(FORMAT_VERSION)?;
    w.write_u32::<LE>(3)?;
    write_net(w, &m.encoder, &m.adam_encoder)?;
    write_net(w, &m.decoder, &m.adam_decoder)?;
    write_net(w, &m.predictor, &m.adam_predictor)?;
    let trailer = serde_json::to_vec(&Trailer {
        config: m.config.clone(),
        n_tasks: m.n_tasks,
    })?;
    w.write_u64::<LE>(trailer.len() as u64)?;
    w.write_all(&trailer)?;
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> anyhow::Result<RepModel> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    ensure!(&magic == MAGIC, "not a network file");
    let version = r.read_u32::<LE>()?;
    ensure!(version == FORMAT_VERSION, "network file version {version}, expected {FORMAT_VERSION}");
    ensure!(r.read_u32::<LE>()? == 3, "expected three networks");
    let (encoder, adam_encoder) = read_net(r)?;
    let (decoder, adam_decoder) = read_net(r)?;
    let (predictor, adam_predictor) = read_net(r)?;
    let len = r.read_u64::<LE>()? as usize;
    ensure!(len < 1 << 20, "implausible trailer length {len}");
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    let t: Trailer = serde_json::from_slice(&buf)?;
    let l = t.config.latent_dim;
    ensure!(
        encoder.n_out() == 2 * l && decoder.n_in() == l && predictor.n_in() == l && predictor.n_out() == t.n_tasks,
        "network shapes disagree with the stored configuration"
    );
    Ok(RepModel {
        config: t.config,
        n_tasks: t.n_tasks,
        encoder,
        decoder,
        predictor,
        adam_encoder,
        adam_decoder,
        adam_predictor,
    })
}

/// Writes the checkpoint next to `dir` and swaps it in, so a crash leaves
/// either the old or the new checkpoint.
pub fn save(dir: &Path, config: &Config, opt: &AnyOptimizer) -> anyhow::Result<()> {
    let tmp = dir.with_extension("tmp");
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    fs::write(tmp.join(CONFIG_FILE), config.to_toml())?;
    let state = match opt {
        AnyOptimizer::Labo(l) => {
            let m = l.model().ok_or_else(|| anyhow!("LABO has no networks to save"))?;
            let mut f = io::BufWriter::new(fs::File::create(tmp.join(NETS_FILE))?);
            write_model(&mut f, m)?;
            f.flush()?;
            SavedState::Labo(l.state.clone())
        }
        AnyOptimizer::RawBo(o) => SavedState::RawBo(o.clone()),
        AnyOptimizer::Cmaes(o) => SavedState::Cmaes(o.clone()),
        AnyOptimizer::Uniform(o) => SavedState::Uniform(o.clone()),
    };
    fs::write(tmp.join(STATE_FILE), serde_json::to_vec(&state)?)?;
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::rename(&tmp, dir)?;
    Ok(())
}

pub fn load(dir: &Path) -> CliResult<(Config, AnyOptimizer)> {
    let cfg_path = dir.join(CONFIG_FILE);
    if !cfg_path.exists() {
        return Err(CliError::usage(format!("no checkpoint in {}", dir.display())));
    }
    let config = Config::load(Some(&cfg_path), &[])?;
    let inner = || -> anyhow::Result<AnyOptimizer> {
        let state_path = dir.join(STATE_FILE);
        let bytes = fs::read(&state_path).with_context(|| state_path.display().to_string())?;
        let state: SavedState = serde_json::from_slice(&bytes).with_context(|| state_path.display().to_string())?;
        Ok(match state {
            SavedState::Labo(s) => {
                let p = dir.join(NETS_FILE);
                let mut f = io::BufReader::new(fs::File::open(&p).with_context(|| p.display().to_string())?);
                let model = read_model(&mut f).with_context(|| p.display().to_string())?;
                AnyOptimizer::Labo(Labo::restore(s, model))
            }
            SavedState::RawBo(o) => AnyOptimizer::RawBo(o),
            SavedState::Cmaes(o) => AnyOptimizer::Cmaes(o),
            SavedState::Uniform(o) => AnyOptimizer::Uniform(o),
        })
    };
    Ok((config, inner()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use labo_core::rng;

    #[test]
    fn network_file_round_trips() {
        let cfg = NnConfig {
            latent_dim: 4,
            hidden: 7,
            ..NnConfig::default()
        };
        let mut m = RepModel::new(5, cfg, &mut rng::stream(3, "t", 0));
        let data: Vec<Vec<f64>> = labo_core::labo::pretrain_data(1, 16);
        m.pretrain(&data, 3, &mut rng::stream(3, "p", 0)).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        assert_eq!(read_model(&mut buf.as_slice()).unwrap(), m);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_model(&mut bad.as_slice()).is_err());
        assert!(read_model(&mut &buf[..buf.len() - 3]).is_err());
    }
}
